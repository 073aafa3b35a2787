use std::fmt::Write;

use nalgebra::Vector3;

use super::RunConfig;
use crate::lie::GroupElement;

const SIZE: f64 = 640.0;
const SCALE: f64 = 230.0;
const AZIMUTH: f64 = 0.6;
const ELEVATION: f64 = 0.45;

const CLOUD_COLORS: [&str; 3] = ["#ff7f0e", "#2ca02c", "#9467bd"];
const IDENTITY_COLOR: &str = "#000000";
const ODE_COLOR: &str = "#1f77b4";
const MC_COLOR: &str = "#d62728";

/// Fixed orthographic camera; returns SVG pixel coordinates.
fn project(p: &Vector3<f64>) -> (f64, f64) {
    let (sa, ca) = AZIMUTH.sin_cos();
    let (se, ce) = ELEVATION.sin_cos();
    let right = Vector3::new(-sa, ca, 0.0);
    let up = Vector3::new(-ca * se, -sa * se, ce);
    (SIZE / 2.0 + SCALE * right.dot(p), SIZE / 2.0 - SCALE * up.dot(p))
}

fn arrow(svg: &mut String, tip: &Vector3<f64>, color: &str, marker: &str, width: f64) {
    let (x0, y0) = project(&Vector3::zeros());
    let (x1, y1) = project(tip);
    let _ = writeln!(
        svg,
        r#"<line x1="{x0:.3}" y1="{y0:.3}" x2="{x1:.3}" y2="{y1:.3}" stroke="{color}" stroke-width="{width}" marker-end="url(#{marker})"/>"#
    );
}

/// Point cloud `{X_j e_i}`, identity axes, and the predicted and Monte Carlo
/// means applied to `e_1, e_2, e_3`.
pub fn render_svg(
    members: &[GroupElement],
    mean_ode: &GroupElement,
    mean_mc: &GroupElement,
    cfg: &RunConfig,
    config_hash: &str,
) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    svg.push_str("<defs>\n");
    for (id, color) in [("head-id", IDENTITY_COLOR), ("head-ode", ODE_COLOR), ("head-mc", MC_COLOR)] {
        let _ = writeln!(
            svg,
            r#"<marker id="{id}" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" markerHeight="6" orient="auto"><path d="M0,0 L10,5 L0,10 z" fill="{color}"/></marker>"#
        );
    }
    svg.push_str("</defs>\n");
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);

    let basis = [Vector3::x(), Vector3::y(), Vector3::z()];
    for (e, color) in basis.iter().zip(CLOUD_COLORS) {
        let _ = writeln!(svg, r#"<g fill="{color}" fill-opacity="0.6">"#);
        for g in members {
            let (x, y) = project(&g.act(e));
            let _ = writeln!(svg, r#"<circle cx="{x:.3}" cy="{y:.3}" r="1.6"/>"#);
        }
        svg.push_str("</g>\n");
    }
    for e in &basis {
        arrow(&mut svg, e, IDENTITY_COLOR, "head-id", 1.0);
    }
    for e in &basis {
        arrow(&mut svg, &mean_mc.act(e), MC_COLOR, "head-mc", 2.5);
    }
    for e in &basis {
        arrow(&mut svg, &mean_ode.act(e), ODE_COLOR, "head-ode", 1.2);
    }

    let legend = [
        (IDENTITY_COLOR, "identity e1, e2, e3".to_string()),
        (ODE_COLOR, "predicted mean (ODE)".to_string()),
        (MC_COLOR, "Monte Carlo Fréchet mean".to_string()),
        (CLOUD_COLORS[0], "X_j e1".to_string()),
        (CLOUD_COLORS[1], "X_j e2".to_string()),
        (CLOUD_COLORS[2], "X_j e3".to_string()),
    ];
    svg.push_str(r#"<g font-family="sans-serif" font-size="12">"#);
    svg.push('\n');
    for (i, (color, label)) in legend.iter().enumerate() {
        let y = 20.0 + 16.0 * i as f64;
        let _ = writeln!(svg, r#"<rect x="12" y="{:.1}" width="10" height="10" fill="{color}"/>"#, y - 9.0);
        let _ = writeln!(svg, r#"<text x="28" y="{y:.1}">{label}</text>"#);
    }
    let _ = writeln!(
        svg,
        r#"<text x="12" y="{:.1}">sigma={} T={} N={} n_mc={} seed={} variant={}</text>"#,
        SIZE - 28.0,
        cfg.sigma,
        cfg.horizon,
        cfg.steps,
        cfg.n_mc,
        cfg.seed,
        cfg.variant.as_str()
    );
    let _ = writeln!(svg, r#"<text x="12" y="{:.1}">config {config_hash}</text>"#, SIZE - 12.0);
    svg.push_str("</g>\n</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapsed_cloud_sits_on_arrow_tips() {
        let g = GroupElement::identity();
        let cfg = RunConfig::default();
        let svg = render_svg(&[g], &g, &g, &cfg, "abc");
        let (x, y) = project(&Vector3::x());
        assert!(svg.contains(&format!(r#"<circle cx="{x:.3}" cy="{y:.3}""#)));
        assert!(svg.contains(&format!(r#"x2="{x:.3}" y2="{y:.3}""#)));
        assert!(svg.contains("config abc"));
        assert_eq!(svg, render_svg(&[g], &g, &g, &cfg, "abc"));
    }
}

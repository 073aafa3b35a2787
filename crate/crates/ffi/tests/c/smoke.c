#include <math.h>
#include <stdio.h>

#include "so3_frechet.h"

#define CHECK(cond)                                                   \
    do {                                                              \
        if (!(cond)) {                                                \
            fprintf(stderr, "check failed line %d: %s\n", __LINE__, #cond); \
            return 1;                                                 \
        }                                                             \
    } while (0)

int main(void) {
    double c[3] = {0.3, -0.2, 0.5};
    double g[9], back[3], d;
    CHECK(so3_exp(c, g) == SO3_STATUS_OK);
    CHECK(so3_log(g, back) == SO3_STATUS_OK);
    for (int i = 0; i < 3; ++i) CHECK(fabs(back[i] - c[i]) < 1e-12);

    double id[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    CHECK(so3_distance(id, g, &d) == SO3_STATUS_OK);
    CHECK(fabs(d - sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2])) < 1e-12);

    double half[9] = {1, 0, 0, 0, -1, 0, 0, 0, -1};
    CHECK(so3_log(half, back) == SO3_STATUS_ANGLE_NEAR_PI);
    CHECK(so3_last_error_message() != NULL);

    double a[9] = {0, -0.5, -0.4, 0.5, 0, -0.8, 0.4, 0.8, 0};
    So3Trajectory *traj = NULL;
    CHECK(so3_trajectory_new(a, 0.1, 0.1, 100, SO3_VARIANT_GENERAL, &traj) == SO3_STATUS_OK);
    CHECK(so3_trajectory_len(traj) == 101);
    double t, mean[9], cov[9];
    CHECK(so3_trajectory_state(traj, 100, &t, mean, cov) == SO3_STATUS_OK);
    CHECK(fabs(t - 0.1) < 1e-15);
    CHECK(so3_trajectory_state(traj, 101, &t, mean, cov) == SO3_STATUS_OUT_OF_RANGE);

    So3Ensemble *ens = NULL;
    CHECK(so3_ensemble_simulate(a, 0.1, 0.1, 100, 42, 500, 2.0, &ens) == SO3_STATUS_OK);
    CHECK(so3_ensemble_len(ens) == 500);
    CHECK(so3_ensemble_stopped_count(ens) == 0);
    double mc[9];
    size_t iterations = 0;
    CHECK(so3_ensemble_frechet_mean(ens, 1e-12, 100, mc, NULL, &iterations) == SO3_STATUS_OK);
    CHECK(iterations > 0);
    CHECK(so3_distance(mean, mc, &d) == SO3_STATUS_OK);
    CHECK(d < 1e-2);

    so3_ensemble_free(ens);
    so3_trajectory_free(traj);
    printf("ok %s\n", so3_version());
    return 0;
}

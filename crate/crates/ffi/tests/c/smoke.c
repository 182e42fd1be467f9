#include <stdio.h>
#include "camdp.h"

int main(void) {
    double p = 0.0;
    if (camdp_state_poc(0.0, 0.5, 0.01, &p) != CAMDP_STATUS_OK || !(p > 0.0 && p < 1.0)) {
        return 1;
    }
    CamdpManeuverPlan plan;
    if (camdp_plan_maneuver(0.01, 3, 500.0, 300.0, 300.0, 70.0, &plan) != CAMDP_STATUS_OK) {
        return 2;
    }
    if (camdp_state_poc(-1.0, 0.5, 0.01, &p) != CAMDP_STATUS_INVALID_ARGUMENT) {
        return 3;
    }
    char msg[256];
    if (camdp_last_error_message(msg, sizeof msg) == 0) {
        return 4;
    }
    CamdpNoiseModel *m = NULL;
    if (camdp_noise_model_reference(&m) != CAMDP_STATUS_OK) {
        return 5;
    }
    double d[2 * CAMDP_HORIZON], s[2 * CAMDP_HORIZON];
    if (camdp_noise_model_simulate(m, 2, 7, d, s, 2 * CAMDP_HORIZON) != CAMDP_STATUS_OK) {
        return 6;
    }
    camdp_noise_model_free(m);
    printf("%s %.6g %.6g\n", camdp_version(), p, plan.propellant_kg);
    return 0;
}

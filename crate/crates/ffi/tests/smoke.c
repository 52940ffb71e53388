#include <stdio.h>
#include <stdlib.h>

#include "uavnoma.h"

#define CHECK(call)                                                         \
    do {                                                                    \
        enum UavnomaStatus st_ = (call);                                    \
        if (st_ != UAVNOMA_STATUS_OK) {                                     \
            fprintf(stderr, "%s: %d %s\n", #call, st_, uavnoma_last_error()); \
            return 1;                                                       \
        }                                                                   \
    } while (0)

int main(void) {
    UavnomaEnv *env = NULL;
    CHECK(uavnoma_env_new_default(UAVNOMA_SPECTRUM_SUB6, UAVNOMA_LINK_MODE_EXPECTED, 0.0, &env));

    size_t n = uavnoma_env_state_len(env);
    size_t users = uavnoma_env_user_count(env);
    double *state = calloc(n, sizeof(double));
    double *rates = calloc(users, sizeof(double));
    double reward = 0.0;

    CHECK(uavnoma_env_reset(env, 7, state, n));
    for (size_t t = 0; t < 10; t++) {
        CHECK(uavnoma_env_step(env, t % uavnoma_env_action_count(env), state, n, &reward, rates, users));
    }
    double jain = 0.0;
    CHECK(uavnoma_jain_fairness(rates, users, &jain));
    if (!(jain > 0.0 && jain <= 1.0)) {
        fprintf(stderr, "bad fairness %f\n", jain);
        return 1;
    }

    if (uavnoma_env_step(env, 1000, state, n, &reward, NULL, 0) != UAVNOMA_STATUS_SHAPE_MISMATCH) {
        fprintf(stderr, "expected shape mismatch\n");
        return 1;
    }

    uavnoma_env_free(env);
    free(state);
    free(rates);
    printf("ok %s\n", uavnoma_version());
    return 0;
}

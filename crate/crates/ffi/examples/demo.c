/* Minimal C client: scalar calls, a family handle and a bandit handle. */
#include <stdio.h>
#include "familyrl.h"

static int check(FrlStatus s, const char *what) {
    if (s != FRL_STATUS_OK) {
        char *msg = frl_last_error_message();
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)s, msg ? msg : "?");
        frl_string_free(msg);
        return 1;
    }
    return 0;
}

int main(void) {
    double v = 0.0;
    if (check(frl_h_inverse(1.003, &v), "h_inverse")) return 1;
    printf("h_inverse(1.003) = %.6f\n", v);

    double td[3] = {0.0, 0.0, 10.0};
    if (check(frl_sequence_priority(td, 3, 0.9, &v), "priority")) return 1;
    printf("priority = %.4f\n", v);

    FrlFamily *family = NULL;
    if (check(frl_family_new(32, &family), "family_new")) return 1;
    double beta = 0.0, gamma = 0.0;
    if (check(frl_family_get(family, 31, &beta, &gamma), "family_get")) return 1;
    printf("beta_31 = %.4f gamma_31 = %.6f\n", beta, gamma);
    frl_family_free(family);

    FrlBandit *bandit = NULL;
    if (check(frl_bandit_new(2, 160, 0.5, 1.0, 7, &bandit), "bandit_new")) return 1;
    for (int k = 0; k < 100; k++) {
        size_t arm = 0;
        if (check(frl_bandit_select(bandit, &arm), "select")) return 1;
        if (check(frl_bandit_update(bandit, arm, arm == 1 ? 1.0 : 0.0), "update")) return 1;
    }
    size_t greedy = 0;
    if (check(frl_bandit_greedy_arm(bandit, &greedy), "greedy")) return 1;
    printf("greedy arm = %zu\n", greedy);
    frl_bandit_free(bandit);

    if (frl_hns(1.0, 2.0, 2.0, &v) != FRL_STATUS_DOMAIN) return 1;
    printf("undefined baseline rejected\n");
    return 0;
}

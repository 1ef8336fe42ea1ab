#include <math.h>
#include <stdio.h>

#include "tegsim.h"

#define CHECK(cond)                                                  \
    do {                                                             \
        if (!(cond)) {                                               \
            const char *msg = tegsim_last_error_message();           \
            fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__,  \
                    #cond, msg ? msg : "no error");                  \
            return 1;                                                \
        }                                                            \
    } while (0)

int main(void) {
    const double start[3] = {6.0, 3.0, 1.0};
    TegsimLayer *layer = NULL;
    CHECK(tegsim_layer_new(start, 3, &layer) == TEGSIM_STATUS_OK);

    /* A cycle 0 -> 1 -> 2 -> 0 where everyone passes on half. */
    const size_t rows[6] = {0, 1, 1, 2, 2, 0};
    const size_t cols[6] = {0, 0, 1, 1, 2, 2};
    const double weights[6] = {0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
    TegsimMatrix *w = NULL;
    CHECK(tegsim_matrix_new(3, rows, cols, weights, 6, &w) == TEGSIM_STATUS_OK);

    TegsimLayer *next = NULL;
    CHECK(tegsim_step_closed(layer, w, &next) == TEGSIM_STATUS_OK);
    double out[3];
    CHECK(tegsim_layer_balances(next, out, 3) == TEGSIM_STATUS_OK);
    CHECK(fabs(out[0] - 3.5) < 1e-12 && fabs(out[1] - 4.5) < 1e-12 && fabs(out[2] - 2.0) < 1e-12);

    double zeta = 0.0, zeta_star = 0.0;
    CHECK(tegsim_zeta(w, &zeta, &zeta_star) == TEGSIM_STATUS_OK);
    CHECK(fabs(zeta - 0.5) < 1e-12 && fabs(zeta_star - 0.5) < 1e-12);

    const double burn[3] = {-4.0, 0.0, 0.0};
    TegsimLayer *rejected = NULL;
    CHECK(tegsim_step_open(next, w, burn, 3, &rejected) == TEGSIM_STATUS_NEGATIVE_BALANCE_RISK);
    CHECK(rejected == NULL && tegsim_last_error_message() != NULL);

    double bits = 0.0;
    CHECK(tegsim_entropy(out, 3, &bits) == TEGSIM_STATUS_OK);
    CHECK(bits > 0.0 && bits <= log2(3.0));

    const double dense[9] = {1, 10, 0, 4, 1, 5, 6, 7, 1};
    TegsimRates *rates = NULL;
    CHECK(tegsim_rates_new(3, dense, &rates) == TEGSIM_STATUS_OK);
    size_t cycle[3], len = 0;
    double gain = 0.0;
    bool found = false;
    CHECK(tegsim_find_arbitrage(rates, 1e-9, cycle, 3, &len, &gain, &found) == TEGSIM_STATUS_OK);
    CHECK(found && len == 3 && cycle[0] == 0 && cycle[1] == 1 && cycle[2] == 2 && gain == 300.0);

    tegsim_rates_free(rates);
    tegsim_layer_free(next);
    tegsim_layer_free(layer);
    tegsim_matrix_free(w);
    printf("ok %s\n", tegsim_version());
    return 0;
}

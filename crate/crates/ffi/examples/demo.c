/* Train a small ensemble on two well separated groups and keep the best
 * model by MMD.
 *
 *   cargo build --release -p mbn-ffi
 *   cc crates/ffi/examples/demo.c -Icrates/ffi/include \
 *      target/release/libmbn_ffi.a -lpthread -ldl -lm -o demo
 */
#include <stdio.h>
#include <stdlib.h>

#include "mbn.h"

static int check(MbnStatus s, const char *what) {
    if (s != MBN_STATUS_OK) {
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)s, mbn_last_error());
        return 1;
    }
    return 0;
}

int main(void) {
    enum { N = 40, D = 2 };
    double x[N * D];
    int64_t y[N];
    for (int i = 0; i < N; i++) {
        int g = i < N / 2;
        x[i * D] = (g ? 0.0 : 50.0) + (i % 5) * 0.3;
        x[i * D + 1] = (i % 7) * 0.2;
        y[i] = g;
    }

    MbnDataset *ds = NULL;
    MbnEnsemble *ens = NULL;
    MbnSelection *sel = NULL;
    if (check(mbn_dataset_new(x, N, D, y, MBN_METRIC_EUCLIDEAN, &ds), "dataset")) return 1;

    MbnEnsembleOptions opts;
    mbn_ensemble_options_default(&opts);
    opts.models = 6;
    opts.units_per_layer = 50;
    if (check(mbn_ensemble_train(ds, &opts, &ens), "train")) return 1;

    MbnSelectionOptions so = { MBN_MODE_SD, 0, 1, 0, 0 };
    if (check(mbn_select(ens, &so, &sel), "select")) return 1;

    size_t best;
    double w[6];
    mbn_selection_chosen(sel, &best, 1);
    mbn_selection_weights(sel, w, 6);
    printf("mbn %s: kept model %zu with weight %.3f\n", mbn_version(), best, w[best]);

    MbnSelection *unused = NULL;
    MbnStatus bad = mbn_select(ens, NULL, &unused);
    printf("null options -> status %d: %s\n", (int)bad, mbn_last_error());

    mbn_selection_free(sel);
    mbn_ensemble_free(ens);
    mbn_dataset_free(ds);
    return 0;
}

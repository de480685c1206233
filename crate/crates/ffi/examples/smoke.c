/* End-to-end exercise of the C ABI against the shipped fixtures. Build
 * from the repository root after `cargo build -p attriq-ffi`:
 *
 *   gcc -std=c99 -Wall -Wextra -Werror \
 *       -I crates/ffi/include \
 *       crates/ffi/examples/smoke.c \
 *       target/debug/libattriq_ffi.a \
 *       -lpthread -ldl -lm -o smoke
 *   ./smoke
 */
#include <assert.h>
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "attriq.h"

int main(void) {
    AttriqModel *model = NULL;
    AttriqStatus status = attriq_model_load("fixtures/linear_model.json", &model);
    assert(status == ATTRIQ_STATUS_OK);
    assert(attriq_model_n_inputs(model) == 4);
    assert(attriq_model_n_classes(model) == 3);
    assert(strcmp(attriq_model_family(model), "linear") == 0);

    const double x[4] = {6.3, 3.3, 6.0, 2.5};
    double scores[3];
    size_t predicted = 99;
    status = attriq_model_predict(model, x, 4, scores, 3, &predicted);
    assert(status == ATTRIQ_STATUS_OK);
    assert(fabs(scores[0] + scores[1] + scores[2] - 1.0) < 1e-12);
    assert(predicted == 2);

    const double background[8] = {5.1, 3.5, 1.4, 0.2, 6.4, 3.2, 4.5, 1.5};
    double attribution[4];
    status = attriq_explain_tabular(model, "exact_shapley", x, 4, background, 2, -1, 0, attribution);
    assert(status == ATTRIQ_STATUS_OK);

    double row[8];
    const double data[16] = {5.1, 3.5, 1.4, 0.2, 6.4, 3.2, 4.5, 1.5,
                             6.3, 3.3, 6.0, 2.5, 4.9, 3.0, 1.4, 0.2};
    assert(attriq_metric_count() == 8);
    status = attriq_metrics_tabular(model, "kernel_shap", data, 4, 4, 2, 7, row, 8);
    assert(status == ATTRIQ_STATUS_OK);
    assert(row[6] >= 0.0 && row[6] <= 4.0);

    status = attriq_explain_tabular(model, "nonsense", x, 4, background, 2, -1, 0, attribution);
    assert(status == ATTRIQ_STATUS_INVALID_ARGUMENT);
    assert(strstr(attriq_last_error_message(), "valid methods") != NULL);

    attriq_model_free(model);
    printf("c smoke: ok (version %s)\n", attriq_version());
    return 0;
}

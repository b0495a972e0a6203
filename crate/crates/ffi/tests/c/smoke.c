#include <math.h>
#include <stdio.h>
#include <string.h>

#include "hashgen.h"

#define CHECK(cond)                                                   \
    do {                                                              \
        if (!(cond)) {                                                \
            const char *err = hg_last_error_message();                \
            fprintf(stderr, "line %d: %s (%s)\n", __LINE__, #cond,    \
                    err ? err : "no error");                          \
            return 1;                                                 \
        }                                                             \
    } while (0)

int main(int argc, char **argv) {
    char *cleaned = NULL;
    CHECK(hg_clean_text("Muito BOM!!", &cleaned) == HG_STATUS_OK);
    CHECK(strcmp(cleaned, "muito bom ! !") == 0);
    hg_string_free(cleaned);

    double v = -1.0;
    CHECK(hg_bleu("produto muito bom", "produto muito bom", &v) == HG_STATUS_OK);
    CHECK(v == 1.0);
    CHECK(hg_meteor("a b c", "a b c", &v) == HG_STATUS_OK);
    CHECK(fabs(v - 53.0 / 54.0) < 1e-15);

    double xs[] = {2.0, 4.0};
    HgDescriptive d;
    CHECK(hg_descriptive_stats(xs, 2, &d) == HG_STATUS_OK);
    CHECK(d.n == 2 && d.mean == 3.0 && d.has_cv == 1);
    CHECK(hg_descriptive_stats(xs, 0, &d) == HG_STATUS_INVALID_ARGUMENT);
    CHECK(hg_last_error_message() != NULL);

    HgModel *model = NULL;
    CHECK(hg_model_load("/nonexistent/model.json", &model) == HG_STATUS_IO);
    CHECK(model == NULL);

    if (argc > 1) {
        CHECK(hg_model_load(argv[1], &model) == HG_STATUS_OK);
        HgModelKind kind;
        CHECK(hg_model_kind(model, &kind) == HG_STATUS_OK);
        char *title = NULL;
        CHECK(hg_model_predict(model, "Produto chegou rápido, muito bom!", &title) == HG_STATUS_OK);
        printf("%d\t%s\n", (int)kind, title);
        hg_string_free(title);
        hg_model_free(model);
    }
    return 0;
}

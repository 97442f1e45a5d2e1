#include <stdio.h>
#include <string.h>

#include "sieve.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        SieveStatus st_ = (call);                                          \
        if (st_ != SIEVE_STATUS_OK) {                                      \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)st_,            \
                    sieve_last_error());                                   \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(int argc, char **argv) {
    if (argc != 2) {
        fprintf(stderr, "usage: smoke OUT_DIR\n");
        return 2;
    }
    char path[4096];
    snprintf(path, sizeof path, "%s/c.orld", argv[1]);

    SieveDataset *data = NULL;
    CHECK(sieve_dataset_generate("gridworld:n=4,slip=0.1", 30, 0, 10, 5, &data));
    CHECK(sieve_dataset_save(data, path));

    SieveReport *report = NULL;
    CHECK(sieve_partition(data, SIEVE_CRITERION_AVERAGE_REWARD, 0.99, SIEVE_MODE_ABSOLUTE, &report));
    size_t kept = 0;
    CHECK(sieve_report_superior_count(report, &kept));

    SieveDataset *filtered = NULL;
    CHECK(sieve_apply_filter(data, report, &filtered));

    SieveLearnerConfig cfg;
    CHECK(sieve_learner_config_default(SIEVE_ALGORITHM_SUPPORT, &cfg));
    SieveModel *model = NULL;
    CHECK(sieve_train(filtered, &cfg, &model));
    double ret = 0.0;
    CHECK(sieve_evaluate(model, "gridworld:n=4,slip=0.1", 100, 1.0, 0, &ret));

    /* errors come back as status codes with a message */
    SieveDataset *missing = (SieveDataset *)1;
    SieveStatus st = sieve_dataset_load("/nonexistent/x.orld", &missing);
    if (st != SIEVE_STATUS_IO || missing != NULL || strlen(sieve_last_error()) == 0) {
        fprintf(stderr, "expected an I/O error, got %d\n", (int)st);
        return 1;
    }

    char digest[17];
    CHECK(sieve_dataset_digest(data, digest, sizeof digest));
    printf("kept=%zu return=%.3f digest=%s\n", kept, ret, digest);

    sieve_model_free(model);
    sieve_dataset_free(filtered);
    sieve_report_free(report);
    sieve_dataset_free(data);
    return 0;
}

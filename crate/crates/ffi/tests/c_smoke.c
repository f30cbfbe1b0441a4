#include <stdio.h>
#include <string.h>
#include "netsample.h"

#define CHECK(call)                                                          \
    do {                                                                     \
        NsStatus s_ = (call);                                                \
        if (s_ != NS_STATUS_OK) {                                            \
            const char *m_ = ns_last_error_message();                        \
            fprintf(stderr, "%s failed: %d %s\n", #call, (int)s_, m_ ? m_ : ""); \
            return 1;                                                        \
        }                                                                    \
    } while (0)

int main(void) {
    /* ring of 40 nodes with chords */
    size_t edges[160];
    size_t count = 0;
    for (size_t i = 0; i < 40; i++) {
        edges[2 * count] = i;
        edges[2 * count + 1] = (i + 1) % 40;
        count++;
        edges[2 * count] = i;
        edges[2 * count + 1] = (i + 7) % 40;
        count++;
    }
    NsPopulation *pop = NULL;
    CHECK(ns_population_from_edges(40, edges, count, &pop));
    double flag[40];
    for (size_t i = 0; i < 40; i++) flag[i] = (double)(i % 3 == 0);
    CHECK(ns_population_set_attribute(pop, "flag", flag, 40));

    NsDesignConfig design;
    CHECK(ns_design_default(NS_DESIGN_KIND_RDS, &design));
    design.target_n = 20;
    NsSample *sample = NULL;
    CHECK(ns_survey_run(pop, &design, 7, &sample));
    if (ns_sample_len(sample) != 20) return 2;

    NsResampleConfig rc;
    CHECK(ns_resample_default(NS_RESAMPLE_MODE_PROCESS, 7, &rc));
    rc.iterations = 2000;
    NsFrequencies *freq = NULL;
    CHECK(ns_resample_run(sample, &rc, 11, &freq));

    NsEstimate e;
    CHECK(ns_estimate(sample, freq, "flag", NS_ESTIMATOR_ADHERENT, NS_VARIANCE_SIMPLE_N, 0.05, &e));
    if (!(e.point >= 0.0 && e.point <= 1.0 && e.half_width >= 0.0)) return 3;

    double y[2] = {1.0, 0.0}, w[2] = {0.5, 0.25}, mu = 0.0;
    CHECK(ns_mu_f(y, w, 2, &mu));
    if (mu < 0.3333333 || mu > 0.3333334) return 4;

    if (ns_mu_f(y, NULL, 2, &mu) != NS_STATUS_NULL_ARGUMENT) return 5;
    if (ns_last_error_message() == NULL) return 6;

    ns_frequencies_free(freq);
    ns_sample_free(sample);
    ns_population_free(pop);
    printf("ok %.6f\n", e.point);
    return 0;
}

#include <math.h>
#include <stdio.h>
#include <string.h>
#include "bagcv.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        BcvStatus st_ = (call);                                            \
        if (st_ != BCV_STATUS_OK) {                                        \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)st_,             \
                    bcv_last_error_message());                             \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    BcvMixture *mix = NULL;
    BcvSample *sample = NULL;
    CHECK(bcv_mixture_preset("claw", &mix));
    CHECK(bcv_mixture_sample(mix, 5000, 11, &sample));
    if (bcv_sample_len(sample) != 5000) return 2;

    BcvCvResult cv;
    CHECK(bcv_cv_minimize(sample, 0.0, 0.0, &cv));

    BcvBagOptions opts = bcv_bag_options_default(500, 20, 3);
    BcvBagResult bag;
    double per[20];
    CHECK(bcv_bagged_bandwidth(sample, &opts, &bag, per));

    BcvAmseResult amse;
    CHECK(bcv_mixture_optimal_m(mix, 100000, 500, &amse));

    if (bcv_mixture_preset("nope", &mix) != BCV_STATUS_INVALID_ARGUMENT) return 3;
    if (strlen(bcv_last_error_message()) == 0) return 4;

    printf("%s %.6f %.6f %zu\n", bcv_version(), cv.h_opt, bag.h_bag, amse.m_hat);
    bcv_sample_free(sample);
    bcv_mixture_free(mix);
    return 0;
}

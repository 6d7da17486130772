/* Free expansion of a Gaussian through the C API, checked against the q-law. */
#include <math.h>
#include <stdio.h>
#include "paraxial.h"

#define CHECK(call)                                                         \
    do {                                                                    \
        PxStatus s_ = (call);                                               \
        if (s_ != PX_STATUS_OK) {                                           \
            fprintf(stderr, "%s failed (%d): %s\n", #call, (int)s_,         \
                    px_last_error());                                       \
            return 1;                                                       \
        }                                                                   \
    } while (0)

int main(void) {
    PxProfile *alpha = NULL;
    PxField *field = NULL;
    PxRecord *record = NULL;
    PxGrid grid = {128, 24.0, 0.01, 10};
    PxMoments m0;
    PxInverseQ q0, q1;
    PxMatrix free;
    PxSample last;
    double mi4, w2;

    CHECK(px_profile_constant(0.0, &alpha));
    PxParams params = {1.0, 1, 2.0, alpha};
    CHECK(px_field_gaussian(&grid, 1.0, 1.0, 0.0, &field));
    CHECK(px_field_moments(field, &params, 0.0, &m0));
    CHECK(px_quality_factor(&m0, &mi4));
    CHECK(px_propagate(field, &params, &grid, 0.0, 1.5, &record));
    CHECK(px_record_sample(record, px_record_len(record) - 1, &last));
    CHECK(px_q_from_moments(&m0, mi4, 1.0, &q0));
    CHECK(px_free_matrix(1.5, &free));
    CHECK(px_propagate_q(&q0, &free, &q1));
    CHECK(px_q_width2(&q1, mi4, 1.0, &w2));

    printf("paraxial %s: w2 solver %.9f q-law %.9f\n", px_version(), last.w2, w2);
    px_record_free(record);
    px_field_free(field);
    px_profile_free(alpha);
    return fabs(last.w2 - w2) < 1e-5 * w2 ? 0 : 1;
}

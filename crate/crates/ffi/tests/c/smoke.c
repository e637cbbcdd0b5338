#include <math.h>
#include <stdio.h>

#include "entroscope.h"

int main(void) {
    EntroscopeContext *ctx = entroscope_context_new(53);
    if (ctx == NULL) {
        return 10;
    }
    EntroscopeEntropy h;
    if (entroscope_quad_entropy(ctx, -2.0, &h) != ENTROSCOPE_OK) {
        return 11;
    }
    if (fabs(h.value - log(2.0)) > 1e-12) {
        return 12;
    }
    if (entroscope_quad_entropy(ctx, 3.0, &h) != ENTROSCOPE_OUT_OF_RANGE) {
        return 13;
    }
    if (entroscope_last_error() == NULL) {
        return 14;
    }
    char buf[8];
    size_t written = 0;
    if (entroscope_kneading(ctx, -2.0, 4, buf, sizeof buf, &written) != ENTROSCOPE_OK || written != 4) {
        return 15;
    }
    entroscope_context_free(ctx);
    printf("%.17g %s\n", h.value, buf);
    return 0;
}

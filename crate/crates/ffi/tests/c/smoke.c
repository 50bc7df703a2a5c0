#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "voxellate.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        VxStatus st_ = (call);                                             \
        if (st_ != VX_STATUS_OK) {                                         \
            char msg_[256];                                                \
            vx_last_error_message(msg_, sizeof msg_);                      \
            fprintf(stderr, "%s failed (%d): %s\n", #call, (int)st_, msg_); \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(int argc, char **argv) {
    size_t counts[3] = {24, 20, 16};
    VxGrid *grid = NULL;
    VxSites *sites = NULL;
    VxTessellation *fast = NULL, *brute = NULL;

    CHECK(vx_grid_new(3, counts, NULL, 1, &grid));
    size_t nv = vx_grid_voxel_count(grid);
    CHECK(vx_sites_generate(grid, VX_KIND_JOHNSON_MEHL, 80, 0.5, 1.0, 7, &sites));
    CHECK(vx_tessellate(sites, grid, VX_ENGINE_FAST, NULL, 1, &fast));
    CHECK(vx_tessellate(sites, grid, VX_ENGINE_BRUTE, NULL, 0, &brute));

    uint32_t *a = malloc(nv * sizeof *a);
    uint32_t *b = malloc(nv * sizeof *b);
    CHECK(vx_tessellation_copy_labels(fast, a, nv));
    CHECK(vx_tessellation_copy_labels(brute, b, nv));
    if (memcmp(a, b, nv * sizeof *a) != 0) {
        fprintf(stderr, "fast and brute labels differ\n");
        return 1;
    }
    if (vx_tessellation_copy_labels(fast, a, nv - 1) != VX_STATUS_BUFFER_TOO_SMALL) {
        fprintf(stderr, "short buffer accepted\n");
        return 1;
    }

    uint64_t s1 = 0, s2 = 0;
    double t0 = NAN;
    CHECK(vx_tessellation_counters(brute, &s1, &s2));
    if (s1 != 0 || s2 != (uint64_t)nv * 80) {
        fprintf(stderr, "unexpected brute-force counters\n");
        return 1;
    }
    CHECK(vx_tessellation_param(fast, &t0));
    if (isnan(t0)) {
        fprintf(stderr, "fast engine reported no t0\n");
        return 1;
    }
    if (vx_sites_generate(grid, 99, 10, 1.0, 1.0, 0, &sites) != VX_STATUS_INVALID_ARGUMENT) {
        fprintf(stderr, "bad kind accepted\n");
        return 1;
    }
    if (argc > 1) {
        CHECK(vx_tessellation_write(fast, argv[1], NULL, 1, 7));
    }

    free(a);
    free(b);
    vx_tessellation_free(fast);
    vx_tessellation_free(brute);
    vx_sites_free(sites);
    vx_grid_free(grid);
    printf("ok %s\n", vx_version());
    return 0;
}

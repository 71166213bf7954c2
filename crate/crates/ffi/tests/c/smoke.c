#include <stdio.h>
#include "patternlab.h"

int main(void) {
    PlGraph *g = NULL;
    if (pl_graph_gen_er(20, 0.3, 7, 0, &g) != PL_STATUS_OK) return 1;
    size_t k = 0;
    if (pl_max_clique(g, &k) != PL_STATUS_OK || k < 2) return 2;
    if (pl_graph_degree(g, 99, &k) != PL_STATUS_OUT_OF_RANGE) return 3;
    char *msg = pl_last_error_message();
    if (msg == NULL) return 4;
    pl_string_free(msg);
    const PlGraph *gs[1] = {g};
    PlHistogram *h = NULL;
    if (pl_histogram_new(gs, 1, 2, &h) != PL_STATUS_OK) return 5;
    double tv = -1.0;
    if (pl_tv_distance(h, h, &tv) != PL_STATUS_OK || tv != 0.0) return 6;
    printf("nodes=%zu edges=%zu patterns=%zu\n", pl_graph_num_nodes(g), pl_graph_num_edges(g), pl_histogram_support_size(h));
    pl_histogram_free(h);
    pl_graph_free(g);
    return 0;
}

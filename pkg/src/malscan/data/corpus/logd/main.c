#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "logd.h"

static void usage(const char *prog) {
    fprintf(stderr, "usage: %s [-c config] [-p port]\n", prog);
}

int main(int argc, char **argv) {
    struct logd_config cfg;
    config_defaults(&cfg);
    for (int i = 1; i < argc; i++) {
        if (strcmp(argv[i], "-c") == 0 && i + 1 < argc) {
            if (config_load(&cfg, argv[++i]) != 0) {
                return 1;
            }
        } else if (strcmp(argv[i], "-p") == 0 && i + 1 < argc) {
            cfg.port = atoi(argv[++i]);
        } else {
            usage(argv[0]);
            return 2;
        }
    }
    return net_serve(&cfg);
}

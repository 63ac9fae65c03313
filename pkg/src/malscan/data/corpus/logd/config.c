#include <stdio.h>
#include <string.h>

#include "logd.h"

static const char *upstream_password = "logd-Upstr3am-2023";

void config_defaults(struct logd_config *cfg) {
    memset(cfg, 0, sizeof(*cfg));
    cfg->port = 5140;
    strncpy(cfg->spool_dir, "/var/spool/logd", sizeof(cfg->spool_dir) - 1);
    cfg->upstream_secret = upstream_password;
}

int config_load(struct logd_config *cfg, const char *path) {
    FILE *fp = fopen(path, "r");
    char line[256];
    if (!fp) {
        perror(path);
        return -1;
    }
    while (fgets(line, sizeof(line), fp)) {
        char key[64], value[160];
        if (sscanf(line, "%63[^=]=%159s", key, value) != 2) {
            continue;
        }
        if (strcmp(key, "port") == 0) {
            cfg->port = (int)strtol(value, NULL, 10);
        } else if (strcmp(key, "spool_dir") == 0) {
            strncpy(cfg->spool_dir, value, sizeof(cfg->spool_dir) - 1);
        }
    }
    fclose(fp);
    return 0;
}

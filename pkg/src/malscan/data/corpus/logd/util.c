#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "logd.h"

size_t trim_newline(char *s) {
    size_t n = strlen(s);
    while (n > 0 && (s[n - 1] == '\n' || s[n - 1] == '\r')) {
        s[--n] = '\0';
    }
    return n;
}

int compress_file(const char *path) {
    char cmd[512];
    snprintf(cmd, sizeof(cmd), "gzip -9 %s", path);
    return system(cmd);
}

int safe_copy(char *dst, size_t cap, const char *src) {
    size_t n = strlen(src);
    if (n >= cap) {
        return -1;
    }
    memcpy(dst, src, n + 1);
    return 0;
}

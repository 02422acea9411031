#include <stdint.h>
#include <string.h>
#include "hash.h"

/* FNV-1a over a byte buffer. */
uint32_t fnv1a(const void *data, size_t len) {
    const unsigned char *p = data;
    uint32_t h = 2166136261u;
    for (size_t i = 0; i < len; i++) {
        h ^= p[i];
        h *= 16777619u;
    }
    return h;
}

// convenience for C strings
uint32_t fnv1a_str(const char *s) {
    return fnv1a(s, strlen(s));
}

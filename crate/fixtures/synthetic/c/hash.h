#ifndef HASH_H
#define HASH_H
#include <stddef.h>
#include <stdint.h>

uint32_t fnv1a(const void *data, size_t len);
uint32_t fnv1a_str(const char *s);

#endif

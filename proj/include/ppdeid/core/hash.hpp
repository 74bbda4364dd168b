#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace ppdeid {

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

/// Order-sensitive checksum over parameter arrays; used for the
/// frozen-verificator contract and artifact fingerprints.
template <typename T>
uint64_t checksum_arrays(const std::vector<std::vector<T>*>& arrays) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto* a : arrays) {
        uint64_t n = a->size();
        h = fnv1a64(&n, sizeof(n), h);
        if (!a->empty()) h = fnv1a64(a->data(), a->size() * sizeof(T), h);
    }
    return h;
}

std::string hex64(uint64_t v);

} // namespace ppdeid

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace halueval {

// FNV-1a 64-bit. Used for request/replay keys and output-file digests.
inline uint64_t fnv1a64(std::string_view data, uint64_t seed = 0xcbf29ce484222325ull) {
    uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string to_hex(uint64_t value);
std::string digest_hex(std::string_view data);

}  // namespace halueval

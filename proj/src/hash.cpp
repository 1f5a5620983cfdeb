#include "halueval/hash.hpp"

#include <array>

namespace halueval {

std::string to_hex(uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[value & 0xf];
        value >>= 4;
    }
    return out;
}

std::string digest_hex(std::string_view data) { return to_hex(fnv1a64(data)); }

}  // namespace halueval

#include "hreid/rng.hpp"

namespace hreid {

std::uint64_t derive_seed(std::uint64_t root_seed, std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a 64
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::uint64_t state = root_seed ^ h;
    return splitmix64_next(state);
}

}  // namespace hreid

#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "crowdps/error.hpp"

namespace crowdps {

/// FNV-1a 64-bit. Used for cache keys and manifest content hashes.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string to_hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << v;
    return os.str();
}

inline std::string hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("hash_file: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return to_hex(fnv1a64(buf.str()));
}

} // namespace crowdps

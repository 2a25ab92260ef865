#pragma once

#include <cstring>
#include <fstream>
#include <string>

#include "tcf/common.hpp"

// Little-endian binary container helpers shared by the bank and checkpoint
// codecs. Raw writes are fine: every supported target is little-endian.

namespace tcf::binio {

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is, const char* what) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw IoError(std::string(what) + ": file truncated");
    return v;
}

inline void read_raw(std::istream& is, void* dst, size_t bytes, const char* what) {
    is.read(static_cast<char*>(dst), bytes);
    if (!is) throw IoError(std::string(what) + ": file truncated");
}

inline void expect_magic(std::istream& is, const char magic[4], const char* what) {
    char buf[4];
    is.read(buf, 4);
    if (!is || std::memcmp(buf, magic, 4) != 0) {
        throw IoError(std::string(what) + ": bad magic");
    }
}

}  // namespace tcf::binio

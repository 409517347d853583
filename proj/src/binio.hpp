#pragma once

// Little-endian binary stream helpers shared by the checkpoint and packed
// file writers. Values are copied through fixed-width types so the layout
// is independent of host struct padding.

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "canbnn/error.hpp"

namespace canbnn::binio {

template <typename T>
void write_raw(std::ostream& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.write(buf, sizeof(T));
}

inline void write_u8(std::ostream& out, std::uint8_t v) { write_raw(out, v); }
inline void write_u32(std::ostream& out, std::uint32_t v) { write_raw(out, v); }
inline void write_u64(std::ostream& out, std::uint64_t v) { write_raw(out, v); }
inline void write_i32(std::ostream& out, std::int32_t v) { write_raw(out, v); }
inline void write_f64(std::ostream& out, double v) { write_raw(out, v); }

inline void write_f64_array(std::ostream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline void write_u64_array(std::ostream& out, const std::uint64_t* p, std::size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(std::uint64_t)));
}

template <typename T>
T read_raw(std::istream& in, const char* what) {
    static_assert(std::is_trivially_copyable_v<T>);
    char buf[sizeof(T)];
    in.read(buf, sizeof(T));
    if (!in) throw DataError(std::string("truncated file while reading ") + what);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

inline std::uint8_t read_u8(std::istream& in, const char* what) {
    return read_raw<std::uint8_t>(in, what);
}
inline std::uint32_t read_u32(std::istream& in, const char* what) {
    return read_raw<std::uint32_t>(in, what);
}
inline std::uint64_t read_u64(std::istream& in, const char* what) {
    return read_raw<std::uint64_t>(in, what);
}
inline std::int32_t read_i32(std::istream& in, const char* what) {
    return read_raw<std::int32_t>(in, what);
}
inline double read_f64(std::istream& in, const char* what) { return read_raw<double>(in, what); }

inline void read_f64_array(std::istream& in, std::vector<double>& v, std::size_t n,
                           const char* what) {
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw DataError(std::string("truncated file while reading ") + what);
}

inline void read_u64_array(std::istream& in, std::uint64_t* p, std::size_t n, const char* what) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(std::uint64_t)));
    if (!in) throw DataError(std::string("truncated file while reading ") + what);
}

inline void expect_magic(std::istream& in, const char magic[4], const char* kind) {
    char got[4];
    in.read(got, 4);
    if (!in || std::memcmp(got, magic, 4) != 0)
        throw DataError(std::string("not a ") + kind + " file (bad magic)");
}

}  // namespace canbnn::binio

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "drqn/common.hpp"

namespace drqn {

// Little-endian binary stream helpers shared by the dataset cache and the
// checkpoint container.

static_assert(std::endian::native == std::endian::little,
              "serialized formats are little-endian; big-endian hosts are unsupported");

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_i64(std::ostream& os, std::int64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void write_f64_vec(std::ostream& os, const std::vector<double>& v) {
  write_u64(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline void read_raw(std::istream& is, void* dst, std::size_t n, const char* what) {
  is.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (!is) throw IoError(std::string("truncated input while reading ") + what);
}

inline std::uint32_t read_u32(std::istream& is, const char* what = "u32") {
  std::uint32_t v;
  read_raw(is, &v, sizeof v, what);
  return v;
}

inline std::uint64_t read_u64(std::istream& is, const char* what = "u64") {
  std::uint64_t v;
  read_raw(is, &v, sizeof v, what);
  return v;
}

inline std::int64_t read_i64(std::istream& is, const char* what = "i64") {
  std::int64_t v;
  read_raw(is, &v, sizeof v, what);
  return v;
}

inline double read_f64(std::istream& is, const char* what = "f64") {
  double v;
  read_raw(is, &v, sizeof v, what);
  return v;
}

inline std::string read_string(std::istream& is, const char* what = "string") {
  const std::uint32_t n = read_u32(is, what);
  std::string s(n, '\0');
  if (n > 0) read_raw(is, s.data(), n, what);
  return s;
}

inline std::vector<double> read_f64_vec(std::istream& is, const char* what = "f64 vector") {
  const std::uint64_t n = read_u64(is, what);
  std::vector<double> v(n);
  if (n > 0) read_raw(is, v.data(), n * sizeof(double), what);
  return v;
}

inline void write_magic(std::ostream& os, const char (&magic)[9]) {
  os.write(magic, 8);
}

inline void expect_magic(std::istream& is, const char (&magic)[9], const char* what) {
  char buf[8];
  read_raw(is, buf, 8, what);
  if (std::memcmp(buf, magic, 8) != 0) {
    throw IoError(std::string("bad magic for ") + what);
  }
}

}  // namespace drqn

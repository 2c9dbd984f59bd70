#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "jcas/csi/scenario.hpp"

namespace jcas::csi {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// CSV with header `t,rx,k,re,im`, one row per (t, rx, k) in that nesting
// order, 9 significant digits. Only values and dims are carried; fs_collect is
// passed alongside.
void write_csi_csv(std::ostream& os, const CsiFrame& f);
void write_csi_csv(const std::filesystem::path& path, const CsiFrame& f);
CsiFrame read_csi_csv(std::istream& is, double fs_collect = 0.0);
CsiFrame read_csi_csv(const std::filesystem::path& path, double fs_collect = 0.0);

// Binary archive: "CSI1", u32 A, K, T, f64 fs_collect, interleaved f32 re/im
// in (a, k, t) order, time fastest. Little-endian.
void write_csi_bin(const std::filesystem::path& path, const CsiFrame& f);
CsiFrame read_csi_bin(const std::filesystem::path& path);

}  // namespace jcas::csi

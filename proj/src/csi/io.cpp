#include "jcas/csi/io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <fmt/format.h>

namespace jcas::csi {

static_assert(std::endian::native == std::endian::little, "little-endian host assumed");

void write_csi_csv(std::ostream& os, const CsiFrame& f) {
  os << "t,rx,k,re,im\n";
  std::string line;
  for (std::size_t t = 0; t < f.T; ++t)
    for (std::size_t a = 0; a < f.A; ++a)
      for (std::size_t k = 0; k < f.K; ++k) {
        const auto v = f.at(a, k, t);
        line.clear();
        fmt::format_to(std::back_inserter(line), "{},{},{},{:.9g},{:.9g}\n", t + f.t_offset, a, k, v.real(), v.imag());
        os << line;
      }
}

void write_csi_csv(const std::filesystem::path& path, const CsiFrame& f) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  write_csi_csv(os, f);
}

namespace {

template <typename V>
V parse_field(std::string_view s, std::size_t line, const char* what) {
  V v{};
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw ParseError(std::string("bad ") + what + " '" + std::string(s) + "'", line);
  return v;
}

}  // namespace

CsiFrame read_csi_csv(std::istream& is, double fs_collect) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line)) throw ParseError("empty file", lineno);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,rx,k,re,im") throw ParseError("expected header 't,rx,k,re,im'", lineno);

  struct Row {
    std::size_t t, a, k;
    float re, im;
  };
  std::vector<Row> rows;
  std::size_t mint = SIZE_MAX, maxt = 0, maxa = 0, maxk = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view sv(line);
    std::string_view cols[5];
    std::size_t n = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = sv.find(',', start);
      if (n == 5) throw ParseError("expected 5 columns, got more", lineno);
      cols[n++] = sv.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (n != 5) throw ParseError("expected 5 columns, got " + std::to_string(n), lineno);
    Row r{parse_field<std::size_t>(cols[0], lineno, "t"), parse_field<std::size_t>(cols[1], lineno, "rx"),
          parse_field<std::size_t>(cols[2], lineno, "k"), parse_field<float>(cols[3], lineno, "re"),
          parse_field<float>(cols[4], lineno, "im")};
    mint = std::min(mint, r.t);
    maxt = std::max(maxt, r.t);
    maxa = std::max(maxa, r.a);
    maxk = std::max(maxk, r.k);
    rows.push_back(r);
  }
  if (rows.empty()) throw ParseError("no data rows", lineno);
  CsiFrame f(maxa + 1, maxk + 1, maxt - mint + 1);
  f.fs_collect = fs_collect;
  f.t_offset = mint;
  if (rows.size() != f.A * f.K * f.T) {
    throw ParseError("row count " + std::to_string(rows.size()) + " does not equal A*K*T = " +
                         std::to_string(f.A * f.K * f.T),
                     lineno);
  }
  std::vector<char> seen(rows.size(), 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::size_t idx = (r.a * f.K + r.k) * f.T + (r.t - mint);
    if (seen[idx]) throw ParseError("duplicate entry", i + 2);
    seen[idx] = 1;
    f.values[idx] = {r.re, r.im};
  }
  return f;
}

CsiFrame read_csi_csv(const std::filesystem::path& path, double fs_collect) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_csi_csv(is, fs_collect);
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw ParseError("truncated CSI1 header", 0);
  return v;
}

}  // namespace

void write_csi_bin(const std::filesystem::path& path, const CsiFrame& f) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os.write("CSI1", 4);
  put_u32(os, static_cast<std::uint32_t>(f.A));
  put_u32(os, static_cast<std::uint32_t>(f.K));
  put_u32(os, static_cast<std::uint32_t>(f.T));
  os.write(reinterpret_cast<const char*>(&f.fs_collect), 8);
  static_assert(sizeof(std::complex<float>) == 8);
  os.write(reinterpret_cast<const char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * 8));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

CsiFrame read_csi_bin(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "CSI1", 4) != 0) throw ParseError("not a CSI1 archive", 0);
  const std::uint32_t A = get_u32(is), K = get_u32(is), T = get_u32(is);
  CsiFrame f(A, K, T);
  if (!is.read(reinterpret_cast<char*>(&f.fs_collect), 8)) throw ParseError("truncated CSI1 header", 0);
  if (!is.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * 8))) {
    throw ParseError("truncated CSI1 payload", 0);
  }
  return f;
}

}  // namespace jcas::csi

#include "jcas/preprocess/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace jcas::preprocess {

static_assert(std::endian::native == std::endian::little, "little-endian host assumed");

namespace {

template <typename V>
void put(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& is) {
  V v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(V))) throw ArchiveError("truncated DFS1 header");
  return v;
}

}  // namespace

void write_dfs(std::ostream& os, const DfsFrame& f) {
  if (f.values.size() != f.A * f.B * f.T) throw ArchiveError("frame values do not match dims");
  os.write("DFS1", 4);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(f.A));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(f.B));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(f.T));
  put<double>(os, f.reported_fs);
  put<double>(os, f.fs_collect);
  put<std::int32_t>(os, f.class_id);
  put<std::int32_t>(os, f.domain.tx_beam);
  put<std::int32_t>(os, f.domain.rx_patch.value_or(-1));
  put<std::int32_t>(os, f.domain.subject_id);
  put<std::int32_t>(os, static_cast<std::int32_t>(f.domain.orientation));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(f.stft_bins));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(f.valid_time));
  os.write(reinterpret_cast<const char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * 4));
  if (!os) throw ArchiveError("DFS1 write failed");
}

DfsFrame read_dfs(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "DFS1", 4) != 0) throw ArchiveError("not a DFS1 archive");
  DfsFrame f;
  f.A = get<std::uint32_t>(is);
  f.B = get<std::uint32_t>(is);
  f.T = get<std::uint32_t>(is);
  f.reported_fs = get<double>(is);
  f.fs_collect = get<double>(is);
  f.class_id = get<std::int32_t>(is);
  f.domain.tx_beam = get<std::int32_t>(is);
  const auto rx = get<std::int32_t>(is);
  if (rx >= 0) f.domain.rx_patch = rx;
  f.domain.subject_id = get<std::int32_t>(is);
  const auto o = get<std::int32_t>(is);
  if (o != 0 && o != 1) throw ArchiveError("bad orientation field");
  f.domain.orientation = static_cast<csi::Orientation>(o);
  f.stft_bins = get<std::uint32_t>(is);
  f.valid_time = get<std::uint32_t>(is);
  const std::size_t n = f.A * f.B * f.T;
  if (n > (std::size_t{1} << 32)) throw ArchiveError("implausible DFS1 dims");
  f.values.resize(n);
  if (!is.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(n * 4))) {
    throw ArchiveError("truncated DFS1 payload");
  }
  return f;
}

void write_dfs(const std::filesystem::path& path, const DfsFrame& f) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ArchiveError("cannot open " + path.string());
  write_dfs(os, f);
}

DfsFrame read_dfs(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArchiveError("cannot open " + path.string());
  return read_dfs(is);
}

void write_dfs_list(const std::filesystem::path& path, const std::vector<DfsFrame>& frames) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ArchiveError("cannot open " + path.string());
  for (const auto& f : frames) write_dfs(os, f);
}

std::vector<DfsFrame> read_dfs_list(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArchiveError("cannot open " + path.string());
  std::vector<DfsFrame> out;
  while (is.peek() != std::char_traits<char>::eof()) out.push_back(read_dfs(is));
  return out;
}

}  // namespace jcas::preprocess

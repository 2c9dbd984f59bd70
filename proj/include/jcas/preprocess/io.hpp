#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "jcas/preprocess/pipeline.hpp"

namespace jcas::preprocess {

class ArchiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// "DFS1", u32 A, B, T, f64 reported_fs, fs_collect, i32 class id, i32 tx_beam,
// i32 rx_patch (-1 when stacked), i32 subject_id, i32 orientation,
// u32 stft_bins, u32 valid_time, then A*B*T f32 in (b, t, a) order.
void write_dfs(std::ostream& os, const DfsFrame& f);
DfsFrame read_dfs(std::istream& is);
void write_dfs(const std::filesystem::path& path, const DfsFrame& f);
DfsFrame read_dfs(const std::filesystem::path& path);

// Several frames back to back in one file.
void write_dfs_list(const std::filesystem::path& path, const std::vector<DfsFrame>& frames);
std::vector<DfsFrame> read_dfs_list(const std::filesystem::path& path);

}  // namespace jcas::preprocess

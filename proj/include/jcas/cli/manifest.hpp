#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace jcas::cli {

std::string sha1_hex(std::string_view bytes);
// sha1("blob <size>\0" + content), as git computes object ids.
std::string blob_hash(const std::filesystem::path& file);
// Hash of the sorted "<blob hash> <relative path>" lines of every regular
// file below dir, excluding manifest.txt at the top level.
std::string tree_hash(const std::filesystem::path& dir);

inline constexpr const char* kManifestName = "manifest.txt";

struct RunManifest {
  std::string command;
  std::string run_dir;
  std::vector<std::uint64_t> seeds;
  std::vector<std::pair<std::string, std::string>> config;  // flag snapshot
  std::string dataset_spec;                                 // canonical spec text, may be empty
  std::vector<std::pair<std::string, std::string>> inputs;     // path, tree or blob hash
  std::vector<std::pair<std::string, std::string>> artifacts;  // relative path, blob hash

  // Lists every file below the run directory except the manifest itself.
  void collect_artifacts(const std::filesystem::path& dir);
  std::string to_text() const;
  static RunManifest from_text(const std::string& text);
  void write(const std::filesystem::path& dir) const;
  static RunManifest read(const std::filesystem::path& dir);
  // Paths whose current hash differs from the recorded one, or that vanished.
  std::vector<std::string> stale_artifacts(const std::filesystem::path& dir) const;
};

}  // namespace jcas::cli

#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "jcas/preprocess/dataset.hpp"

namespace jcas::cli {

class SpecError : public std::runtime_error {
 public:
  SpecError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Flat `key = value` lines under `[section]` headers. `#` starts a comment;
// keys may repeat.
struct KeyValueFile {
  struct Entry {
    std::string section, key, value;
    std::size_t line = 0;
  };
  std::string source;
  std::vector<Entry> entries;
};

KeyValueFile parse_key_values(std::istream& is, const std::string& source);

struct DatasetFile {
  preprocess::DatasetSpec spec;
  std::uint64_t seed = 42;
};

// Dataset spec file:
//
//   [dataset]   preset, seed, unstack, fs_collect, duration, tx_power,
//               snr_threshold_db, orientation_is_domain, subject_base = x,y,z,
//               expected_samples, expected_domains (a count or `none`)
//   [stft]      reported_fs, window, hop, normalize
//   [subject N] tx_beams = 5,6,7 and one `cell = <class> <orientation> <reps>`
//               per cell
//
// Settings start from the preset (dataset1 when absent). Any subject section
// replaces the preset's subjects; that, or a changed unstack setting, clears
// the preset's expected counts unless the file states them.
DatasetFile parse_dataset_file(const KeyValueFile& kv);
DatasetFile read_dataset_file(const std::string& path);

// Canonical text that parse_dataset_file reads back to the same spec.
std::string dataset_file_text(const DatasetFile& f);

}  // namespace jcas::cli

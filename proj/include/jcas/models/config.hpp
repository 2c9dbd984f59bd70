#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace jcas::models {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Family { Standard, DomainIndependent, DomainAdaptation };
std::string to_string(Family f);
// Accepts the full names and the short CLI forms standard, indep, adapt.
Family family_from_string(const std::string& s);

struct IntRange {
  long lo = 0, hi = 0;
  bool contains(long v) const { return v >= lo && v <= hi; }
};
struct RealRange {
  double lo = 0, hi = 0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

// Height (Doppler) x width (time) pair.
struct Hw {
  std::size_t h = 1, w = 1;
  bool operator==(const Hw&) const = default;
};

// Closed intervals per hyperparameter. Two-dimensional sizes use the same
// interval for both axes; each axis is drawn independently.
struct SearchSpace {
  IntRange first_filters{1, 24};
  IntRange first_kernel{12, 48};
  IntRange first_pool{2, 48};
  IntRange depth{2, 5};
  IntRange expansion{2, 8};
  IntRange residual{0, 1};
  RealRange se_rate{0.05, 0.7};
  IntRange block_reps{0, 2};
  IntRange block_pool{2, 48};
  IntRange final_kernel{4, 16};
  IntRange cls_depth{1, 6};
  IntRange cls_width{16, 1024};
  IntRange attn_a_kernel{16, 88};
  IntRange attn_b_pool{8, 48};
  IntRange attn_b_stride{16, 32};
  IntRange attn_b_depth{1, 6};
  IntRange attn_b_width{16, 2048};
  IntRange decoder_kernel{12, 48};
  IntRange batchnorm{0, 1};

  // Published intervals; the first-conv filter count starts at the input
  // channel count A.
  static SearchSpace paper(std::size_t input_channels);
  // Narrow intervals sized for 32 x 64 inputs on a single core.
  static SearchSpace desk(std::size_t input_channels);
  void validate() const;
};

struct ModelConfig {
  Family family = Family::Standard;
  std::size_t classes = 4;
  std::size_t input_b = 64, input_t = 128, input_a = 16;  // Doppler bins, time, channels

  std::size_t first_filters = 16;
  Hw first_kernel{12, 12};
  Hw first_pool{2, 2};
  std::size_t depth = 2;
  std::size_t expansion = 2;
  bool residual = false;
  double se_rate = 0.25;
  std::size_t block_reps = 0;
  Hw block_pool{2, 2};
  Hw final_kernel{4, 4};
  std::vector<std::size_t> cls_widths{16};
  Hw attn_a_kernel{16, 16};
  Hw attn_b_pool{8, 8};
  Hw attn_b_stride{16, 16};
  std::vector<std::size_t> attn_b_widths{16};
  Hw decoder_kernel1{12, 12};
  Hw decoder_kernel2{12, 12};
  bool batchnorm = false;
  std::size_t depthwise_kernel = 3;

  // Structural checks independent of a search space.
  void validate() const;
  // Every searched hyperparameter lies in its interval.
  bool within(const SearchSpace& space, std::string* why = nullptr) const;

  // Fixed small configuration used by the learnability and hypothesis runs.
  static ModelConfig reference(Family f, std::size_t b, std::size_t t, std::size_t a);

  // Flat "name = value" text, one key per line in a fixed order.
  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);
  bool operator==(const ModelConfig&) const = default;
};

void write_config(const std::string& path, const ModelConfig& cfg);
ModelConfig read_config(const std::string& path);

}  // namespace jcas::models

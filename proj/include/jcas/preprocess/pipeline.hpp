#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "jcas/csi/scenario.hpp"

namespace jcas::preprocess {

using csi::CsiFrame;
using csi::DomainLabel;
using cplx = std::complex<double>;

class InconsistentShape : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};
class MissingTimeOrder : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};
class DegenerateInput : public std::runtime_error {
 public:
  DegenerateInput(const std::string& what, std::size_t antenna)
      : std::runtime_error(what), antenna_(antenna) {}
  std::size_t antenna() const { return antenna_; }

 private:
  std::size_t antenna_;
};
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Concatenates frames along time. Frames are ordered by t_offset and must tile
// the time axis without gaps or overlaps.
CsiFrame stack_csi(std::vector<CsiFrame> frames);

enum class PcaMode { Complex, Amplitude };

struct PcaOptions {
  PcaMode mode = PcaMode::Complex;
  double tolerance = 1e-10;
  int max_iterations = 500;
};

// Dominant eigenvector of a Hermitian K x K matrix (row-major) by power
// iteration; normalised so that its largest-magnitude entry is real positive.
std::vector<cplx> dominant_eigenvector(const std::vector<cplx>& c, std::size_t k, const PcaOptions& opt,
                                       double* eigenvalue = nullptr);

// Per RX beam: covariance of the time-centred subcarrier vectors, dominant
// eigenvector v, then s[t] = v^H h[:, t]. The projection uses the raw rather
// than the centred samples so the static channel stays at 0 Hz. Output A x T,
// time fastest. Throws DegenerateInput for an antenna with zero covariance.
std::vector<cplx> pca_first_component(const CsiFrame& frame, const PcaOptions& opt = {});

// Same, but a degenerate antenna yields a zero series and is flagged.
std::vector<cplx> pca_reduce(const CsiFrame& frame, const PcaOptions& opt, std::vector<bool>& degenerate);

// In-place forward DFT, X[f] = sum_n x[n] exp(-2 pi j f n / N) (FFTW).
void fft(std::vector<cplx>& x);

bool is_pow2(std::size_t n);
std::size_t next_pow2(std::size_t n);

struct StftConfig {
  double reported_fs = 100.0;
  std::size_t window_len = 64;
  std::size_t hop = 1;
  void validate(std::size_t series_len) const;
};

// Periodic Hann window.
std::vector<double> hann(std::size_t n);

struct DfsFrame {
  std::size_t A = 0, B = 0, T = 0;
  std::size_t valid_time = 0;  // time length before padding
  std::size_t stft_bins = 0;   // Doppler length before padding
  // Layout (b, t, a): ((b * T) + t) * A + a, i.e. height = Doppler,
  // width = time, channels = RX beams.
  std::vector<float> values;
  double reported_fs = 0;
  double fs_collect = 0;
  DomainLabel domain;
  int class_id = -1;

  float& at(std::size_t a, std::size_t b, std::size_t t) { return values[(b * T + t) * A + a]; }
  float at(std::size_t a, std::size_t b, std::size_t t) const { return values[(b * T + t) * A + a]; }
  // Hz of each Doppler bin, (b - stft_bins/2) * reported_fs / stft_bins;
  // padded bins continue the grid.
  std::vector<double> doppler_axis() const;
  // Seconds of each column, t / reported_fs.
  std::vector<double> time_axis() const;
};

// series: A x T complex, time fastest. Hann window centred on each output
// column with zero-padded edges, fftshifted so bin B/2 is 0 Hz. Output has
// B = window_len and T' = ceil(T / hop).
DfsFrame stft_spectrogram(const std::vector<cplx>& series, std::size_t A, std::size_t T, const StftConfig& cfg);

// Pads B and T independently up to the next power of two with zeros.
DfsFrame pad_pow2(const DfsFrame& f);

// Scales the frame so its maximum is 1 (all-zero frames are left alone).
void normalize_max(DfsFrame& f);

// One single-antenna frame per RX beam with rx_patch = 0..A-1.
std::vector<DfsFrame> unstack_rx(const DfsFrame& f);
DfsFrame restack_rx(const std::vector<DfsFrame>& parts);

struct PipelineOptions {
  PcaOptions pca{};
  StftConfig stft{};
  bool normalize = true;
};

struct PipelineReport {
  std::vector<bool> degenerate;
  std::size_t degenerate_count() const;
};

// CSI -> PCA -> STFT -> pad -> [normalise].
DfsFrame csi_to_dfs(const CsiFrame& frame, const PipelineOptions& opt, PipelineReport* report = nullptr);

}  // namespace jcas::preprocess

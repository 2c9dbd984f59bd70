#include "jcas/preprocess/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include <Eigen/Dense>
#include <fftw3.h>

namespace jcas::preprocess {

CsiFrame stack_csi(std::vector<CsiFrame> frames) {
  if (frames.empty()) throw InconsistentShape("stack_csi: no frames");
  const std::size_t A = frames.front().A, K = frames.front().K;
  for (const auto& f : frames) {
    if (f.A != A || f.K != K) {
      throw InconsistentShape("stack_csi: frame is " + std::to_string(f.A) + "x" + std::to_string(f.K) +
                              ", expected " + std::to_string(A) + "x" + std::to_string(K));
    }
    if (f.T == 0) throw InconsistentShape("stack_csi: empty frame");
  }
  std::stable_sort(frames.begin(), frames.end(),
                   [](const CsiFrame& a, const CsiFrame& b) { return a.t_offset < b.t_offset; });
  std::size_t T = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].t_offset != frames.front().t_offset + T) {
      throw MissingTimeOrder("stack_csi: frame starting at t=" + std::to_string(frames[i].t_offset) +
                             " does not follow t=" + std::to_string(frames.front().t_offset + T));
    }
    T += frames[i].T;
  }
  CsiFrame out(A, K, T);
  out.fs_collect = frames.front().fs_collect;
  out.t_offset = frames.front().t_offset;
  out.domain = frames.front().domain;
  out.class_id = frames.front().class_id;
  std::size_t t0 = 0;
  for (const auto& f : frames) {
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t k = 0; k < K; ++k)
        std::copy_n(&f.at(a, k, 0), f.T, &out.at(a, k, t0));
    t0 += f.T;
  }
  return out;
}

namespace {

using MatC = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VecC = Eigen::Matrix<cplx, Eigen::Dynamic, 1>;

void phase_normalize(VecC& v) {
  Eigen::Index best = 0;
  v.cwiseAbs().maxCoeff(&best);
  const double m = std::abs(v[best]);
  if (m == 0) return;
  v *= std::conj(v[best]) / m;
}

VecC power_iteration(const MatC& c, const PcaOptions& opt) {
  const Eigen::Index k = c.rows();
  Eigen::Index start = 0;
  c.diagonal().real().maxCoeff(&start);
  VecC v = c.col(start);
  double n = v.norm();
  if (n == 0) {
    v.setConstant(cplx(1.0 / std::sqrt(static_cast<double>(k)), 0));
  } else {
    v /= n;
  }
  phase_normalize(v);
  VecC w(k);
  for (int it = 0; it < opt.max_iterations; ++it) {
    w.noalias() = c * v;
    n = w.norm();
    if (n == 0) break;
    w /= n;
    phase_normalize(w);
    const double diff = (w - v).norm();
    v.swap(w);
    if (diff < opt.tolerance) break;
  }
  return v;
}

}  // namespace

std::vector<cplx> dominant_eigenvector(const std::vector<cplx>& c, std::size_t k, const PcaOptions& opt,
                                       double* eigenvalue) {
  if (c.size() != k * k) throw InconsistentShape("dominant_eigenvector: matrix is not k x k");
  const MatC m = Eigen::Map<const MatC>(c.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  const VecC v = power_iteration(m, opt);
  if (eigenvalue) *eigenvalue = (v.adjoint() * m * v)(0, 0).real();
  return {v.data(), v.data() + v.size()};
}

namespace {

// Returns false when the centred covariance is identically zero.
bool project_antenna(const CsiFrame& f, std::size_t a, const PcaOptions& opt, cplx* out) {
  const auto K = static_cast<Eigen::Index>(f.K), T = static_cast<Eigen::Index>(f.T);
  MatC x(K, T);
  const std::complex<float>* src = &f.values[a * f.K * f.T];
  for (Eigen::Index i = 0; i < K * T; ++i) {
    const auto h = src[i];
    x.data()[i] = opt.mode == PcaMode::Amplitude ? cplx(std::abs(h), 0) : cplx(h.real(), h.imag());
  }
  const MatC xc = x.colwise() - x.rowwise().mean();
  // C = xc xc^H / (T - 1)
  const MatC c = (xc * xc.adjoint()) / static_cast<double>(T - 1);
  if ((c.array() == cplx(0)).all()) return false;
  const VecC v = power_iteration(c, opt);
  // s[t] = v^H x[:, t], on the uncentred samples.
  Eigen::Map<Eigen::Matrix<cplx, 1, Eigen::Dynamic>> s(out, T);
  s.noalias() = v.adjoint() * x;
  return true;
}

}  // namespace

std::vector<cplx> pca_first_component(const CsiFrame& frame, const PcaOptions& opt) {
  std::vector<bool> degenerate;
  auto s = pca_reduce(frame, opt, degenerate);
  for (std::size_t a = 0; a < degenerate.size(); ++a)
    if (degenerate[a]) throw DegenerateInput("antenna " + std::to_string(a) + " has zero covariance", a);
  return s;
}

std::vector<cplx> pca_reduce(const CsiFrame& frame, const PcaOptions& opt, std::vector<bool>& degenerate) {
  if (frame.T < 2) throw InconsistentShape("PCA needs at least two time samples");
  if (frame.K == 0) throw InconsistentShape("PCA needs at least one subcarrier");
  std::vector<cplx> out(frame.A * frame.T);
  degenerate.assign(frame.A, false);
  for (std::size_t a = 0; a < frame.A; ++a) {
    cplx* dst = &out[a * frame.T];
    if (!project_antenna(frame, a, opt, dst)) {
      degenerate[a] = true;
      std::fill_n(dst, frame.T, cplx(0));
    }
  }
  return out;
}

namespace {

// Only fftw_execute* is thread safe; planning goes through this lock.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

void fft(std::vector<cplx>& x) {
  if (x.size() < 2) return;
  auto& plan_mutex = planner_mutex();
  fftw_plan plan;
  auto* p = reinterpret_cast<fftw_complex*>(x.data());
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    plan = fftw_plan_dft_1d(static_cast<int>(x.size()), p, p, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    fftw_destroy_plan(plan);
  }
}

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void StftConfig::validate(std::size_t series_len) const {
  if (window_len == 0) throw ConfigError("window_len must be >= 1");
  if (hop == 0) throw ConfigError("hop must be >= 1");
  if (!(reported_fs > 0) || !std::isfinite(reported_fs)) throw ConfigError("reported_fs must be positive");
  if (window_len > series_len) {
    throw ConfigError("window_len " + std::to_string(window_len) + " exceeds series length " +
                      std::to_string(series_len));
  }
}

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

std::vector<double> DfsFrame::doppler_axis() const {
  std::vector<double> ax(B);
  const double bins = static_cast<double>(stft_bins ? stft_bins : B);
  for (std::size_t b = 0; b < B; ++b)
    ax[b] = (static_cast<double>(b) - std::floor(bins / 2)) * reported_fs / bins;
  return ax;
}

std::vector<double> DfsFrame::time_axis() const {
  std::vector<double> ax(T);
  for (std::size_t t = 0; t < T; ++t) ax[t] = static_cast<double>(t) / reported_fs;
  return ax;
}

DfsFrame stft_spectrogram(const std::vector<cplx>& series, std::size_t A, std::size_t T, const StftConfig& cfg) {
  if (series.size() != A * T) throw InconsistentShape("stft: series size does not match A*T");
  cfg.validate(T);
  const std::size_t L = cfg.window_len;
  const std::size_t cols = (T + cfg.hop - 1) / cfg.hop;
  const auto w = hann(L);
  DfsFrame out;
  out.A = A;
  out.B = L;
  out.T = cols;
  out.stft_bins = L;
  out.valid_time = cols;
  out.reported_fs = cfg.reported_fs;
  out.values.assign(A * L * cols, 0.0f);

  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(L / 2);
  std::vector<cplx> buf(L);
  auto* p = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_plan plan;
  auto& plan_mutex = planner_mutex();
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    plan = fftw_plan_dft_1d(static_cast<int>(L), p, p, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  for (std::size_t a = 0; a < A; ++a) {
    const cplx* x = &series[a * T];
    for (std::size_t c = 0; c < cols; ++c) {
      const std::ptrdiff_t centre = static_cast<std::ptrdiff_t>(c * cfg.hop);
      for (std::size_t n = 0; n < L; ++n) {
        const std::ptrdiff_t t = centre - half + static_cast<std::ptrdiff_t>(n);
        buf[n] = (t >= 0 && t < static_cast<std::ptrdiff_t>(T)) ? x[t] * w[n] : cplx(0);
      }
      fftw_execute(plan);
      for (std::size_t f = 0; f < L; ++f) {
        const std::size_t b = (f + L / 2) % L;
        out.at(a, b, c) = static_cast<float>(std::abs(buf[f]));
      }
    }
  }
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    fftw_destroy_plan(plan);
  }
  return out;
}

DfsFrame pad_pow2(const DfsFrame& f) {
  DfsFrame out = f;
  out.B = next_pow2(f.B);
  out.T = next_pow2(f.T);
  if (out.B == f.B && out.T == f.T) return out;
  out.values.assign(f.A * out.B * out.T, 0.0f);
  for (std::size_t b = 0; b < f.B; ++b)
    for (std::size_t t = 0; t < f.T; ++t)
      for (std::size_t a = 0; a < f.A; ++a) out.at(a, b, t) = f.at(a, b, t);
  return out;
}

void normalize_max(DfsFrame& f) {
  float m = 0;
  for (float v : f.values) m = std::max(m, v);
  if (m <= 0) return;
  for (float& v : f.values) v /= m;
}

std::vector<DfsFrame> unstack_rx(const DfsFrame& f) {
  std::vector<DfsFrame> parts(f.A);
  for (std::size_t a = 0; a < f.A; ++a) {
    DfsFrame& p = parts[a];
    p = DfsFrame{1, f.B, f.T, f.valid_time, f.stft_bins, {}, f.reported_fs, f.fs_collect, f.domain, f.class_id};
    p.domain.rx_patch = static_cast<int>(a);
    p.values.resize(f.B * f.T);
    for (std::size_t b = 0; b < f.B; ++b)
      for (std::size_t t = 0; t < f.T; ++t) p.values[b * f.T + t] = f.at(a, b, t);
  }
  return parts;
}

DfsFrame restack_rx(const std::vector<DfsFrame>& parts) {
  if (parts.empty()) throw InconsistentShape("restack_rx: no frames");
  const auto& first = parts.front();
  DfsFrame out{parts.size(), first.B, first.T, first.valid_time, first.stft_bins, {},
               first.reported_fs, first.fs_collect, first.domain, first.class_id};
  out.domain.rx_patch.reset();
  out.values.assign(out.A * out.B * out.T, 0.0f);
  std::vector<char> seen(parts.size(), 0);
  for (const auto& p : parts) {
    if (p.A != 1 || p.B != out.B || p.T != out.T) throw InconsistentShape("restack_rx: mismatched part");
    if (!p.domain.rx_patch || *p.domain.rx_patch < 0 || static_cast<std::size_t>(*p.domain.rx_patch) >= parts.size() ||
        seen[*p.domain.rx_patch]) {
      throw InconsistentShape("restack_rx: rx_patch labels must cover 0..A-1 once");
    }
    const auto a = static_cast<std::size_t>(*p.domain.rx_patch);
    seen[a] = 1;
    for (std::size_t b = 0; b < out.B; ++b)
      for (std::size_t t = 0; t < out.T; ++t) out.at(a, b, t) = p.values[b * out.T + t];
  }
  return out;
}

std::size_t PipelineReport::degenerate_count() const {
  return static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), true));
}

DfsFrame csi_to_dfs(const CsiFrame& frame, const PipelineOptions& opt, PipelineReport* report) {
  std::vector<bool> degenerate;
  const auto s = pca_reduce(frame, opt.pca, degenerate);
  DfsFrame d = pad_pow2(stft_spectrogram(s, frame.A, frame.T, opt.stft));
  if (opt.normalize) normalize_max(d);
  d.fs_collect = frame.fs_collect;
  d.domain = frame.domain;
  d.class_id = frame.class_id;
  if (report) report->degenerate = std::move(degenerate);
  return d;
}

}  // namespace jcas::preprocess

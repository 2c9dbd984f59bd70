#include "jcas/csi/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace jcas::csi {

double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

std::string to_string(MotionClass c) {
  switch (c) {
    case MotionClass::Empty: return "empty";
    case MotionClass::Still: return "still";
    case MotionClass::Squat: return "squat";
    case MotionClass::HandGesture: return "hand_gesture";
  }
  return "?";
}

std::string to_string(Orientation o) { return o == Orientation::Frontal ? "frontal" : "orthogonal"; }

MotionClass motion_class_from_string(const std::string& s) {
  if (s == "empty") return MotionClass::Empty;
  if (s == "still") return MotionClass::Still;
  if (s == "squat") return MotionClass::Squat;
  if (s == "hand_gesture" || s == "hand") return MotionClass::HandGesture;
  throw ScenarioError("unknown motion class '" + s + "'");
}

Orientation orientation_from_string(const std::string& s) {
  if (s == "frontal") return Orientation::Frontal;
  if (s == "orthogonal") return Orientation::Orthogonal;
  throw ScenarioError("unknown orientation '" + s + "'");
}

MotionProfile default_profile(MotionClass cls, Orientation o, int repetitions, double duration) {
  MotionProfile p;
  p.cls = cls;
  p.orientation = o;
  p.repetitions = repetitions;
  const double base_rate = repetitions / duration;
  switch (cls) {
    case MotionClass::Empty:
      break;
    case MotionClass::Still:
      p.motion_amplitude = 0.005;
      p.motion_rate = 1.2;
      break;
    case MotionClass::Squat:
      p.motion_amplitude = 0.35;
      p.motion_rate = base_rate;
      break;
    case MotionClass::HandGesture:
      p.motion_amplitude = 0.05;
      p.motion_rate = 4.0 * base_rate;
      break;
  }
  return p;
}

namespace {

Vec3 facing_vector(Orientation o) {
  // Frontal faces the transmitter wall (-x); orthogonal is rotated a quarter turn.
  return o == Orientation::Frontal ? Vec3{-1, 0, 0} : Vec3{0, 1, 0};
}

std::optional<ScatterState> trajectory_scaled(const MotionProfile& p, double t, double rate_scale) {
  if (p.cls == MotionClass::Empty) return std::nullopt;
  const double w = 2.0 * std::numbers::pi * p.motion_rate * rate_scale;
  const double s = std::sin(w * t + p.phase);
  const double c = std::cos(w * t + p.phase);
  Vec3 dir;
  switch (p.cls) {
    case MotionClass::Squat:
      dir = Vec3{0, 0, 1} + facing_vector(p.orientation) * p.lean;
      break;
    case MotionClass::HandGesture:
      dir = facing_vector(p.orientation);
      break;
    default:
      dir = Vec3{0, 0, 1};
      break;
  }
  return ScatterState{p.base_pos + dir * (p.motion_amplitude * s), dir * (p.motion_amplitude * w * c)};
}

}  // namespace

std::optional<ScatterState> motion_trajectory(const MotionProfile& profile, double t) {
  return trajectory_scaled(profile, t, 1.0);
}

double bistatic_range_rate(const Vec3& tx, const Vec3& rx, const ScatterState& s) {
  const Vec3 a = s.pos - tx;
  const Vec3 b = s.pos - rx;
  return a.dot(s.vel) / a.norm() + b.dot(s.vel) / b.norm();
}

double ArrayPose::sine_to(const Vec3& p) const {
  const Vec3 d = p - pos;
  const Vec3 axis{-std::sin(facing), std::cos(facing), 0.0};
  return d.dot(axis) / d.norm();
}

std::size_t SimScenario::n_time() const {
  return static_cast<std::size_t>(std::llround(fs_collect * duration));
}

double SimScenario::subcarrier_freq(int k) const {
  return beams.carrier_freq + (k - (n_subcarriers - 1) / 2.0) * bandwidth / n_subcarriers;
}

namespace {

bool inside(const SimScenario& sc, const Vec3& p) {
  return p.x >= 0 && p.x <= sc.room_width && p.y >= 0 && p.y <= sc.room_depth && p.z >= 0 &&
         p.z <= sc.room_height;
}

}  // namespace

void SimScenario::validate() const {
  const int lo = allow_edge_beams ? 1 : 3;
  const int hi = allow_edge_beams ? beams.n_beams : 14;
  if (tx_beam < lo || tx_beam > hi) {
    throw ScenarioError("tx_beam " + std::to_string(tx_beam) + " outside usable range " + std::to_string(lo) +
                        "-" + std::to_string(hi));
  }
  if (n_subcarriers < 1) throw ScenarioError("n_subcarriers must be >= 1");
  if (n_rx < 1 || n_rx > beams.n_beams) throw ScenarioError("n_rx must lie in 1..n_beams");
  if (!(fs_collect > 0)) throw ScenarioError("fs_collect must be > 0");
  if (!(duration > 0)) throw ScenarioError("duration must be > 0");
  if (n_time() < 1) throw ScenarioError("fs_collect * duration rounds to zero samples");
  if (!(tx_power >= 0)) throw ScenarioError("tx_power must be >= 0");
  if (!inside(*this, tx.pos) || !inside(*this, rx.pos)) throw GeometryError("TX/RX position outside the room");
  if (subject && !inside(*this, subject->base_pos)) throw GeometryError("subject outside the room");
  if (subject && (!(subject->motion_amplitude >= 0) || !(subject->motion_rate >= 0) || !(subject->rcs_scale >= 0))) {
    throw ScenarioError("motion amplitude, rate and rcs_scale must be >= 0");
  }
  for (const auto& c : clutter)
    if (!inside(*this, c.pos)) throw GeometryError("clutter point outside the room");
}

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

namespace {

struct BeamTable {
  std::vector<double> u;    // steering sine per beam (index 0 = beam 1)
  std::vector<double> amp;  // sqrt(element_count) * taper amplitude
};

BeamTable beam_table(const BeamSet& b) {
  BeamTable t;
  for (int m = 1; m <= b.n_beams; ++m) {
    t.u.push_back(b.steering_sine(m));
    t.amp.push_back(std::sqrt(static_cast<double>(b.element_count)) * std::pow(10.0, -b.taper_db(m) / 20.0));
  }
  return t;
}

inline double dirichlet(int n, double psi) {
  const double den = std::sin(psi / 2.0);
  if (std::abs(den) < 1e-12) {
    const double k = std::round(psi / (2.0 * std::numbers::pi));
    return (static_cast<long long>(k) * (n - 1)) % 2 == 0 ? 1.0 : -1.0;
  }
  return std::sin(n * psi / 2.0) / (n * den);
}

inline double gain(const BeamSet& b, const BeamTable& t, int beam, double sine, double freq) {
  const double psi = std::numbers::pi * ((freq / b.carrier_freq) * sine - t.u[beam - 1]);
  return t.amp[beam - 1] * dirichlet(b.element_count, psi);
}

CsiFrame simulate_impl(const SimScenario& sc, SimRng* rng, std::vector<double>* snr_out) {
  sc.validate();
  const std::size_t A = static_cast<std::size_t>(sc.n_rx);
  const std::size_t K = static_cast<std::size_t>(sc.n_subcarriers);
  const std::size_t T = sc.n_time();
  CsiFrame f(A, K, T);
  f.fs_collect = sc.fs_collect;
  f.domain.tx_beam = sc.tx_beam;
  if (sc.subject) f.domain.orientation = sc.subject->orientation;

  const BeamTable bt = beam_table(sc.beams);
  const double ptx_amp = std::sqrt(sc.tx_power * 1e3);  // sqrt(mW)
  const double noise_mw = dbm_to_mw(sc.noise_floor_dbm);
  const double two_pi = 2.0 * std::numbers::pi;

  std::vector<double> freq(K), lambda(K);
  for (std::size_t k = 0; k < K; ++k) {
    freq[k] = sc.subcarrier_freq(static_cast<int>(k));
    lambda[k] = kSpeedOfLight / freq[k];
  }

  // Static line-of-sight term per (a, k).
  const double d0 = (sc.rx.pos - sc.tx.pos).norm();
  const double s_tx_los = sc.tx.sine_to(sc.rx.pos);
  const double s_rx_los = sc.rx.sine_to(sc.tx.pos);
  std::vector<std::complex<double>> los(A * K);
  std::vector<double> los_gain(A * K);
  for (std::size_t a = 0; a < A; ++a)
    for (std::size_t k = 0; k < K; ++k) {
      const double g = gain(sc.beams, bt, sc.tx_beam, s_tx_los, freq[k]) *
                       gain(sc.beams, bt, static_cast<int>(a) + 1, s_rx_los, freq[k]);
      const double amp = ptx_amp * lambda[k] / (4.0 * std::numbers::pi * d0);
      los_gain[a * K + k] = g * amp;
      los[a * K + k] = g * amp * std::polar(1.0, -two_pi * freq[k] * d0 / kSpeedOfLight);
    }
  for (const auto& c : sc.clutter) {
    const double d1 = (c.pos - sc.tx.pos).norm();
    const double d2 = (c.pos - sc.rx.pos).norm();
    const double stx = sc.tx.sine_to(c.pos);
    const double srx = sc.rx.sine_to(c.pos);
    for (std::size_t k = 0; k < K; ++k) {
      const double amp =
          ptx_amp * std::sqrt(c.rcs_scale) * lambda[k] / (std::pow(4.0 * std::numbers::pi, 1.5) * d1 * d2);
      const std::complex<double> ph = std::polar(amp, -two_pi * freq[k] * (d1 + d2) / kSpeedOfLight);
      const double gt = gain(sc.beams, bt, sc.tx_beam, stx, freq[k]);
      for (std::size_t a = 0; a < A; ++a)
        los[a * K + k] += ph * (gt * gain(sc.beams, bt, static_cast<int>(a) + 1, srx, freq[k]));
    }
  }
  const double spur_rel = std::pow(10.0, sc.spur_rel_db / 20.0);

  std::vector<double> power(A, 0.0);
  std::normal_distribution<double> nd(0.0, std::sqrt(noise_mw / 2.0));
  const std::complex<double> rot = std::polar(1.0, sc.global_phase);
  std::vector<std::complex<double>> row(A * K);

  for (std::size_t t = 0; t < T; ++t) {
    const double time = static_cast<double>(t) / sc.fs_collect;
    for (std::size_t i = 0; i < A * K; ++i) row[i] = los[i];
    if (sc.subject) {
      const auto st = trajectory_scaled(*sc.subject, time, sc.doppler_scale);
      if (!inside(sc, st->pos)) throw GeometryError("scatterer left the room at t=" + std::to_string(time));
      const double d1 = (st->pos - sc.tx.pos).norm();
      const double d2 = (st->pos - sc.rx.pos).norm();
      const double stx = sc.tx.sine_to(st->pos);
      const double srx = sc.rx.sine_to(st->pos);
      const double sigma = std::sqrt(sc.subject->rcs_scale);
      for (std::size_t k = 0; k < K; ++k) {
        const double amp = ptx_amp * sigma * lambda[k] / (std::pow(4.0 * std::numbers::pi, 1.5) * d1 * d2);
        const std::complex<double> ph = std::polar(amp, -two_pi * freq[k] * (d1 + d2) / kSpeedOfLight);
        const double gt = gain(sc.beams, bt, sc.tx_beam, stx, freq[k]);
        for (std::size_t a = 0; a < A; ++a) {
          if (sc.uninformative_rx & (1u << a)) continue;
          row[a * K + k] += ph * (gt * gain(sc.beams, bt, static_cast<int>(a) + 1, srx, freq[k]));
        }
      }
    }
    if (sc.spur_hz != 0.0 && spur_rel > 0.0) {
      const std::complex<double> sp = std::polar(spur_rel, two_pi * sc.spur_hz * time);
      for (std::size_t i = 0; i < A * K; ++i) row[i] += sp * los_gain[i];
    }
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t k = 0; k < K; ++k) {
        std::complex<double> h = row[a * K + k] * rot;
        power[a] += std::norm(h);
        if (sc.noise && rng) h += std::complex<double>(nd(*rng), nd(*rng));
        f.at(a, k, t) = std::complex<float>(h);
      }
  }
  if (snr_out) {
    snr_out->resize(A);
    for (std::size_t a = 0; a < A; ++a) {
      const double mean = power[a] / static_cast<double>(K * T);
      (*snr_out)[a] = mean > 0 ? 10.0 * std::log10(mean / noise_mw) : -std::numeric_limits<double>::infinity();
    }
  }
  return f;
}

}  // namespace

CsiFrame simulate_csi(const SimScenario& sc, SimRng& rng, std::vector<double>* rx_snr_db) {
  return simulate_impl(sc, &rng, rx_snr_db);
}

std::vector<double> rx_mean_snr_db(const SimScenario& sc) {
  std::vector<double> snr;
  simulate_impl(sc, nullptr, &snr);
  return snr;
}

std::size_t apply_snr_zeroing(CsiFrame& frame, const std::vector<double>& snr_db, double threshold_db) {
  if (snr_db.size() != frame.A) throw ScenarioError("SNR vector length does not match RX count");
  std::size_t zeroed = 0;
  for (std::size_t a = 0; a < frame.A; ++a) {
    if (!(snr_db[a] < threshold_db)) continue;
    ++zeroed;
    std::fill(frame.values.begin() + static_cast<std::ptrdiff_t>(a * frame.K * frame.T),
              frame.values.begin() + static_cast<std::ptrdiff_t>((a + 1) * frame.K * frame.T),
              std::complex<float>(0.0f, 0.0f));
  }
  return zeroed;
}

std::size_t apply_snr_zeroing(CsiFrame& frame, double noise_floor_dbm, double threshold_db) {
  const double noise = dbm_to_mw(noise_floor_dbm);
  std::vector<double> snr(frame.A);
  for (std::size_t a = 0; a < frame.A; ++a) {
    double p = 0.0;
    for (std::size_t i = a * frame.K * frame.T; i < (a + 1) * frame.K * frame.T; ++i) p += std::norm(frame.values[i]);
    const double est = p / static_cast<double>(frame.K * frame.T) / noise - 1.0;
    snr[a] = est > 0 ? 10.0 * std::log10(est) : -std::numeric_limits<double>::infinity();
  }
  return apply_snr_zeroing(frame, snr, threshold_db);
}

}  // namespace jcas::csi

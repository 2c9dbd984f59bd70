#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "jcas/csi/beams.hpp"

namespace jcas::csi {

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ScenarioError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

constexpr double kSpeedOfLight = 299792458.0;

struct Vec3 {
  double x = 0, y = 0, z = 0;
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const;
};

enum class MotionClass { Empty, Still, Squat, HandGesture };
enum class Orientation { Frontal, Orthogonal };

std::string to_string(MotionClass c);
std::string to_string(Orientation o);
MotionClass motion_class_from_string(const std::string& s);
Orientation orientation_from_string(const std::string& s);

struct MotionProfile {
  MotionClass cls = MotionClass::Empty;
  Vec3 base_pos{5.5, 3.25, 1.0};
  Orientation orientation = Orientation::Frontal;
  double motion_rate = 0.0;       // Hz
  double motion_amplitude = 0.0;  // m
  int repetitions = 1;            // motions per frame
  double rcs_scale = 1.0;
  double phase = 0.0;             // initial motion phase, rad
  double lean = 0.5;              // horizontal excursion per unit vertical excursion (squat)
};

// Class defaults: squat 0.35 m at repetitions/duration, hand gesture 0.05 m at
// four times that rate, still 0.005 m at 1.2 Hz.
MotionProfile default_profile(MotionClass cls, Orientation o, int repetitions, double duration);

struct ScatterState {
  Vec3 pos;
  Vec3 vel;
};

// Scatterer position/velocity at time t; nullopt for the empty class.
std::optional<ScatterState> motion_trajectory(const MotionProfile& profile, double t);

// Bistatic path-length rate d/dt (|p - tx| + |p - rx|).
double bistatic_range_rate(const Vec3& tx, const Vec3& rx, const ScatterState& s);

struct ArrayPose {
  Vec3 pos;
  double facing = 0.0;  // azimuth of boresight, rad
  // sin of the angle between boresight plane and direction to p, measured
  // along the array axis (boresight rotated +90 degrees in azimuth)
  double sine_to(const Vec3& p) const;
};

// Static reflector (furniture, walls) adding a fixed bistatic path.
struct ClutterPoint {
  Vec3 pos;
  double rcs_scale = 1.0;
};

struct SimScenario {
  double room_width = 11.0;  // x extent, m
  double room_depth = 6.5;   // y extent, m
  double room_height = 3.0;
  ArrayPose tx{{0.5, 3.25, 0.9}, 0.0};
  ArrayPose rx{{9.0, 2.0, 0.9}, 3.14159265358979323846};
  int tx_beam = 7;
  bool allow_edge_beams = false;  // permit beams outside 3..14 (tests only)
  std::optional<MotionProfile> subject;
  std::vector<ClutterPoint> clutter;  // none by default
  double tx_power = 1e-4;  // W
  double noise_floor_dbm = -93.85;
  double fs_collect = 20.0;
  double duration = 5.0;
  int n_subcarriers = 100;
  int n_rx = 16;
  double bandwidth = 20e6;
  BeamSet beams{};
  bool noise = true;
  double global_phase = 0.0;  // common phase offset of the frame, rad

  // Stress knobs.
  double doppler_scale = 1.0;     // multiplies the scatterer's excursion rate
  double spur_hz = 0.0;           // spurious tone added to every RX beam
  double spur_rel_db = -200.0;    // spur power relative to the LOS component
  std::uint32_t uninformative_rx = 0;  // bit a set: RX beam a sees no scatterer

  std::size_t n_time() const;
  double subcarrier_freq(int k) const;
  void validate() const;
};

struct DomainLabel {
  int tx_beam = 0;
  std::optional<int> rx_patch;
  int subject_id = 0;
  Orientation orientation = Orientation::Frontal;
  bool operator==(const DomainLabel&) const = default;
};

// Complex channel tensor A x K x T, time fastest: (a * K + k) * T + t.
struct CsiFrame {
  std::size_t A = 0, K = 0, T = 0;
  std::vector<std::complex<float>> values;
  double fs_collect = 0;
  std::size_t t_offset = 0;  // absolute index of the first time symbol
  DomainLabel domain;
  int class_id = -1;

  CsiFrame() = default;
  CsiFrame(std::size_t a, std::size_t k, std::size_t t)
      : A(a), K(k), T(t), values(a * k * t) {}
  std::complex<float>& at(std::size_t a, std::size_t k, std::size_t t) { return values[(a * K + k) * T + t]; }
  const std::complex<float>& at(std::size_t a, std::size_t k, std::size_t t) const {
    return values[(a * K + k) * T + t];
  }
};

using SimRng = std::mt19937_64;

// Deterministic given (scenario, rng state). Noise power per complex sample
// equals noise_floor_dbm; amplitudes are in sqrt(mW). When rx_snr_db is given
// it receives rx_mean_snr_db(sc) at no extra cost.
CsiFrame simulate_csi(const SimScenario& sc, SimRng& rng, std::vector<double>* rx_snr_db = nullptr);

// Mean noiseless received power over (k, t) per RX beam divided by the noise
// power, in dB.
std::vector<double> rx_mean_snr_db(const SimScenario& sc);

// Zeroes every RX beam whose mean SNR (per sc) lies below threshold_db.
// Returns the number of zeroed RX beams.
std::size_t apply_snr_zeroing(CsiFrame& frame, const std::vector<double>& snr_db, double threshold_db);
constexpr double kDefaultSnrThresholdDb = -12.0;

// Zeroes RX beams from the measured frame itself: SNR estimate is
// mean|h|^2 / noise - 1.
std::size_t apply_snr_zeroing(CsiFrame& frame, double noise_floor_dbm, double threshold_db);

double dbm_to_mw(double dbm);
double mw_to_dbm(double mw);

}  // namespace jcas::csi

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "jcas/csi/beams.hpp"
#include "jcas/csi/io.hpp"
#include "jcas/csi/scenario.hpp"

using namespace jcas::csi;

namespace {

double db(double x) { return 10.0 * std::log10(x); }

SimScenario small_scenario() {
  SimScenario sc;
  sc.n_subcarriers = 8;
  sc.fs_collect = 20;
  sc.duration = 1;
  return sc;
}

double mean_power(const CsiFrame& f) {
  double p = 0;
  for (const auto& v : f.values) p += std::norm(std::complex<double>(v));
  return p / static_cast<double>(f.values.size());
}

}  // namespace

TEST_CASE("beam gain at own steering angle equals peak gain") {
  BeamSet b;
  for (int m = 1; m <= 16; ++m) {
    const auto g = butler_gain(b, m, b.steering_angle(m), b.carrier_freq);
    CHECK(db(std::norm(g)) == doctest::Approx(b.peak_gain_db(m)).epsilon(1e-9));
  }
}

TEST_CASE("steering angles strictly increase") {
  BeamSet b;
  const auto a = b.steering_angles();
  REQUIRE(a.size() == 16);
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i] > a[i - 1]);
}

TEST_CASE("beam m is at least 20 dB down at every other beam's steering angle") {
  BeamSet b;
  for (int m = 1; m <= 16; ++m)
    for (int o = 1; o <= 16; ++o) {
      if (o == m) continue;
      const double g = db(std::norm(butler_gain(b, m, b.steering_angle(o), b.carrier_freq)) + 1e-300);
      CHECK(g - b.peak_gain_db(m) <= -20.0);
    }
}

TEST_CASE("centre to edge peak spread lies in [10, 20] dB") {
  BeamSet b;
  const double spread = b.peak_gain_db(8) - b.peak_gain_db(1);
  CHECK(spread <= 20.0);
  CHECK(spread >= 10.0);
  double lo = 1e9, hi = -1e9;
  for (int m = 1; m <= 16; ++m) {
    lo = std::min(lo, b.peak_gain_db(m));
    hi = std::max(hi, b.peak_gain_db(m));
  }
  CHECK(hi - lo <= b.edge_attenuation_db);
}

TEST_CASE("beam index outside 1..16 throws") {
  BeamSet b;
  CHECK_THROWS_AS(butler_gain(b, 0, 0.0, 26e9), BeamIndexError);
  CHECK_THROWS_AS(butler_gain(b, 17, 0.0, 26e9), BeamIndexError);
}

TEST_CASE("beam pattern reciprocity via TX/RX role swap") {
  // Swapping the arrays' roles leaves the LOS product of gains unchanged.
  SimScenario sc = small_scenario();
  sc.noise = false;
  sc.n_rx = 16;
  sc.tx_beam = 7;
  CsiFrame fwd;
  {
    SimRng r(1);
    fwd = simulate_csi(sc, r);
  }
  SimScenario sw = sc;
  std::swap(sw.tx, sw.rx);
  BeamSet b;
  // For each RX beam a, the swapped setup with tx_beam = a+1 and RX beam 7-1 must
  // give the same magnitude.
  for (int a = 3; a <= 14; ++a) {
    sw.tx_beam = a;
    SimRng r(1);
    const auto back = simulate_csi(sw, r);
    const double m1 = std::abs(std::complex<double>(fwd.at(static_cast<std::size_t>(a - 1), 0, 0)));
    const double m2 = std::abs(std::complex<double>(back.at(6, 0, 0)));
    CHECK(m1 == doctest::Approx(m2).epsilon(1e-5));
  }
  for (int m = 1; m <= 16; ++m) {
    const double ang = 0.3;
    CHECK(std::abs(butler_gain(b, m, ang, 26.01e9) - butler_gain_sine(b, m, std::sin(ang), 26.01e9)) < 1e-12);
  }
}

TEST_CASE("zero transmit power leaves the noise floor") {
  SimScenario sc = small_scenario();
  sc.tx_power = 0;
  sc.duration = 5;
  SimRng r(3);
  const auto f = simulate_csi(sc, r);
  REQUIRE(f.values.size() >= 10000);
  CHECK(std::abs(mw_to_dbm(mean_power(f)) - (-93.85)) < 1.0);
}

TEST_CASE("frame dims: one time symbol carries 1600 complex samples") {
  SimScenario sc;
  sc.duration = 0.1;
  SimRng r(0);
  const auto f = simulate_csi(sc, r);
  CHECK(f.A * f.K == 1600);
  CHECK(f.T == 2);
  for (const auto& v : f.values) CHECK(std::isfinite(v.real()));
}

TEST_CASE("simulator is deterministic for equal seeds") {
  SimScenario sc = small_scenario();
  sc.subject = default_profile(MotionClass::Squat, Orientation::Frontal, 3, 1.0);
  SimRng a(42), b(42), c(43);
  const auto fa = simulate_csi(sc, a), fb = simulate_csi(sc, b), fc = simulate_csi(sc, c);
  CHECK(fa.values == fb.values);
  CHECK(fa.values != fc.values);
}

TEST_CASE("LOS power decreases monotonically with distance") {
  SimScenario sc = small_scenario();
  sc.noise = false;
  sc.duration = 0.05;
  double prev = std::numeric_limits<double>::infinity();
  for (double x = 3.0; x <= 10.5; x += 0.5) {
    sc.rx.pos = {x, 3.25, 0.9};
    SimRng r(0);
    const double p = mean_power(simulate_csi(sc, r));
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("scatterer leaving the room raises GeometryError") {
  SimScenario sc = small_scenario();
  auto p = default_profile(MotionClass::Squat, Orientation::Frontal, 3, 1.0);
  p.motion_amplitude = 5.0;
  sc.subject = p;
  SimRng r(0);
  CHECK_THROWS_AS(simulate_csi(sc, r), GeometryError);
}

TEST_CASE("scenario validation") {
  SimScenario sc = small_scenario();
  sc.tx_beam = 16;
  CHECK_THROWS_AS(sc.validate(), ScenarioError);
  sc.tx_beam = 2;
  CHECK_THROWS_AS(sc.validate(), ScenarioError);
  sc.allow_edge_beams = true;
  CHECK_NOTHROW(sc.validate());
  sc = small_scenario();
  sc.n_subcarriers = 0;
  CHECK_THROWS_AS(sc.validate(), ScenarioError);
  sc = small_scenario();
  sc.tx.pos = {-1, 0, 0};
  CHECK_THROWS_AS(sc.validate(), GeometryError);
  sc = small_scenario();
  sc.fs_collect = 0;
  CHECK_THROWS_AS(sc.validate(), ScenarioError);
}

TEST_CASE("empty profile has no scatterer") {
  const auto p = default_profile(MotionClass::Empty, Orientation::Frontal, 1, 5.0);
  CHECK_FALSE(motion_trajectory(p, 0.3).has_value());
}

TEST_CASE("squat with 3 repetitions over 5 s has period 5/3 s") {
  auto p = default_profile(MotionClass::Squat, Orientation::Frontal, 3, 5.0);
  p.phase = 0.4;
  const double period = 5.0 / 3.0;
  for (double t = 0; t < 5.0; t += 0.37) {
    const auto a = motion_trajectory(p, t), b = motion_trajectory(p, t + period);
    CHECK(a->pos.z == doctest::Approx(b->pos.z).epsilon(1e-9));
  }
  // Half a period later the vertical excursion is mirrored.
  const auto a = motion_trajectory(p, 0.2), h = motion_trajectory(p, 0.2 + period / 2);
  CHECK(a->pos.z - p.base_pos.z == doctest::Approx(-(h->pos.z - p.base_pos.z)).epsilon(1e-9));
  CHECK(p.motion_amplitude == 0.35);
}

TEST_CASE("library defaults for hand and still classes") {
  const auto h = default_profile(MotionClass::HandGesture, Orientation::Frontal, 1, 2.0);
  CHECK(h.motion_amplitude == 0.05);
  CHECK(h.motion_rate == doctest::Approx(2.0));
  const auto s = default_profile(MotionClass::Still, Orientation::Frontal, 1, 2.0);
  CHECK(s.motion_amplitude == 0.005);
  CHECK(s.motion_rate == 1.2);
}

TEST_CASE("range rate is zero at the squat turning point") {
  SimScenario sc;
  auto p = default_profile(MotionClass::Squat, Orientation::Frontal, 3, 5.0);
  p.phase = 0.0;
  const double w = 2 * std::numbers::pi * p.motion_rate;
  const double t_turn = (std::numbers::pi / 2) / w;  // sin peaks, velocity vanishes
  const auto st = motion_trajectory(p, t_turn);
  CHECK(std::abs(bistatic_range_rate(sc.tx.pos, sc.rx.pos, *st)) < 1e-12);
  // Elsewhere the range rate matches a finite difference of path length.
  auto path = [&](double t) {
    const auto s = motion_trajectory(p, t);
    return (s->pos - sc.tx.pos).norm() + (s->pos - sc.rx.pos).norm();
  };
  const double t0 = 0.31, h = 1e-6;
  CHECK(bistatic_range_rate(sc.tx.pos, sc.rx.pos, *motion_trajectory(p, t0)) ==
        doctest::Approx((path(t0 + h) - path(t0 - h)) / (2 * h)).epsilon(1e-6));
}

TEST_CASE("SNR zeroing thresholds") {
  SimScenario sc = small_scenario();
  SimRng r(5);
  std::vector<double> snr;
  const auto f = simulate_csi(sc, r, &snr);
  REQUIRE(snr.size() == 16);

  CsiFrame g = f;
  CHECK(apply_snr_zeroing(g, snr, -std::numeric_limits<double>::infinity()) == 0);
  CHECK(g.values == f.values);

  g = f;
  CHECK(apply_snr_zeroing(g, snr, std::numeric_limits<double>::infinity()) == 16);
  for (const auto& v : g.values) CHECK(v == std::complex<float>(0, 0));

  // Noiseless estimate agrees with the frame-based estimate at high SNR.
  const auto direct = rx_mean_snr_db(sc);
  for (std::size_t a = 0; a < 16; ++a) CHECK(direct[a] == doctest::Approx(snr[a]).epsilon(1e-9));
}

TEST_CASE("edge TX beam 2 is mostly zeroed at the default threshold") {
  SimScenario sc = small_scenario();
  sc.allow_edge_beams = true;
  sc.tx_beam = 2;
  sc.subject = default_profile(MotionClass::Squat, Orientation::Frontal, 1, 1.0);
  SimRng r(9);
  std::vector<double> snr;
  auto f = simulate_csi(sc, r, &snr);
  apply_snr_zeroing(f, snr, kDefaultSnrThresholdDb);
  std::size_t zeros = 0;
  for (const auto& v : f.values) zeros += (v == std::complex<float>(0, 0));
  CHECK(static_cast<double>(zeros) / static_cast<double>(f.values.size()) >= 0.9);

  // The measured-frame estimator needs enough samples to resolve -12 dB.
  sc.n_subcarriers = 100;
  SimRng r2(9);
  auto f2 = simulate_csi(sc, r2);
  apply_snr_zeroing(f2, sc.noise_floor_dbm, kDefaultSnrThresholdDb);
  std::size_t zeros2 = 0;
  for (const auto& v : f2.values) zeros2 += (v == std::complex<float>(0, 0));
  CHECK(static_cast<double>(zeros2) / static_cast<double>(f2.values.size()) >= 0.9);
}

TEST_CASE("centre TX beams keep live RX beams") {
  SimScenario sc = small_scenario();
  sc.tx_beam = 7;
  const auto snr = rx_mean_snr_db(sc);
  std::size_t live = 0;
  for (double s : snr) live += s >= kDefaultSnrThresholdDb;
  CHECK(live >= 3);
}

TEST_CASE("clutter adds a static path") {
  SimScenario sc = small_scenario();
  sc.noise = false;
  SimRng r(0);
  const auto base = simulate_csi(sc, r);
  sc.clutter.push_back({{5.0, 1.0, 1.0}, 4.0});
  const auto cl = simulate_csi(sc, r);
  CHECK(base.values != cl.values);
  // Static: every time symbol is the same.
  for (std::size_t t = 1; t < cl.T; ++t) CHECK(cl.at(3, 2, t) == cl.at(3, 2, 0));
  sc.clutter.push_back({{50.0, 1.0, 1.0}, 1.0});
  CHECK_THROWS_AS(sc.validate(), GeometryError);
}

TEST_CASE("CSV round trip preserves values and has A*K*T rows") {
  SimScenario sc = small_scenario();
  sc.subject = default_profile(MotionClass::HandGesture, Orientation::Orthogonal, 1, 1.0);
  SimRng r(11);
  const auto f = simulate_csi(sc, r);
  std::stringstream ss;
  write_csi_csv(ss, f);
  const std::string text = ss.str();
  const auto rows = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
  CHECK(rows == f.A * f.K * f.T + 1);
  std::stringstream in(text);
  const auto g = read_csi_csv(in, f.fs_collect);
  CHECK(g.A == f.A);
  CHECK(g.K == f.K);
  CHECK(g.T == f.T);
  CHECK(g.values == f.values);
}

TEST_CASE("CSV keeps the absolute time offset") {
  CsiFrame f(2, 3, 4);
  f.t_offset = 50;
  for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = {static_cast<float>(i), -1.5f};
  std::stringstream ss;
  write_csi_csv(ss, f);
  const auto g = read_csi_csv(ss);
  CHECK(g.t_offset == 50);
  CHECK(g.values == f.values);
}

TEST_CASE("malformed CSV rows raise ParseError with the line number") {
  std::stringstream ss("t,rx,k,re,im\n0,0,0,1.0,2.0\n1,0,0.5\n");
  try {
    (void)read_csi_csv(ss);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  std::stringstream bad_header("t,rx,re,im\n");
  CHECK_THROWS_AS(read_csi_csv(bad_header), ParseError);
  std::stringstream bad_number("t,rx,k,re,im\n0,0,0,abc,1\n");
  CHECK_THROWS_AS(read_csi_csv(bad_number), ParseError);
  std::stringstream missing("t,rx,k,re,im\n0,0,0,1,1\n1,0,1,1,1\n");
  CHECK_THROWS_AS(read_csi_csv(missing), ParseError);
}

TEST_CASE("binary archive round trip") {
  SimScenario sc = small_scenario();
  SimRng r(2);
  const auto f = simulate_csi(sc, r);
  const auto path = std::filesystem::temp_directory_path() / "jcas_csi_roundtrip.bin";
  write_csi_bin(path, f);
  const auto g = read_csi_bin(path);
  CHECK(g.values == f.values);
  CHECK(g.fs_collect == f.fs_collect);
  std::filesystem::remove(path);
}

TEST_CASE("global phase rotates every sample by the same factor") {
  SimScenario sc = small_scenario();
  sc.noise = false;
  sc.subject = default_profile(MotionClass::Squat, Orientation::Frontal, 1, 1.0);
  SimRng r(0);
  const auto f = simulate_csi(sc, r);
  sc.global_phase = 1.1;
  const auto g = simulate_csi(sc, r);
  const std::complex<double> rot = std::polar(1.0, 1.1);
  for (std::size_t i = 0; i < f.values.size(); i += 37) {
    const auto expect = std::complex<double>(f.values[i]) * rot;
    CHECK(std::abs(std::complex<double>(g.values[i]) - expect) <= 1e-5 * std::abs(expect) + 1e-20);
  }
}

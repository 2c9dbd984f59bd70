#include "jcas/csi/beams.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace jcas::csi {

namespace {

void check_beam(const BeamSet& b, int beam) {
  if (beam < 1 || beam > b.n_beams) {
    throw BeamIndexError("beam index " + std::to_string(beam) + " outside 1.." + std::to_string(b.n_beams));
  }
}

}  // namespace

double BeamSet::steering_sine(int beam) const {
  check_beam(*this, beam);
  return (2.0 * beam - n_beams - 1.0) / static_cast<double>(n_beams);
}

double BeamSet::steering_angle(int beam) const { return std::asin(steering_sine(beam)); }

std::vector<double> BeamSet::steering_angles() const {
  std::vector<double> a;
  for (int m = 1; m <= n_beams; ++m) a.push_back(steering_angle(m));
  return a;
}

double BeamSet::taper_db(int beam) const {
  check_beam(*this, beam);
  const double centre = (n_beams + 1) / 2.0;
  const double half_span = centre - 1.0;
  const double r = std::abs(beam - centre) / half_span;
  return edge_attenuation_db * (1.0 - std::cos(std::numbers::pi * r)) / 2.0;
}

double BeamSet::peak_gain_db(int beam) const {
  return 10.0 * std::log10(static_cast<double>(element_count)) - taper_db(beam);
}

std::complex<double> butler_gain_sine(const BeamSet& beams, int beam, double sine, double freq) {
  const double u = beams.steering_sine(beam);
  const int n = beams.element_count;
  // Phase step between neighbouring elements; spacing is half a carrier wavelength.
  const double psi = std::numbers::pi * ((freq / beams.carrier_freq) * sine - u);
  double af;
  const double den = std::sin(psi / 2.0);
  if (std::abs(den) < 1e-12) {
    // limit of the Dirichlet kernel at multiples of 2 pi
    const double k = std::round(psi / (2.0 * std::numbers::pi));
    af = (static_cast<long long>(k) * (n - 1)) % 2 == 0 ? 1.0 : -1.0;
  } else {
    af = std::sin(n * psi / 2.0) / (n * den);
  }
  const double amp = std::sqrt(static_cast<double>(n)) * std::pow(10.0, -beams.taper_db(beam) / 20.0);
  return {amp * af, 0.0};
}

std::complex<double> butler_gain(const BeamSet& beams, int beam, double angle, double freq) {
  return butler_gain_sine(beams, beam, std::sin(angle), freq);
}

}  // namespace jcas::csi

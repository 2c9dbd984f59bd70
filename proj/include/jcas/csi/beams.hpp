#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace jcas::csi {

class BeamIndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Fixed multi-beam front end modelled as a half-wavelength uniform linear
// array with DFT (Butler) weights: beam m in 1..n_beams steers to
// sin(theta) = (2m - n_beams - 1) / n_beams. A raised-cosine amplitude taper
// across the beam index lowers the edge beams by up to edge_attenuation_db.
struct BeamSet {
  int n_beams = 16;
  int element_count = 16;
  double carrier_freq = 26e9;
  double edge_attenuation_db = 20.0;

  // Beam-centre direction as sin(theta).
  double steering_sine(int beam) const;
  // Radians, strictly increasing with the beam index.
  double steering_angle(int beam) const;
  std::vector<double> steering_angles() const;
  // Peak power gain of a beam in dB (element_count at the array centre minus
  // the taper).
  double peak_gain_db(int beam) const;
  double taper_db(int beam) const;
};

// Complex amplitude gain of `beam` towards `angle` (radians from broadside) at
// frequency `freq`. The gain is the same whether the array transmits or
// receives. |gain|^2 equals the beam's peak power gain at its own steering
// angle at the carrier frequency.
std::complex<double> butler_gain(const BeamSet& beams, int beam, double angle, double freq);

// Same, parameterised directly by sin(angle).
std::complex<double> butler_gain_sine(const BeamSet& beams, int beam, double sine, double freq);

}  // namespace jcas::csi

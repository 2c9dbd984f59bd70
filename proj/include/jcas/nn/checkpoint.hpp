#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "jcas/nn/layers.hpp"
#include "jcas/nn/optim.hpp"

namespace jcas::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Named tensor file: "JCNN", version byte, u32 count, then per tensor u32 name
// length, name bytes, four u32 dims (n, h, w, c), little-endian f32 values.
struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

void write_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensors(const std::filesystem::path& path);

// Saves every parameter (trainable or not). Optimiser k's moments are stored
// as "adam<k>/m/<name>", "adam<k>/v/<name>" and its step counter as "adam<k>/t".
template <typename T>
void save_params(const std::filesystem::path& path, const ParamList<T>& params,
                 const std::vector<const ParamStore<T>*>& adam = {});
// Restores by name; every parameter must be present with a matching shape.
template <typename T>
void load_params(const std::filesystem::path& path, const ParamList<T>& params,
                 const std::vector<ParamStore<T>*>& adam = {});

// In-memory copy of parameter values, used for best-epoch restoration.
template <typename T>
std::vector<std::vector<T>> snapshot(const ParamList<T>& params);
template <typename T>
void restore(const ParamList<T>& params, const std::vector<std::vector<T>>& snap);

// Finite-difference check. The caller fills analytic gradients first, then
// hands over (coordinate, analytic value) probes and a loss closure that
// re-evaluates the network at the current coordinate values.
struct GradProbe {
  double* value;
  double analytic;
};

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst;
};

// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor = 1e-6);

GradcheckResult gradcheck(const std::function<double()>& loss, const std::vector<GradProbe>& probes,
                          double eps = 1e-6, double floor = 1e-6);

// Up to `count` random coordinates drawn over the trainable parameters.
std::vector<GradProbe> sample_param_probes(const ParamList<double>& params, std::size_t count, Rng& rng);
std::vector<GradProbe> sample_tensor_probes(Tensor<double>& value, const Tensor<double>& grad,
                                            std::size_t count, Rng& rng);

// Gradient check of a single layer under loss = sum(r * layer(x)) with fixed
// random r, over >= `param_coords` parameter coordinates plus `input_coords`
// input coordinates.
GradcheckResult gradcheck_layer(Layer<double>& layer, Tensor<double> x, Mode mode, Rng& rng,
                                std::size_t param_coords = 50, std::size_t input_coords = 20,
                                double eps = 1e-6, double floor = 1e-6);

}  // namespace jcas::nn

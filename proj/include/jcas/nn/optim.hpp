#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jcas/nn/layers.hpp"

namespace jcas::nn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Trainable parameters (by pointer, owned by the layers) and their ADAM
// moments. Non-trainable parameters such as batch-norm moving statistics are
// kept out of the optimiser.
template <typename T>
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamList<T>& params, AdamConfig cfg = {});

  void add(Param<T>* p);
  void zero_grad();
  // One bias-corrected ADAM update from the accumulated gradients, which are
  // then cleared. Throws NumericalError on a non-finite gradient before any
  // parameter is touched.
  void step();

  std::size_t size() const { return params_.size(); }
  Param<T>& param(std::size_t i) { return *params_[i]; }
  const Tensor<T>& first_moment(std::size_t i) const { return m_[i]; }
  const Tensor<T>& second_moment(std::size_t i) const { return v_[i]; }
  Tensor<T>& first_moment(std::size_t i) { return m_[i]; }
  Tensor<T>& second_moment(std::size_t i) { return v_[i]; }
  std::uint64_t steps() const { return t_; }
  void set_steps(std::uint64_t t) { t_ = t; }
  AdamConfig& config() { return cfg_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_{};
  std::vector<Param<T>*> params_;
  std::vector<Tensor<T>> m_, v_;
  std::uint64_t t_ = 0;
};

// Mean over the batch of -sum_j y log(max(yhat, 1e-12)). Rows are samples.
template <typename T>
double cross_entropy(const Tensor<T>& pred, const Tensor<T>& truth);

// Gradient of cross_entropy(softmax(logits)) with respect to the logits:
// (yhat - y) / m.
template <typename T>
Tensor<T> softmax_cross_entropy_grad(const Tensor<T>& pred, const Tensor<T>& truth);

// Mean squared error of one flow and its gradient with respect to x_hat.
template <typename T>
double mse(const Tensor<T>& x, const Tensor<T>& x_hat);
template <typename T>
Tensor<T> mse_grad(const Tensor<T>& x, const Tensor<T>& x_hat);

// Sum of the per-flow losses.
double reconstruction_loss(const std::vector<double>& flow_losses);

template <typename T>
Tensor<T> one_hot(const std::vector<int>& labels, std::size_t classes);

}  // namespace jcas::nn

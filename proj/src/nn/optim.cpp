#include "jcas/nn/optim.hpp"

#include <algorithm>
#include <cmath>

namespace jcas::nn {

template <typename T>
ParamStore<T>::ParamStore(const ParamList<T>& params, AdamConfig cfg) : cfg_(cfg) {
  for (auto* p : params)
    if (p->trainable) add(p);
}

template <typename T>
void ParamStore<T>::add(Param<T>* p) {
  if (std::find(params_.begin(), params_.end(), p) != params_.end()) return;
  params_.push_back(p);
  m_.emplace_back(p->value.shape());
  v_.emplace_back(p->value.shape());
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto* p : params_) p->grad.fill(T(0));
}

template <typename T>
void ParamStore<T>::step() {
  for (auto* p : params_)
    for (T g : p->grad.vec())
      if (!std::isfinite(g)) throw NumericalError("non-finite gradient in " + p->name);
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
  const T step = static_cast<T>(cfg_.lr / bc1);
  const T eps = static_cast<T>(cfg_.eps);
  const T inv_bc2 = static_cast<T>(1.0 / bc2);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& w = params_[i]->value.vec();
    auto& g = params_[i]->grad.vec();
    auto& m = m_[i].vec();
    auto& v = v_[i].vec();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      w[j] -= step * m[j] / (std::sqrt(v[j] * inv_bc2) + eps);
      g[j] = T(0);
    }
  }
}

template <typename T>
double cross_entropy(const Tensor<T>& pred, const Tensor<T>& truth) {
  if (pred.shape() != truth.shape()) throw ShapeError("cross_entropy shape mismatch");
  const std::size_t c = pred.c();
  const std::size_t m = pred.size() / c;
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] != T(0)) {
      total -= static_cast<double>(truth[i]) * std::log(std::max(static_cast<double>(pred[i]), 1e-12));
    }
  }
  return total / static_cast<double>(m);
}

template <typename T>
Tensor<T> softmax_cross_entropy_grad(const Tensor<T>& pred, const Tensor<T>& truth) {
  if (pred.shape() != truth.shape()) throw ShapeError("cross_entropy shape mismatch");
  const T inv_m = T(1) / static_cast<T>(pred.size() / pred.c());
  Tensor<T> g(pred.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = (pred[i] - truth[i]) * inv_m;
  return g;
}

template <typename T>
double mse(const Tensor<T>& x, const Tensor<T>& x_hat) {
  if (x.shape() != x_hat.shape()) throw ShapeError("mse " + x.shape().str() + " vs " + x_hat.shape().str());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x_hat[i]) - static_cast<double>(x[i]);
    s += d * d;
  }
  return s / static_cast<double>(x.size());
}

template <typename T>
Tensor<T> mse_grad(const Tensor<T>& x, const Tensor<T>& x_hat) {
  if (x.shape() != x_hat.shape()) throw ShapeError("mse " + x.shape().str() + " vs " + x_hat.shape().str());
  Tensor<T> g(x.shape());
  const T k = T(2) / static_cast<T>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = k * (x_hat[i] - x[i]);
  return g;
}

double reconstruction_loss(const std::vector<double>& flow_losses) {
  double s = 0.0;
  for (double l : flow_losses) s += l;
  return s;
}

template <typename T>
Tensor<T> one_hot(const std::vector<int>& labels, std::size_t classes) {
  Tensor<T> y(Shape{labels.size(), 1, 1, classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw ShapeError("label " + std::to_string(labels[i]) + " out of range");
    }
    y[i * classes + static_cast<std::size_t>(labels[i])] = T(1);
  }
  return y;
}

#define JCAS_OPTIM(T)                                                               \
  template class ParamStore<T>;                                                     \
  template double cross_entropy<T>(const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> softmax_cross_entropy_grad<T>(const Tensor<T>&, const Tensor<T>&); \
  template double mse<T>(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> mse_grad<T>(const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> one_hot<T>(const std::vector<int>&, std::size_t);

JCAS_OPTIM(float)
JCAS_OPTIM(double)

}  // namespace jcas::nn

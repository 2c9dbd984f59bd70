#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "jcas/nn/kernels.hpp"
#include "jcas/nn/tensor.hpp"

namespace jcas::nn {

enum class Mode { Train, Infer };

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;

  Param() = default;
  Param(std::string n, Tensor<T> v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), trainable(train) {}
};

template <typename T>
using ParamList = std::vector<Param<T>*>;

using Rng = std::mt19937_64;

// A differentiable block. forward() caches what backward() needs; backward()
// returns the input gradient and accumulates parameter gradients. predict()
// is the inference path: it never mutates the layer, so a trained layer may
// be evaluated from several threads at once.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
  virtual Tensor<T> backward(const Tensor<T>& gy) = 0;
  virtual Tensor<T> predict(const Tensor<T>& x) const = 0;
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual void collect(ParamList<T>& /*out*/) {}
  virtual std::string describe() const = 0;
};

template <typename T>
using LayerPtr = std::unique_ptr<Layer<T>>;

enum class Act { Identity, Relu, Relu6, Swish, Sigmoid, Softmax };
std::string act_name(Act a);

// Elementwise activation (softmax runs over the channel axis).
template <typename T>
Tensor<T> activate(const Tensor<T>& x, Act kind);

template <typename T>
class Activation final : public Layer<T> {
 public:
  explicit Activation(Act kind) : kind_(kind) {}
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  Tensor<T> predict(const Tensor<T>& x) const override { return activate(x, kind_); }
  Shape output_shape(const Shape& in) const override { return in; }
  std::string describe() const override { return "activation(" + act_name(kind_) + ")"; }
  Act kind() const { return kind_; }

 private:
  Act kind_;
  Tensor<T> x_, y_;
};

// Same-padded convolution without bias. Weights (kh, kw, cin, cout).
template <typename T>
class Conv2D final : public Layer<T> {
 public:
  Conv2D(std::string name, std::size_t cin, std::size_t cout, std::size_t kh, std::size_t kw,
         Rng& rng, std::size_t sh = 1, std::size_t sw = 1);
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  Tensor<T> predict(const Tensor<T>& x) const override;
  Shape output_shape(const Shape& in) const override;
  void collect(ParamList<T>& out) override { out.push_back(&kernel_); }
  std::string describe() const override;
  Param<T>& kernel() { return kernel_; }

 private:
  std::size_t cin_, cout_, kh_, kw_, sh_, sw_;
  Param<T> kernel_;
  Tensor<T> x_;
};

// Depth multiplier 1, no bias. Weights (kh, kw, c).
template <typename T>
class DepthwiseConv2D final : public Layer<T> {
 public:
  DepthwiseConv2D(std::string name, std::size_t channels, std::size_t kh, std::size_t kw,
                  Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  Tensor<T> predict(const Tensor<T>& x) const override;
  Shape output_shape(const Shape& in) const override { return in; }
  void collect(ParamList<T>& out) override { out.push_back(&kernel_); }
  std::string describe() const override;
  Param<T>& kernel() { return kernel_; }

 private:
  std::size_t c_, kh_, kw_;
  Param<T> kernel_;
  Tensor<T> x_;
};

enum class DenseInit { VarianceUniformThird, ConvNormal, Zero };

// Affine map over the flattened per-sample features; output (n, 1, 1, units).
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::string name, std::size_t in, std::size_t out, Rng& rng, bool bias = true,
        DenseInit init = DenseInit::VarianceUniformThird);
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  Tensor<T> predict(const Tensor<T>& x) const override;
  Shape output_shape(const Shape& in) const override;
  void collect(ParamList<T>& out) override;
  std::string describe() const override;
  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }

 private:
  std::size_t in_, out_;
  bool has_bias_;
  Param<T> weight_, bias_;
  Tensor<T> x_;
};

template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  static constexpr double kMomentum = 0.99;
  static constexpr double kEpsilon = 1e-3;

  BatchNorm(std::string name, std::size_t channels);
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  Tensor<T> predict(const Tensor<T>& x) const override;
  Shape output_shape(const Shape& in) const override { return in; }
  void collect(ParamList<T>& out) override;
  std::string describe() const override;
  Param<T>& gamma() { return gamma_; }
  Param<T>& beta() { return beta_; }
  const Param<T>& moving_mean() const { return mean_; }
  const Param<T>& moving_var() const { return var_; }

 private:
  std::size_t c_;
  Param<T> gamma_, beta_, mean_, var_;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
  bool train_cache_ = false;
};

template <typename T>
class MaxPool2D final : public Layer<T> {
 public:
  MaxPool2D(std::size_t ph, std::size_t pw, std::size_t sh, std::size_t sw);
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  Tensor<T> predict(const Tensor<T>& x) const override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override;

 private:
  std::size_t ph_, pw_, sh_, sw_;
  kernels::WindowGeom geom_{};
  std::vector<std::uint32_t> argmax_;
};

// Averages only the in-bounds cells of each window.
template <typename T>
class AvgPool2D final : public Layer<T> {
 public:
  AvgPool2D(std::size_t ph, std::size_t pw, std::size_t sh, std::size_t sw);
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  Tensor<T> predict(const Tensor<T>& x) const override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override;

 private:
  std::size_t ph_, pw_, sh_, sw_;
  kernels::WindowGeom geom_{};
};

template <typename T>
class GlobalMaxPool final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  Tensor<T> predict(const Tensor<T>& x) const override;
  Shape output_shape(const Shape& in) const override { return {in.n, 1, 1, in.c}; }
  std::string describe() const override { return "global_max_pool"; }

 private:
  Shape in_{};
  std::vector<std::size_t> argmax_;
};

template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  Tensor<T> predict(const Tensor<T>& x) const override;
  Shape output_shape(const Shape& in) const override { return {in.n, 1, 1, in.c}; }
  std::string describe() const override { return "global_avg_pool"; }

 private:
  Shape in_{};
};

// Nearest-neighbour repetition of every cell into an rh x rw block.
template <typename T>
class Upsample2D final : public Layer<T> {
 public:
  Upsample2D(std::size_t rh = 2, std::size_t rw = 2) : rh_(rh), rw_(rw) {}
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  Tensor<T> predict(const Tensor<T>& x) const override;
  Shape output_shape(const Shape& in) const override {
    return {in.n, in.h * rh_, in.w * rw_, in.c};
  }
  std::string describe() const override;

 private:
  std::size_t rh_, rw_;
  Shape in_{};
};

template <typename T>
class Sequential final : public Layer<T> {
 public:
  Sequential() = default;
  Sequential& add(LayerPtr<T> layer) {
    layers_.push_back(std::move(layer));
    return *this;
  }
  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto p = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *p;
    layers_.push_back(std::move(p));
    return ref;
  }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  Tensor<T> predict(const Tensor<T>& x) const override;
  Shape output_shape(const Shape& in) const override;
  void collect(ParamList<T>& out) override;
  std::string describe() const override;
  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  Layer<T>& at(std::size_t i) { return *layers_.at(i); }

 private:
  std::vector<LayerPtr<T>> layers_;
};

// Squeezed width for a squeeze-and-excitation gate.
std::size_t se_squeezed_width(double se_rate, std::size_t channels);

// Channel gate: x * sigmoid(W2 swish(W1 mean_hw(x) + b1) + b2). No batch norm.
template <typename T>
class SqueezeExcite final : public Layer<T> {
 public:
  SqueezeExcite(std::string name, std::size_t channels, double se_rate, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  Tensor<T> predict(const Tensor<T>& x) const override;
  Shape output_shape(const Shape& in) const override { return in; }
  void collect(ParamList<T>& out) override;
  std::string describe() const override;
  std::size_t squeezed() const { return squeezed_; }
  Dense<T>& reduce() { return reduce_; }
  Dense<T>& expand() { return expand_; }

 private:
  std::size_t c_, squeezed_;
  GlobalAvgPool<T> pool_;
  Dense<T> reduce_;
  Activation<T> reduce_act_{Act::Swish};
  Dense<T> expand_;
  Activation<T> gate_act_{Act::Sigmoid};
  Tensor<T> x_, gate_;
};

class ResidualShapeError : public ShapeError {
 public:
  using ShapeError::ShapeError;
};

struct MBConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t expansion = 2;
  double se_rate = 0.25;
  bool residual = false;
  bool batchnorm = false;  // leading batch-norm layer
  std::size_t depthwise_kernel = 3;
};

// Mobile inverted bottleneck: [bn] -> 1x1 expand, swish -> depthwise kxk,
// swish -> squeeze-excite -> 1x1 project (linear) [+ input]. Stride 1.
template <typename T>
class MBConv final : public Layer<T> {
 public:
  MBConv(std::string name, const MBConvSpec& spec, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  Tensor<T> predict(const Tensor<T>& x) const override;
  Shape output_shape(const Shape& in) const override;
  void collect(ParamList<T>& out) override { body_.collect(out); }
  std::string describe() const override;
  const MBConvSpec& spec() const { return spec_; }

 private:
  MBConvSpec spec_;
  Sequential<T> body_;
};

// Variance-scaled initialisers in "fan_out" mode. Uniform draws on
// +-sqrt(3*scale/fan_out); normal draws a truncated normal (|z| < 2) rescaled so
// the variance is scale/fan_out.
template <typename T>
void init_variance_uniform(Tensor<T>& t, double scale, std::size_t fan_out, Rng& rng);
template <typename T>
void init_variance_normal(Tensor<T>& t, double scale, std::size_t fan_out, Rng& rng);

template <typename T>
std::size_t parameter_count(Layer<T>& layer, bool trainable_only = true);

}  // namespace jcas::nn

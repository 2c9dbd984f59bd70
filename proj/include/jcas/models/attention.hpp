#pragma once

#include <string>

#include "jcas/models/config.hpp"
#include "jcas/nn/layers.hpp"

namespace jcas::models {

using nn::Mode;
using nn::Param;
using nn::ParamList;
using nn::Shape;
using nn::Tensor;

// Input mask: out = x + x * sigmoid(conv(bn(x))), one-filter same-padded
// convolution, mask broadcast over channels.
template <typename T>
class AttentionA final : public nn::Layer<T> {
 public:
  AttentionA(std::string name, std::size_t channels, Hw kernel, nn::Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  Tensor<T> predict(const Tensor<T>& x) const override;
  Shape output_shape(const Shape& in) const override { return in; }
  void collect(ParamList<T>& out) override;
  std::string describe() const override;
  nn::Conv2D<T>& conv() { return conv_; }
  nn::BatchNorm<T>& bn() { return bn_; }

 private:
  std::size_t c_;
  nn::BatchNorm<T> bn_;
  nn::Conv2D<T> conv_;
  nn::Activation<T> sig_{nn::Act::Sigmoid};
  Tensor<T> x_, mask_;
};

// Pooled gate on an intermediate map z (H x W x C): average- and max-pooled
// forks share one ReLU MLP over the flattened pooled map, their outputs are
// summed, passed through a sigmoid, resized to H x W by nearest neighbour and
// multiplied with z.
template <typename T>
class AttentionB final : public nn::Layer<T> {
 public:
  AttentionB(std::string name, const Shape& in, Hw pool, Hw stride, const std::vector<std::size_t>& widths,
             nn::Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  Tensor<T> predict(const Tensor<T>& x) const override;
  Shape output_shape(const Shape& in) const override { return in; }
  void collect(ParamList<T>& out) override { mlp_.collect(out); }
  std::string describe() const override;
  nn::Sequential<T>& mlp() { return mlp_; }
  Shape pooled_shape() const { return {1, ph_, pw_, c_}; }

 private:
  Tensor<T> gate_from(const Tensor<T>& pooled_sum) const;
  Tensor<T> apply(const Tensor<T>& z, const Tensor<T>& gate) const;

  std::size_t h_, w_, c_, ph_, pw_;
  nn::AvgPool2D<T> avg_;
  nn::MaxPool2D<T> max_;
  nn::Sequential<T> mlp_;
  Tensor<T> z_, gate_;
};

}  // namespace jcas::models

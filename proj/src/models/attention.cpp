#include "jcas/models/attention.hpp"

namespace jcas::models {

template <typename T>
AttentionA<T>::AttentionA(std::string name, std::size_t channels, Hw kernel, nn::Rng& rng)
    : c_(channels), bn_(name + "/bn", channels), conv_(name + "/conv", channels, 1, kernel.h, kernel.w, rng) {}

template <typename T>
Tensor<T> AttentionA<T>::predict(const Tensor<T>& x) const {
  const Tensor<T> m = nn::activate(conv_.predict(bn_.predict(x)), nn::Act::Sigmoid);
  Tensor<T> y(x.shape());
  const std::size_t px = x.n() * x.h() * x.w();
  for (std::size_t p = 0; p < px; ++p)
    for (std::size_t ch = 0; ch < c_; ++ch) y[p * c_ + ch] = x[p * c_ + ch] * (T(1) + m[p]);
  return y;
}

template <typename T>
Tensor<T> AttentionA<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.c() != c_) throw nn::ShapeError("attention A channel mismatch " + x.shape().str());
  x_ = x;
  mask_ = sig_.forward(conv_.forward(bn_.forward(x, mode), mode), mode);
  Tensor<T> y(x.shape());
  const std::size_t px = x.n() * x.h() * x.w();
  for (std::size_t p = 0; p < px; ++p)
    for (std::size_t ch = 0; ch < c_; ++ch) y[p * c_ + ch] = x[p * c_ + ch] * (T(1) + mask_[p]);
  return y;
}

template <typename T>
Tensor<T> AttentionA<T>::backward(const Tensor<T>& gy) {
  Tensor<T> gx(x_.shape());
  Tensor<T> gm(mask_.shape());
  const std::size_t px = x_.n() * x_.h() * x_.w();
  for (std::size_t p = 0; p < px; ++p) {
    T acc = 0;
    for (std::size_t ch = 0; ch < c_; ++ch) {
      const std::size_t i = p * c_ + ch;
      gx[i] = gy[i] * (T(1) + mask_[p]);
      acc += gy[i] * x_[i];
    }
    gm[p] = acc;
  }
  gx += bn_.backward(conv_.backward(sig_.backward(gm)));
  return gx;
}

template <typename T>
void AttentionA<T>::collect(ParamList<T>& out) {
  bn_.collect(out);
  conv_.collect(out);
}

template <typename T>
std::string AttentionA<T>::describe() const {
  return "attention_a(" + conv_.describe() + ")";
}

template <typename T>
AttentionB<T>::AttentionB(std::string name, const Shape& in, Hw pool, Hw stride,
                          const std::vector<std::size_t>& widths, nn::Rng& rng)
    : h_(in.h), w_(in.w), c_(in.c), avg_(pool.h, pool.w, stride.h, stride.w), max_(pool.h, pool.w, stride.h, stride.w) {
  const Shape ps = avg_.output_shape({1, in.h, in.w, in.c});
  ph_ = ps.h;
  pw_ = ps.w;
  const std::size_t flat = ps.per_sample();
  std::size_t prev = flat;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    mlp_.template emplace<nn::Dense<T>>(name + "/dense" + std::to_string(i), prev, widths[i], rng);
    mlp_.template emplace<nn::Activation<T>>(nn::Act::Relu);
    prev = widths[i];
  }
  mlp_.template emplace<nn::Dense<T>>(name + "/out", prev, flat, rng);
  mlp_.template emplace<nn::Activation<T>>(nn::Act::Relu);
}

template <typename T>
Tensor<T> AttentionB<T>::gate_from(const Tensor<T>& both) const {
  // both: (2n, 1, 1, flat), avg fork rows first.
  const std::size_t n = both.n() / 2, flat = ph_ * pw_ * c_;
  Tensor<T> g(Shape{n, ph_, pw_, c_});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < flat; ++i) g[b * flat + i] = both[b * flat + i] + both[(n + b) * flat + i];
  return nn::activate(g, nn::Act::Sigmoid);
}

template <typename T>
Tensor<T> AttentionB<T>::apply(const Tensor<T>& z, const Tensor<T>& gate) const {
  Tensor<T> y(z.shape());
  for (std::size_t b = 0; b < z.n(); ++b)
    for (std::size_t yy = 0; yy < h_; ++yy) {
      const std::size_t py = yy * ph_ / h_;
      for (std::size_t xx = 0; xx < w_; ++xx) {
        const std::size_t px = xx * pw_ / w_;
        for (std::size_t ch = 0; ch < c_; ++ch) y.at(b, yy, xx, ch) = z.at(b, yy, xx, ch) * gate.at(b, py, px, ch);
      }
    }
  return y;
}

template <typename T>
Tensor<T> AttentionB<T>::predict(const Tensor<T>& z) const {
  const Tensor<T> both = mlp_.predict(nn::concat_batch(avg_.predict(z), max_.predict(z)));
  return apply(z, gate_from(both));
}

template <typename T>
Tensor<T> AttentionB<T>::forward(const Tensor<T>& z, Mode mode) {
  if (z.h() != h_ || z.w() != w_ || z.c() != c_) throw nn::ShapeError("attention B input " + z.shape().str());
  z_ = z;
  const Tensor<T> a = avg_.forward(z, mode);
  const Tensor<T> m = max_.forward(z, mode);
  gate_ = gate_from(mlp_.forward(nn::concat_batch(a, m), mode));
  return apply(z, gate_);
}

template <typename T>
Tensor<T> AttentionB<T>::backward(const Tensor<T>& gy) {
  const std::size_t n = z_.n();
  Tensor<T> gz(z_.shape());
  Tensor<T> gg(gate_.shape());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t yy = 0; yy < h_; ++yy) {
      const std::size_t py = yy * ph_ / h_;
      for (std::size_t xx = 0; xx < w_; ++xx) {
        const std::size_t px = xx * pw_ / w_;
        for (std::size_t ch = 0; ch < c_; ++ch) {
          const T g = gate_.at(b, py, px, ch);
          gz.at(b, yy, xx, ch) = gy.at(b, yy, xx, ch) * g;
          gg.at(b, py, px, ch) += gy.at(b, yy, xx, ch) * z_.at(b, yy, xx, ch);
        }
      }
    }
  const std::size_t flat = ph_ * pw_ * c_;
  Tensor<T> gboth(Shape{2 * n, 1, 1, flat});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < flat; ++i) {
      const T g = gate_[b * flat + i];
      const T ds = gg[b * flat + i] * g * (T(1) - g);
      gboth[b * flat + i] = ds;
      gboth[(n + b) * flat + i] = ds;
    }
  const Tensor<T> gp = mlp_.backward(gboth);
  gz += avg_.backward(gp.slice_batch(0, n));
  gz += max_.backward(gp.slice_batch(n, n));
  return gz;
}

template <typename T>
std::string AttentionB<T>::describe() const {
  return "attention_b(pooled " + std::to_string(ph_) + "x" + std::to_string(pw_) + "x" + std::to_string(c_) + ", " +
         mlp_.describe() + ")";
}

template class AttentionA<float>;
template class AttentionA<double>;
template class AttentionB<float>;
template class AttentionB<double>;

}  // namespace jcas::models

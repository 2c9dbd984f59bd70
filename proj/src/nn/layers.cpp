#include "jcas/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace jcas::nn {

std::string act_name(Act a) {
  switch (a) {
    case Act::Identity: return "identity";
    case Act::Relu: return "relu";
    case Act::Relu6: return "relu6";
    case Act::Swish: return "swish";
    case Act::Sigmoid: return "sigmoid";
    case Act::Softmax: return "softmax";
  }
  return "?";
}

namespace {

template <typename T>
inline T sigmoid(T x) {
  if (x >= 0) {
    const T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

inline std::string dims2(std::size_t a, std::size_t b) {
  return std::to_string(a) + "x" + std::to_string(b);
}

}  // namespace

// ---------------------------------------------------------------- init

template <typename T>
void init_variance_uniform(Tensor<T>& t, double scale, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(3.0 * scale / static_cast<double>(std::max<std::size_t>(1, fan_out)));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : t.vec()) v = static_cast<T>(dist(rng));
}

template <typename T>
void init_variance_normal(Tensor<T>& t, double scale, std::size_t fan_out, Rng& rng) {
  // 0.8796... is the std of a unit normal truncated to (-2, 2).
  const double stddev =
      std::sqrt(scale / static_cast<double>(std::max<std::size_t>(1, fan_out))) / 0.87962566103423978;
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& v : t.vec()) {
    double z;
    do {
      z = dist(rng);
    } while (std::abs(z) >= 2.0);
    v = static_cast<T>(z * stddev);
  }
}

// ---------------------------------------------------------------- activation

template <typename T>
Tensor<T> activate(const Tensor<T>& x, Act kind) {
  Tensor<T> y(x.shape());
  const std::size_t n = x.size();
  switch (kind) {
    case Act::Identity:
      y = x;
      break;
    case Act::Relu:
      for (std::size_t i = 0; i < n; ++i) y[i] = std::max(T(0), x[i]);
      break;
    case Act::Relu6:
      for (std::size_t i = 0; i < n; ++i) y[i] = std::clamp(x[i], T(0), T(6));
      break;
    case Act::Swish:
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * sigmoid(x[i]);
      break;
    case Act::Sigmoid:
      for (std::size_t i = 0; i < n; ++i) y[i] = sigmoid(x[i]);
      break;
    case Act::Softmax: {
      const std::size_t c = x.c();
      for (std::size_t r = 0; r < n / c; ++r) {
        const T* xr = x.data() + r * c;
        T* yr = y.data() + r * c;
        const T mx = *std::max_element(xr, xr + c);
        T sum = 0;
        for (std::size_t j = 0; j < c; ++j) sum += (yr[j] = std::exp(xr[j] - mx));
        for (std::size_t j = 0; j < c; ++j) yr[j] /= sum;
      }
      break;
    }
  }
  return y;
}

template <typename T>
Tensor<T> Activation<T>::forward(const Tensor<T>& x, Mode) {
  x_ = x;
  y_ = activate(x, kind_);
  return y_;
}

template <typename T>
Tensor<T> Activation<T>::backward(const Tensor<T>& gy) {
  if (gy.shape() != x_.shape()) throw ShapeError("activation backward shape");
  Tensor<T> gx(gy.shape());
  const std::size_t n = gy.size();
  switch (kind_) {
    case Act::Identity:
      gx = gy;
      break;
    case Act::Relu:
      for (std::size_t i = 0; i < n; ++i) gx[i] = x_[i] > 0 ? gy[i] : T(0);
      break;
    case Act::Relu6:
      for (std::size_t i = 0; i < n; ++i) gx[i] = (x_[i] > 0 && x_[i] < 6) ? gy[i] : T(0);
      break;
    case Act::Swish:
      for (std::size_t i = 0; i < n; ++i) {
        const T s = sigmoid(x_[i]);
        gx[i] = gy[i] * s * (T(1) + x_[i] * (T(1) - s));
      }
      break;
    case Act::Sigmoid:
      for (std::size_t i = 0; i < n; ++i) gx[i] = gy[i] * y_[i] * (T(1) - y_[i]);
      break;
    case Act::Softmax: {
      const std::size_t c = gy.c();
      for (std::size_t r = 0; r < n / c; ++r) {
        T dot = 0;
        for (std::size_t j = 0; j < c; ++j) dot += gy[r * c + j] * y_[r * c + j];
        for (std::size_t j = 0; j < c; ++j) gx[r * c + j] = y_[r * c + j] * (gy[r * c + j] - dot);
      }
      break;
    }
  }
  return gx;
}

// ---------------------------------------------------------------- conv

template <typename T>
Conv2D<T>::Conv2D(std::string name, std::size_t cin, std::size_t cout, std::size_t kh,
                  std::size_t kw, Rng& rng, std::size_t sh, std::size_t sw)
    : cin_(cin), cout_(cout), kh_(kh), kw_(kw), sh_(sh), sw_(sw),
      kernel_(name + "/kernel", Tensor<T>(Shape{kh, kw, cin, cout})) {
  if (kh == 0 || kw == 0 || cin == 0 || cout == 0 || sh == 0 || sw == 0) {
    throw ShapeError("conv2d " + name + ": zero-sized kernel/stride");
  }
  init_variance_normal(kernel_.value, 2.0, kh * kw * cout, rng);
}

template <typename T>
Shape Conv2D<T>::output_shape(const Shape& in) const {
  if (in.c != cin_) {
    throw ShapeError("conv2d expects " + std::to_string(cin_) + " channels, got " + in.str());
  }
  const auto g = kernels::window_geom(in, kh_, kw_, sh_, sw_);
  return {in.n, g.oh, g.ow, cout_};
}

template <typename T>
Tensor<T> Conv2D<T>::predict(const Tensor<T>& x) const {
  Tensor<T> y(output_shape(x.shape()));
  const auto g = kernels::window_geom(x.shape(), kh_, kw_, sh_, sw_);
  kernels::conv2d_forward<T>(g, cout_, x.span(), kernel_.value.span(), y.span());
  return y;
}

template <typename T>
Tensor<T> Conv2D<T>::forward(const Tensor<T>& x, Mode) {
  x_ = x;
  return predict(x);
}

template <typename T>
Tensor<T> Conv2D<T>::backward(const Tensor<T>& gy) {
  const auto g = kernels::window_geom(x_.shape(), kh_, kw_, sh_, sw_);
  Tensor<T> gx(x_.shape());
  kernels::conv2d_backward_input<T>(g, cout_, gy.span(), kernel_.value.span(), gx.span());
  kernels::conv2d_backward_weight<T>(g, cout_, x_.span(), gy.span(), kernel_.grad.span());
  return gx;
}

template <typename T>
std::string Conv2D<T>::describe() const {
  return "conv2d(" + dims2(kh_, kw_) + ", " + std::to_string(cin_) + "->" + std::to_string(cout_) +
         ", stride " + dims2(sh_, sw_) + ")";
}

template <typename T>
DepthwiseConv2D<T>::DepthwiseConv2D(std::string name, std::size_t channels, std::size_t kh,
                                    std::size_t kw, Rng& rng)
    : c_(channels), kh_(kh), kw_(kw),
      kernel_(name + "/depthwise_kernel", Tensor<T>(Shape{kh, kw, channels, 1})) {
  if (kh == 0 || kw == 0 || channels == 0) throw ShapeError("depthwise " + name + ": zero dims");
  init_variance_normal(kernel_.value, 2.0, kh * kw, rng);
}

template <typename T>
Tensor<T> DepthwiseConv2D<T>::predict(const Tensor<T>& x) const {
  if (x.c() != c_) throw ShapeError("depthwise channel mismatch " + x.shape().str());
  Tensor<T> y(x.shape());
  const auto g = kernels::window_geom(x.shape(), kh_, kw_, 1, 1);
  kernels::depthwise_forward<T>(g, x.span(), kernel_.value.span(), y.span());
  return y;
}

template <typename T>
Tensor<T> DepthwiseConv2D<T>::forward(const Tensor<T>& x, Mode) {
  x_ = x;
  return predict(x);
}

template <typename T>
Tensor<T> DepthwiseConv2D<T>::backward(const Tensor<T>& gy) {
  const auto g = kernels::window_geom(x_.shape(), kh_, kw_, 1, 1);
  Tensor<T> gx(x_.shape());
  kernels::depthwise_backward_input<T>(g, gy.span(), kernel_.value.span(), gx.span());
  kernels::depthwise_backward_weight<T>(g, x_.span(), gy.span(), kernel_.grad.span());
  return gx;
}

template <typename T>
std::string DepthwiseConv2D<T>::describe() const {
  return "depthwise(" + dims2(kh_, kw_) + ", " + std::to_string(c_) + ")";
}

// ---------------------------------------------------------------- dense

template <typename T>
Dense<T>::Dense(std::string name, std::size_t in, std::size_t out, Rng& rng, bool bias,
                DenseInit init)
    : in_(in), out_(out), has_bias_(bias),
      weight_(name + "/kernel", Tensor<T>(Shape{1, 1, in, out})),
      bias_(name + "/bias", Tensor<T>(Shape{1, 1, 1, out})) {
  if (in == 0 || out == 0) throw ShapeError("dense " + name + ": zero width");
  switch (init) {
    case DenseInit::VarianceUniformThird:
      init_variance_uniform(weight_.value, 1.0 / 3.0, out, rng);
      if (has_bias_) init_variance_uniform(bias_.value, 1.0 / 3.0, out, rng);
      break;
    case DenseInit::ConvNormal:
      init_variance_normal(weight_.value, 2.0, out, rng);
      break;
    case DenseInit::Zero:
      break;
  }
}

template <typename T>
Shape Dense<T>::output_shape(const Shape& in) const {
  if (in.per_sample() != in_) {
    throw ShapeError("dense expects " + std::to_string(in_) + " features, got " + in.str());
  }
  return {in.n, 1, 1, out_};
}

template <typename T>
Tensor<T> Dense<T>::predict(const Tensor<T>& x) const {
  Tensor<T> y(output_shape(x.shape()));
  std::span<const T> b = has_bias_ ? bias_.value.span() : std::span<const T>{};
  kernels::matmul_forward<T>(x.n(), in_, out_, x.span(), weight_.value.span(), b, y.span());
  return y;
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x, Mode) {
  x_ = x;
  return predict(x);
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& gy) {
  Tensor<T> gx(x_.shape());
  std::span<T> gb = has_bias_ ? bias_.grad.span() : std::span<T>{};
  kernels::matmul_backward<T>(x_.n(), in_, out_, x_.span(), weight_.value.span(), gy.span(),
                              gx.span(), weight_.grad.span(), gb);
  return gx;
}

template <typename T>
void Dense<T>::collect(ParamList<T>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

template <typename T>
std::string Dense<T>::describe() const {
  return "dense(" + std::to_string(in_) + "->" + std::to_string(out_) + (has_bias_ ? "" : ", no bias") +
         ")";
}

// ---------------------------------------------------------------- batch norm

template <typename T>
BatchNorm<T>::BatchNorm(std::string name, std::size_t channels)
    : c_(channels),
      gamma_(name + "/gamma", Tensor<T>(Shape{1, 1, 1, channels}, T(1))),
      beta_(name + "/beta", Tensor<T>(Shape{1, 1, 1, channels}, T(0))),
      mean_(name + "/moving_mean", Tensor<T>(Shape{1, 1, 1, channels}, T(0)), false),
      var_(name + "/moving_variance", Tensor<T>(Shape{1, 1, 1, channels}, T(1)), false) {}

template <typename T>
Tensor<T> BatchNorm<T>::predict(const Tensor<T>& x) const {
  if (x.c() != c_) throw ShapeError("batchnorm channel mismatch " + x.shape().str());
  Tensor<T> y(x.shape());
  std::vector<T> scale(c_), shift(c_);
  for (std::size_t ch = 0; ch < c_; ++ch) {
    const T inv = T(1) / std::sqrt(var_.value[ch] + T(kEpsilon));
    scale[ch] = gamma_.value[ch] * inv;
    shift[ch] = beta_.value[ch] - mean_.value[ch] * scale[ch];
  }
  const std::size_t rows = x.size() / c_;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t ch = 0; ch < c_; ++ch) y[r * c_ + ch] = x[r * c_ + ch] * scale[ch] + shift[ch];
  return y;
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.c() != c_) throw ShapeError("batchnorm channel mismatch " + x.shape().str());
  const std::size_t rows = x.size() / c_;
  inv_std_.assign(c_, T(0));
  xhat_ = Tensor<T>(x.shape());
  if (mode == Mode::Infer) {
    train_cache_ = false;
    for (std::size_t ch = 0; ch < c_; ++ch) inv_std_[ch] = T(1) / std::sqrt(var_.value[ch] + T(kEpsilon));
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t ch = 0; ch < c_; ++ch)
        xhat_[r * c_ + ch] = (x[r * c_ + ch] - mean_.value[ch]) * inv_std_[ch];
  } else {
    train_cache_ = true;
    std::vector<double> mu(c_, 0.0), var(c_, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t ch = 0; ch < c_; ++ch) mu[ch] += x[r * c_ + ch];
    for (auto& m : mu) m /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t ch = 0; ch < c_; ++ch) {
        const double d = x[r * c_ + ch] - mu[ch];
        var[ch] += d * d;
      }
    for (auto& v : var) v /= static_cast<double>(rows);
    for (std::size_t ch = 0; ch < c_; ++ch) {
      inv_std_[ch] = static_cast<T>(1.0 / std::sqrt(var[ch] + kEpsilon));
      mean_.value[ch] = static_cast<T>(kMomentum * mean_.value[ch] + (1.0 - kMomentum) * mu[ch]);
      var_.value[ch] = static_cast<T>(kMomentum * var_.value[ch] + (1.0 - kMomentum) * var[ch]);
    }
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t ch = 0; ch < c_; ++ch)
        xhat_[r * c_ + ch] = static_cast<T>((x[r * c_ + ch] - mu[ch])) * inv_std_[ch];
  }
  Tensor<T> y(x.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t ch = 0; ch < c_; ++ch)
      y[r * c_ + ch] = gamma_.value[ch] * xhat_[r * c_ + ch] + beta_.value[ch];
  return y;
}

template <typename T>
Tensor<T> BatchNorm<T>::backward(const Tensor<T>& gy) {
  const std::size_t rows = gy.size() / c_;
  Tensor<T> gx(gy.shape());
  std::vector<T> sum_g(c_, T(0)), sum_gx(c_, T(0));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t ch = 0; ch < c_; ++ch) {
      sum_g[ch] += gy[r * c_ + ch];
      sum_gx[ch] += gy[r * c_ + ch] * xhat_[r * c_ + ch];
    }
  for (std::size_t ch = 0; ch < c_; ++ch) {
    beta_.grad[ch] += sum_g[ch];
    gamma_.grad[ch] += sum_gx[ch];
  }
  if (!train_cache_) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t ch = 0; ch < c_; ++ch)
        gx[r * c_ + ch] = gy[r * c_ + ch] * gamma_.value[ch] * inv_std_[ch];
    return gx;
  }
  const T n = static_cast<T>(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t ch = 0; ch < c_; ++ch) {
      const T g = gamma_.value[ch];
      gx[r * c_ + ch] = g * inv_std_[ch] / n *
                        (n * gy[r * c_ + ch] - sum_g[ch] - xhat_[r * c_ + ch] * sum_gx[ch]);
    }
  return gx;
}

template <typename T>
void BatchNorm<T>::collect(ParamList<T>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
  out.push_back(&mean_);
  out.push_back(&var_);
}

template <typename T>
std::string BatchNorm<T>::describe() const {
  return "batchnorm(" + std::to_string(c_) + ")";
}

// ---------------------------------------------------------------- pooling

template <typename T>
MaxPool2D<T>::MaxPool2D(std::size_t ph, std::size_t pw, std::size_t sh, std::size_t sw)
    : ph_(ph), pw_(pw), sh_(sh), sw_(sw) {
  if (ph == 0 || pw == 0 || sh == 0 || sw == 0) throw ShapeError("maxpool: zero pool/stride");
}

template <typename T>
Shape MaxPool2D<T>::output_shape(const Shape& in) const {
  const auto g = kernels::window_geom(in, ph_, pw_, sh_, sw_);
  return {in.n, g.oh, g.ow, in.c};
}

template <typename T>
Tensor<T> MaxPool2D<T>::predict(const Tensor<T>& x) const {
  const auto g = kernels::window_geom(x.shape(), ph_, pw_, sh_, sw_);
  Tensor<T> y(Shape{x.n(), g.oh, g.ow, x.c()});
  std::vector<std::uint32_t> am(y.size());
  kernels::maxpool_forward<T>(g, x.span(), y.span(), am);
  return y;
}

template <typename T>
Tensor<T> MaxPool2D<T>::forward(const Tensor<T>& x, Mode) {
  geom_ = kernels::window_geom(x.shape(), ph_, pw_, sh_, sw_);
  Tensor<T> y(Shape{x.n(), geom_.oh, geom_.ow, x.c()});
  argmax_.assign(y.size(), 0);
  kernels::maxpool_forward<T>(geom_, x.span(), y.span(), argmax_);
  return y;
}

template <typename T>
Tensor<T> MaxPool2D<T>::backward(const Tensor<T>& gy) {
  Tensor<T> gx(geom_.in);
  kernels::maxpool_backward<T>(geom_, gy.span(), argmax_, gx.span());
  return gx;
}

template <typename T>
std::string MaxPool2D<T>::describe() const {
  return "maxpool(" + dims2(ph_, pw_) + ", stride " + dims2(sh_, sw_) + ")";
}

template <typename T>
AvgPool2D<T>::AvgPool2D(std::size_t ph, std::size_t pw, std::size_t sh, std::size_t sw)
    : ph_(ph), pw_(pw), sh_(sh), sw_(sw) {
  if (ph == 0 || pw == 0 || sh == 0 || sw == 0) throw ShapeError("avgpool: zero pool/stride");
}

template <typename T>
Shape AvgPool2D<T>::output_shape(const Shape& in) const {
  const auto g = kernels::window_geom(in, ph_, pw_, sh_, sw_);
  return {in.n, g.oh, g.ow, in.c};
}

template <typename T>
Tensor<T> AvgPool2D<T>::predict(const Tensor<T>& x) const {
  const auto g = kernels::window_geom(x.shape(), ph_, pw_, sh_, sw_);
  Tensor<T> y(Shape{x.n(), g.oh, g.ow, x.c()});
  kernels::avgpool_forward<T>(g, x.span(), y.span());
  return y;
}

template <typename T>
Tensor<T> AvgPool2D<T>::forward(const Tensor<T>& x, Mode) {
  geom_ = kernels::window_geom(x.shape(), ph_, pw_, sh_, sw_);
  return predict(x);
}

template <typename T>
Tensor<T> AvgPool2D<T>::backward(const Tensor<T>& gy) {
  Tensor<T> gx(geom_.in);
  kernels::avgpool_backward<T>(geom_, gy.span(), gx.span());
  return gx;
}

template <typename T>
std::string AvgPool2D<T>::describe() const {
  return "avgpool(" + dims2(ph_, pw_) + ", stride " + dims2(sh_, sw_) + ")";
}

template <typename T>
Tensor<T> GlobalMaxPool<T>::predict(const Tensor<T>& x) const {
  Tensor<T> y(Shape{x.n(), 1, 1, x.c()});
  const std::size_t hw = x.h() * x.w();
  for (std::size_t b = 0; b < x.n(); ++b)
    for (std::size_t ch = 0; ch < x.c(); ++ch) {
      T best = -std::numeric_limits<T>::infinity();
      for (std::size_t p = 0; p < hw; ++p) best = std::max(best, x[(b * hw + p) * x.c() + ch]);
      y[b * x.c() + ch] = best;
    }
  return y;
}

template <typename T>
Tensor<T> GlobalMaxPool<T>::forward(const Tensor<T>& x, Mode) {
  in_ = x.shape();
  Tensor<T> y(Shape{x.n(), 1, 1, x.c()});
  argmax_.assign(y.size(), 0);
  const std::size_t hw = x.h() * x.w();
  for (std::size_t b = 0; b < x.n(); ++b)
    for (std::size_t ch = 0; ch < x.c(); ++ch) {
      T best = -std::numeric_limits<T>::infinity();
      std::size_t bi = 0;
      for (std::size_t p = 0; p < hw; ++p) {
        const std::size_t i = (b * hw + p) * x.c() + ch;
        if (x[i] > best) {
          best = x[i];
          bi = i;
        }
      }
      y[b * x.c() + ch] = best;
      argmax_[b * x.c() + ch] = bi;
    }
  return y;
}

template <typename T>
Tensor<T> GlobalMaxPool<T>::backward(const Tensor<T>& gy) {
  Tensor<T> gx(in_);
  for (std::size_t o = 0; o < argmax_.size(); ++o) gx[argmax_[o]] += gy[o];
  return gx;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::predict(const Tensor<T>& x) const {
  Tensor<T> y(Shape{x.n(), 1, 1, x.c()});
  const std::size_t hw = x.h() * x.w();
  for (std::size_t b = 0; b < x.n(); ++b)
    for (std::size_t p = 0; p < hw; ++p)
      for (std::size_t ch = 0; ch < x.c(); ++ch) y[b * x.c() + ch] += x[(b * hw + p) * x.c() + ch];
  for (auto& v : y.vec()) v /= static_cast<T>(hw);
  return y;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x, Mode) {
  in_ = x.shape();
  return predict(x);
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& gy) {
  Tensor<T> gx(in_);
  const std::size_t hw = in_.h * in_.w;
  const T inv = T(1) / static_cast<T>(hw);
  for (std::size_t b = 0; b < in_.n; ++b)
    for (std::size_t p = 0; p < hw; ++p)
      for (std::size_t ch = 0; ch < in_.c; ++ch) gx[(b * hw + p) * in_.c + ch] = gy[b * in_.c + ch] * inv;
  return gx;
}

// ---------------------------------------------------------------- upsample

template <typename T>
Tensor<T> Upsample2D<T>::predict(const Tensor<T>& x) const {
  Tensor<T> y(output_shape(x.shape()));
  for (std::size_t b = 0; b < y.n(); ++b)
    for (std::size_t oy = 0; oy < y.h(); ++oy)
      for (std::size_t ox = 0; ox < y.w(); ++ox) {
        const T* src = &x.at(b, oy / rh_, ox / rw_, 0);
        std::copy(src, src + x.c(), &y.at(b, oy, ox, 0));
      }
  return y;
}

template <typename T>
Tensor<T> Upsample2D<T>::forward(const Tensor<T>& x, Mode) {
  in_ = x.shape();
  return predict(x);
}

template <typename T>
Tensor<T> Upsample2D<T>::backward(const Tensor<T>& gy) {
  Tensor<T> gx(in_);
  for (std::size_t b = 0; b < gy.n(); ++b)
    for (std::size_t oy = 0; oy < gy.h(); ++oy)
      for (std::size_t ox = 0; ox < gy.w(); ++ox)
        for (std::size_t ch = 0; ch < gy.c(); ++ch) gx.at(b, oy / rh_, ox / rw_, ch) += gy.at(b, oy, ox, ch);
  return gx;
}

template <typename T>
std::string Upsample2D<T>::describe() const {
  return "upsample(" + dims2(rh_, rw_) + ")";
}

// ---------------------------------------------------------------- sequential

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> h = x;
  for (auto& l : layers_) h = l->forward(h, mode);
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& gy) {
  Tensor<T> g = gy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

template <typename T>
Tensor<T> Sequential<T>::predict(const Tensor<T>& x) const {
  Tensor<T> h = x;
  for (const auto& l : layers_) h = l->predict(h);
  return h;
}

template <typename T>
Shape Sequential<T>::output_shape(const Shape& in) const {
  Shape s = in;
  for (const auto& l : layers_) s = l->output_shape(s);
  return s;
}

template <typename T>
void Sequential<T>::collect(ParamList<T>& out) {
  for (auto& l : layers_) l->collect(out);
}

template <typename T>
std::string Sequential<T>::describe() const {
  std::string s = "sequential[";
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (i) s += ", ";
    s += layers_[i]->describe();
  }
  return s + "]";
}

// ---------------------------------------------------------------- squeeze-excite

std::size_t se_squeezed_width(double se_rate, std::size_t channels) {
  const double r = std::round(se_rate * static_cast<double>(channels));
  return std::max<std::size_t>(1, static_cast<std::size_t>(r));
}

template <typename T>
SqueezeExcite<T>::SqueezeExcite(std::string name, std::size_t channels, double se_rate, Rng& rng)
    : c_(channels), squeezed_(se_squeezed_width(se_rate, channels)),
      reduce_(name + "/reduce", channels, squeezed_, rng, true, DenseInit::ConvNormal),
      expand_(name + "/expand", squeezed_, channels, rng, true, DenseInit::ConvNormal) {
  if (!(se_rate > 0.0 && se_rate <= 1.0)) throw ShapeError("se_rate must lie in (0, 1]");
}

template <typename T>
Tensor<T> SqueezeExcite<T>::predict(const Tensor<T>& x) const {
  const Tensor<T> g = activate(expand_.predict(activate(reduce_.predict(pool_.predict(x)), Act::Swish)),
                               Act::Sigmoid);
  Tensor<T> y(x.shape());
  const std::size_t hw = x.h() * x.w();
  for (std::size_t b = 0; b < x.n(); ++b)
    for (std::size_t p = 0; p < hw; ++p)
      for (std::size_t ch = 0; ch < c_; ++ch) {
        const std::size_t i = (b * hw + p) * c_ + ch;
        y[i] = x[i] * g[b * c_ + ch];
      }
  return y;
}

template <typename T>
Tensor<T> SqueezeExcite<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.c() != c_) throw ShapeError("squeeze-excite channel mismatch " + x.shape().str());
  x_ = x;
  gate_ = gate_act_.forward(expand_.forward(reduce_act_.forward(reduce_.forward(pool_.forward(x, mode), mode), mode), mode), mode);
  Tensor<T> y(x.shape());
  const std::size_t hw = x.h() * x.w();
  for (std::size_t b = 0; b < x.n(); ++b)
    for (std::size_t p = 0; p < hw; ++p)
      for (std::size_t ch = 0; ch < c_; ++ch) {
        const std::size_t i = (b * hw + p) * c_ + ch;
        y[i] = x[i] * gate_[b * c_ + ch];
      }
  return y;
}

template <typename T>
Tensor<T> SqueezeExcite<T>::backward(const Tensor<T>& gy) {
  const std::size_t hw = x_.h() * x_.w();
  Tensor<T> gx(x_.shape());
  Tensor<T> ggate(gate_.shape());
  for (std::size_t b = 0; b < x_.n(); ++b)
    for (std::size_t p = 0; p < hw; ++p)
      for (std::size_t ch = 0; ch < c_; ++ch) {
        const std::size_t i = (b * hw + p) * c_ + ch;
        gx[i] = gy[i] * gate_[b * c_ + ch];
        ggate[b * c_ + ch] += gy[i] * x_[i];
      }
  const Tensor<T> gpool = pool_.backward(reduce_.backward(reduce_act_.backward(expand_.backward(gate_act_.backward(ggate)))));
  gx += gpool;
  return gx;
}

template <typename T>
void SqueezeExcite<T>::collect(ParamList<T>& out) {
  reduce_.collect(out);
  expand_.collect(out);
}

template <typename T>
std::string SqueezeExcite<T>::describe() const {
  return "se(" + std::to_string(c_) + "->" + std::to_string(squeezed_) + ")";
}

// ---------------------------------------------------------------- MBConv

template <typename T>
MBConv<T>::MBConv(std::string name, const MBConvSpec& spec, Rng& rng) : spec_(spec) {
  if (spec.expansion < 1) throw ShapeError("mbconv expansion must be >= 1");
  if (spec.residual && spec.in_channels != spec.out_channels) {
    throw ResidualShapeError("mbconv " + name + ": residual needs equal in/out channels (" +
                             std::to_string(spec.in_channels) + " vs " +
                             std::to_string(spec.out_channels) + ")");
  }
  const std::size_t expanded = spec.in_channels * spec.expansion;
  if (spec.batchnorm) body_.template emplace<BatchNorm<T>>(name + "/bn", spec.in_channels);
  body_.template emplace<Conv2D<T>>(name + "/expand", spec.in_channels, expanded, 1, 1, rng);
  body_.template emplace<Activation<T>>(Act::Swish);
  body_.template emplace<DepthwiseConv2D<T>>(name + "/dw", expanded, spec.depthwise_kernel,
                                             spec.depthwise_kernel, rng);
  body_.template emplace<Activation<T>>(Act::Swish);
  body_.template emplace<SqueezeExcite<T>>(name + "/se", expanded, spec.se_rate, rng);
  body_.template emplace<Conv2D<T>>(name + "/project", expanded, spec.out_channels, 1, 1, rng);
}

template <typename T>
Shape MBConv<T>::output_shape(const Shape& in) const {
  return body_.output_shape(in);
}

template <typename T>
Tensor<T> MBConv<T>::predict(const Tensor<T>& x) const {
  Tensor<T> y = body_.predict(x);
  if (spec_.residual) y += x;
  return y;
}

template <typename T>
Tensor<T> MBConv<T>::forward(const Tensor<T>& x, Mode mode) {
  if (spec_.residual && x.c() != spec_.out_channels) {
    throw ResidualShapeError("mbconv residual: input " + x.shape().str());
  }
  Tensor<T> y = body_.forward(x, mode);
  if (spec_.residual) y += x;
  return y;
}

template <typename T>
Tensor<T> MBConv<T>::backward(const Tensor<T>& gy) {
  Tensor<T> gx = body_.backward(gy);
  if (spec_.residual) gx += gy;
  return gx;
}

template <typename T>
std::string MBConv<T>::describe() const {
  return "mbconv(" + std::to_string(spec_.in_channels) + "->" + std::to_string(spec_.out_channels) +
         ", e" + std::to_string(spec_.expansion) + ", se " + std::to_string(spec_.se_rate) +
         (spec_.residual ? ", residual" : "") + (spec_.batchnorm ? ", bn" : "") + ")";
}

template <typename T>
std::size_t parameter_count(Layer<T>& layer, bool trainable_only) {
  ParamList<T> ps;
  layer.collect(ps);
  std::size_t n = 0;
  for (auto* p : ps)
    if (!trainable_only || p->trainable) n += p->value.size();
  return n;
}

#define JCAS_LAYERS(T)                                                                \
  template Tensor<T> activate<T>(const Tensor<T>&, Act);                              \
  template void init_variance_uniform<T>(Tensor<T>&, double, std::size_t, Rng&);      \
  template void init_variance_normal<T>(Tensor<T>&, double, std::size_t, Rng&);       \
  template std::size_t parameter_count<T>(Layer<T>&, bool);                           \
  template class Activation<T>;                                                       \
  template class Conv2D<T>;                                                           \
  template class DepthwiseConv2D<T>;                                                  \
  template class Dense<T>;                                                            \
  template class BatchNorm<T>;                                                        \
  template class MaxPool2D<T>;                                                        \
  template class AvgPool2D<T>;                                                        \
  template class GlobalMaxPool<T>;                                                    \
  template class GlobalAvgPool<T>;                                                    \
  template class Upsample2D<T>;                                                       \
  template class Sequential<T>;                                                       \
  template class SqueezeExcite<T>;                                                    \
  template class MBConv<T>;

JCAS_LAYERS(float)
JCAS_LAYERS(double)

}  // namespace jcas::nn

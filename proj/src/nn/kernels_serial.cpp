// Reference kernels: direct loops over output elements, no blocking.

#include <algorithm>
#include <limits>

#include "jcas/nn/kernels.hpp"

namespace jcas::nn::kernels {

SameDim same_dim(std::size_t in, std::size_t window, std::size_t stride) {
  if (in == 0 || window == 0 || stride == 0) throw ShapeError("zero window/stride/input dim");
  const std::size_t out = (in + stride - 1) / stride;
  const std::size_t needed = (out - 1) * stride + window;
  const std::size_t total = needed > in ? needed - in : 0;
  return {out, total / 2};
}

WindowGeom window_geom(const Shape& in, std::size_t kh, std::size_t kw, std::size_t sh,
                       std::size_t sw) {
  const SameDim dy = same_dim(in.h, kh, sh);
  const SameDim dx = same_dim(in.w, kw, sw);
  return WindowGeom{in, kh, kw, sh, sw, dy.out, dx.out, dy.pad_before, dx.pad_before};
}

namespace serial {

namespace {
// Signed input coordinate of window tap k at output position o.
inline long tap(std::size_t o, std::size_t stride, std::size_t k, std::size_t pad) {
  return static_cast<long>(o * stride + k) - static_cast<long>(pad);
}
}  // namespace

template <typename T>
void conv2d_forward(const WindowGeom& g, std::size_t cout, std::span<const T> x,
                    std::span<const T> w, std::span<T> y) {
  const Shape& s = g.in;
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t oy = 0; oy < g.oh; ++oy)
      for (std::size_t ox = 0; ox < g.ow; ++ox)
        for (std::size_t co = 0; co < cout; ++co) {
          T acc = 0;
          for (std::size_t ky = 0; ky < g.kh; ++ky) {
            const long iy = tap(oy, g.sh, ky, g.pt);
            if (iy < 0 || iy >= static_cast<long>(s.h)) continue;
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
              const long ix = tap(ox, g.sw, kx, g.pl);
              if (ix < 0 || ix >= static_cast<long>(s.w)) continue;
              for (std::size_t ci = 0; ci < s.c; ++ci) {
                acc += x[((b * s.h + iy) * s.w + ix) * s.c + ci] *
                       w[((ky * g.kw + kx) * s.c + ci) * cout + co];
              }
            }
          }
          y[((b * g.oh + oy) * g.ow + ox) * cout + co] = acc;
        }
}

template <typename T>
void conv2d_backward_input(const WindowGeom& g, std::size_t cout, std::span<const T> gy,
                           std::span<const T> w, std::span<T> gx) {
  const Shape& s = g.in;
  std::fill(gx.begin(), gx.end(), T(0));
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t oy = 0; oy < g.oh; ++oy)
      for (std::size_t ox = 0; ox < g.ow; ++ox)
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const long iy = tap(oy, g.sh, ky, g.pt);
          if (iy < 0 || iy >= static_cast<long>(s.h)) continue;
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const long ix = tap(ox, g.sw, kx, g.pl);
            if (ix < 0 || ix >= static_cast<long>(s.w)) continue;
            for (std::size_t ci = 0; ci < s.c; ++ci)
              for (std::size_t co = 0; co < cout; ++co)
                gx[((b * s.h + iy) * s.w + ix) * s.c + ci] +=
                    gy[((b * g.oh + oy) * g.ow + ox) * cout + co] *
                    w[((ky * g.kw + kx) * s.c + ci) * cout + co];
          }
        }
}

template <typename T>
void conv2d_backward_weight(const WindowGeom& g, std::size_t cout, std::span<const T> x,
                            std::span<const T> gy, std::span<T> gw) {
  const Shape& s = g.in;
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t oy = 0; oy < g.oh; ++oy)
      for (std::size_t ox = 0; ox < g.ow; ++ox)
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const long iy = tap(oy, g.sh, ky, g.pt);
          if (iy < 0 || iy >= static_cast<long>(s.h)) continue;
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const long ix = tap(ox, g.sw, kx, g.pl);
            if (ix < 0 || ix >= static_cast<long>(s.w)) continue;
            for (std::size_t ci = 0; ci < s.c; ++ci)
              for (std::size_t co = 0; co < cout; ++co)
                gw[((ky * g.kw + kx) * s.c + ci) * cout + co] +=
                    x[((b * s.h + iy) * s.w + ix) * s.c + ci] *
                    gy[((b * g.oh + oy) * g.ow + ox) * cout + co];
          }
        }
}

template <typename T>
void depthwise_forward(const WindowGeom& g, std::span<const T> x, std::span<const T> w,
                       std::span<T> y) {
  const Shape& s = g.in;
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t oy = 0; oy < g.oh; ++oy)
      for (std::size_t ox = 0; ox < g.ow; ++ox)
        for (std::size_t ch = 0; ch < s.c; ++ch) {
          T acc = 0;
          for (std::size_t ky = 0; ky < g.kh; ++ky) {
            const long iy = tap(oy, g.sh, ky, g.pt);
            if (iy < 0 || iy >= static_cast<long>(s.h)) continue;
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
              const long ix = tap(ox, g.sw, kx, g.pl);
              if (ix < 0 || ix >= static_cast<long>(s.w)) continue;
              acc += x[((b * s.h + iy) * s.w + ix) * s.c + ch] * w[(ky * g.kw + kx) * s.c + ch];
            }
          }
          y[((b * g.oh + oy) * g.ow + ox) * s.c + ch] = acc;
        }
}

template <typename T>
void depthwise_backward_input(const WindowGeom& g, std::span<const T> gy, std::span<const T> w,
                              std::span<T> gx) {
  const Shape& s = g.in;
  std::fill(gx.begin(), gx.end(), T(0));
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t oy = 0; oy < g.oh; ++oy)
      for (std::size_t ox = 0; ox < g.ow; ++ox)
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const long iy = tap(oy, g.sh, ky, g.pt);
          if (iy < 0 || iy >= static_cast<long>(s.h)) continue;
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const long ix = tap(ox, g.sw, kx, g.pl);
            if (ix < 0 || ix >= static_cast<long>(s.w)) continue;
            for (std::size_t ch = 0; ch < s.c; ++ch)
              gx[((b * s.h + iy) * s.w + ix) * s.c + ch] +=
                  gy[((b * g.oh + oy) * g.ow + ox) * s.c + ch] * w[(ky * g.kw + kx) * s.c + ch];
          }
        }
}

template <typename T>
void depthwise_backward_weight(const WindowGeom& g, std::span<const T> x, std::span<const T> gy,
                               std::span<T> gw) {
  const Shape& s = g.in;
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t oy = 0; oy < g.oh; ++oy)
      for (std::size_t ox = 0; ox < g.ow; ++ox)
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const long iy = tap(oy, g.sh, ky, g.pt);
          if (iy < 0 || iy >= static_cast<long>(s.h)) continue;
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const long ix = tap(ox, g.sw, kx, g.pl);
            if (ix < 0 || ix >= static_cast<long>(s.w)) continue;
            for (std::size_t ch = 0; ch < s.c; ++ch)
              gw[(ky * g.kw + kx) * s.c + ch] += x[((b * s.h + iy) * s.w + ix) * s.c + ch] *
                                                 gy[((b * g.oh + oy) * g.ow + ox) * s.c + ch];
          }
        }
}

template <typename T>
void maxpool_forward(const WindowGeom& g, std::span<const T> x, std::span<T> y,
                     std::span<std::uint32_t> argmax) {
  const Shape& s = g.in;
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t oy = 0; oy < g.oh; ++oy)
      for (std::size_t ox = 0; ox < g.ow; ++ox)
        for (std::size_t ch = 0; ch < s.c; ++ch) {
          T best = -std::numeric_limits<T>::infinity();
          std::uint32_t best_i = 0;
          for (std::size_t ky = 0; ky < g.kh; ++ky) {
            const long iy = tap(oy, g.sh, ky, g.pt);
            if (iy < 0 || iy >= static_cast<long>(s.h)) continue;
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
              const long ix = tap(ox, g.sw, kx, g.pl);
              if (ix < 0 || ix >= static_cast<long>(s.w)) continue;
              const std::size_t i = ((b * s.h + iy) * s.w + ix) * s.c + ch;
              if (x[i] > best) {
                best = x[i];
                best_i = static_cast<std::uint32_t>(i);
              }
            }
          }
          const std::size_t o = ((b * g.oh + oy) * g.ow + ox) * s.c + ch;
          y[o] = best;
          argmax[o] = best_i;
        }
}

template <typename T>
void maxpool_backward(const WindowGeom& g, std::span<const T> gy,
                      std::span<const std::uint32_t> argmax, std::span<T> gx) {
  std::fill(gx.begin(), gx.end(), T(0));
  const std::size_t count = g.in.n * g.oh * g.ow * g.in.c;
  for (std::size_t o = 0; o < count; ++o) gx[argmax[o]] += gy[o];
}

template <typename T>
void avgpool_forward(const WindowGeom& g, std::span<const T> x, std::span<T> y) {
  const Shape& s = g.in;
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t oy = 0; oy < g.oh; ++oy)
      for (std::size_t ox = 0; ox < g.ow; ++ox)
        for (std::size_t ch = 0; ch < s.c; ++ch) {
          T acc = 0;
          std::size_t cnt = 0;
          for (std::size_t ky = 0; ky < g.kh; ++ky) {
            const long iy = tap(oy, g.sh, ky, g.pt);
            if (iy < 0 || iy >= static_cast<long>(s.h)) continue;
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
              const long ix = tap(ox, g.sw, kx, g.pl);
              if (ix < 0 || ix >= static_cast<long>(s.w)) continue;
              acc += x[((b * s.h + iy) * s.w + ix) * s.c + ch];
              ++cnt;
            }
          }
          y[((b * g.oh + oy) * g.ow + ox) * s.c + ch] = acc / static_cast<T>(cnt);
        }
}

template <typename T>
void avgpool_backward(const WindowGeom& g, std::span<const T> gy, std::span<T> gx) {
  const Shape& s = g.in;
  std::fill(gx.begin(), gx.end(), T(0));
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t oy = 0; oy < g.oh; ++oy)
      for (std::size_t ox = 0; ox < g.ow; ++ox) {
        // Valid tap count is the same for every channel.
        std::size_t cnt = 0;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const long iy = tap(oy, g.sh, ky, g.pt);
          if (iy < 0 || iy >= static_cast<long>(s.h)) continue;
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const long ix = tap(ox, g.sw, kx, g.pl);
            if (ix >= 0 && ix < static_cast<long>(s.w)) ++cnt;
          }
        }
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const long iy = tap(oy, g.sh, ky, g.pt);
          if (iy < 0 || iy >= static_cast<long>(s.h)) continue;
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const long ix = tap(ox, g.sw, kx, g.pl);
            if (ix < 0 || ix >= static_cast<long>(s.w)) continue;
            for (std::size_t ch = 0; ch < s.c; ++ch)
              gx[((b * s.h + iy) * s.w + ix) * s.c + ch] +=
                  gy[((b * g.oh + oy) * g.ow + ox) * s.c + ch] / static_cast<T>(cnt);
          }
        }
      }
}

template <typename T>
void matmul_forward(std::size_t rows, std::size_t in, std::size_t out, std::span<const T> x,
                    std::span<const T> w, std::span<const T> bias, std::span<T> y) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < out; ++o) {
      T acc = 0;
      for (std::size_t i = 0; i < in; ++i) acc += x[r * in + i] * w[i * out + o];
      y[r * out + o] = acc + (bias.empty() ? T(0) : bias[o]);
    }
}

template <typename T>
void matmul_backward(std::size_t rows, std::size_t in, std::size_t out, std::span<const T> x,
                     std::span<const T> w, std::span<const T> gy, std::span<T> gx,
                     std::span<T> gw, std::span<T> gb) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < in; ++i) {
      T acc = 0;
      for (std::size_t o = 0; o < out; ++o) acc += gy[r * out + o] * w[i * out + o];
      gx[r * in + i] = acc;
    }
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < in; ++i)
      for (std::size_t o = 0; o < out; ++o) gw[i * out + o] += x[r * in + i] * gy[r * out + o];
  if (!gb.empty())
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t o = 0; o < out; ++o) gb[o] += gy[r * out + o];
}

#include "kernels_instantiate.inc"

JCAS_INSTANTIATE(float)
JCAS_INSTANTIATE(double)

}  // namespace serial
}  // namespace jcas::nn::kernels

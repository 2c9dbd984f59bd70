// OpenMP kernels. Loops are ordered so the innermost loop runs over the
// contiguous channel axis; parallel regions split over independent outputs.
// Stride-1 convolutions go through im2col and an Eigen matrix product over
// fixed-size row chunks, so the blocking (and rounding) does not depend on
// the thread count.

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>

#include <algorithm>
#include <limits>
#include <vector>

#include "jcas/nn/kernels.hpp"
#include "jcas/util/parallel.hpp"

namespace jcas::nn::kernels::omp {

namespace {

inline long tap(std::size_t o, std::size_t stride, std::size_t k, std::size_t pad) {
  return static_cast<long>(o * stride + k) - static_cast<long>(pad);
}

// Valid tap range [k0, k1) for output position o along one axis.
inline void tap_range(std::size_t o, std::size_t stride, std::size_t pad, std::size_t window,
                      std::size_t in, std::size_t& k0, std::size_t& k1) {
  const long base = static_cast<long>(o * stride) - static_cast<long>(pad);
  const long lo = std::max<long>(0, -base);
  const long hi = std::min<long>(static_cast<long>(window), static_cast<long>(in) - base);
  k0 = static_cast<std::size_t>(lo);
  k1 = hi > lo ? static_cast<std::size_t>(hi) : k0;
}

}  // namespace

template <typename T>
void conv2d_forward_loops(const WindowGeom& g, std::size_t cout, std::span<const T> x,
                    std::span<const T> w, std::span<T> y) {
  const Shape& s = g.in;
  const long rows = static_cast<long>(s.n * g.oh);
#pragma omp parallel for schedule(static) num_threads(jcas::parallel::num_threads())
  for (long r = 0; r < rows; ++r) {
    const std::size_t b = static_cast<std::size_t>(r) / g.oh;
    const std::size_t oy = static_cast<std::size_t>(r) % g.oh;
    std::size_t ky0, ky1;
    tap_range(oy, g.sh, g.pt, g.kh, s.h, ky0, ky1);
    for (std::size_t ox = 0; ox < g.ow; ++ox) {
      T* out = &y[((b * g.oh + oy) * g.ow + ox) * cout];
      std::fill(out, out + cout, T(0));
      std::size_t kx0, kx1;
      tap_range(ox, g.sw, g.pl, g.kw, s.w, kx0, kx1);
      for (std::size_t ky = ky0; ky < ky1; ++ky) {
        const std::size_t iy = static_cast<std::size_t>(tap(oy, g.sh, ky, g.pt));
        for (std::size_t kx = kx0; kx < kx1; ++kx) {
          const std::size_t ix = static_cast<std::size_t>(tap(ox, g.sw, kx, g.pl));
          const T* xp = &x[((b * s.h + iy) * s.w + ix) * s.c];
          const T* wp = &w[(ky * g.kw + kx) * s.c * cout];
          for (std::size_t ci = 0; ci < s.c; ++ci) {
            const T xv = xp[ci];
            const T* wr = wp + ci * cout;
            for (std::size_t co = 0; co < cout; ++co) out[co] += xv * wr[co];
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_input_loops(const WindowGeom& g, std::size_t cout, std::span<const T> gy,
                           std::span<const T> w, std::span<T> gx) {
  const Shape& s = g.in;
  const long rows = static_cast<long>(s.n * s.h);
  // Gather form: every input pixel sums the output taps that read it.
#pragma omp parallel for schedule(static) num_threads(jcas::parallel::num_threads())
  for (long r = 0; r < rows; ++r) {
    const std::size_t b = static_cast<std::size_t>(r) / s.h;
    const std::size_t iy = static_cast<std::size_t>(r) % s.h;
    for (std::size_t ix = 0; ix < s.w; ++ix) {
      T* gxp = &gx[((b * s.h + iy) * s.w + ix) * s.c];
      std::fill(gxp, gxp + s.c, T(0));
      for (std::size_t ky = 0; ky < g.kh; ++ky) {
        const long ny = static_cast<long>(iy + g.pt) - static_cast<long>(ky);
        if (ny < 0 || ny % static_cast<long>(g.sh) != 0) continue;
        const std::size_t oy = static_cast<std::size_t>(ny) / g.sh;
        if (oy >= g.oh) continue;
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          const long nx = static_cast<long>(ix + g.pl) - static_cast<long>(kx);
          if (nx < 0 || nx % static_cast<long>(g.sw) != 0) continue;
          const std::size_t ox = static_cast<std::size_t>(nx) / g.sw;
          if (ox >= g.ow) continue;
          const T* gyp = &gy[((b * g.oh + oy) * g.ow + ox) * cout];
          const T* wp = &w[(ky * g.kw + kx) * s.c * cout];
          for (std::size_t ci = 0; ci < s.c; ++ci) {
            const T* wr = wp + ci * cout;
            T acc = 0;
            for (std::size_t co = 0; co < cout; ++co) acc += gyp[co] * wr[co];
            gxp[ci] += acc;
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_weight_loops(const WindowGeom& g, std::size_t cout, std::span<const T> x,
                            std::span<const T> gy, std::span<T> gw) {
  const Shape& s = g.in;
  const long taps = static_cast<long>(g.kh * g.kw * s.c);
#pragma omp parallel for schedule(static) num_threads(jcas::parallel::num_threads())
  for (long t = 0; t < taps; ++t) {
    const std::size_t ci = static_cast<std::size_t>(t) % s.c;
    const std::size_t kk = static_cast<std::size_t>(t) / s.c;
    const std::size_t ky = kk / g.kw;
    const std::size_t kx = kk % g.kw;
    T* gwr = &gw[((ky * g.kw + kx) * s.c + ci) * cout];
    for (std::size_t b = 0; b < s.n; ++b)
      for (std::size_t oy = 0; oy < g.oh; ++oy) {
        const long iy = tap(oy, g.sh, ky, g.pt);
        if (iy < 0 || iy >= static_cast<long>(s.h)) continue;
        for (std::size_t ox = 0; ox < g.ow; ++ox) {
          const long ix = tap(ox, g.sw, kx, g.pl);
          if (ix < 0 || ix >= static_cast<long>(s.w)) continue;
          const T xv = x[((b * s.h + static_cast<std::size_t>(iy)) * s.w +
                          static_cast<std::size_t>(ix)) * s.c + ci];
          const T* gyp = &gy[((b * g.oh + oy) * g.ow + ox) * cout];
          for (std::size_t co = 0; co < cout; ++co) gwr[co] += xv * gyp[co];
        }
      }
  }
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Rows per im2col chunk: depends only on the patch width.
std::size_t chunk_rows(std::size_t patch) {
  return std::clamp<std::size_t>((std::size_t{1} << 21) / std::max<std::size_t>(patch, 1), 1, 2048);
}

// Patch rows for output positions [r0, r0 + count) of a stride-1 window over
// src (n x h x w x c). Output grid oh x ow; window tap (ky, kx) of output
// (oy, ox) reads src(oy + ky - pt, ox + kx - pl), zero outside. When flip is
// set the taps are stored in reverse order (used for the input gradient).
template <typename T>
void im2col(const T* src, const Shape& s, std::size_t oh, std::size_t ow, std::size_t kh, std::size_t kw,
            long pt, long pl, std::size_t r0, std::size_t count, T* col) {
  const std::size_t patch = kh * kw * s.c;
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t row = r0 + r;
    const std::size_t b = row / (oh * ow);
    const std::size_t oy = (row / ow) % oh;
    const std::size_t ox = row % ow;
    T* out = col + r * patch;
    for (std::size_t ky = 0; ky < kh; ++ky) {
      const long iy = static_cast<long>(oy + ky) - pt;
      for (std::size_t kx = 0; kx < kw; ++kx) {
        T* dst = out + (ky * kw + kx) * s.c;
        const long ix = static_cast<long>(ox + kx) - pl;
        if (iy < 0 || iy >= static_cast<long>(s.h) || ix < 0 || ix >= static_cast<long>(s.w)) {
          std::fill(dst, dst + s.c, T(0));
        } else {
          const T* p = src + ((b * s.h + static_cast<std::size_t>(iy)) * s.w + static_cast<std::size_t>(ix)) * s.c;
          std::copy(p, p + s.c, dst);
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void conv2d_forward(const WindowGeom& g, std::size_t cout, std::span<const T> x, std::span<const T> w,
                    std::span<T> y) {
  if (g.sh != 1 || g.sw != 1) return conv2d_forward_loops<T>(g, cout, x, w, y);
  const Shape& s = g.in;
  const std::size_t patch = g.kh * g.kw * s.c, rows = s.n * g.oh * g.ow, step = chunk_rows(patch);
  const long chunks = static_cast<long>((rows + step - 1) / step);
  Eigen::Map<const RowMat<T>> W(w.data(), static_cast<long>(patch), static_cast<long>(cout));
#pragma omp parallel num_threads(jcas::parallel::num_threads())
  {
    std::vector<T> col(step * patch);
#pragma omp for schedule(static)
    for (long c = 0; c < chunks; ++c) {
      const std::size_t r0 = static_cast<std::size_t>(c) * step, m = std::min(step, rows - r0);
      im2col(x.data(), s, g.oh, g.ow, g.kh, g.kw, static_cast<long>(g.pt), static_cast<long>(g.pl), r0, m,
             col.data());
      Eigen::Map<const RowMat<T>> C(col.data(), static_cast<long>(m), static_cast<long>(patch));
      Eigen::Map<RowMat<T>> Y(y.data() + r0 * cout, static_cast<long>(m), static_cast<long>(cout));
      Y.noalias() = C * W;
    }
  }
}

template <typename T>
void conv2d_backward_input(const WindowGeom& g, std::size_t cout, std::span<const T> gy, std::span<const T> w,
                           std::span<T> gx) {
  if (g.sh != 1 || g.sw != 1) return conv2d_backward_input_loops<T>(g, cout, gy, w, gx);
  const Shape& s = g.in;
  // Correlation of gy with the spatially flipped, channel-transposed kernel.
  const std::size_t patch = g.kh * g.kw * cout;
  std::vector<T> wf(patch * s.c);
  for (std::size_t ky = 0; ky < g.kh; ++ky)
    for (std::size_t kx = 0; kx < g.kw; ++kx)
      for (std::size_t ci = 0; ci < s.c; ++ci)
        for (std::size_t co = 0; co < cout; ++co)
          wf[(((g.kh - 1 - ky) * g.kw + (g.kw - 1 - kx)) * cout + co) * s.c + ci] =
              w[((ky * g.kw + kx) * s.c + ci) * cout + co];
  const Shape gs{s.n, g.oh, g.ow, cout};
  const long pt = static_cast<long>(g.kh - 1) - static_cast<long>(g.pt);
  const long pl = static_cast<long>(g.kw - 1) - static_cast<long>(g.pl);
  const std::size_t rows = s.n * s.h * s.w, step = chunk_rows(patch);
  const long chunks = static_cast<long>((rows + step - 1) / step);
  Eigen::Map<const RowMat<T>> W(wf.data(), static_cast<long>(patch), static_cast<long>(s.c));
#pragma omp parallel num_threads(jcas::parallel::num_threads())
  {
    std::vector<T> col(step * patch);
#pragma omp for schedule(static)
    for (long c = 0; c < chunks; ++c) {
      const std::size_t r0 = static_cast<std::size_t>(c) * step, m = std::min(step, rows - r0);
      im2col(gy.data(), gs, s.h, s.w, g.kh, g.kw, pt, pl, r0, m, col.data());
      Eigen::Map<const RowMat<T>> C(col.data(), static_cast<long>(m), static_cast<long>(patch));
      Eigen::Map<RowMat<T>> X(gx.data() + r0 * s.c, static_cast<long>(m), static_cast<long>(s.c));
      X.noalias() = C * W;
    }
  }
}

template <typename T>
void conv2d_backward_weight(const WindowGeom& g, std::size_t cout, std::span<const T> x, std::span<const T> gy,
                            std::span<T> gw) {
  if (g.sh != 1 || g.sw != 1) return conv2d_backward_weight_loops<T>(g, cout, x, gy, gw);
  const Shape& s = g.in;
  const std::size_t patch = g.kh * g.kw * s.c, rows = s.n * g.oh * g.ow, step = chunk_rows(patch);
  const std::size_t chunks = (rows + step - 1) / step;
  // Per-chunk partial products, summed in chunk order afterwards.
  std::vector<T> partial(chunks * patch * cout);
#pragma omp parallel num_threads(jcas::parallel::num_threads())
  {
    std::vector<T> col(step * patch);
#pragma omp for schedule(static)
    for (long c = 0; c < static_cast<long>(chunks); ++c) {
      const std::size_t r0 = static_cast<std::size_t>(c) * step, m = std::min(step, rows - r0);
      im2col(x.data(), s, g.oh, g.ow, g.kh, g.kw, static_cast<long>(g.pt), static_cast<long>(g.pl), r0, m,
             col.data());
      Eigen::Map<const RowMat<T>> C(col.data(), static_cast<long>(m), static_cast<long>(patch));
      Eigen::Map<const RowMat<T>> G(gy.data() + r0 * cout, static_cast<long>(m), static_cast<long>(cout));
      Eigen::Map<RowMat<T>> P(partial.data() + static_cast<std::size_t>(c) * patch * cout, static_cast<long>(patch),
                              static_cast<long>(cout));
      P.noalias() = C.transpose() * G;
    }
  }
  const std::size_t len = patch * cout;
  for (std::size_t c = 0; c < chunks; ++c)
    for (std::size_t i = 0; i < len; ++i) gw[i] += partial[c * len + i];
}

template <typename T>
void depthwise_forward(const WindowGeom& g, std::span<const T> x, std::span<const T> w,
                       std::span<T> y) {
  const Shape& s = g.in;
  const long rows = static_cast<long>(s.n * g.oh);
#pragma omp parallel for schedule(static) num_threads(jcas::parallel::num_threads())
  for (long r = 0; r < rows; ++r) {
    const std::size_t b = static_cast<std::size_t>(r) / g.oh;
    const std::size_t oy = static_cast<std::size_t>(r) % g.oh;
    std::size_t ky0, ky1;
    tap_range(oy, g.sh, g.pt, g.kh, s.h, ky0, ky1);
    for (std::size_t ox = 0; ox < g.ow; ++ox) {
      T* out = &y[((b * g.oh + oy) * g.ow + ox) * s.c];
      std::fill(out, out + s.c, T(0));
      std::size_t kx0, kx1;
      tap_range(ox, g.sw, g.pl, g.kw, s.w, kx0, kx1);
      for (std::size_t ky = ky0; ky < ky1; ++ky) {
        const std::size_t iy = static_cast<std::size_t>(tap(oy, g.sh, ky, g.pt));
        for (std::size_t kx = kx0; kx < kx1; ++kx) {
          const std::size_t ix = static_cast<std::size_t>(tap(ox, g.sw, kx, g.pl));
          const T* xp = &x[((b * s.h + iy) * s.w + ix) * s.c];
          const T* wp = &w[(ky * g.kw + kx) * s.c];
          for (std::size_t ch = 0; ch < s.c; ++ch) out[ch] += xp[ch] * wp[ch];
        }
      }
    }
  }
}

template <typename T>
void depthwise_backward_input(const WindowGeom& g, std::span<const T> gy, std::span<const T> w,
                              std::span<T> gx) {
  const Shape& s = g.in;
  const long rows = static_cast<long>(s.n * s.h);
#pragma omp parallel for schedule(static) num_threads(jcas::parallel::num_threads())
  for (long r = 0; r < rows; ++r) {
    const std::size_t b = static_cast<std::size_t>(r) / s.h;
    const std::size_t iy = static_cast<std::size_t>(r) % s.h;
    for (std::size_t ix = 0; ix < s.w; ++ix) {
      T* gxp = &gx[((b * s.h + iy) * s.w + ix) * s.c];
      std::fill(gxp, gxp + s.c, T(0));
      for (std::size_t ky = 0; ky < g.kh; ++ky) {
        const long ny = static_cast<long>(iy + g.pt) - static_cast<long>(ky);
        if (ny < 0 || ny % static_cast<long>(g.sh) != 0) continue;
        const std::size_t oy = static_cast<std::size_t>(ny) / g.sh;
        if (oy >= g.oh) continue;
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          const long nx = static_cast<long>(ix + g.pl) - static_cast<long>(kx);
          if (nx < 0 || nx % static_cast<long>(g.sw) != 0) continue;
          const std::size_t ox = static_cast<std::size_t>(nx) / g.sw;
          if (ox >= g.ow) continue;
          const T* gyp = &gy[((b * g.oh + oy) * g.ow + ox) * s.c];
          const T* wp = &w[(ky * g.kw + kx) * s.c];
          for (std::size_t ch = 0; ch < s.c; ++ch) gxp[ch] += gyp[ch] * wp[ch];
        }
      }
    }
  }
}

template <typename T>
void depthwise_backward_weight(const WindowGeom& g, std::span<const T> x, std::span<const T> gy,
                               std::span<T> gw) {
  const Shape& s = g.in;
  const long taps = static_cast<long>(g.kh * g.kw);
#pragma omp parallel for schedule(static) num_threads(jcas::parallel::num_threads())
  for (long t = 0; t < taps; ++t) {
    const std::size_t ky = static_cast<std::size_t>(t) / g.kw;
    const std::size_t kx = static_cast<std::size_t>(t) % g.kw;
    T* gwr = &gw[(ky * g.kw + kx) * s.c];
    for (std::size_t b = 0; b < s.n; ++b)
      for (std::size_t oy = 0; oy < g.oh; ++oy) {
        const long iy = tap(oy, g.sh, ky, g.pt);
        if (iy < 0 || iy >= static_cast<long>(s.h)) continue;
        for (std::size_t ox = 0; ox < g.ow; ++ox) {
          const long ix = tap(ox, g.sw, kx, g.pl);
          if (ix < 0 || ix >= static_cast<long>(s.w)) continue;
          const T* xp = &x[((b * s.h + static_cast<std::size_t>(iy)) * s.w +
                            static_cast<std::size_t>(ix)) * s.c];
          const T* gyp = &gy[((b * g.oh + oy) * g.ow + ox) * s.c];
          for (std::size_t ch = 0; ch < s.c; ++ch) gwr[ch] += xp[ch] * gyp[ch];
        }
      }
  }
}

template <typename T>
void maxpool_forward(const WindowGeom& g, std::span<const T> x, std::span<T> y,
                     std::span<std::uint32_t> argmax) {
  const Shape& s = g.in;
  const long rows = static_cast<long>(s.n * g.oh);
#pragma omp parallel for schedule(static) num_threads(jcas::parallel::num_threads())
  for (long r = 0; r < rows; ++r) {
    const std::size_t b = static_cast<std::size_t>(r) / g.oh;
    const std::size_t oy = static_cast<std::size_t>(r) % g.oh;
    std::size_t ky0, ky1;
    tap_range(oy, g.sh, g.pt, g.kh, s.h, ky0, ky1);
    for (std::size_t ox = 0; ox < g.ow; ++ox) {
      const std::size_t o = ((b * g.oh + oy) * g.ow + ox) * s.c;
      T* out = &y[o];
      std::uint32_t* am = &argmax[o];
      std::fill(out, out + s.c, -std::numeric_limits<T>::infinity());
      std::fill(am, am + s.c, 0u);
      std::size_t kx0, kx1;
      tap_range(ox, g.sw, g.pl, g.kw, s.w, kx0, kx1);
      for (std::size_t ky = ky0; ky < ky1; ++ky) {
        const std::size_t iy = static_cast<std::size_t>(tap(oy, g.sh, ky, g.pt));
        for (std::size_t kx = kx0; kx < kx1; ++kx) {
          const std::size_t ix = static_cast<std::size_t>(tap(ox, g.sw, kx, g.pl));
          const std::size_t base = ((b * s.h + iy) * s.w + ix) * s.c;
          for (std::size_t ch = 0; ch < s.c; ++ch) {
            if (x[base + ch] > out[ch]) {
              out[ch] = x[base + ch];
              am[ch] = static_cast<std::uint32_t>(base + ch);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void maxpool_backward(const WindowGeom& g, std::span<const T> gy,
                      std::span<const std::uint32_t> argmax, std::span<T> gx) {
  // Windows may overlap, so scatter per sample; samples are independent.
  const Shape& s = g.in;
  const std::size_t per_out = g.oh * g.ow * s.c;
  const std::size_t per_in = s.per_sample();
  const long n = static_cast<long>(s.n);
#pragma omp parallel for schedule(static) num_threads(jcas::parallel::num_threads())
  for (long b = 0; b < n; ++b) {
    const std::size_t ub = static_cast<std::size_t>(b);
    std::fill(gx.begin() + static_cast<std::ptrdiff_t>(ub * per_in),
              gx.begin() + static_cast<std::ptrdiff_t>((ub + 1) * per_in), T(0));
    for (std::size_t o = ub * per_out; o < (ub + 1) * per_out; ++o) gx[argmax[o]] += gy[o];
  }
}

template <typename T>
void avgpool_forward(const WindowGeom& g, std::span<const T> x, std::span<T> y) {
  const Shape& s = g.in;
  const long rows = static_cast<long>(s.n * g.oh);
#pragma omp parallel for schedule(static) num_threads(jcas::parallel::num_threads())
  for (long r = 0; r < rows; ++r) {
    const std::size_t b = static_cast<std::size_t>(r) / g.oh;
    const std::size_t oy = static_cast<std::size_t>(r) % g.oh;
    std::size_t ky0, ky1;
    tap_range(oy, g.sh, g.pt, g.kh, s.h, ky0, ky1);
    for (std::size_t ox = 0; ox < g.ow; ++ox) {
      T* out = &y[((b * g.oh + oy) * g.ow + ox) * s.c];
      std::fill(out, out + s.c, T(0));
      std::size_t kx0, kx1;
      tap_range(ox, g.sw, g.pl, g.kw, s.w, kx0, kx1);
      for (std::size_t ky = ky0; ky < ky1; ++ky) {
        const std::size_t iy = static_cast<std::size_t>(tap(oy, g.sh, ky, g.pt));
        for (std::size_t kx = kx0; kx < kx1; ++kx) {
          const std::size_t ix = static_cast<std::size_t>(tap(ox, g.sw, kx, g.pl));
          const T* xp = &x[((b * s.h + iy) * s.w + ix) * s.c];
          for (std::size_t ch = 0; ch < s.c; ++ch) out[ch] += xp[ch];
        }
      }
      const T cnt = static_cast<T>((ky1 - ky0) * (kx1 - kx0));
      for (std::size_t ch = 0; ch < s.c; ++ch) out[ch] /= cnt;
    }
  }
}

template <typename T>
void avgpool_backward(const WindowGeom& g, std::span<const T> gy, std::span<T> gx) {
  const Shape& s = g.in;
  const std::size_t per_in = s.per_sample();
  const long n = static_cast<long>(s.n);
#pragma omp parallel for schedule(static) num_threads(jcas::parallel::num_threads())
  for (long sb = 0; sb < n; ++sb) {
    const std::size_t b = static_cast<std::size_t>(sb);
    std::fill(gx.begin() + static_cast<std::ptrdiff_t>(b * per_in),
              gx.begin() + static_cast<std::ptrdiff_t>((b + 1) * per_in), T(0));
    for (std::size_t oy = 0; oy < g.oh; ++oy) {
      std::size_t ky0, ky1;
      tap_range(oy, g.sh, g.pt, g.kh, s.h, ky0, ky1);
      for (std::size_t ox = 0; ox < g.ow; ++ox) {
        std::size_t kx0, kx1;
        tap_range(ox, g.sw, g.pl, g.kw, s.w, kx0, kx1);
        const T cnt = static_cast<T>((ky1 - ky0) * (kx1 - kx0));
        const T* gyp = &gy[((b * g.oh + oy) * g.ow + ox) * s.c];
        for (std::size_t ky = ky0; ky < ky1; ++ky) {
          const std::size_t iy = static_cast<std::size_t>(tap(oy, g.sh, ky, g.pt));
          for (std::size_t kx = kx0; kx < kx1; ++kx) {
            const std::size_t ix = static_cast<std::size_t>(tap(ox, g.sw, kx, g.pl));
            T* gxp = &gx[((b * s.h + iy) * s.w + ix) * s.c];
            for (std::size_t ch = 0; ch < s.c; ++ch) gxp[ch] += gyp[ch] / cnt;
          }
        }
      }
    }
  }
}

template <typename T>
void matmul_forward(std::size_t rows, std::size_t in, std::size_t out, std::span<const T> x,
                    std::span<const T> w, std::span<const T> bias, std::span<T> y) {
  const long nr = static_cast<long>(rows);
#pragma omp parallel for schedule(static) num_threads(jcas::parallel::num_threads())
  for (long sr = 0; sr < nr; ++sr) {
    const std::size_t r = static_cast<std::size_t>(sr);
    T* yr = &y[r * out];
    std::fill(yr, yr + out, T(0));
    for (std::size_t i = 0; i < in; ++i) {
      const T xv = x[r * in + i];
      const T* wr = &w[i * out];
      for (std::size_t o = 0; o < out; ++o) yr[o] += xv * wr[o];
    }
    if (!bias.empty())
      for (std::size_t o = 0; o < out; ++o) yr[o] += bias[o];
  }
}

template <typename T>
void matmul_backward(std::size_t rows, std::size_t in, std::size_t out, std::span<const T> x,
                     std::span<const T> w, std::span<const T> gy, std::span<T> gx,
                     std::span<T> gw, std::span<T> gb) {
  const long nr = static_cast<long>(rows);
  const long ni = static_cast<long>(in);
#pragma omp parallel num_threads(jcas::parallel::num_threads())
  {
#pragma omp for schedule(static)
    for (long sr = 0; sr < nr; ++sr) {
      const std::size_t r = static_cast<std::size_t>(sr);
      const T* gyr = &gy[r * out];
      for (std::size_t i = 0; i < in; ++i) {
        const T* wr = &w[i * out];
        T acc = 0;
        for (std::size_t o = 0; o < out; ++o) acc += gyr[o] * wr[o];
        gx[r * in + i] = acc;
      }
    }
#pragma omp for schedule(static)
    for (long si = 0; si < ni; ++si) {
      const std::size_t i = static_cast<std::size_t>(si);
      T* gwr = &gw[i * out];
      for (std::size_t r = 0; r < rows; ++r) {
        const T xv = x[r * in + i];
        const T* gyr = &gy[r * out];
        for (std::size_t o = 0; o < out; ++o) gwr[o] += xv * gyr[o];
      }
    }
  }
  if (!gb.empty())
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t o = 0; o < out; ++o) gb[o] += gy[r * out + o];
}

#include "kernels_instantiate.inc"

JCAS_INSTANTIATE(float)
JCAS_INSTANTIATE(double)

}  // namespace jcas::nn::kernels::omp

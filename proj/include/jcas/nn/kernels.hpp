#pragma once

// Compute kernels behind the layers. Two implementations share every
// signature:
//   serial::  plain nested loops, kept as the reference for tests/benchmarks
//   omp::     restructured loops parallelised with OpenMP
// Each output element of an omp:: kernel is produced by exactly one thread
// with a fixed summation order, so results do not depend on the thread count.
// The free functions in jcas::nn::kernels dispatch to omp::.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "jcas/nn/tensor.hpp"

namespace jcas::nn::kernels {

// TensorFlow-style "same" padding: out = ceil(in / stride), the extra padding
// cell (if the total is odd) goes after.
struct SameDim {
  std::size_t out;
  std::size_t pad_before;
};
SameDim same_dim(std::size_t in, std::size_t window, std::size_t stride);

struct WindowGeom {
  Shape in;
  std::size_t kh, kw;   // window (kernel or pool) size
  std::size_t sh, sw;   // stride
  std::size_t oh, ow;   // output spatial dims
  std::size_t pt, pl;   // top/left padding
};
WindowGeom window_geom(const Shape& in, std::size_t kh, std::size_t kw, std::size_t sh,
                       std::size_t sw);

// Convolution weights are laid out (kh, kw, cin, cout); depthwise weights (kh, kw, c).
#define JCAS_KERNEL_DECLS                                                                      \
  template <typename T>                                                                        \
  void conv2d_forward(const WindowGeom& g, std::size_t cout, std::span<const T> x,             \
                      std::span<const T> w, std::span<T> y);                                   \
  template <typename T>                                                                        \
  void conv2d_backward_input(const WindowGeom& g, std::size_t cout, std::span<const T> gy,     \
                             std::span<const T> w, std::span<T> gx);                           \
  template <typename T>                                                                        \
  void conv2d_backward_weight(const WindowGeom& g, std::size_t cout, std::span<const T> x,     \
                              std::span<const T> gy, std::span<T> gw);                         \
  template <typename T>                                                                        \
  void depthwise_forward(const WindowGeom& g, std::span<const T> x, std::span<const T> w,      \
                         std::span<T> y);                                                      \
  template <typename T>                                                                        \
  void depthwise_backward_input(const WindowGeom& g, std::span<const T> gy,                    \
                                std::span<const T> w, std::span<T> gx);                        \
  template <typename T>                                                                        \
  void depthwise_backward_weight(const WindowGeom& g, std::span<const T> x,                    \
                                 std::span<const T> gy, std::span<T> gw);                      \
  template <typename T>                                                                        \
  void maxpool_forward(const WindowGeom& g, std::span<const T> x, std::span<T> y,              \
                       std::span<std::uint32_t> argmax);                                       \
  template <typename T>                                                                        \
  void maxpool_backward(const WindowGeom& g, std::span<const T> gy,                            \
                        std::span<const std::uint32_t> argmax, std::span<T> gx);               \
  template <typename T>                                                                        \
  void avgpool_forward(const WindowGeom& g, std::span<const T> x, std::span<T> y);             \
  template <typename T>                                                                        \
  void avgpool_backward(const WindowGeom& g, std::span<const T> gy, std::span<T> gx);          \
  template <typename T>                                                                        \
  void matmul_forward(std::size_t rows, std::size_t in, std::size_t out, std::span<const T> x, \
                      std::span<const T> w, std::span<const T> bias, std::span<T> y);          \
  template <typename T>                                                                        \
  void matmul_backward(std::size_t rows, std::size_t in, std::size_t out,                      \
                       std::span<const T> x, std::span<const T> w, std::span<const T> gy,      \
                       std::span<T> gx, std::span<T> gw, std::span<T> gb);

// gx outputs are overwritten; gw/gb outputs are accumulated into.
namespace serial {
JCAS_KERNEL_DECLS
}
namespace omp {
JCAS_KERNEL_DECLS
}
using namespace omp;

#undef JCAS_KERNEL_DECLS

}  // namespace jcas::nn::kernels

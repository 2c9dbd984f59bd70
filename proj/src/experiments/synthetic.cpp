#include "jcas/experiments/synthetic.hpp"

#include <algorithm>
#include <random>

namespace jcas::experiments {

TensorSet banded_set(std::size_t n, std::size_t classes, std::size_t b, std::size_t t, std::size_t a,
                     std::uint64_t seed) {
  if (classes == 0 || b < classes) throw std::invalid_argument("need at least one Doppler row per class");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> noise(0.0f, 0.3f);
  std::bernoulli_distribution lit(0.5);
  TensorSet s;
  s.classes = classes;
  for (std::size_t i = 0; i < n; ++i) {
    const int k = int(i % classes);
    Tensor x(nn::Shape{1, b, t, a});
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = noise(rng);
    const std::size_t lo = std::size_t(k) * b / classes, hi = (std::size_t(k) + 1) * b / classes;
    for (std::size_t col = 0; col < t; ++col) {
      if (!lit(rng)) continue;
      for (std::size_t row = lo; row < hi; ++row)
        for (std::size_t ch = 0; ch < a; ++ch) x.at(0, row, col, ch) = 1.0f;
    }
    s.add(std::move(x), k);
  }
  return s;
}

TensorSet dot_pair_set(std::size_t n, std::size_t b, std::size_t t, std::size_t gap, std::size_t pairs,
                       std::uint64_t seed) {
  if (gap + 1 > b || t < 2) throw std::invalid_argument("map too small for dot pairs");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> noise(0.0f, 0.05f);
  std::uniform_int_distribution<std::size_t> row(0, b - gap - 1), col(0, t - 2);
  TensorSet s;
  s.classes = 2;
  for (std::size_t i = 0; i < n; ++i) {
    const int k = int(i % 2);
    Tensor x(nn::Shape{1, b, t, 1});
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = noise(rng);
    for (std::size_t p = 0; p < pairs; ++p) {
      const std::size_t r = row(rng), c = col(rng);
      x.at(0, r, c, 0) = 1.0f;
      x.at(0, r + gap, c + std::size_t(k), 0) = 1.0f;
    }
    s.add(std::move(x), k);
  }
  return s;
}

}  // namespace jcas::experiments

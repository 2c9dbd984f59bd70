#include "jcas/experiments/metrics.hpp"

#include <algorithm>
#include <string>

namespace jcas::experiments {

Confusion Confusion::from_pairs(std::size_t classes, const std::vector<int>& truth, const std::vector<int>& pred) {
  if (truth.size() != pred.size()) throw std::invalid_argument("truth and prediction counts differ");
  Confusion c(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || pred[i] < 0 || std::size_t(truth[i]) >= classes || std::size_t(pred[i]) >= classes)
      throw std::invalid_argument("label out of range at " + std::to_string(i));
    ++c.at(std::size_t(truth[i]), std::size_t(pred[i]));
  }
  return c;
}

long Confusion::total() const {
  long s = 0;
  for (long v : cells) s += v;
  return s;
}

long Confusion::trace() const {
  long s = 0;
  for (std::size_t i = 0; i < n; ++i) s += at(i, i);
  return s;
}

namespace {

void check(const Confusion& c) {
  if (c.cells.size() != c.n * c.n) throw std::invalid_argument("confusion matrix is not square");
  if (std::any_of(c.cells.begin(), c.cells.end(), [](long v) { return v < 0; }))
    throw std::invalid_argument("negative confusion entry");
  if (c.total() <= 0) throw std::invalid_argument("empty confusion matrix");
}

}  // namespace

double chance_agreement(const Confusion& c) {
  check(c);
  const double total = double(c.total());
  double pe = 0;
  for (std::size_t k = 0; k < c.n; ++k) {
    double row = 0, col = 0;
    for (std::size_t j = 0; j < c.n; ++j) {
      row += double(c.at(k, j));
      col += double(c.at(j, k));
    }
    pe += (row / total) * (col / total);
  }
  return pe;
}

double accuracy(const Confusion& c) {
  check(c);
  return double(c.trace()) / double(c.total());
}

// Evaluated in integers as (N * trace - S) / (N^2 - S), S = sum of row times
// column totals, so a diagonal matrix gives exactly 1 and a uniform one 0.
double cohen_kappa_strict(const Confusion& c) {
  check(c);
  using wide = __int128;
  const wide total = c.total();
  wide s = 0;
  for (std::size_t k = 0; k < c.n; ++k) {
    wide row = 0, col = 0;
    for (std::size_t j = 0; j < c.n; ++j) {
      row += c.at(k, j);
      col += c.at(j, k);
    }
    s += row * col;
  }
  const wide den = total * total - s;
  if (den <= 0) throw DegenerateMarginals("chance agreement is 1");
  const wide num = total * wide(c.trace()) - s;
  return std::clamp(static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den)), -1.0, 1.0);
}

double cohen_kappa(const Confusion& c) {
  try {
    return cohen_kappa_strict(c);
  } catch (const DegenerateMarginals&) {
    return 0.0;
  }
}

Metrics make_metrics(double loss, std::size_t classes, const std::vector<int>& truth, const std::vector<int>& pred) {
  Metrics m;
  m.loss = loss;
  m.confusion = Confusion::from_pairs(classes, truth, pred);
  if (!truth.empty()) {
    m.accuracy = accuracy(m.confusion);
    m.kappa = cohen_kappa(m.confusion);
  }
  return m;
}

}  // namespace jcas::experiments

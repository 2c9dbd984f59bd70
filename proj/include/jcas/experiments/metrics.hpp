#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace jcas::experiments {

class DegenerateMarginals : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Rows are true classes, columns predictions.
struct Confusion {
  std::size_t n = 0;
  std::vector<long> cells;  // n x n, row-major

  explicit Confusion(std::size_t classes = 0) : n(classes), cells(classes * classes, 0) {}
  static Confusion from_pairs(std::size_t classes, const std::vector<int>& truth, const std::vector<int>& pred);
  long& at(std::size_t t, std::size_t p) { return cells[t * n + p]; }
  long at(std::size_t t, std::size_t p) const { return cells[t * n + p]; }
  long total() const;
  long trace() const;
};

// (p_o - p_e) / (1 - p_e) with p_e the sum of marginal products. Throws
// std::invalid_argument on an empty or negative matrix and
// DegenerateMarginals when p_e = 1.
double cohen_kappa_strict(const Confusion& c);
// Same, but p_e = 1 gives 0.
double cohen_kappa(const Confusion& c);

double accuracy(const Confusion& c);
// Agreement expected by chance from the marginals.
double chance_agreement(const Confusion& c);

struct Metrics {
  double loss = 0;
  double accuracy = 0;
  double kappa = 0;
  Confusion confusion;
};

Metrics make_metrics(double loss, std::size_t classes, const std::vector<int>& truth, const std::vector<int>& pred);

}  // namespace jcas::experiments

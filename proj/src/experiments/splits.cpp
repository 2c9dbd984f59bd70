#include "jcas/experiments/splits.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

namespace jcas::experiments {

void SplitSpec::validate() const {
  if (train < 0 || val < 0 || test < 0) throw std::invalid_argument("split fractions must be non-negative");
  if (std::abs(train + val + test - 1.0) > 1e-9)
    throw std::invalid_argument(fmt::format("split fractions sum to {}, not 1", train + val + test));
  if (folds < 2) throw std::invalid_argument("at least 2 folds are needed");
}

std::vector<std::size_t> largest_remainder(std::size_t n, const std::vector<double>& fractions) {
  std::vector<std::size_t> out(fractions.size());
  std::vector<double> rem(fractions.size());
  std::size_t used = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double q = fractions[i] * double(n);
    // Guard against 0.29 * 100 = 28.999999999999996.
    const double f = std::floor(q + 1e-9);
    out[i] = std::size_t(f);
    rem[i] = q - f;
    used += out[i];
  }
  std::vector<std::size_t> order(fractions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b] + 1e-12; });
  for (std::size_t k = 0; used < n; ++k, ++used) ++out[order[k % order.size()]];
  return out;
}

Split split_dataset(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  if (n == 0) throw EmptyDataset("cannot split an empty dataset");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(spec.seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto sizes = largest_remainder(n, {spec.train, spec.val, spec.test});
  Split s;
  s.train.assign(idx.begin(), idx.begin() + long(sizes[0]));
  s.val.assign(idx.begin() + long(sizes[0]), idx.begin() + long(sizes[0] + sizes[1]));
  s.test.assign(idx.begin() + long(sizes[0] + sizes[1]), idx.end());
  return s;
}

FoldAssignment kfold_domains(const std::vector<int>& record_domains, std::size_t folds, std::uint64_t seed) {
  if (record_domains.empty()) throw EmptyDataset("no records to assign to folds");
  if (folds < 2) throw std::invalid_argument("at least 2 folds are needed");
  std::vector<int> domains = record_domains;
  std::sort(domains.begin(), domains.end());
  domains.erase(std::unique(domains.begin(), domains.end()), domains.end());
  if (domains.size() < folds)
    throw TooFewDomains(fmt::format("{} distinct domains cannot fill {} folds", domains.size(), folds));
  std::mt19937_64 rng(seed);
  std::shuffle(domains.begin(), domains.end(), rng);
  FoldAssignment fa;
  fa.fold_domains.resize(folds);
  std::vector<std::pair<int, int>> fold_of;  // (domain, fold), sorted by domain
  for (std::size_t i = 0; i < domains.size(); ++i) {
    fa.fold_domains[i % folds].push_back(domains[i]);
    fold_of.emplace_back(domains[i], int(i % folds));
  }
  std::sort(fold_of.begin(), fold_of.end());
  fa.record_fold.reserve(record_domains.size());
  for (int d : record_domains) {
    auto it = std::lower_bound(fold_of.begin(), fold_of.end(), std::make_pair(d, -1));
    fa.record_fold.push_back(it->second);
  }
  return fa;
}

std::vector<std::size_t> fold_members(const FoldAssignment& fa, int fold, bool inside) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fa.record_fold.size(); ++i)
    if ((fa.record_fold[i] == fold) == inside) out.push_back(i);
  return out;
}

TuningSplit tuning_split(const std::vector<int>& record_domains, const SplitSpec& spec) {
  spec.validate();
  TuningSplit ts;
  if (spec.order == SplitOrder::RecordsFirst) {
    const Split s = split_dataset(record_domains.size(), spec);
    std::vector<int> train_domains;
    for (std::size_t i : s.train) train_domains.push_back(record_domains[i]);
    const FoldAssignment fa = kfold_domains(train_domains, spec.folds, spec.seed);
    for (std::size_t j = 0; j < s.train.size(); ++j) (fa.record_fold[j] == 0 ? ts.val : ts.train).push_back(s.train[j]);
    ts.test = s.test;
  } else {
    const FoldAssignment fa = kfold_domains(record_domains, spec.folds, spec.seed);
    ts.val = fold_members(fa, 0, true);
    const std::vector<std::size_t> rest = fold_members(fa, 0, false);
    const Split s = split_dataset(rest.size(), spec);
    // The remaining records' validation share is unused while tuning.
    for (std::size_t i : s.train) ts.train.push_back(rest[i]);
    for (std::size_t i : s.test) ts.test.push_back(rest[i]);
  }
  return ts;
}

}  // namespace jcas::experiments

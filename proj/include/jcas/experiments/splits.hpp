#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace jcas::experiments {

class EmptyDataset : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};
class TooFewDomains : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Which comes first when deriving the tuning split.
enum class SplitOrder {
  RecordsFirst,  // record-level train/val/test, then domain folds inside train
  FoldsFirst,    // domain folds over everything, then train/val/test outside fold 0
};

struct SplitSpec {
  double train = 0.69, val = 0.14, test = 0.17;
  std::size_t folds = 6;
  std::uint64_t seed = 42;
  SplitOrder order = SplitOrder::RecordsFirst;
  void validate() const;
};

// Record indices per subset.
struct Split {
  std::vector<std::size_t> train, val, test;
};

// Subset sizes by largest remainder; ties go to the earlier subset.
std::vector<std::size_t> largest_remainder(std::size_t n, const std::vector<double>& fractions);

// Shuffles 0..n-1 with the split seed and cuts it by largest remainder.
Split split_dataset(std::size_t n, const SplitSpec& spec);

struct FoldAssignment {
  std::vector<int> record_fold;                // per input record
  std::vector<std::vector<int>> fold_domains;  // domain labels per fold, in dealing order
};

// Distinct domain labels (sorted) are shuffled with the seed and dealt
// round-robin into folds; each record follows its domain.
FoldAssignment kfold_domains(const std::vector<int>& record_domains, std::size_t folds, std::uint64_t seed);

// Indices of records in / not in one fold.
std::vector<std::size_t> fold_members(const FoldAssignment& fa, int fold, bool inside);

// Train / validation indices (into the full record list) used while tuning:
// fold 0 of the domain folds is the validation set. The test subset is never
// touched.
struct TuningSplit {
  std::vector<std::size_t> train, val, test;
};
TuningSplit tuning_split(const std::vector<int>& record_domains, const SplitSpec& spec);

}  // namespace jcas::experiments

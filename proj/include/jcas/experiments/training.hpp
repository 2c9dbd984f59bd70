#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "jcas/experiments/metrics.hpp"
#include "jcas/experiments/splits.hpp"
#include "jcas/models/model.hpp"
#include "jcas/preprocess/pipeline.hpp"

namespace jcas::experiments {

using Tensor = nn::Tensor<float>;
using Model = models::Model<float>;

// Labelled single-sample tensors (1, B, T, A) with their domain ids.
struct TensorSet {
  std::size_t classes = 0;
  std::vector<Tensor> x;
  std::vector<int> y;
  std::vector<int> domain;

  std::size_t size() const { return x.size(); }
  nn::Shape sample_shape() const;
  void add(Tensor t, int label, int domain_id = 0);
};

TensorSet to_tensor_set(const std::vector<preprocess::DfsFrame>& frames, std::size_t classes,
                        const std::vector<int>& domains = {});

// Non-owning selection of samples from a TensorSet.
struct DataView {
  const TensorSet* set = nullptr;
  std::vector<std::size_t> index;

  DataView() = default;
  DataView(const TensorSet& s, std::vector<std::size_t> idx) : set(&s), index(std::move(idx)) {}
  static DataView all(const TensorSet& s);
  std::size_t size() const { return index.size(); }
  std::vector<const Tensor*> samples() const;
  std::vector<int> labels() const;
};

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch = 12;
  std::size_t max_epochs = 100;
  std::size_t patience = 5;
  double min_delta = 0.0;
  std::uint64_t seed = 42;
  bool restore_best = true;
  void validate() const;
};

// Stops after `patience` consecutive epochs whose loss is not below
// best - min_delta.
class EarlyStopper {
 public:
  EarlyStopper(std::size_t patience, double min_delta) : patience_(patience), min_delta_(min_delta) {}
  // Starts from an already known best, e.g. when training is continued.
  void seed(double best, std::size_t best_epoch);
  // Returns true when training should stop after this epoch.
  bool update(double loss, std::size_t epoch);
  bool improved() const { return improved_; }
  double best() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }
  std::size_t stale() const { return stale_; }

 private:
  std::size_t patience_;
  double min_delta_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
  bool improved_ = false;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based, counted over the whole session
  double loss = 0;        // mean training classification loss
  double rec_loss = 0;    // mean reconstruction loss (adaptation family)
  double val_loss = 0;
  double accuracy = 0;
  double kappa = 0;
};

struct TrialResult {
  bool failed = false;
  std::string message;
  std::vector<EpochRecord> history;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  Metrics val;  // at the returned parameters
  bool early_stopped = false;
};

// A model with its optimisers, shuffling state and best-so-far snapshot,
// trained in resumable continuations.
class TrainingSession {
 public:
  TrainingSession(const models::ModelConfig& cfg, std::uint64_t model_seed, const TrainConfig& tc);

  // Trains up to `epochs` more epochs with early stopping and returns the
  // cumulative result. Target samples (unlabelled, adaptation family only) are
  // drawn uniformly with replacement to pair with each source batch.
  const TrialResult& run(std::size_t epochs, const DataView& train, const DataView& val,
                         const DataView* target = nullptr);

  Model& model() { return *model_; }
  const TrialResult& result() const { return result_; }
  std::size_t epochs_done() const { return epochs_done_; }

  // Config, parameters with optimiser state, and session counters.
  void save(const std::filesystem::path& dir) const;
  static std::unique_ptr<TrainingSession> load(const std::filesystem::path& dir, const TrainConfig& tc);

 private:
  void epoch(const DataView& train, const DataView* target, EpochRecord& rec);

  TrainConfig tc_;
  std::uint64_t model_seed_;
  std::unique_ptr<Model> model_;
  std::unique_ptr<models::Trainer<float>> trainer_;
  std::mt19937_64 rng_;
  std::size_t epochs_done_ = 0;
  TrialResult result_;
  std::vector<std::vector<float>> best_;
};

// Builds a fresh model and trains it for at most tc.max_epochs. Without an
// explicit target set the adaptation family draws its target batches from the training inputs.
TrialResult train_with_early_stopping(const models::ModelConfig& cfg, const DataView& train, const DataView& val,
                                      const TrainConfig& tc, const DataView* target = nullptr,
                                      std::unique_ptr<TrainingSession>* session = nullptr);

Metrics evaluate_metrics(const Model& model, const DataView& data, std::size_t batch = 32);

// Metrics CSV: arm,seed,fold,epoch,loss,val_loss,accuracy,kappa.
struct MetricsRow {
  std::string arm;
  std::uint64_t seed = 0;
  int fold = 0;
  EpochRecord rec;
};
std::string metrics_csv_header();
std::string metrics_csv_line(const MetricsRow& row);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

}  // namespace jcas::experiments

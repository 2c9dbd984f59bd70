#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "jcas/experiments/training.hpp"
#include "jcas/models/config.hpp"

namespace jcas::tuning {

using models::ModelConfig;
using models::SearchSpace;

// Independent uniform draw per interval; the family, class count, input
// dims and depthwise kernel come from `base`.
ModelConfig sample_config(const SearchSpace& space, const ModelConfig& base, std::mt19937_64& rng);

// Draws until the configuration builds for the base input shape.
ModelConfig sample_buildable(const SearchSpace& space, const ModelConfig& base, std::mt19937_64& rng,
                             std::size_t* rejected = nullptr, std::size_t max_tries = 1000);

struct HyperbandConfig {
  std::size_t initial_candidates = 27;
  std::size_t eta = 3;  // discard proportion
  std::size_t iterations = 5;
  std::size_t initial_epochs = 2;
  std::size_t epoch_budget = 1000;  // recorded, not enforced
  std::size_t epoch_cap = 100;
  std::uint64_t seed = 42;
  bool multi_bracket = false;
  void validate() const;
};

// counts[0] = n0, counts[i+1] = max(1, counts[i] / eta).
std::vector<std::size_t> survivor_schedule(const HyperbandConfig& cfg);
// r_i = min(cap, r0 * eta^i) additional epochs per iteration.
std::vector<std::size_t> epoch_schedule(const HyperbandConfig& cfg);

struct AuditRow {
  std::size_t iteration = 0;
  std::size_t candidate_id = 0;
  std::size_t epochs_total = 0;
  double val_loss = 0;
  double accuracy = 0;
  double kappa = 0;
  std::string status;  // ok, stopped (early stop hit), failed
};

struct Candidate {
  std::size_t id = 0;
  std::size_t bracket = 0;
  ModelConfig config;
  std::uint64_t model_seed = 0;
  bool failed = false;
  std::string message;
  std::size_t last_iteration = 0;  // deepest iteration trained in
  std::size_t epochs_total = 0;
  double val_loss = 0;
  double accuracy = 0;
  double kappa = 0;
};

struct BudgetLine {
  std::size_t bracket = 0;
  std::size_t iteration = 0;
  std::size_t candidates = 0;
  std::size_t epochs_each = 0;     // planned per candidate
  std::size_t planned_total = 0;   // candidates * epochs_each
  std::size_t consumed = 0;        // epochs actually run (early stopping can cut it)
  bool within_per_candidate = true;  // epochs_each <= budget
  bool within_aggregate = true;      // planned_total <= budget
};

struct HyperbandResult {
  std::vector<Candidate> ranking;  // best first; failed candidates last
  std::vector<AuditRow> audit;
  std::vector<BudgetLine> budget;
  std::size_t rejected_draws = 0;
  const Candidate& best() const { return ranking.front(); }
};

struct HyperbandOptions {
  // When set, every candidate's config, checkpoint and session state is
  // written here after each iteration and reloaded for the next one; the
  // audit log goes to audit.csv.
  std::filesystem::path run_dir;
  std::size_t jobs = 1;
  const experiments::DataView* target = nullptr;
  // Called before each trial continuation (tests use it to inject faults).
  std::function<void(const Candidate&, std::size_t iteration, experiments::TrainingSession&)> on_trial;
};

// Single-bracket successive halving, or Li et al. style brackets when
// cfg.multi_bracket is set. Survivors are ranked by best validation loss, ties
// by candidate id; failed trials drop out and never abort the run.
HyperbandResult hyperband_run(const SearchSpace& space, const ModelConfig& base, const experiments::DataView& train,
                              const experiments::DataView& val, const HyperbandConfig& cfg,
                              const experiments::TrainConfig& tc, const HyperbandOptions& opt = {});

std::string audit_csv_header();
void write_audit_csv(const std::filesystem::path& path, const std::vector<AuditRow>& rows);
std::vector<AuditRow> read_audit_csv(const std::filesystem::path& path);
std::string budget_report(const HyperbandResult& r, const HyperbandConfig& cfg);

}  // namespace jcas::tuning

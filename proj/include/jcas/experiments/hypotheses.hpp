#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jcas/experiments/training.hpp"
#include "jcas/preprocess/dataset.hpp"
#include "jcas/tuning/hyperband.hpp"

namespace jcas::experiments {

// Line-oriented key-value report plus the per-epoch metrics of every run.
struct Report {
  std::string name;
  std::vector<std::pair<std::string, std::string>> values;
  std::vector<MetricsRow> rows;

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  std::optional<std::string> get(const std::string& key) const;
  double number(const std::string& key) const;
  std::string to_text() const;
  // <dir>/<name>.txt and <dir>/<name>_metrics.csv
  void write(const std::filesystem::path& dir) const;
};

// Mean and the normal-approximation 95% interval half-width over seeds.
struct Interval {
  double mean = 0, half = 0;
  double lo() const { return mean - half; }
  double hi() const { return mean + half; }
  bool overlaps(const Interval& o) const { return lo() <= o.hi() && o.lo() <= hi(); }
};
Interval interval95(const std::vector<double>& v);

struct HypothesisOptions {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::uint64_t data_seed = 42;
  TrainConfig train{};
  models::Family family = models::Family::Standard;
  // Overrides the reference configuration built from the data shape.
  std::optional<models::ModelConfig> model;
  // One seed (42) and the fold-0 tuning split instead of per-seed replicates.
  bool paper_protocol = false;
  std::size_t jobs = 1;
};

// Desk geometry shared by the drivers: the high-SNR preset's sampling and
// subject placement with the given TX beams and repetitions per class.
preprocess::DatasetSpec desk_spec(const std::vector<int>& tx_beams, int repetitions);

models::ModelConfig model_for(const HypothesisOptions& opt, const TensorSet& data);

// Hypothesis 1: every domain label is simulated through the same physical TX
// beam. The stress arm additionally gives each label its own Doppler scale
// and spurious tone; the control arm does not.
struct DomainShiftSpec {
  std::vector<int> tx_beams{4, 7, 10, 13};
  int physical_beam = 10;
  int repetitions = 15;
  bool stress = true;
  std::vector<double> doppler_scale{0.4, 1.0, 2.2, 3.5};
  std::vector<double> spur_hz{-14.0, -6.0, 6.0, 14.0};
  double spur_rel_db = -6.0;
};
Report run_domain_shift(const DomainShiftSpec& spec, const HypothesisOptions& opt);

// Hypothesis 2: off-centre Doppler energy of squats with one motion and with
// three to four motions per frame, each against the empty room.
struct SensitivitySpec {
  int repetitions = 30;
  int tx_beam = 10;
};
Report run_sensitivity(const SensitivitySpec& spec, const HypothesisOptions& opt);
// Fraction of a frame's energy outside the three Doppler rows around 0 Hz.
double off_centre_fraction(const preprocess::DfsFrame& f);
// |mean_a - mean_b| / sqrt((var_a + var_b) / 2)
double d_prime(const std::vector<double>& a, const std::vector<double>& b);

// Hypothesis 3: validation kappa against the share of training data used.
struct VolumeSpec {
  std::vector<double> fractions{0.25, 0.5, 1.0};
  std::vector<int> tx_beams{10};
  int repetitions = 40;
};
Report run_volume(const VolumeSpec& spec, const HypothesisOptions& opt);

// Hypothesis 4: the same simulated frames trained stacked (one sample with
// all RX beams) and unstacked (one sample per RX beam). RX beams whose bit
// is set in uninformative_rx see no scatterer.
struct DilutionSpec {
  std::vector<int> tx_beams{10};
  int repetitions = 30;
  std::uint32_t uninformative_rx = 0x00FF;
  // Paper datasets (dataset 2 v1 against v2) instead of the desk geometry.
  bool paper_datasets = false;
};
Report run_dilution(const DilutionSpec& spec, const HypothesisOptions& opt);

// Hypothesis 5: the unstacked dataset preprocessed with a reported rate of
// 100 Hz and of 800 Hz, each tuned with the same hyperband settings.
struct ReportedFsSpec {
  std::vector<int> tx_beams{10};
  int repetitions = 8;
  double fs_a = 100.0, fs_b = 800.0;
  tuning::HyperbandConfig hyperband{};
  bool paper_datasets = false;
};
Report run_reported_fs(const ReportedFsSpec& spec, const HypothesisOptions& opt);
// Same comparison on two prepared sample lists (for example archives read
// from disk). The rates come from the samples' axis metadata.
Report compare_reported_fs(const std::vector<preprocess::SampleRecord>& a,
                           const std::vector<preprocess::SampleRecord>& b, std::size_t classes,
                           const tuning::HyperbandConfig& hyperband, const HypothesisOptions& opt);
// Reduced schedule used by the desk-scale default: 9 candidates, 3 rounds,
// at most 18 epochs.
tuning::HyperbandConfig reported_fs_hyperband();

// Dispatches 1..5 with default specs (desk scale).
Report run_hypothesis(int which, const HypothesisOptions& opt);

}  // namespace jcas::experiments

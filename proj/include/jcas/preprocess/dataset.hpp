#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jcas/csi/scenario.hpp"
#include "jcas/preprocess/pipeline.hpp"

namespace jcas::preprocess {

using csi::MotionClass;
using csi::Orientation;

class SpecArithmeticError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class DatasetKind { Dataset1, Dataset2V1, Dataset2V2, Dataset2V3, HighSnr };
std::string to_string(DatasetKind k);
DatasetKind dataset_kind_from_string(const std::string& s);

struct ClassEntry {
  std::string name;
  MotionClass motion = MotionClass::Empty;
  int motions_min = 1;  // motions performed during one repetition
  int motions_max = 1;
};

struct Cell {
  int class_id = 0;
  Orientation orientation = Orientation::Frontal;
  int repetitions = 1;
};

struct SubjectPlan {
  int subject_id = 1;
  std::vector<int> tx_beams;
  std::vector<Cell> cells;
};

struct DatasetSpec {
  DatasetKind which = DatasetKind::Dataset1;
  bool unstack = false;
  double fs_collect = 20.0;
  double duration = 5.0;
  std::vector<ClassEntry> classes;  // class id = index
  std::vector<SubjectPlan> subjects;
  bool orientation_is_domain = false;  // dataset 1 encodes orientation in the class instead
  double snr_threshold_db = csi::kDefaultSnrThresholdDb;
  double tx_power = 1e-4;                  // W
  std::optional<csi::Vec3> subject_base;   // exact position, replaces default plus subject offset
  PipelineOptions pipeline{};
  std::optional<std::size_t> expected_samples;
  std::optional<std::size_t> expected_domains;

  // HighSnr: the dataset 2 classes, one subject off the TX-RX baseline under
  // TX beam 10 at 1 W, 60 stacked repetitions per class, a single domain.
  // Sampled at 50 Hz for 1.28 s with a 32-sample window (32 x 64 DFS maps).
  static DatasetSpec preset(DatasetKind which);
  std::size_t stacked_sample_count() const;
  std::vector<std::string> class_names() const;
};

struct GridPoint {
  std::size_t index = 0;
  int subject_id = 0;
  int tx_beam = 0;
  int class_id = 0;
  Orientation orientation = Orientation::Frontal;
  int repetition = 0;
  std::uint64_t seed = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Scenario grid in deterministic order: subject, TX beam, cell, repetition.
std::vector<GridPoint> scenario_grid(const DatasetSpec& spec, std::uint64_t seed);

// Simulator scenario for one grid point. Subject traits (position offset,
// radar cross section, motion rate) depend on subject_id; the motion phase
// and global phase are drawn per grid point.
csi::SimScenario make_scenario(const DatasetSpec& spec, const GridPoint& gp);

struct SampleRecord {
  DfsFrame dfs;
  int class_id = -1;
  DomainLabel domain;
  int domain_id = -1;  // dense index over the domain factors of the dataset
  std::size_t grid_index = 0;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<SampleRecord> samples;
  std::size_t domain_count = 0;          // product of factor cardinalities
  std::size_t present_domain_count = 0;  // distinct factor tuples actually observed
  std::size_t zeroed_rx = 0;             // RX beams removed by SNR zeroing, summed over frames
  std::size_t degenerate_rx = 0;
};

using Simulator = std::function<csi::CsiFrame(const csi::SimScenario&, csi::SimRng&, std::vector<double>*)>;
using ScenarioHook = std::function<void(const GridPoint&, csi::SimScenario&)>;

Dataset build_dataset(const DatasetSpec& spec, std::uint64_t seed, const Simulator& simulator = {},
                      const ScenarioHook& hook = {});

// One grid point through the simulator with SNR zeroing applied; labels are
// copied from the grid point. The two stages of build_dataset, exposed for
// the command-line tools.
csi::CsiFrame simulate_grid_point(const DatasetSpec& spec, const GridPoint& gp, const Simulator& simulator = {},
                                  const ScenarioHook& hook = {}, std::size_t* zeroed = nullptr);
void assign_domain_ids(std::vector<SampleRecord>& samples, bool orientation_is_domain);
// Throws SpecArithmeticError when the declared sample or domain count is missed.
void check_expected(const Dataset& ds);

// Counts distinct values per factor (TX beam, subject, RX patch when present,
// orientation when it is a domain factor) and multiplies them.
std::size_t count_domains(const std::vector<SampleRecord>& samples, bool orientation_is_domain,
                          std::size_t* present = nullptr);

}  // namespace jcas::preprocess

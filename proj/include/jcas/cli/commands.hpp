#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jcas/cli/spec_file.hpp"
#include "jcas/preprocess/dataset.hpp"

namespace jcas::cli {

enum ExitCode { kOk = 0, kInternal = 1, kSpecError = 2, kDataError = 3, kNumericalError = 4 };

// Bad flag values and similar caller mistakes (exit 2).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Missing or inconsistent input artifacts (exit 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int exit_code_for(std::exception_ptr e);
// Runs f, prints the failure to err and returns the exit code.
int guarded(const std::function<void()>& f, std::ostream& err);

// JCAS_RUN_DIR when set, else the working directory.
std::filesystem::path output_root();
// Relative output paths are placed under output_root().
std::filesystem::path resolve_output(const std::string& out);
// Relative input paths are looked up under output_root() first.
std::filesystem::path resolve_input(const std::string& in);

struct CommonOptions {
  std::uint64_t seed = 42;
  std::size_t jobs = 1;
  bool paper_protocol = false;
};

// "1", "2v1", "2v2", "2v3" or a preset name.
preprocess::DatasetKind dataset_from_flag(const std::string& s);

struct SimulateArgs {
  std::string spec_file;  // optional when dataset is given
  std::string dataset;
  std::string out;
  std::optional<std::uint64_t> seed;  // overrides the seed in the spec file
  CommonOptions common;
};
void cmd_simulate(const SimulateArgs& a, std::ostream& log);

struct PreprocessArgs {
  std::string in, out;
  std::optional<bool> unstack;
  std::optional<double> reported_fs;
  std::optional<std::size_t> window, hop;
  double max_degenerate = 1.0;  // allowed fraction of degenerate RX channels
  CommonOptions common;
};
void cmd_preprocess(const PreprocessArgs& a, std::ostream& log);

struct InspectArgs {
  std::string in, out;
  std::optional<int> tx_beam;
  std::optional<std::string> class_name;
  std::size_t rows = 1;  // samples per grid
  std::string scale = "db", norm = "frame", color = "heat";
  double db_floor = -60.0;
  CommonOptions common;
};
void cmd_inspect(const InspectArgs& a, std::ostream& log);

struct TrainingFlags {
  std::string model = "standard";
  std::string config_file;  // model config, e.g. a tuning result
  double lr = 1e-4;
  std::size_t batch = 12, epochs = 100, patience = 5;
};

struct TuneArgs {
  std::string in, out;
  TrainingFlags train;
  std::size_t candidates = 27, eta = 3, iterations = 5, initial_epochs = 2, cap = 100, budget = 1000;
  std::string space = "desk";
  bool multi_bracket = false;
  CommonOptions common;
};
void cmd_tune(const TuneArgs& a, std::ostream& log);

struct TrainArgs {
  std::string in, out;
  TrainingFlags train;
  CommonOptions common;
};
void cmd_train(const TrainArgs& a, std::ostream& log);

struct EvalArgs {
  std::string in, run, out;  // out optional
  std::string subset = "test";
  CommonOptions common;
};
void cmd_eval(const EvalArgs& a, std::ostream& log);

struct HypothesisArgs {
  int which = 1;
  std::string out;
  std::vector<std::uint64_t> seeds;  // empty: the suite default
  std::vector<std::string> inputs;   // hypothesis 5: two preprocessed directories
  std::string dataset;               // 2v1/2v2/2v3: paper datasets for 4 and 5
  TrainingFlags train;
  CommonOptions common;
};
void cmd_hypothesis(const HypothesisArgs& a, std::ostream& log);

// Preprocessed sample directory as written by cmd_preprocess.
struct SampleDir {
  DatasetFile spec;
  std::vector<preprocess::SampleRecord> samples;
};
SampleDir read_sample_dir(const std::filesystem::path& dir);

}  // namespace jcas::cli

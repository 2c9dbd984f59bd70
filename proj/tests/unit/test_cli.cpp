#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <unistd.h>

#include "doctest.h"
#include "jcas/cli/commands.hpp"
#include "jcas/cli/manifest.hpp"
#include "jcas/cli/spec_file.hpp"
#include "jcas/experiments/training.hpp"
#include "jcas/tuning/hyperband.hpp"

using namespace jcas;
using namespace jcas::cli;
namespace fs = std::filesystem;

namespace {

DatasetFile parse(const std::string& text) {
  std::istringstream is(text);
  return parse_dataset_file(parse_key_values(is, "test.spec"));
}

// Removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("jcas_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& sub = "") const { return (sub.empty() ? path : path / sub).string(); }
};

// Small stacked set: 16x32x16 maps, six TX beams (six domains), two
// repetitions per class.
const char* kSmallSpec = R"(# small desk set
[dataset]
preset = high_snr
seed = 7
duration = 0.64

[stft]
window = 16

[subject 1]
tx_beams = 5,6,7,8,9,10
cell = empty frontal 2
cell = still frontal 2
cell = still_hand frontal 2
cell = squat frontal 2
)";

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void simulate_small(const TempDir& t, const std::string& out) {
  std::ofstream(t.path / "small.spec") << kSmallSpec;
  SimulateArgs s;
  s.spec_file = t.str("small.spec");
  s.out = t.str(out);
  std::ostringstream log;
  cmd_simulate(s, log);
}

}  // namespace

TEST_CASE("spec files round trip through the canonical text") {
  for (auto kind : {preprocess::DatasetKind::Dataset1, preprocess::DatasetKind::Dataset2V1,
                    preprocess::DatasetKind::Dataset2V3, preprocess::DatasetKind::HighSnr}) {
    DatasetFile f;
    f.spec = preprocess::DatasetSpec::preset(kind);
    f.seed = 1234;
    const DatasetFile back = parse(dataset_file_text(f));
    CHECK(dataset_file_text(back) == dataset_file_text(f));
    CHECK(back.seed == 1234);
    CHECK(back.spec.stacked_sample_count() == f.spec.stacked_sample_count());
    CHECK(back.spec.expected_samples == f.spec.expected_samples);
    CHECK(back.spec.expected_domains == f.spec.expected_domains);
    CHECK(back.spec.subject_base.has_value() == f.spec.subject_base.has_value());
    CHECK(back.spec.pipeline.stft.reported_fs == f.spec.pipeline.stft.reported_fs);
  }
}

TEST_CASE("spec errors carry the line number") {
  const std::string bad_beam = "[dataset]\npreset = dataset1\n\n[subject 1]\ntx_beams = 5, 16\ncell = empty frontal 1\n";
  try {
    parse(bad_beam);
    FAIL("no error");
  } catch (const SpecError& e) {
    CHECK(e.line() == 5);
    CHECK(std::string(e.what()).find("3-14") != std::string::npos);
  }
  CHECK_THROWS_AS(parse("[dataset]\nfs = 3\n"), SpecError);
  CHECK_THROWS_AS(parse("[dataset]\npreset = dataset9\n"), SpecError);
  CHECK_THROWS_AS(parse("[weird]\nx = 1\n"), SpecError);
  CHECK_THROWS_AS(parse("x = 1\n"), SpecError);
  CHECK_THROWS_AS(parse("[stft]\nwindow = -2\n"), SpecError);
  CHECK_THROWS_AS(parse("[subject 1]\ntx_beams = 5\ncell = jumping frontal 1\n"), SpecError);
  CHECK_THROWS_AS(parse("[subject 1]\ntx_beams = 5\n"), SpecError);
}

TEST_CASE("replacing subjects clears the preset's declared counts") {
  const auto f = parse(kSmallSpec);
  CHECK_FALSE(f.spec.expected_samples.has_value());
  CHECK(f.spec.stacked_sample_count() == 48);
  CHECK(f.seed == 7);
  const auto g = parse("[dataset]\npreset = dataset1\n");
  CHECK(g.spec.expected_samples == std::optional<std::size_t>(384));
}

TEST_CASE("content hashes follow git's object ids") {
  TempDir t("hash");
  std::ofstream(t.path / "hello.txt") << "hello\n";
  CHECK(blob_hash(t.path / "hello.txt") == "ce013625030ba8dba906f756967f9e9ca394464a");
  std::ofstream(t.path / "empty.txt");
  CHECK(blob_hash(t.path / "empty.txt") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(sha1_hex("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");

  const std::string before = tree_hash(t.path);
  std::ofstream(t.path / kManifestName) << "ignored";
  CHECK(tree_hash(t.path) == before);
  std::ofstream(t.path / "hello.txt") << "changed\n";
  CHECK(tree_hash(t.path) != before);
}

TEST_CASE("manifest text round trips and detects stale artifacts") {
  TempDir t("manifest");
  fs::create_directories(t.path / "sub");
  std::ofstream(t.path / "sub" / "a.bin") << "x";
  RunManifest m;
  m.command = "train";
  m.run_dir = t.str();
  m.seeds = {1, 2};
  m.config = {{"lr", "0.0001"}, {"model", "standard"}};
  m.dataset_spec = "[dataset]\npreset = dataset1\n";
  m.inputs = {{"dfs", "abc"}};
  m.collect_artifacts(t.path);
  REQUIRE(m.artifacts.size() == 1);
  CHECK(m.artifacts[0].first == "sub/a.bin");
  m.write(t.path);
  const RunManifest r = RunManifest::read(t.path);
  CHECK(r.to_text() == m.to_text());
  CHECK(r.stale_artifacts(t.path).empty());
  std::ofstream(t.path / "sub" / "a.bin") << "y";
  CHECK(r.stale_artifacts(t.path) == std::vector<std::string>{"sub/a.bin"});
}

TEST_CASE("exit codes follow the error category") {
  std::ostringstream err;
  CHECK(guarded([] {}, err) == kOk);
  CHECK(guarded([] { throw SpecError("f", 3, "bad"); }, err) == kSpecError);
  CHECK(guarded([] { throw UsageError("bad flag"); }, err) == kSpecError);
  CHECK(guarded([] { throw models::ConfigError("bad config"); }, err) == kSpecError);
  CHECK(guarded([] { throw DataError("missing"); }, err) == kDataError);
  CHECK(guarded([] { throw experiments::TooFewDomains("few"); }, err) == kDataError);
  CHECK(guarded([] { throw nn::NumericalError("nan"); }, err) == kNumericalError);
  CHECK(guarded([] { throw std::runtime_error("?"); }, err) == kInternal);

  PreprocessArgs p;
  p.in = "/nonexistent/jcas/input";
  p.out = "/tmp/unused";
  CHECK(guarded([&] { cmd_preprocess(p, err); }, err) == kDataError);
  CHECK(err.str().find("does not exist") != std::string::npos);
}

TEST_CASE("output paths honour JCAS_RUN_DIR") {
  TempDir t("root");
  const char* old = std::getenv("JCAS_RUN_DIR");
  const std::string saved = old ? old : "";
  ::setenv("JCAS_RUN_DIR", t.str().c_str(), 1);
  CHECK(resolve_output("runs/a") == t.path / "runs/a");
  CHECK(resolve_output("/abs/x") == fs::path("/abs/x"));
  fs::create_directories(t.path / "sim");
  CHECK(resolve_input("sim") == t.path / "sim");
  if (old) ::setenv("JCAS_RUN_DIR", saved.c_str(), 1);
  else ::unsetenv("JCAS_RUN_DIR");
  CHECK(output_root() == (old ? fs::path(saved) : fs::current_path()));
}

TEST_CASE("simulate then preprocess reproduces the in-memory dataset") {
  TempDir t("stages");
  simulate_small(t, "sim");
  CHECK(std::distance(fs::directory_iterator(t.path / "sim" / "csi"), fs::directory_iterator{}) == 48);

  for (bool unstack : {false, true}) {
    PreprocessArgs p;
    p.in = t.str("sim");
    p.out = t.str(unstack ? "dfs_u" : "dfs");
    p.unstack = unstack;
    std::ostringstream log;
    cmd_preprocess(p, log);
    const SampleDir d = read_sample_dir(p.out);

    DatasetFile f = parse(kSmallSpec);
    f.spec.unstack = unstack;
    const auto ds = preprocess::build_dataset(f.spec, f.seed);
    REQUIRE(d.samples.size() == ds.samples.size());
    CHECK(d.samples.size() == (unstack ? 48u * 16u : 48u));
    bool same = true;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
      const auto& a = d.samples[i];
      const auto& b = ds.samples[i];
      same = same && a.dfs.values == b.dfs.values && a.class_id == b.class_id && a.domain_id == b.domain_id &&
             a.domain == b.domain && a.grid_index == b.grid_index && a.dfs.reported_fs == b.dfs.reported_fs;
    }
    CHECK(same);
    CHECK(RunManifest::read(p.out).stale_artifacts(p.out).empty());
  }
}

TEST_CASE("preprocess enforces the degenerate fraction and the reported rate is metadata only") {
  TempDir t("degenerate");
  simulate_small(t, "sim");
  std::ostringstream log;
  PreprocessArgs a;
  a.in = t.str("sim");
  a.out = t.str("a");
  a.reported_fs = 100.0;
  cmd_preprocess(a, log);
  PreprocessArgs b = a;
  b.out = t.str("b");
  b.reported_fs = 800.0;
  cmd_preprocess(b, log);
  const auto da = read_sample_dir(a.out), db = read_sample_dir(b.out);
  bool identical = da.samples.size() == db.samples.size();
  for (std::size_t i = 0; identical && i < da.samples.size(); ++i)
    identical = da.samples[i].dfs.values == db.samples[i].dfs.values;
  CHECK(identical);
  CHECK(db.samples[0].dfs.doppler_axis().back() == doctest::Approx(8.0 * da.samples[0].dfs.doppler_axis().back()));

  // A scene with every RX beam below the SNR threshold is all degenerate.
  std::ofstream(t.path / "dark.spec") << "[dataset]\npreset = high_snr\nduration = 0.64\ntx_power = 1e-12\n"
                                         "[stft]\nwindow = 16\n[subject 1]\ntx_beams = 5\ncell = squat frontal 1\n";
  SimulateArgs s;
  s.spec_file = t.str("dark.spec");
  s.out = t.str("dark");
  cmd_simulate(s, log);
  PreprocessArgs c;
  c.in = t.str("dark");
  c.out = t.str("dark_dfs");
  c.max_degenerate = 0.5;
  std::ostringstream err;
  CHECK(guarded([&] { cmd_preprocess(c, log); }, err) == kDataError);
  CHECK(err.str().find("degenerate") != std::string::npos);
}

TEST_CASE("reruns give identical artifacts; eval matches the metrics CSV") {
  TempDir t("rerun");
  std::ostringstream log;
  for (const char* sim : {"sim1", "sim2"}) simulate_small(t, sim);
  CHECK(tree_hash(t.path / "sim1") == tree_hash(t.path / "sim2"));
  for (const char* n : {"1", "2"}) {
    PreprocessArgs p;
    p.in = t.str(std::string("sim") + n);
    p.out = t.str(std::string("dfs") + n);
    cmd_preprocess(p, log);
    TrainArgs tr;
    tr.in = p.out;
    tr.out = t.str(std::string("run") + n);
    tr.train.epochs = 3;
    cmd_train(tr, log);
  }
  CHECK(tree_hash(t.path / "dfs1") == tree_hash(t.path / "dfs2"));
  CHECK(blob_hash(t.path / "run1" / "metrics.csv") == blob_hash(t.path / "run2" / "metrics.csv"));
  CHECK(tree_hash(t.path / "run1" / "model") == tree_hash(t.path / "run2" / "model"));

  const auto rows = experiments::read_metrics_csv(t.path / "run1" / "metrics.csv");
  REQUIRE(rows.size() >= 2);
  CHECK(rows.back().arm == "test");
  EvalArgs e;
  e.in = t.str("dfs1");
  e.run = t.str("run1");
  e.out = t.str("eval1");
  std::ostringstream out;
  cmd_eval(e, out);
  const std::string text = out.str();
  CHECK(text.find(fmt::format("accuracy = {:.9g}\n", rows.back().rec.accuracy)) != std::string::npos);
  CHECK(text.find(fmt::format("kappa = {:.9g}\n", rows.back().rec.kappa)) != std::string::npos);
  CHECK(slurp(t.path / "eval1" / "eval.txt") == text);

  // A tampered input is refused.
  std::ofstream(t.path / "dfs1" / "dfs" / "00000.dfs", std::ios::app) << "junk";
  std::ostringstream err;
  CHECK(guarded([&] { cmd_eval(e, out); }, err) == kDataError);
}

TEST_CASE("tune writes an audit log with the survivor schedule") {
  TempDir t("tune");
  std::ostringstream log;
  simulate_small(t, "sim");
  PreprocessArgs p;
  p.in = t.str("sim");
  p.out = t.str("dfs");
  cmd_preprocess(p, log);
  TuneArgs a;
  a.in = p.out;
  a.out = t.str("tune");
  a.candidates = 27;
  a.initial_epochs = 1;
  a.cap = 1;
  cmd_tune(a, log);
  const auto audit = tuning::read_audit_csv(t.path / "tune" / "audit.csv");
  std::vector<std::size_t> per_round(5, 0);
  for (const auto& r : audit) {
    REQUIRE(r.iteration < 5);
    ++per_round[r.iteration];
  }
  CHECK(per_round == std::vector<std::size_t>{27, 9, 3, 1, 1});
  CHECK(fs::is_regular_file(t.path / "tune" / "best_config.txt"));
  const auto best = models::read_config((t.path / "tune" / "best_config.txt").string());
  CHECK(best.within(models::SearchSpace::desk(16)));
  CHECK(log.str().find("schedule = 27,9,3,1,1") != std::string::npos);
}

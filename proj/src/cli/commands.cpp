#include "jcas/cli/commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "jcas/cli/manifest.hpp"
#include "jcas/csi/io.hpp"
#include "jcas/experiments/hypotheses.hpp"
#include "jcas/nn/checkpoint.hpp"
#include "jcas/preprocess/io.hpp"
#include "jcas/tuning/hyperband.hpp"
#include "jcas/util/parallel.hpp"
#include "jcas/viz/grid.hpp"

namespace jcas::cli {

namespace fs = std::filesystem;
using experiments::DataView;
using experiments::TensorSet;

int exit_code_for(std::exception_ptr e) {
  try {
    std::rethrow_exception(e);
  } catch (const nn::NumericalError&) {
    return kNumericalError;
  } catch (const SpecError&) {
    return kSpecError;
  } catch (const UsageError&) {
    return kSpecError;
  } catch (const models::ConfigError&) {
    return kSpecError;
  } catch (const preprocess::ConfigError&) {
    return kSpecError;
  } catch (const csi::ScenarioError&) {
    return kSpecError;
  } catch (const DataError&) {
    return kDataError;
  } catch (const preprocess::ArchiveError&) {
    return kDataError;
  } catch (const csi::ParseError&) {
    return kDataError;
  } catch (const experiments::EmptyDataset&) {
    return kDataError;
  } catch (const experiments::TooFewDomains&) {
    return kDataError;
  } catch (const preprocess::SpecArithmeticError&) {
    return kDataError;
  } catch (const preprocess::InconsistentShape&) {
    return kDataError;
  } catch (const preprocess::MissingTimeOrder&) {
    return kDataError;
  } catch (const preprocess::DegenerateInput&) {
    return kDataError;
  } catch (const nn::CheckpointError&) {
    return kDataError;
  } catch (const fs::filesystem_error&) {
    return kDataError;
  } catch (...) {
    return kInternal;
  }
}

int guarded(const std::function<void()>& f, std::ostream& err) {
  try {
    f();
    return kOk;
  } catch (const std::exception& e) {
    const int code = exit_code_for(std::current_exception());
    err << "error: " << e.what() << "\n";
    return code;
  } catch (...) {
    err << "error: unknown failure\n";
    return kInternal;
  }
}

fs::path output_root() {
  const char* env = std::getenv("JCAS_RUN_DIR");
  return env && *env ? fs::path(env) : fs::current_path();
}

fs::path resolve_output(const std::string& out) {
  if (out.empty()) throw UsageError("an output directory (--out) is required");
  const fs::path p(out);
  return p.is_absolute() ? p : output_root() / p;
}

fs::path resolve_input(const std::string& in) {
  if (in.empty()) throw UsageError("an input path (--in) is required");
  const fs::path p(in);
  if (p.is_absolute()) return p;
  const fs::path under = output_root() / p;
  return fs::exists(under) ? under : fs::absolute(p);
}

preprocess::DatasetKind dataset_from_flag(const std::string& s) {
  if (s == "1") return preprocess::DatasetKind::Dataset1;
  if (s == "2v1") return preprocess::DatasetKind::Dataset2V1;
  if (s == "2v2") return preprocess::DatasetKind::Dataset2V2;
  if (s == "2v3") return preprocess::DatasetKind::Dataset2V3;
  try {
    return preprocess::dataset_kind_from_string(s);
  } catch (const std::invalid_argument&) {
    throw UsageError("unknown dataset '" + s + "' (1, 2v1, 2v2, 2v3)");
  }
}

namespace {

constexpr const char* kFramesIndex = "frames.tsv";
constexpr const char* kSamplesIndex = "samples.tsv";
constexpr const char* kSpecName = "spec.txt";

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
  if (!os) throw DataError("cannot write " + p.string());
}

std::string read_text(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw DataError("cannot read " + p.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

fs::path require_dir(const std::string& in, const char* what) {
  const fs::path p = resolve_input(in);
  if (!fs::is_directory(p)) throw DataError(fmt::format("{} directory {} does not exist", what, p.string()));
  return p;
}

// Tab-separated table with a header line.
std::vector<std::map<std::string, std::string>> read_table(const fs::path& p) {
  std::istringstream is(read_text(p));
  std::string line;
  std::vector<std::string> cols;
  std::vector<std::map<std::string, std::string>> rows;
  auto fields = [](const std::string& l) {
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, '\t')) f.push_back(cell);
    return f;
  };
  if (!std::getline(is, line)) throw DataError(p.string() + " is empty");
  cols = fields(line);
  std::size_t no = 1;
  while (std::getline(is, line)) {
    ++no;
    if (line.empty()) continue;
    const auto f = fields(line);
    if (f.size() != cols.size()) throw DataError(fmt::format("{}:{}: expected {} fields", p.string(), no, cols.size()));
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < cols.size(); ++i) row[cols[i]] = f[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

int to_int(const std::map<std::string, std::string>& row, const std::string& key) {
  const auto it = row.find(key);
  if (it == row.end()) throw DataError("index column '" + key + "' missing");
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw DataError("index column '" + key + "' holds '" + it->second + "'");
  }
}

DatasetFile read_spec_in(const fs::path& dir) {
  const fs::path p = dir / kSpecName;
  if (!fs::is_regular_file(p)) throw DataError("no " + std::string(kSpecName) + " in " + dir.string());
  return read_dataset_file(p.string());
}

// Refuses inputs whose files no longer match their manifest.
void check_manifest(const fs::path& dir) {
  if (!fs::is_regular_file(dir / kManifestName)) return;
  const auto stale = RunManifest::read(dir).stale_artifacts(dir);
  if (!stale.empty())
    throw DataError(fmt::format("{} does not match its manifest ({} and {} more)", dir.string(), stale.front(),
                                stale.size() - 1));
}

void reset_subdir(const fs::path& p) {
  fs::remove_all(p);
  fs::create_directories(p);
}

// The run directory is recorded as given so that reruns under another
// JCAS_RUN_DIR produce the same manifest.
RunManifest start_manifest(const std::string& command, const std::string& out, const CommonOptions& c) {
  RunManifest m;
  m.command = command;
  m.run_dir = out;
  m.seeds = {c.seed};
  m.config.emplace_back("jobs", std::to_string(c.jobs));
  m.config.emplace_back("paper_protocol", c.paper_protocol ? "true" : "false");
  return m;
}

void finish_manifest(RunManifest& m, const fs::path& out) {
  m.collect_artifacts(out);
  m.write(out);
}

models::Family family_flag(const std::string& s) {
  try {
    return models::family_from_string(s);
  } catch (const models::ConfigError&) {
    throw UsageError("unknown model '" + s + "' (standard, indep, adapt)");
  }
}

experiments::TrainConfig train_config(const TrainingFlags& t, std::uint64_t seed) {
  experiments::TrainConfig tc;
  tc.lr = t.lr;
  tc.batch = t.batch;
  tc.max_epochs = t.epochs;
  tc.patience = t.patience;
  tc.seed = seed;
  try {
    tc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return tc;
}

void add_training(RunManifest& m, const TrainingFlags& t) {
  m.config.emplace_back("model", t.model);
  m.config.emplace_back("model_config", t.config_file);
  m.config.emplace_back("lr", fmt::format("{:.17g}", t.lr));
  m.config.emplace_back("batch", std::to_string(t.batch));
  m.config.emplace_back("epochs", std::to_string(t.epochs));
  m.config.emplace_back("patience", std::to_string(t.patience));
}

TensorSet tensors_of(const SampleDir& d) {
  std::vector<preprocess::DfsFrame> frames;
  std::vector<int> domains;
  for (const auto& s : d.samples) {
    frames.push_back(s.dfs);
    domains.push_back(s.domain_id);
  }
  return experiments::to_tensor_set(frames, d.spec.spec.classes.size(), domains);
}

models::ModelConfig model_config(const TrainingFlags& t, const TensorSet& set) {
  const nn::Shape sh = set.sample_shape();
  const models::Family fam = family_flag(t.model);
  models::ModelConfig c;
  if (!t.config_file.empty()) {
    c = models::read_config(resolve_input(t.config_file).string());
    if (c.input_b != sh.h || c.input_t != sh.w || c.input_a != sh.c)
      throw DataError(fmt::format("model config expects {}x{}x{} inputs, data is {}x{}x{}", c.input_b, c.input_t,
                                  c.input_a, sh.h, sh.w, sh.c));
    if (c.classes != set.classes) throw DataError("model config class count differs from the data");
  } else {
    c = models::ModelConfig::reference(fam, sh.h, sh.w, sh.c);
    c.classes = set.classes;
  }
  c.family = fam;
  c.validate();
  return c;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (auto x : v) s += (s.empty() ? "" : " ") + std::to_string(x);
  return s;
}

std::vector<std::size_t> parse_indices(const std::string& s, std::size_t n) {
  std::vector<std::size_t> out;
  std::istringstream is(s);
  std::size_t v;
  while (is >> v) {
    if (v >= n) throw DataError("split index out of range for this data");
    out.push_back(v);
  }
  return out;
}

std::string metric_text(const experiments::Metrics& m) {
  return fmt::format("loss = {:.9g}\naccuracy = {:.9g}\nkappa = {:.9g}\n", m.loss, m.accuracy, m.kappa);
}

}  // namespace

SampleDir read_sample_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("sample directory " + dir.string() + " does not exist");
  if (!fs::is_regular_file(dir / kSamplesIndex))
    throw DataError("no DFS archives (" + std::string(kSamplesIndex) + ") in " + dir.string());
  check_manifest(dir);
  SampleDir d;
  d.spec = read_spec_in(dir);
  for (const auto& row : read_table(dir / kSamplesIndex)) {
    preprocess::SampleRecord r;
    r.dfs = preprocess::read_dfs(dir / row.at("file"));
    r.class_id = r.dfs.class_id;
    r.domain = r.dfs.domain;
    r.domain_id = to_int(row, "domain_id");
    r.grid_index = static_cast<std::size_t>(to_int(row, "grid_index"));
    if (r.class_id < 0 || static_cast<std::size_t>(r.class_id) >= d.spec.spec.classes.size())
      throw DataError(row.at("file") + ": class id out of range");
    d.samples.push_back(std::move(r));
  }
  if (d.samples.empty()) throw DataError(dir.string() + " holds no samples");
  return d;
}

void cmd_simulate(const SimulateArgs& a, std::ostream& log) {
  DatasetFile df;
  if (!a.spec_file.empty() && !a.dataset.empty()) throw UsageError("give either --spec or --dataset, not both");
  if (!a.spec_file.empty()) {
    df = read_dataset_file(resolve_input(a.spec_file).string());
  } else if (!a.dataset.empty()) {
    df.spec = preprocess::DatasetSpec::preset(dataset_from_flag(a.dataset));
  } else {
    throw UsageError("simulate needs --spec or --dataset");
  }
  if (a.seed) df.seed = *a.seed;
  const auto grid = preprocess::scenario_grid(df.spec, df.seed);
  for (const auto& gp : grid) preprocess::make_scenario(df.spec, gp).validate();

  const fs::path out = resolve_output(a.out);
  fs::create_directories(out);
  reset_subdir(out / "csi");
  parallel::set_num_threads(a.common.jobs);
  std::vector<std::size_t> zeroed(grid.size());
  parallel::for_each_job(grid.size(), a.common.jobs, [&](std::size_t i) {
    const csi::CsiFrame f = preprocess::simulate_grid_point(df.spec, grid[i], {}, {}, &zeroed[i]);
    csi::write_csi_bin(out / "csi" / fmt::format("{:05d}.csi", i), f);
  });

  std::string index = "file\tgrid_index\tsubject\ttx_beam\tclass_id\torientation\trepetition\tzeroed_rx\n";
  std::size_t zeroed_total = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& gp = grid[i];
    index += fmt::format("csi/{:05d}.csi\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", i, gp.index, gp.subject_id, gp.tx_beam,
                         gp.class_id, csi::to_string(gp.orientation), gp.repetition, zeroed[i]);
    zeroed_total += zeroed[i];
  }
  write_text(out / kFramesIndex, index);
  const std::string spec_text = dataset_file_text(df);
  write_text(out / kSpecName, spec_text);

  RunManifest m = start_manifest("simulate", a.out, a.common);
  m.seeds = {df.seed};
  m.dataset_spec = spec_text;
  if (!a.spec_file.empty()) m.inputs.emplace_back(a.spec_file, blob_hash(resolve_input(a.spec_file)));
  m.config.emplace_back("dataset", preprocess::to_string(df.spec.which));
  finish_manifest(m, out);
  log << fmt::format("simulated {} frames ({}), {} RX beams zeroed, into {}\n", grid.size(),
                     preprocess::to_string(df.spec.which), zeroed_total, out.string());
}

void cmd_preprocess(const PreprocessArgs& a, std::ostream& log) {
  const fs::path in = require_dir(a.in, "input");
  if (!fs::is_regular_file(in / kFramesIndex))
    throw DataError("no CSI archives (" + std::string(kFramesIndex) + ") in " + in.string());
  check_manifest(in);
  DatasetFile df = read_spec_in(in);
  auto& spec = df.spec;
  if (a.unstack && *a.unstack != spec.unstack) {
    spec.unstack = *a.unstack;
    spec.expected_samples.reset();
    spec.expected_domains.reset();
  }
  if (a.reported_fs) spec.pipeline.stft.reported_fs = *a.reported_fs;
  if (a.window) spec.pipeline.stft.window_len = *a.window;
  if (a.hop) spec.pipeline.stft.hop = *a.hop;
  if (!(a.max_degenerate >= 0.0 && a.max_degenerate <= 1.0)) throw UsageError("--max-degenerate must lie in [0, 1]");

  const auto rows = read_table(in / kFramesIndex);
  struct Out {
    preprocess::DfsFrame dfs;
    std::size_t degenerate = 0, channels = 0;
  };
  std::vector<Out> res(rows.size());
  parallel::set_num_threads(a.common.jobs);
  parallel::for_each_job(rows.size(), a.common.jobs, [&](std::size_t i) {
    const auto& row = rows[i];
    csi::CsiFrame f = csi::read_csi_bin(in / row.at("file"));
    f.class_id = to_int(row, "class_id");
    f.domain.tx_beam = to_int(row, "tx_beam");
    f.domain.subject_id = to_int(row, "subject");
    f.domain.orientation = csi::orientation_from_string(row.at("orientation"));
    preprocess::PipelineReport rep;
    res[i].dfs = preprocess::csi_to_dfs(f, spec.pipeline, &rep);
    res[i].degenerate = rep.degenerate_count();
    res[i].channels = f.A;
  });

  std::size_t degenerate = 0, channels = 0;
  for (const auto& r : res) {
    degenerate += r.degenerate;
    channels += r.channels;
  }
  const double frac = channels ? double(degenerate) / double(channels) : 0.0;
  if (frac > a.max_degenerate)
    throw DataError(fmt::format("degenerate PCA on {} of {} RX channels ({:.3g} > --max-degenerate {:.3g})",
                                degenerate, channels, frac, a.max_degenerate));

  preprocess::Dataset ds;
  ds.spec = spec;
  ds.degenerate_rx = degenerate;
  for (std::size_t i = 0; i < res.size(); ++i) {
    auto emit = [&](preprocess::DfsFrame&& d) {
      preprocess::SampleRecord r;
      r.class_id = d.class_id;
      r.domain = d.domain;
      r.grid_index = static_cast<std::size_t>(to_int(rows[i], "grid_index"));
      r.dfs = std::move(d);
      ds.samples.push_back(std::move(r));
    };
    if (spec.unstack) {
      for (auto& part : preprocess::unstack_rx(res[i].dfs)) emit(std::move(part));
    } else {
      emit(std::move(res[i].dfs));
    }
  }
  preprocess::assign_domain_ids(ds.samples, spec.orientation_is_domain);
  ds.domain_count = preprocess::count_domains(ds.samples, spec.orientation_is_domain, &ds.present_domain_count);
  preprocess::check_expected(ds);

  const fs::path out = resolve_output(a.out);
  fs::create_directories(out);
  reset_subdir(out / "dfs");
  std::string index = "file\tclass_id\tdomain_id\tgrid_index\ttx_beam\trx_patch\tsubject\torientation\n";
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    const std::string file = fmt::format("dfs/{:05d}.dfs", i);
    preprocess::write_dfs(out / file, s.dfs);
    index += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", file, s.class_id, s.domain_id, s.grid_index,
                         s.domain.tx_beam, s.domain.rx_patch.value_or(-1), s.domain.subject_id,
                         csi::to_string(s.domain.orientation));
  }
  write_text(out / kSamplesIndex, index);
  const std::string spec_text = dataset_file_text(df);
  write_text(out / kSpecName, spec_text);
  const auto& f0 = ds.samples.front().dfs;
  write_text(out / "report.txt",
             fmt::format("samples = {}\ndomains = {}\ndomains_present = {}\ndegenerate_rx = {}\nshape = {}x{}x{}\n"
                         "reported_fs = {:g}\ndoppler_max_hz = {:.9g}\n",
                         ds.samples.size(), ds.domain_count, ds.present_domain_count, degenerate, f0.B, f0.T, f0.A,
                         f0.reported_fs, f0.doppler_axis().back()));

  RunManifest m = start_manifest("preprocess", a.out, a.common);
  m.seeds = {df.seed};
  m.dataset_spec = spec_text;
  m.inputs.emplace_back(a.in, tree_hash(in));
  m.config.emplace_back("unstack", spec.unstack ? "true" : "false");
  m.config.emplace_back("reported_fs", fmt::format("{:.17g}", spec.pipeline.stft.reported_fs));
  m.config.emplace_back("window", std::to_string(spec.pipeline.stft.window_len));
  m.config.emplace_back("hop", std::to_string(spec.pipeline.stft.hop));
  m.config.emplace_back("max_degenerate", fmt::format("{:.17g}", a.max_degenerate));
  finish_manifest(m, out);
  log << fmt::format("wrote {} DFS archives ({} domains, {}x{}x{}) into {}\n", ds.samples.size(), ds.domain_count,
                     f0.B, f0.T, f0.A, out.string());
}

void cmd_inspect(const InspectArgs& a, std::ostream& log) {
  const fs::path in = require_dir(a.in, "input");
  const SampleDir d = read_sample_dir(in);
  viz::GridLayout layout;
  if (a.scale == "db") layout.scale = viz::Scale::Db;
  else if (a.scale == "linear") layout.scale = viz::Scale::Linear;
  else throw UsageError("--scale is db or linear");
  if (a.norm == "frame") layout.norm = viz::Normalization::PerFrame;
  else if (a.norm == "global") layout.norm = viz::Normalization::Global;
  else throw UsageError("--norm is frame or global");
  if (a.color == "heat") layout.color = viz::ColorMap::Heat;
  else if (a.color == "mono") layout.color = viz::ColorMap::Mono;
  else throw UsageError("--color is heat or mono");
  layout.db_floor = a.db_floor;
  if (a.rows == 0) throw UsageError("--rows must be at least 1");

  const auto names = d.spec.spec.class_names();
  if (a.class_name && std::find(names.begin(), names.end(), *a.class_name) == names.end())
    throw UsageError("unknown class '" + *a.class_name + "'");
  // (tx, class) -> grid index -> frames of that grid point
  std::map<std::pair<int, int>, std::map<std::size_t, std::vector<const preprocess::SampleRecord*>>> groups;
  for (const auto& s : d.samples) {
    if (a.tx_beam && s.domain.tx_beam != *a.tx_beam) continue;
    if (a.class_name && names[static_cast<std::size_t>(s.class_id)] != *a.class_name) continue;
    groups[{s.domain.tx_beam, s.class_id}][s.grid_index].push_back(&s);
  }
  if (groups.empty()) throw DataError("no samples match the selection");

  const fs::path out = resolve_output(a.out);
  fs::create_directories(out);
  const std::string dataset = preprocess::to_string(d.spec.spec.which);
  std::size_t written = 0;
  for (const auto& [key, points] : groups) {
    std::vector<preprocess::DfsFrame> cells;
    std::size_t rows = 0, cols = 0;
    for (const auto& [gi, frames] : points) {
      if (rows == a.rows) break;
      std::vector<preprocess::DfsFrame> stacked;
      for (const auto* s : frames) stacked.push_back(s->dfs);
      std::sort(stacked.begin(), stacked.end(), [](const auto& x, const auto& y) {
        return x.domain.rx_patch.value_or(-1) < y.domain.rx_patch.value_or(-1);
      });
      auto row = viz::rx_cells(stacked);
      if (cols == 0) cols = row.size();
      if (row.size() != cols) continue;
      for (auto& c : row) cells.push_back(std::move(c));
      ++rows;
    }
    layout.rows = rows;
    layout.cols = cols;
    const fs::path file =
        out / viz::grid_filename(dataset, key.first, names[static_cast<std::size_t>(key.second)]);
    viz::write_ppm(file, viz::render_dfs_grid(cells, layout));
    ++written;
  }
  RunManifest m = start_manifest("inspect", a.out, a.common);
  m.dataset_spec = dataset_file_text(d.spec);
  m.inputs.emplace_back(a.in, tree_hash(in));
  m.config.emplace_back("scale", a.scale);
  m.config.emplace_back("norm", a.norm);
  m.config.emplace_back("color", a.color);
  m.config.emplace_back("db_floor", fmt::format("{:.17g}", a.db_floor));
  m.config.emplace_back("rows", std::to_string(a.rows));
  finish_manifest(m, out);
  log << fmt::format("wrote {} grids into {}\n", written, out.string());
}

void cmd_tune(const TuneArgs& a, std::ostream& log) {
  const fs::path in = require_dir(a.in, "input");
  const SampleDir d = read_sample_dir(in);
  const TensorSet set = tensors_of(d);
  const auto tc = train_config(a.train, a.common.seed);
  const models::ModelConfig base = model_config(a.train, set);
  const bool paper_space = a.common.paper_protocol || a.space == "paper";
  if (!paper_space && a.space != "desk") throw UsageError("--space is desk or paper");
  const models::SearchSpace space =
      paper_space ? models::SearchSpace::paper(set.sample_shape().c) : models::SearchSpace::desk(set.sample_shape().c);

  tuning::HyperbandConfig hc;
  hc.initial_candidates = a.candidates;
  hc.eta = a.eta;
  hc.iterations = a.iterations;
  hc.initial_epochs = a.initial_epochs;
  hc.epoch_cap = a.cap;
  hc.epoch_budget = a.budget;
  hc.seed = a.common.seed;
  hc.multi_bracket = a.multi_bracket;
  try {
    (void)tuning::survivor_schedule(hc);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  experiments::SplitSpec sp;
  sp.seed = a.common.seed;
  const auto ts = experiments::tuning_split(set.domain, sp);
  const fs::path out = resolve_output(a.out);
  fs::create_directories(out);
  tuning::HyperbandOptions ho;
  ho.run_dir = out;
  ho.jobs = a.common.jobs;
  parallel::set_num_threads(1);
  const auto res = tuning::hyperband_run(space, base, DataView(set, ts.train), DataView(set, ts.val), hc, tc, ho);
  const auto& best = res.best();
  models::write_config((out / "best_config.txt").string(), best.config);

  std::string sched;
  for (auto v : tuning::survivor_schedule(hc)) sched += (sched.empty() ? "" : ",") + std::to_string(v);
  std::size_t failed = 0;
  for (const auto& c : res.ranking) failed += c.failed ? 1 : 0;
  const std::string summary =
      fmt::format("schedule = {}\ncandidates = {}\nfailed = {}\nrejected_draws = {}\nbest_candidate = {}\n"
                  "best_val_loss = {:.9g}\nbest_accuracy = {:.9g}\nbest_kappa = {:.9g}\n",
                  sched, res.ranking.size(), failed, res.rejected_draws, best.id, best.val_loss, best.accuracy,
                  best.kappa);
  write_text(out / "summary.txt", summary);

  RunManifest m = start_manifest("tune", a.out, a.common);
  m.dataset_spec = dataset_file_text(d.spec);
  m.inputs.emplace_back(a.in, tree_hash(in));
  add_training(m, a.train);
  m.config.emplace_back("candidates", std::to_string(a.candidates));
  m.config.emplace_back("eta", std::to_string(a.eta));
  m.config.emplace_back("iterations", std::to_string(a.iterations));
  m.config.emplace_back("initial_epochs", std::to_string(a.initial_epochs));
  m.config.emplace_back("cap", std::to_string(a.cap));
  m.config.emplace_back("budget", std::to_string(a.budget));
  m.config.emplace_back("space", paper_space ? "paper" : "desk");
  m.config.emplace_back("multi_bracket", a.multi_bracket ? "true" : "false");
  finish_manifest(m, out);
  log << summary;
}

void cmd_train(const TrainArgs& a, std::ostream& log) {
  const fs::path in = require_dir(a.in, "input");
  const SampleDir d = read_sample_dir(in);
  const TensorSet set = tensors_of(d);
  const auto tc = train_config(a.train, a.common.seed);
  const models::ModelConfig cfg = model_config(a.train, set);
  experiments::SplitSpec sp;
  sp.seed = a.common.seed;
  const auto split = experiments::split_dataset(set.size(), sp);
  if (split.train.empty() || split.val.empty() || split.test.empty())
    throw DataError(fmt::format("{} samples are too few for a train/val/test split", set.size()));

  parallel::set_num_threads(a.common.jobs);
  std::unique_ptr<experiments::TrainingSession> session;
  const auto res = experiments::train_with_early_stopping(cfg, DataView(set, split.train), DataView(set, split.val),
                                                          tc, nullptr, &session);
  if (res.failed) throw nn::NumericalError("training failed: " + res.message);
  const auto test = experiments::evaluate_metrics(session->model(), DataView(set, split.test));

  const fs::path out = resolve_output(a.out);
  fs::create_directories(out);
  reset_subdir(out / "model");
  session->save(out / "model");
  write_text(out / "split.txt", "train " + join(split.train) + "\nval " + join(split.val) + "\ntest " +
                                    join(split.test) + "\n");
  std::vector<experiments::MetricsRow> rows;
  const std::string arm = models::to_string(cfg.family);
  for (const auto& e : res.history) rows.push_back({arm, a.common.seed, 0, e});
  experiments::EpochRecord t;
  t.epoch = res.best_epoch;
  t.loss = test.loss;
  t.val_loss = res.best_val_loss;
  t.accuracy = test.accuracy;
  t.kappa = test.kappa;
  rows.push_back({"test", a.common.seed, 0, t});
  experiments::write_metrics_csv(out / "metrics.csv", rows);
  const std::string summary =
      fmt::format("epochs_run = {}\nbest_epoch = {}\nearly_stopped = {}\nbest_val_loss = {:.9g}\n"
                  "val_accuracy = {:.9g}\nval_kappa = {:.9g}\ntest_accuracy = {:.9g}\ntest_kappa = {:.9g}\n",
                  res.epochs_run, res.best_epoch, res.early_stopped ? 1 : 0, res.best_val_loss, res.val.accuracy,
                  res.val.kappa, test.accuracy, test.kappa);
  write_text(out / "summary.txt", summary);

  RunManifest m = start_manifest("train", a.out, a.common);
  m.dataset_spec = dataset_file_text(d.spec);
  m.inputs.emplace_back(a.in, tree_hash(in));
  if (!a.train.config_file.empty())
    m.inputs.emplace_back(a.train.config_file, blob_hash(resolve_input(a.train.config_file)));
  add_training(m, a.train);
  finish_manifest(m, out);
  log << summary;
}

void cmd_eval(const EvalArgs& a, std::ostream& log) {
  const fs::path in = require_dir(a.in, "input");
  const fs::path run = require_dir(a.run, "run");
  if (!fs::is_regular_file(run / "split.txt")) throw DataError("no split.txt in " + run.string());
  check_manifest(run);
  const SampleDir d = read_sample_dir(in);
  const TensorSet set = tensors_of(d);

  std::map<std::string, std::vector<std::size_t>> parts;
  {
    std::istringstream is(read_text(run / "split.txt"));
    std::string line;
    while (std::getline(is, line)) {
      const auto sp = line.find(' ');
      const std::string name = line.substr(0, sp);
      parts[name] = sp == std::string::npos ? std::vector<std::size_t>{} : parse_indices(line.substr(sp), set.size());
    }
  }
  std::vector<std::size_t> idx;
  if (a.subset == "all") {
    for (std::size_t i = 0; i < set.size(); ++i) idx.push_back(i);
  } else if (parts.count(a.subset)) {
    idx = parts[a.subset];
  } else {
    throw UsageError("--subset is train, val, test or all");
  }
  if (idx.empty()) throw DataError("the " + a.subset + " subset is empty");

  experiments::TrainConfig tc;
  tc.seed = a.common.seed;
  auto session = experiments::TrainingSession::load(run / "model", tc);
  const auto& cfg = session->model().config();
  const nn::Shape sh = set.sample_shape();
  if (cfg.input_b != sh.h || cfg.input_t != sh.w || cfg.input_a != sh.c || cfg.classes != set.classes)
    throw DataError("the trained model does not fit this data");
  const auto met = experiments::evaluate_metrics(session->model(), DataView(set, idx));
  const std::string text = fmt::format("subset = {}\nsamples = {}\n", a.subset, idx.size()) + metric_text(met);
  log << text;
  if (!a.out.empty()) {
    const fs::path out = resolve_output(a.out);
    fs::create_directories(out);
    write_text(out / "eval.txt", text);
    RunManifest m = start_manifest("eval", a.out, a.common);
    m.inputs.emplace_back(a.in, tree_hash(in));
    m.inputs.emplace_back(a.run, tree_hash(run));
    m.config.emplace_back("subset", a.subset);
    finish_manifest(m, out);
  }
}

void cmd_hypothesis(const HypothesisArgs& a, std::ostream& log) {
  if (a.which < 1 || a.which > 5) throw UsageError(fmt::format("hypothesis {} does not exist (1..5)", a.which));
  experiments::HypothesisOptions opt;
  if (!a.seeds.empty()) opt.seeds = a.seeds;
  opt.data_seed = a.common.seed;
  opt.train = train_config(a.train, a.common.seed);
  opt.family = family_flag(a.train.model);
  if (!a.train.config_file.empty()) opt.model = models::read_config(resolve_input(a.train.config_file).string());
  opt.paper_protocol = a.common.paper_protocol;
  opt.jobs = a.common.jobs;
  const bool paper_data = !a.dataset.empty();
  if (paper_data) {
    const auto k = dataset_from_flag(a.dataset);
    if (k == preprocess::DatasetKind::Dataset1 || (a.which != 4 && a.which != 5))
      throw UsageError("--dataset selects the dataset 2 variants for hypotheses 4 and 5");
  }
  if (!a.inputs.empty() && (a.which != 5 || a.inputs.size() != 2))
    throw UsageError("--inputs takes two preprocessed directories and applies to hypothesis 5");

  const fs::path out = resolve_output(a.out);
  parallel::set_num_threads(1);
  experiments::Report rep;
  RunManifest m = start_manifest("hypothesis", a.out, a.common);
  if (a.which == 5 && !a.inputs.empty()) {
    const SampleDir da = read_sample_dir(require_dir(a.inputs[0], "input"));
    const SampleDir db = read_sample_dir(require_dir(a.inputs[1], "input"));
    if (da.spec.spec.classes.size() != db.spec.spec.classes.size())
      throw DataError("the two inputs have different class sets");
    rep = experiments::compare_reported_fs(da.samples, db.samples, da.spec.spec.classes.size(),
                                           experiments::reported_fs_hyperband(), opt);
    for (const auto& p : a.inputs) m.inputs.emplace_back(p, tree_hash(resolve_input(p)));
  } else if (a.which == 4 && paper_data) {
    experiments::DilutionSpec s;
    s.paper_datasets = true;
    rep = experiments::run_dilution(s, opt);
  } else if (a.which == 5 && paper_data) {
    experiments::ReportedFsSpec s;
    s.paper_datasets = true;
    s.hyperband = experiments::reported_fs_hyperband();
    rep = experiments::run_reported_fs(s, opt);
  } else {
    rep = experiments::run_hypothesis(a.which, opt);
  }
  fs::create_directories(out);
  rep.write(out);
  m.seeds = opt.paper_protocol ? std::vector<std::uint64_t>{42} : opt.seeds;
  m.config.emplace_back("hypothesis", std::to_string(a.which));
  m.config.emplace_back("data_seed", std::to_string(opt.data_seed));
  m.config.emplace_back("dataset", a.dataset);
  add_training(m, a.train);
  finish_manifest(m, out);
  log << rep.to_text();
}

}  // namespace jcas::cli

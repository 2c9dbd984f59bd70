#include "jcas/preprocess/dataset.hpp"

#include <algorithm>
#include <exception>
#include <map>
#include <numbers>
#include <set>
#include <tuple>

#include "jcas/util/parallel.hpp"

namespace jcas::preprocess {

std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::Dataset1: return "dataset1";
    case DatasetKind::Dataset2V1: return "dataset2_v1";
    case DatasetKind::Dataset2V2: return "dataset2_v2";
    case DatasetKind::Dataset2V3: return "dataset2_v3";
    case DatasetKind::HighSnr: return "high_snr";
  }
  return "?";
}

DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "dataset1" || s == "ds1") return DatasetKind::Dataset1;
  if (s == "dataset2_v1" || s == "ds2v1") return DatasetKind::Dataset2V1;
  if (s == "dataset2_v2" || s == "ds2v2") return DatasetKind::Dataset2V2;
  if (s == "dataset2_v3" || s == "ds2v3") return DatasetKind::Dataset2V3;
  if (s == "high_snr") return DatasetKind::HighSnr;
  throw std::invalid_argument("unknown dataset '" + s + "'");
}

DatasetSpec DatasetSpec::preset(DatasetKind which) {
  DatasetSpec s;
  s.which = which;
  if (which == DatasetKind::Dataset1) {
    s.unstack = true;
    s.fs_collect = 20.0;
    s.duration = 5.0;
    s.pipeline.stft.reported_fs = 500.0;
    s.classes = {{"empty", MotionClass::Empty, 1, 1},
                 {"still_frontal", MotionClass::Still, 1, 1},
                 {"squat_frontal", MotionClass::Squat, 3, 4},
                 {"squat_orthogonal", MotionClass::Squat, 3, 4}};
    SubjectPlan p;
    p.subject_id = 1;
    p.tx_beams = {5, 6, 7, 8, 9, 10};
    p.cells = {{0, Orientation::Frontal, 1},
               {1, Orientation::Frontal, 1},
               {2, Orientation::Frontal, 1},
               {3, Orientation::Orthogonal, 1}};
    s.subjects = {p};
    s.orientation_is_domain = false;
    s.expected_samples = 24 * 16;
    s.expected_domains = 16 * 6;
    return s;
  }
  s.unstack = which == DatasetKind::Dataset2V2 || which == DatasetKind::Dataset2V3;
  s.fs_collect = 100.0;
  s.duration = 2.0;
  s.pipeline.stft.reported_fs = which == DatasetKind::Dataset2V3 ? 800.0 : 100.0;
  s.classes = {{"empty", MotionClass::Empty, 1, 1},
               {"still", MotionClass::Still, 1, 1},
               {"still_hand", MotionClass::HandGesture, 1, 1},
               {"squat", MotionClass::Squat, 1, 1}};
  if (which == DatasetKind::HighSnr) {
    SubjectPlan p;
    p.subject_id = 1;
    p.tx_beams = {10};
    for (int c = 0; c < 4; ++c) p.cells.push_back({c, Orientation::Frontal, 60});
    s.subjects = {p};
    s.fs_collect = 50.0;
    s.duration = 1.28;
    s.pipeline.stft.reported_fs = 50.0;
    s.pipeline.stft.window_len = 32;
    s.tx_power = 1.0;
    s.subject_base = csi::Vec3{4.5, 3.9, 1.3};
    s.orientation_is_domain = false;
    s.expected_samples = 240;
    s.expected_domains = 1;
    return s;
  }
  for (int id = 1; id <= 3; ++id) {
    SubjectPlan p;
    p.subject_id = id;
    p.tx_beams = {7, 8, 9};
    for (Orientation o : {Orientation::Frontal, Orientation::Orthogonal})
      for (int c = 1; c <= 3; ++c) p.cells.push_back({c, o, 3});
    p.cells.push_back({0, Orientation::Frontal, 3});
    s.subjects.push_back(p);
  }
  SubjectPlan late;
  late.subject_id = 4;
  late.tx_beams = {7};
  late.cells = {{2, Orientation::Frontal, 3}, {0, Orientation::Frontal, 3}};
  s.subjects.push_back(late);
  s.orientation_is_domain = true;
  const std::size_t stacked = (3 * 2 * 3 * 3 + 3 * 3) * 3 + 2 * 3;
  const std::size_t domains = 2 * 3 * 4;
  s.expected_samples = s.unstack ? stacked * 16 : stacked;
  s.expected_domains = s.unstack ? domains * 16 : domains;
  return s;
}

std::size_t DatasetSpec::stacked_sample_count() const {
  std::size_t n = 0;
  for (const auto& p : subjects)
    for (const auto& c : p.cells) n += p.tx_beams.size() * static_cast<std::size_t>(c.repetitions);
  return n;
}

std::vector<std::string> DatasetSpec::class_names() const {
  std::vector<std::string> out;
  for (const auto& c : classes) out.push_back(c.name);
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<GridPoint> scenario_grid(const DatasetSpec& spec, std::uint64_t seed) {
  std::vector<GridPoint> grid;
  for (const auto& p : spec.subjects)
    for (int beam : p.tx_beams)
      for (const auto& c : p.cells) {
        if (c.class_id < 0 || static_cast<std::size_t>(c.class_id) >= spec.classes.size()) {
          throw std::invalid_argument("cell class id out of range");
        }
        for (int r = 0; r < c.repetitions; ++r) {
          GridPoint g;
          g.index = grid.size();
          g.subject_id = p.subject_id;
          g.tx_beam = beam;
          g.class_id = c.class_id;
          g.orientation = c.orientation;
          g.repetition = r;
          g.seed = splitmix64(seed ^ splitmix64(g.index + 1));
          grid.push_back(g);
        }
      }
  return grid;
}

csi::SimScenario make_scenario(const DatasetSpec& spec, const GridPoint& gp) {
  csi::SimScenario sc;
  sc.tx_beam = gp.tx_beam;
  sc.fs_collect = spec.fs_collect;
  sc.duration = spec.duration;
  sc.tx_power = spec.tx_power;
  csi::SimRng rng(gp.seed ^ 0x5eedULL);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  sc.global_phase = 2.0 * std::numbers::pi * uni(rng);

  const ClassEntry& ce = spec.classes.at(static_cast<std::size_t>(gp.class_id));
  if (ce.motion != MotionClass::Empty) {
    std::uniform_int_distribution<int> motions(ce.motions_min, ce.motions_max);
    auto prof = csi::default_profile(ce.motion, gp.orientation, motions(rng), spec.duration);
    const int s = gp.subject_id;
    static constexpr double kDx[] = {0.0, 0.15, -0.15, 0.1, -0.1};
    static constexpr double kDy[] = {0.0, 0.2, -0.2, -0.1, 0.1};
    prof.base_pos.x += kDx[s % 5];
    prof.base_pos.y += kDy[s % 5];
    if (spec.subject_base) prof.base_pos = *spec.subject_base;
    prof.rcs_scale = 0.7 + 0.15 * (s % 4);
    prof.motion_rate *= 0.9 + 0.05 * (s % 5);
    prof.phase = 2.0 * std::numbers::pi * uni(rng);
    sc.subject = prof;
  }
  return sc;
}

std::size_t count_domains(const std::vector<SampleRecord>& samples, bool orientation_is_domain,
                          std::size_t* present) {
  std::set<int> tx, subj, rx, orient;
  std::set<std::tuple<int, int, int, int>> tuples;
  for (const auto& s : samples) {
    tx.insert(s.domain.tx_beam);
    subj.insert(s.domain.subject_id);
    const int r = s.domain.rx_patch.value_or(-1);
    const int o = orientation_is_domain ? static_cast<int>(s.domain.orientation) : 0;
    if (s.domain.rx_patch) rx.insert(r);
    if (orientation_is_domain) orient.insert(o);
    tuples.insert({s.domain.tx_beam, s.domain.subject_id, r, o});
  }
  if (present) *present = tuples.size();
  if (samples.empty()) return 0;
  return tx.size() * subj.size() * std::max<std::size_t>(1, rx.size()) * std::max<std::size_t>(1, orient.size());
}

csi::CsiFrame simulate_grid_point(const DatasetSpec& spec, const GridPoint& gp, const Simulator& simulator,
                                  const ScenarioHook& hook, std::size_t* zeroed) {
  csi::SimScenario sc = make_scenario(spec, gp);
  if (hook) hook(gp, sc);
  csi::SimRng rng(gp.seed);
  std::vector<double> snr;
  csi::CsiFrame f = simulator ? simulator(sc, rng, &snr) : csi::simulate_csi(sc, rng, &snr);
  if (snr.size() != f.A) snr = csi::rx_mean_snr_db(sc);
  const std::size_t z = csi::apply_snr_zeroing(f, snr, spec.snr_threshold_db);
  if (zeroed) *zeroed = z;
  f.class_id = gp.class_id;
  f.domain.tx_beam = gp.tx_beam;
  f.domain.subject_id = gp.subject_id;
  f.domain.orientation = gp.orientation;
  return f;
}

void assign_domain_ids(std::vector<SampleRecord>& samples, bool orientation_is_domain) {
  // Dense ids in sorted tuple order.
  std::map<std::tuple<int, int, int, int>, int> ids;
  auto key = [&](const SampleRecord& s) {
    return std::tuple<int, int, int, int>{s.domain.tx_beam, s.domain.subject_id, s.domain.rx_patch.value_or(-1),
                                          orientation_is_domain ? static_cast<int>(s.domain.orientation) : 0};
  };
  for (const auto& s : samples) ids.emplace(key(s), 0);
  int next = 0;
  for (auto& [k, v] : ids) v = next++;
  for (auto& s : samples) s.domain_id = ids.at(key(s));
}

void check_expected(const Dataset& ds) {
  const DatasetSpec& spec = ds.spec;
  if (spec.expected_samples && ds.samples.size() != *spec.expected_samples) {
    throw SpecArithmeticError(to_string(spec.which) + ": produced " + std::to_string(ds.samples.size()) +
                              " samples, declared " + std::to_string(*spec.expected_samples));
  }
  if (spec.expected_domains && ds.domain_count != *spec.expected_domains) {
    throw SpecArithmeticError(to_string(spec.which) + ": produced " + std::to_string(ds.domain_count) +
                              " domains, declared " + std::to_string(*spec.expected_domains));
  }
}

Dataset build_dataset(const DatasetSpec& spec, std::uint64_t seed, const Simulator& simulator,
                      const ScenarioHook& hook) {
  const auto grid = scenario_grid(spec, seed);

  struct Out {
    DfsFrame dfs;
    std::size_t zeroed = 0, degenerate = 0;
  };
  std::vector<Out> results(grid.size());
  std::exception_ptr failure;
  const long n = static_cast<long>(grid.size());
#pragma omp parallel for schedule(dynamic) num_threads(parallel::num_threads())
  for (long i = 0; i < n; ++i) {
    try {
      Out& o = results[static_cast<std::size_t>(i)];
      const csi::CsiFrame f = simulate_grid_point(spec, grid[static_cast<std::size_t>(i)], simulator, hook, &o.zeroed);
      PipelineReport rep;
      o.dfs = csi_to_dfs(f, spec.pipeline, &rep);
      o.degenerate = rep.degenerate_count();
    } catch (...) {
#pragma omp critical(jcas_dataset_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  Dataset ds;
  ds.spec = spec;
  for (std::size_t i = 0; i < results.size(); ++i) {
    ds.zeroed_rx += results[i].zeroed;
    ds.degenerate_rx += results[i].degenerate;
    auto emit = [&](DfsFrame&& d) {
      SampleRecord r;
      r.class_id = d.class_id;
      r.domain = d.domain;
      r.grid_index = i;
      r.dfs = std::move(d);
      ds.samples.push_back(std::move(r));
    };
    if (spec.unstack) {
      for (auto& part : unstack_rx(results[i].dfs)) emit(std::move(part));
    } else {
      emit(std::move(results[i].dfs));
    }
  }
  assign_domain_ids(ds.samples, spec.orientation_is_domain);
  ds.domain_count = count_domains(ds.samples, spec.orientation_is_domain, &ds.present_domain_count);
  check_expected(ds);
  return ds;
}

}  // namespace jcas::preprocess

#include "jcas/experiments/hypotheses.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "jcas/util/parallel.hpp"

namespace jcas::experiments {

void Report::set(const std::string& key, const std::string& value) {
  for (auto& kv : values)
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  values.emplace_back(key, value);
}

void Report::set(const std::string& key, double value) { set(key, fmt::format("{:.9g}", value)); }

std::optional<std::string> Report::get(const std::string& key) const {
  for (const auto& kv : values)
    if (kv.first == key) return kv.second;
  return std::nullopt;
}

double Report::number(const std::string& key) const {
  const auto v = get(key);
  if (!v) throw std::out_of_range("report " + name + " has no key " + key);
  return std::stod(*v);
}

std::string Report::to_text() const {
  std::string out = "report = " + name + "\n";
  for (const auto& [k, v] : values) out += k + " = " + v + "\n";
  return out;
}

void Report::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / (name + ".txt"));
  os << to_text();
  if (!os) throw std::runtime_error("cannot write report " + name);
  write_metrics_csv(dir / (name + "_metrics.csv"), rows);
}

Interval interval95(const std::vector<double>& v) {
  Interval r;
  if (v.empty()) return r;
  r.mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  if (v.size() < 2) return r;
  double ss = 0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  r.half = 1.96 * std::sqrt(ss / double(v.size() - 1)) / std::sqrt(double(v.size()));
  return r;
}

preprocess::DatasetSpec desk_spec(const std::vector<int>& tx_beams, int repetitions) {
  auto s = preprocess::DatasetSpec::preset(preprocess::DatasetKind::HighSnr);
  s.subjects.front().tx_beams = tx_beams;
  for (auto& c : s.subjects.front().cells) c.repetitions = repetitions;
  s.expected_samples.reset();
  s.expected_domains.reset();
  return s;
}

models::ModelConfig model_for(const HypothesisOptions& opt, const TensorSet& data) {
  const nn::Shape sh = data.sample_shape();
  models::ModelConfig c = opt.model ? *opt.model : models::ModelConfig::reference(opt.family, sh.h, sh.w, sh.c);
  c.family = opt.family;
  c.classes = data.classes;
  c.input_b = sh.h;
  c.input_t = sh.w;
  c.input_a = sh.c;
  if (opt.model && c.first_filters < sh.c) c.first_filters = sh.c;
  return c;
}

namespace {

std::vector<std::uint64_t> seeds_of(const HypothesisOptions& opt) {
  return opt.paper_protocol ? std::vector<std::uint64_t>{42} : opt.seeds;
}

TensorSet tensors(const preprocess::Dataset& ds) {
  std::vector<preprocess::DfsFrame> frames;
  std::vector<int> domains;
  for (const auto& s : ds.samples) {
    frames.push_back(s.dfs);
    domains.push_back(s.domain_id);
  }
  return to_tensor_set(frames, ds.spec.classes.size(), domains);
}

template <typename V>
std::vector<V> pick(const std::vector<V>& v, const std::vector<std::size_t>& idx) {
  std::vector<V> out;
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

SplitSpec split_for(std::uint64_t seed) {
  SplitSpec s;
  s.seed = seed;
  return s;
}

TrainConfig train_for(const HypothesisOptions& opt, std::uint64_t seed) {
  TrainConfig tc = opt.train;
  tc.seed = seed;
  return tc;
}

void append_history(Report& r, const std::string& arm, std::uint64_t seed, int fold, const TrialResult& t) {
  for (const auto& h : t.history) r.rows.push_back({arm, seed, fold, h});
}

MetricsRow eval_row(const std::string& arm, std::uint64_t seed, int fold, std::size_t epoch, const Metrics& m) {
  EpochRecord e;
  e.epoch = epoch;
  e.loss = m.loss;
  e.val_loss = m.loss;
  e.accuracy = m.accuracy;
  e.kappa = m.kappa;
  return {arm, seed, fold, e};
}

void put_interval(Report& r, const std::string& key, const std::vector<double>& v) {
  const Interval iv = interval95(v);
  r.set(key + "_mean", iv.mean);
  r.set(key + "_ci_lo", iv.lo());
  r.set(key + "_ci_hi", iv.hi());
}

// Training on a view; an early failure is reported instead of thrown.
struct Fit {
  TrialResult trial;
  std::unique_ptr<TrainingSession> session;
};

Fit fit(const models::ModelConfig& cfg, const DataView& tr, const DataView& va, const TrainConfig& tc) {
  Fit f;
  f.trial = train_with_early_stopping(cfg, tr, va, tc, nullptr, &f.session);
  return f;
}

}  // namespace

Report run_domain_shift(const DomainShiftSpec& spec, const HypothesisOptions& opt) {
  const std::size_t nb = spec.tx_beams.size();
  if (nb < 2) throw std::invalid_argument("domain shift needs at least two TX beams");
  if (spec.stress && (spec.doppler_scale.size() != nb || spec.spur_hz.size() != nb))
    throw std::invalid_argument("one Doppler scale and spur per TX beam needed");
  auto ds_spec = desk_spec(spec.tx_beams, spec.repetitions);
  const preprocess::ScenarioHook hook = [&](const preprocess::GridPoint& gp, csi::SimScenario& sc) {
    const std::size_t k =
        std::size_t(std::find(spec.tx_beams.begin(), spec.tx_beams.end(), gp.tx_beam) - spec.tx_beams.begin());
    sc.tx_beam = spec.physical_beam;
    if (spec.stress) {
      sc.doppler_scale = spec.doppler_scale[k];
      sc.spur_hz = spec.spur_hz[k];
      sc.spur_rel_db = spec.spur_rel_db;
    }
  };
  const auto ds = preprocess::build_dataset(ds_spec, opt.data_seed, {}, hook);
  const TensorSet set = tensors(ds);
  std::vector<int> beam;
  for (const auto& s : ds.samples) beam.push_back(s.domain.tx_beam);
  const models::ModelConfig cfg = model_for(opt, set);
  const auto seeds = seeds_of(opt);

  Report rep;
  rep.name = spec.stress ? "h1_domain_shift_stress" : "h1_domain_shift_control";
  rep.set("arm", spec.stress ? "stress" : "control");
  rep.set("samples", double(set.size()));
  rep.set("tx_beams", fmt::format("{}", fmt::join(spec.tx_beams, ",")));
  rep.set("physical_beam", double(spec.physical_beam));
  std::vector<double> in_k(seeds.size()), cross_k(seeds.size());
  std::vector<Report> parts(seeds.size());
  parallel::for_each_job(seeds.size(), opt.jobs, [&](std::size_t si) {
    const std::uint64_t seed = seeds[si];
    const int held = spec.tx_beams[si % nb];
    std::vector<std::size_t> pool, cross;
    for (std::size_t i = 0; i < set.size(); ++i) (beam[i] == held ? cross : pool).push_back(i);
    const Split sp = split_dataset(pool.size(), split_for(seed));
    const DataView tr(set, pick(pool, sp.train)), va(set, pick(pool, sp.val)), te(set, pick(pool, sp.test)),
        xv(set, cross);
    Fit f = fit(cfg, tr, va, train_for(opt, seed));
    Report& part = parts[si];
    append_history(part, rep.name, seed, held, f.trial);
    if (f.trial.failed) {
      part.set(fmt::format("seed.{}.failed", seed), f.trial.message);
      in_k[si] = cross_k[si] = 0;
      return;
    }
    const Metrics mi = evaluate_metrics(f.session->model(), te), mx = evaluate_metrics(f.session->model(), xv);
    in_k[si] = mi.kappa;
    cross_k[si] = mx.kappa;
    part.rows.push_back(eval_row(rep.name + "/in_domain", seed, held, f.trial.best_epoch, mi));
    part.rows.push_back(eval_row(rep.name + "/cross_domain", seed, held, f.trial.best_epoch, mx));
    part.set(fmt::format("seed.{}.held_beam", seed), double(held));
    part.set(fmt::format("seed.{}.in_domain_kappa", seed), mi.kappa);
    part.set(fmt::format("seed.{}.cross_domain_kappa", seed), mx.kappa);
    part.set(fmt::format("seed.{}.in_domain_accuracy", seed), mi.accuracy);
    part.set(fmt::format("seed.{}.cross_domain_accuracy", seed), mx.accuracy);
  });
  for (auto& p : parts) {
    for (auto& kv : p.values) rep.values.push_back(kv);
    rep.rows.insert(rep.rows.end(), p.rows.begin(), p.rows.end());
  }
  put_interval(rep, "in_domain_kappa", in_k);
  put_interval(rep, "cross_domain_kappa", cross_k);
  std::vector<double> gap(seeds.size());
  for (std::size_t i = 0; i < gap.size(); ++i) gap[i] = in_k[i] - cross_k[i];
  put_interval(rep, "gap", gap);
  rep.set("intervals_overlap", interval95(in_k).overlaps(interval95(cross_k)) ? "1" : "0");
  return rep;
}

double off_centre_fraction(const preprocess::DfsFrame& f) {
  const std::size_t centre = f.stft_bins / 2;
  double near = 0, total = 0;
  for (std::size_t b = 0; b < f.B; ++b)
    for (std::size_t t = 0; t < f.T; ++t)
      for (std::size_t a = 0; a < f.A; ++a) {
        const double v = f.at(a, b, t);
        total += v;
        if (b + 1 >= centre && b <= centre + 1) near += v;
      }
  return total > 0 ? 1.0 - near / total : 0.0;
}

double d_prime(const std::vector<double>& a, const std::vector<double>& b) {
  const Interval ia = interval95(a), ib = interval95(b);
  auto var = [](const std::vector<double>& v, double m) {
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return v.size() > 1 ? s / double(v.size() - 1) : 0.0;
  };
  const double pooled = std::sqrt((var(a, ia.mean) + var(b, ib.mean)) / 2);
  return pooled > 0 ? std::abs(ia.mean - ib.mean) / pooled : std::numeric_limits<double>::infinity();
}

Report run_sensitivity(const SensitivitySpec& spec, const HypothesisOptions& opt) {
  auto s = desk_spec({spec.tx_beam}, spec.repetitions);
  s.classes = {{"empty", csi::MotionClass::Empty, 1, 1},
               {"squat_1", csi::MotionClass::Squat, 1, 1},
               {"squat_3_4", csi::MotionClass::Squat, 3, 4}};
  s.subjects.front().cells = {{0, csi::Orientation::Frontal, spec.repetitions},
                              {1, csi::Orientation::Frontal, spec.repetitions},
                              {2, csi::Orientation::Frontal, spec.repetitions}};
  Report rep;
  rep.name = "h2_sensitivity";
  const auto seeds = seeds_of(opt);
  std::vector<double> d1, d34;
  for (std::uint64_t seed : seeds) {
    const auto ds = preprocess::build_dataset(s, seed);
    std::vector<std::vector<double>> by(3);
    for (const auto& smp : ds.samples) by[std::size_t(smp.class_id)].push_back(off_centre_fraction(smp.dfs));
    d1.push_back(d_prime(by[1], by[0]));
    d34.push_back(d_prime(by[2], by[0]));
    rep.set(fmt::format("seed.{}.off_centre_empty", seed), interval95(by[0]).mean);
    rep.set(fmt::format("seed.{}.off_centre_squat_1", seed), interval95(by[1]).mean);
    rep.set(fmt::format("seed.{}.off_centre_squat_3_4", seed), interval95(by[2]).mean);
    rep.set(fmt::format("seed.{}.d_prime_1_motion", seed), d1.back());
    rep.set(fmt::format("seed.{}.d_prime_3_4_motions", seed), d34.back());
  }
  put_interval(rep, "d_prime_1_motion", d1);
  put_interval(rep, "d_prime_3_4_motions", d34);
  return rep;
}

Report run_volume(const VolumeSpec& spec, const HypothesisOptions& opt) {
  const auto ds = preprocess::build_dataset(desk_spec(spec.tx_beams, spec.repetitions), opt.data_seed);
  const TensorSet set = tensors(ds);
  const models::ModelConfig cfg = model_for(opt, set);
  const auto seeds = seeds_of(opt);
  Report rep;
  rep.name = "h3_volume";
  rep.set("samples", double(set.size()));
  const std::size_t nf = spec.fractions.size();
  std::vector<double> kappa(seeds.size() * nf);
  std::vector<Report> parts(seeds.size() * nf);
  parallel::for_each_job(seeds.size() * nf, opt.jobs, [&](std::size_t job) {
    const std::uint64_t seed = seeds[job / nf];
    const double frac = spec.fractions[job % nf];
    const Split sp = split_dataset(set.size(), split_for(seed));
    std::vector<std::size_t> train = sp.train;
    train.resize(std::max<std::size_t>(1, std::size_t(std::ceil(frac * double(train.size())))));
    const std::string arm = fmt::format("frac_{:g}", frac);
    Fit f = fit(cfg, DataView(set, train), DataView(set, sp.val), train_for(opt, seed));
    append_history(parts[job], arm, seed, 0, f.trial);
    kappa[job] = f.trial.failed ? 0.0 : f.trial.val.kappa;
    parts[job].set(fmt::format("seed.{}.{}.train_samples", seed, arm), double(train.size()));
    parts[job].set(fmt::format("seed.{}.{}.val_kappa", seed, arm), kappa[job]);
  });
  for (auto& p : parts) {
    for (auto& kv : p.values) rep.values.push_back(kv);
    rep.rows.insert(rep.rows.end(), p.rows.begin(), p.rows.end());
  }
  for (std::size_t k = 0; k < nf; ++k) {
    std::vector<double> v;
    for (std::size_t s = 0; s < seeds.size(); ++s) v.push_back(kappa[s * nf + k]);
    put_interval(rep, fmt::format("frac_{:g}.val_kappa", spec.fractions[k]), v);
  }
  return rep;
}

Report run_dilution(const DilutionSpec& spec, const HypothesisOptions& opt) {
  preprocess::DatasetSpec s = spec.paper_datasets ? preprocess::DatasetSpec::preset(preprocess::DatasetKind::Dataset2V1)
                                                  : desk_spec(spec.tx_beams, spec.repetitions);
  s.unstack = false;
  const preprocess::ScenarioHook hook = [&](const preprocess::GridPoint&, csi::SimScenario& sc) {
    sc.uninformative_rx = spec.uninformative_rx;
  };
  const auto ds = preprocess::build_dataset(s, opt.data_seed, {}, hook);
  const TensorSet stacked = tensors(ds);
  // Normalisation happens before unstacking, so splitting the stacked frames
  // reproduces the unstacked dataset exactly.
  TensorSet unstacked;
  unstacked.classes = stacked.classes;
  std::vector<std::vector<std::size_t>> parts_of(ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    for (const auto& part : preprocess::unstack_rx(ds.samples[i].dfs)) {
      parts_of[i].push_back(unstacked.size());
      std::vector<preprocess::DfsFrame> one{part};
      TensorSet t = to_tensor_set(one, stacked.classes);
      unstacked.add(std::move(t.x.front()), part.class_id, ds.samples[i].domain_id);
    }
  auto expand = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::size_t> out;
    for (std::size_t i : idx) out.insert(out.end(), parts_of[i].begin(), parts_of[i].end());
    return out;
  };
  const auto seeds = seeds_of(opt);
  Report rep;
  rep.name = "h4_dilution";
  rep.set("stacked_samples", double(stacked.size()));
  rep.set("unstacked_samples", double(unstacked.size()));
  rep.set("uninformative_rx", fmt::format("0x{:04x}", spec.uninformative_rx));
  rep.set("uninformative_share", double(__builtin_popcount(spec.uninformative_rx)) / double(stacked.sample_shape().c));
  std::vector<double> ks(seeds.size()), ku(seeds.size());
  std::vector<Report> parts(seeds.size() * 2);
  parallel::for_each_job(seeds.size() * 2, opt.jobs, [&](std::size_t job) {
    const std::uint64_t seed = seeds[job / 2];
    const bool unst = job % 2 == 1;
    const Split sp = split_dataset(stacked.size(), split_for(seed));
    const TensorSet& set = unst ? unstacked : stacked;
    const DataView tr(set, unst ? expand(sp.train) : sp.train), va(set, unst ? expand(sp.val) : sp.val);
    Fit f = fit(model_for(opt, set), tr, va, train_for(opt, seed));
    const std::string arm = unst ? "unstacked" : "stacked";
    append_history(parts[job], arm, seed, 0, f.trial);
    const double k = f.trial.failed ? 0.0 : f.trial.val.kappa;
    (unst ? ku : ks)[job / 2] = k;
    parts[job].set(fmt::format("seed.{}.{}.val_kappa", seed, arm), k);
    parts[job].set(fmt::format("seed.{}.{}.val_accuracy", seed, arm), f.trial.failed ? 0.0 : f.trial.val.accuracy);
  });
  for (auto& p : parts) {
    for (auto& kv : p.values) rep.values.push_back(kv);
    rep.rows.insert(rep.rows.end(), p.rows.begin(), p.rows.end());
  }
  put_interval(rep, "stacked.val_kappa", ks);
  put_interval(rep, "unstacked.val_kappa", ku);
  rep.set("unstacked_no_better", interval95(ku).mean <= interval95(ks).mean ? "1" : "0");
  return rep;
}

Report run_reported_fs(const ReportedFsSpec& spec, const HypothesisOptions& opt) {
  auto make = [&](double fs, preprocess::DatasetKind paper_kind) {
    preprocess::DatasetSpec s =
        spec.paper_datasets ? preprocess::DatasetSpec::preset(paper_kind) : desk_spec(spec.tx_beams, spec.repetitions);
    s.unstack = true;
    s.pipeline.stft.reported_fs = fs;
    return preprocess::build_dataset(s, opt.data_seed);
  };
  const auto da = make(spec.fs_a, preprocess::DatasetKind::Dataset2V2);
  const auto db = make(spec.fs_b, preprocess::DatasetKind::Dataset2V3);
  return compare_reported_fs(da.samples, db.samples, da.spec.classes.size(), spec.hyperband, opt);
}

Report compare_reported_fs(const std::vector<preprocess::SampleRecord>& a,
                           const std::vector<preprocess::SampleRecord>& b, std::size_t classes,
                           const tuning::HyperbandConfig& hyperband, const HypothesisOptions& opt) {
  if (a.empty() || b.empty()) throw EmptyDataset("reported-rate comparison needs two non-empty sets");
  const double fs_a = a.front().dfs.reported_fs, fs_b = b.front().dfs.reported_fs;
  bool identical = a.size() == b.size();
  for (std::size_t i = 0; identical && i < a.size(); ++i) identical = a[i].dfs.values == b[i].dfs.values;
  Report rep;
  rep.name = "h5_reported_fs";
  rep.set("fs_a", fs_a);
  rep.set("fs_b", fs_b);
  rep.set("samples_a", double(a.size()));
  rep.set("samples_b", double(b.size()));
  rep.set("tensors_identical", identical ? "1" : "0");
  rep.set("doppler_max_hz_a", a.front().dfs.doppler_axis().back());
  rep.set("doppler_max_hz_b", b.front().dfs.doppler_axis().back());
  const std::uint64_t seed = seeds_of(opt).front();
  for (int arm = 0; arm < 2; ++arm) {
    const auto& samples = arm == 0 ? a : b;
    std::vector<preprocess::DfsFrame> frames;
    std::vector<int> domains;
    for (const auto& s : samples) {
      frames.push_back(s.dfs);
      domains.push_back(s.domain_id);
    }
    const TensorSet set = to_tensor_set(frames, classes, domains);
    const TuningSplit ts = tuning_split(set.domain, split_for(42));
    tuning::HyperbandConfig hc = hyperband;
    hc.seed = seed;
    tuning::HyperbandOptions ho;
    ho.jobs = opt.jobs;
    models::ModelConfig base = model_for(opt, set);
    const auto res = tuning::hyperband_run(models::SearchSpace::desk(set.sample_shape().c), base,
                                           DataView(set, ts.train), DataView(set, ts.val), hc,
                                           train_for(opt, seed), ho);
    const std::string tag = arm == 0 ? "a" : "b";
    rep.set("best_val_loss_" + tag, res.best().val_loss);
    rep.set("best_accuracy_" + tag, res.best().accuracy);
    rep.set("best_kappa_" + tag, res.best().kappa);
    rep.set("best_candidate_" + tag, double(res.best().id));
    for (const auto& row : res.audit) {
      EpochRecord e;
      e.epoch = row.epochs_total;
      e.val_loss = row.val_loss;
      e.accuracy = row.accuracy;
      e.kappa = row.kappa;
      rep.rows.push_back({fmt::format("fs_{:g}/cand_{}", arm == 0 ? fs_a : fs_b, row.candidate_id), seed,
                          int(row.iteration), e});
    }
  }
  rep.set("tuning_identical", rep.get("best_val_loss_a") == rep.get("best_val_loss_b") ? "1" : "0");
  return rep;
}

tuning::HyperbandConfig reported_fs_hyperband() {
  tuning::HyperbandConfig hc;
  hc.initial_candidates = 9;
  hc.iterations = 3;
  hc.epoch_cap = 18;
  return hc;
}

Report run_hypothesis(int which, const HypothesisOptions& opt) {
  switch (which) {
    case 1: return run_domain_shift({}, opt);
    case 2: return run_sensitivity({}, opt);
    case 3: return run_volume({}, opt);
    case 4: return run_dilution({}, opt);
    case 5: {
      ReportedFsSpec s;
      s.hyperband = reported_fs_hyperband();
      return run_reported_fs(s, opt);
    }
    default: throw std::invalid_argument(fmt::format("hypothesis {} does not exist (1..5)", which));
  }
}

}  // namespace jcas::experiments

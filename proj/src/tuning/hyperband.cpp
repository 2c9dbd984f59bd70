#include "jcas/tuning/hyperband.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include <fmt/format.h>

#include "jcas/preprocess/dataset.hpp"
#include "jcas/util/parallel.hpp"

namespace jcas::tuning {

namespace {

std::size_t draw(const models::IntRange& r, std::mt19937_64& rng) {
  return std::size_t(std::uniform_int_distribution<long>(r.lo, r.hi)(rng));
}

models::Hw draw_hw(const models::IntRange& r, std::mt19937_64& rng) {
  const std::size_t h = draw(r, rng);
  return {h, draw(r, rng)};
}

std::vector<std::size_t> draw_widths(const models::IntRange& depth, const models::IntRange& width,
                                     std::mt19937_64& rng) {
  std::vector<std::size_t> w(draw(depth, rng));
  for (auto& v : w) v = draw(width, rng);
  return w;
}

}  // namespace

ModelConfig sample_config(const SearchSpace& space, const ModelConfig& base, std::mt19937_64& rng) {
  space.validate();
  ModelConfig c = base;
  c.first_filters = draw(space.first_filters, rng);
  c.first_kernel = draw_hw(space.first_kernel, rng);
  c.first_pool = draw_hw(space.first_pool, rng);
  c.depth = draw(space.depth, rng);
  c.expansion = draw(space.expansion, rng);
  c.residual = draw(space.residual, rng) != 0;
  c.se_rate = std::uniform_real_distribution<double>(space.se_rate.lo, space.se_rate.hi)(rng);
  c.block_reps = draw(space.block_reps, rng);
  c.block_pool = draw_hw(space.block_pool, rng);
  c.final_kernel = draw_hw(space.final_kernel, rng);
  c.cls_widths = draw_widths(space.cls_depth, space.cls_width, rng);
  c.attn_a_kernel = draw_hw(space.attn_a_kernel, rng);
  c.attn_b_pool = draw_hw(space.attn_b_pool, rng);
  c.attn_b_stride = draw_hw(space.attn_b_stride, rng);
  c.attn_b_widths = draw_widths(space.attn_b_depth, space.attn_b_width, rng);
  c.decoder_kernel1 = draw_hw(space.decoder_kernel, rng);
  c.decoder_kernel2 = draw_hw(space.decoder_kernel, rng);
  c.batchnorm = draw(space.batchnorm, rng) != 0;
  return c;
}

ModelConfig sample_buildable(const SearchSpace& space, const ModelConfig& base, std::mt19937_64& rng,
                             std::size_t* rejected, std::size_t max_tries) {
  for (std::size_t i = 0; i < max_tries; ++i) {
    ModelConfig c = sample_config(space, base, rng);
    try {
      models::Model<float> probe(c, 0);
      return c;
    } catch (const models::ConfigError&) {
      if (rejected) ++*rejected;
    }
  }
  throw models::ConfigError(fmt::format("no buildable configuration in {} draws", max_tries));
}

void HyperbandConfig::validate() const {
  if (initial_candidates < 1) throw models::ConfigError("hyperband needs at least one candidate");
  if (eta < 2) throw models::ConfigError("discard proportion must be at least 2");
  if (iterations < 1) throw models::ConfigError("hyperband needs at least one iteration");
  if (initial_epochs < 1 || epoch_cap < 1) throw models::ConfigError("epoch counts must be positive");
}

std::vector<std::size_t> survivor_schedule(const HyperbandConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> c{cfg.initial_candidates};
  while (c.size() < cfg.iterations) c.push_back(std::max<std::size_t>(1, c.back() / cfg.eta));
  return c;
}

std::vector<std::size_t> epoch_schedule(const HyperbandConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> r;
  double e = double(cfg.initial_epochs);
  for (std::size_t i = 0; i < cfg.iterations; ++i, e *= double(cfg.eta))
    r.push_back(std::size_t(std::min(double(cfg.epoch_cap), e)));
  return r;
}

namespace {

using experiments::TrainingSession;

struct Bracket {
  std::vector<std::size_t> counts;
  std::vector<std::size_t> epochs;  // additional epochs per iteration
};

std::vector<Bracket> brackets(const HyperbandConfig& cfg) {
  if (!cfg.multi_bracket) return {{survivor_schedule(cfg), epoch_schedule(cfg)}};
  // Li et al.: s_max + 1 brackets trading candidate count against epochs.
  const std::size_t smax = cfg.iterations - 1;
  std::vector<Bracket> out;
  for (std::size_t s = smax + 1; s-- > 0;) {
    const double ps = std::pow(double(cfg.eta), double(s));
    HyperbandConfig b = cfg;
    b.initial_candidates = std::size_t(std::ceil(double(smax + 1) * ps / double(s + 1)));
    b.iterations = s + 1;
    b.initial_epochs = std::max<std::size_t>(1, std::size_t(double(cfg.epoch_cap) / ps));
    Bracket br{survivor_schedule(b), {}};
    std::size_t prev = 0;
    for (std::size_t total : epoch_schedule(b)) {
      br.epochs.push_back(std::max<std::size_t>(1, total > prev ? total - prev : 1));
      prev = std::max(prev, total);
    }
    out.push_back(br);
  }
  return out;
}

bool rank_less(const Candidate& a, const Candidate& b) {
  if (a.failed != b.failed) return !a.failed;
  if (a.val_loss != b.val_loss) return a.val_loss < b.val_loss;
  return a.id < b.id;
}

}  // namespace

HyperbandResult hyperband_run(const SearchSpace& space, const ModelConfig& base, const experiments::DataView& train,
                              const experiments::DataView& val, const HyperbandConfig& cfg,
                              const experiments::TrainConfig& tc, const HyperbandOptions& opt) {
  cfg.validate();
  tc.validate();
  HyperbandResult res;
  std::mt19937_64 rng(cfg.seed);
  const bool on_disk = !opt.run_dir.empty();
  if (on_disk) std::filesystem::create_directories(opt.run_dir);
  const auto cand_dir = [&](std::size_t id) { return opt.run_dir / fmt::format("cand_{:04d}", id); };
  std::vector<Candidate> all;
  std::vector<std::size_t> finalists;

  const auto plan = brackets(cfg);
  for (std::size_t bi = 0; bi < plan.size(); ++bi) {
    const Bracket& br = plan[bi];
    std::vector<std::size_t> alive;
    for (std::size_t k = 0; k < br.counts[0]; ++k) {
      Candidate c;
      c.id = all.size();
      c.bracket = bi;
      c.config = sample_buildable(space, base, rng, &res.rejected_draws);
      c.model_seed = preprocess::splitmix64(cfg.seed + 0x1000 * (c.id + 1));
      alive.push_back(c.id);
      all.push_back(std::move(c));
    }
    std::vector<std::unique_ptr<TrainingSession>> sessions(all.size());

    for (std::size_t it = 0; it < br.counts.size() && !alive.empty(); ++it) {
      const std::size_t epochs = br.epochs[it];
      std::vector<std::size_t> consumed(alive.size(), 0);
      std::vector<char> stopped(alive.size(), 0);
      parallel::for_each_job(alive.size(), opt.jobs, [&](std::size_t k) {
        Candidate& c = all[alive[k]];
        auto& s = sessions[c.id];
        try {
          if (!s) {
            s = (on_disk && std::filesystem::exists(cand_dir(c.id) / "session.txt"))
                    ? TrainingSession::load(cand_dir(c.id), tc)
                    : std::make_unique<TrainingSession>(c.config, c.model_seed, tc);
          }
          if (opt.on_trial) opt.on_trial(c, it, *s);
          const std::size_t before = s->epochs_done();
          const auto& r = s->run(epochs, train, val, opt.target);
          consumed[k] = s->epochs_done() - before;
          stopped[k] = r.early_stopped;
          c.failed = r.failed;
          c.message = r.message;
          c.epochs_total = s->epochs_done();
          c.val_loss = r.best_val_loss;
          c.accuracy = r.val.accuracy;
          c.kappa = r.val.kappa;
          if (on_disk) {
            s->save(cand_dir(c.id));
            s.reset();
          }
        } catch (const std::exception& e) {
          c.failed = true;
          c.message = e.what();
        }
        c.last_iteration = it;
      });

      BudgetLine bl;
      bl.bracket = bi;
      bl.iteration = it;
      bl.candidates = alive.size();
      bl.epochs_each = epochs;
      bl.planned_total = alive.size() * epochs;
      for (std::size_t k = 0; k < alive.size(); ++k) {
        const Candidate& c = all[alive[k]];
        bl.consumed += consumed[k];
        res.audit.push_back({it, c.id, c.epochs_total, c.val_loss, c.accuracy, c.kappa,
                             c.failed ? "failed" : (stopped[k] ? "stopped" : "ok")});
      }
      bl.within_per_candidate = epochs <= cfg.epoch_budget;
      bl.within_aggregate = bl.planned_total <= cfg.epoch_budget;
      res.budget.push_back(bl);

      std::vector<std::size_t> ok;
      for (std::size_t id : alive)
        if (!all[id].failed) ok.push_back(id);
      std::sort(ok.begin(), ok.end(), [&](std::size_t a, std::size_t b) { return rank_less(all[a], all[b]); });
      if (it + 1 < br.counts.size()) {
        ok.resize(std::min(ok.size(), br.counts[it + 1]));
        for (std::size_t id : alive)
          if (std::find(ok.begin(), ok.end(), id) == ok.end()) sessions[id].reset();
      } else {
        finalists.insert(finalists.end(), ok.begin(), ok.end());
      }
      alive = ok;
    }
  }

  res.ranking = all;
  std::sort(res.ranking.begin(), res.ranking.end(), [&](const Candidate& a, const Candidate& b) {
    const bool fa = std::find(finalists.begin(), finalists.end(), a.id) != finalists.end();
    const bool fb = std::find(finalists.begin(), finalists.end(), b.id) != finalists.end();
    if (a.failed != b.failed) return !a.failed;
    if (fa != fb) return fa;
    return rank_less(a, b);
  });
  if (on_disk) {
    write_audit_csv(opt.run_dir / "audit.csv", res.audit);
    std::ofstream os(opt.run_dir / "ranking.txt");
    for (std::size_t r = 0; r < res.ranking.size(); ++r) {
      const Candidate& c = res.ranking[r];
      os << fmt::format("{} cand_{:04d} {} val_loss={:.9g} accuracy={:.9g} kappa={:.9g}{}\n", r + 1, c.id,
                        models::to_string(c.config.family), c.val_loss, c.accuracy, c.kappa,
                        c.failed ? " failed: " + c.message : "");
    }
    std::ofstream bs(opt.run_dir / "budget.txt");
    bs << budget_report(res, cfg);
  }
  return res;
}

std::string audit_csv_header() { return "iteration,candidate_id,epochs_total,val_loss,accuracy,kappa,status"; }

void write_audit_csv(const std::filesystem::path& path, const std::vector<AuditRow>& rows) {
  std::ofstream os(path);
  os << audit_csv_header() << "\n";
  for (const auto& r : rows)
    os << fmt::format("{},{},{},{:.9g},{:.9g},{:.9g},{}\n", r.iteration, r.candidate_id, r.epochs_total, r.val_loss,
                      r.accuracy, r.kappa, r.status);
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

std::vector<AuditRow> read_audit_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(is, line);
  if (line != audit_csv_header()) throw std::runtime_error("unexpected audit header in " + path.string());
  std::vector<AuditRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 7) throw std::runtime_error("malformed audit line: " + line);
    rows.push_back({std::stoul(f[0]), std::stoul(f[1]), std::stoul(f[2]), std::stod(f[3]), std::stod(f[4]),
                    std::stod(f[5]), f[6]});
  }
  return rows;
}

std::string budget_report(const HyperbandResult& r, const HyperbandConfig& cfg) {
  std::string out = fmt::format("epoch_budget = {}\n", cfg.epoch_budget);
  std::size_t planned = 0, consumed = 0;
  for (const auto& b : r.budget) {
    out += fmt::format(
        "bracket {} iteration {}: candidates = {}, epochs_each = {}, planned = {}, consumed = {}, "
        "per_candidate_within = {}, aggregate_within = {}\n",
        b.bracket, b.iteration, b.candidates, b.epochs_each, b.planned_total, b.consumed, b.within_per_candidate,
        b.within_aggregate);
    planned += b.planned_total;
    consumed += b.consumed;
  }
  out += fmt::format("planned_total = {}\nconsumed_total = {}\nrejected_draws = {}\n", planned, consumed,
                     r.rejected_draws);
  return out;
}

}  // namespace jcas::tuning

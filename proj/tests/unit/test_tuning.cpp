#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "doctest.h"
#include "jcas/experiments/synthetic.hpp"
#include "jcas/tuning/hyperband.hpp"

using namespace jcas;
using namespace jcas::tuning;

namespace {

models::SearchSpace tiny_space() {
  auto s = models::SearchSpace::desk(1);
  s.first_filters = {2, 4};
  s.first_kernel = {2, 3};
  s.first_pool = {2, 2};
  s.depth = {2, 2};
  s.expansion = {2, 2};
  s.block_reps = {0, 0};
  s.block_pool = {2, 2};
  s.final_kernel = {1, 2};
  s.cls_depth = {1, 1};
  s.cls_width = {4, 8};
  s.batchnorm = {0, 1};
  return s;
}

models::ModelConfig tiny_base() {
  auto c = models::ModelConfig::reference(models::Family::Standard, 8, 8, 1);
  c.classes = 2;
  return c;
}

HyperbandConfig tiny_hb() {
  HyperbandConfig h;
  h.initial_candidates = 9;
  h.iterations = 3;
  h.initial_epochs = 1;
  h.epoch_cap = 4;
  h.seed = 5;
  return h;
}

experiments::TrainConfig tiny_tc() {
  experiments::TrainConfig tc;
  tc.lr = 3e-3;
  tc.patience = 2;
  return tc;
}

struct Data {
  experiments::TensorSet tr = experiments::banded_set(24, 2, 8, 8, 1, 1);
  experiments::TensorSet va = experiments::banded_set(12, 2, 8, 8, 1, 2);
  experiments::DataView tv = experiments::DataView::all(tr);
  experiments::DataView vv = experiments::DataView::all(va);
};

}  // namespace

TEST_CASE("survivor and epoch schedules") {
  HyperbandConfig c;
  c.initial_candidates = 1000;
  CHECK(survivor_schedule(c) == std::vector<std::size_t>{1000, 333, 111, 37, 12});
  c.initial_candidates = 27;
  CHECK(survivor_schedule(c) == std::vector<std::size_t>{27, 9, 3, 1, 1});
  c.initial_candidates = 1;
  CHECK(survivor_schedule(c) == std::vector<std::size_t>{1, 1, 1, 1, 1});
  CHECK(epoch_schedule(HyperbandConfig{}) == std::vector<std::size_t>{2, 6, 18, 54, 100});
  c.eta = 1;
  CHECK_THROWS_AS(survivor_schedule(c), models::ConfigError);
}

TEST_CASE("sampled configurations stay inside the search space") {
  const models::ModelConfig base = models::ModelConfig::reference(models::Family::DomainIndependent, 64, 128, 16);
  for (const auto& space : {models::SearchSpace::paper(16), models::SearchSpace::desk(16)}) {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 200; ++i) {
      const auto c = sample_config(space, base, rng);
      std::string why;
      REQUIRE_MESSAGE(c.within(space, &why), why);
      REQUIRE(c.se_rate >= 0.05);
      REQUIRE(c.se_rate <= 0.7);
      REQUIRE(c.family == base.family);
      REQUIRE(c.input_a == 16);
    }
  }
  std::mt19937_64 a(7), b(7), d(8);
  const auto space = models::SearchSpace::paper(16);
  bool differs = false;
  for (int i = 0; i < 20; ++i) {
    const auto x = sample_config(space, base, a);
    CHECK(x == sample_config(space, base, b));
    differs |= !(x == sample_config(space, base, d));
  }
  CHECK(differs);
}

TEST_CASE("buildable sampling rejects collapsing configurations") {
  auto space = tiny_space();
  space.depth = {2, 4};  // depth 3 and 4 collapse an 8 x 8 input
  std::mt19937_64 rng(1);
  std::size_t rejected = 0;
  for (int i = 0; i < 20; ++i) CHECK(sample_buildable(space, tiny_base(), rng, &rejected).depth == 2);
  CHECK(rejected > 0);
  space.depth = {4, 4};
  CHECK_THROWS_AS(sample_buildable(space, tiny_base(), rng, nullptr, 5), models::ConfigError);
}

TEST_CASE("successive halving keeps the best third and logs every trial") {
  Data d;
  const auto hb = tiny_hb();
  const auto tc = tiny_tc();
  const auto res = hyperband_run(tiny_space(), tiny_base(), d.tv, d.vv, hb, tc);
  const auto counts = survivor_schedule(hb), epochs = epoch_schedule(hb);
  std::map<std::size_t, std::vector<AuditRow>> by_iter;
  for (const auto& r : res.audit) by_iter[r.iteration].push_back(r);
  REQUIRE(by_iter.size() == counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) CHECK(by_iter[i].size() == counts[i]);
  for (std::size_t i = 0; i + 1 < counts.size(); ++i) {
    auto rows = by_iter[i];
    std::sort(rows.begin(), rows.end(), [](const AuditRow& a, const AuditRow& b) {
      return a.val_loss != b.val_loss ? a.val_loss < b.val_loss : a.candidate_id < b.candidate_id;
    });
    std::vector<std::size_t> top, next;
    for (std::size_t k = 0; k < counts[i + 1]; ++k) top.push_back(rows[k].candidate_id);
    for (const auto& r : by_iter[i + 1]) next.push_back(r.candidate_id);
    std::sort(top.begin(), top.end());
    std::sort(next.begin(), next.end());
    CHECK(top == next);
  }
  std::size_t planned = 0, consumed = 0;
  for (const auto& b : res.budget) {
    planned += b.planned_total;
    consumed += b.consumed;
    CHECK(b.consumed <= b.planned_total);
    CHECK(b.epochs_each == epochs[b.iteration]);
  }
  std::map<std::size_t, std::size_t> last_total;
  std::size_t from_audit = 0;
  for (const auto& r : res.audit) {
    from_audit += r.epochs_total - last_total[r.candidate_id];
    last_total[r.candidate_id] = r.epochs_total;
  }
  CHECK(from_audit == consumed);
  CHECK(consumed <= planned);
  CHECK(res.ranking.size() == hb.initial_candidates);
  CHECK(res.best().last_iteration == counts.size() - 1);
  for (const auto& c : res.ranking) CHECK(c.val_loss >= res.best().val_loss);
  CHECK(budget_report(res, hb).find("planned_total") != std::string::npos);
}

TEST_CASE("hyperband is deterministic in memory and through checkpoints") {
  Data d;
  const auto a = hyperband_run(tiny_space(), tiny_base(), d.tv, d.vv, tiny_hb(), tiny_tc());
  const auto b = hyperband_run(tiny_space(), tiny_base(), d.tv, d.vv, tiny_hb(), tiny_tc());
  HyperbandOptions opt;
  opt.run_dir = std::filesystem::temp_directory_path() / "jcas_hb_disk";
  std::filesystem::remove_all(opt.run_dir);
  const auto c = hyperband_run(tiny_space(), tiny_base(), d.tv, d.vv, tiny_hb(), tiny_tc(), opt);
  REQUIRE(a.audit.size() == b.audit.size());
  REQUIRE(a.audit.size() == c.audit.size());
  for (std::size_t i = 0; i < a.audit.size(); ++i) {
    CHECK(a.audit[i].candidate_id == b.audit[i].candidate_id);
    CHECK(a.audit[i].val_loss == b.audit[i].val_loss);
    CHECK(a.audit[i].candidate_id == c.audit[i].candidate_id);
    CHECK(a.audit[i].val_loss == c.audit[i].val_loss);
    CHECK(a.audit[i].epochs_total == c.audit[i].epochs_total);
  }
  for (std::size_t i = 0; i < a.ranking.size(); ++i) CHECK(a.ranking[i].id == c.ranking[i].id);
  const auto rows = read_audit_csv(opt.run_dir / "audit.csv");
  CHECK(rows.size() == c.audit.size());
  CHECK(std::filesystem::exists(opt.run_dir / "cand_0000" / "config.txt"));
  CHECK(std::filesystem::exists(opt.run_dir / "cand_0000" / "checkpoint.jcnn"));
  for (const auto& cand : c.ranking)
    CHECK(models::read_config((opt.run_dir / fmt::format("cand_{:04d}", cand.id) / "config.txt").string()) ==
          cand.config);
  std::filesystem::remove_all(opt.run_dir);

  HyperbandOptions par;
  par.jobs = 3;
  const auto p = hyperband_run(tiny_space(), tiny_base(), d.tv, d.vv, tiny_hb(), tiny_tc(), par);
  for (std::size_t i = 0; i < a.audit.size(); ++i) CHECK(a.audit[i].val_loss == p.audit[i].val_loss);
}

TEST_CASE("a trial that turns non-finite is logged as failed and dropped") {
  Data d;
  const auto clean = hyperband_run(tiny_space(), tiny_base(), d.tv, d.vv, tiny_hb(), tiny_tc());
  std::vector<std::size_t> second;
  for (const auto& r : clean.audit)
    if (r.iteration == 1) second.push_back(r.candidate_id);
  REQUIRE(!second.empty());
  const std::size_t victim = second.front();
  HyperbandOptions opt;
  opt.on_trial = [&](const Candidate& c, std::size_t it, experiments::TrainingSession& s) {
    if (c.id == victim && it == 1) s.model().all_params().front()->value[0] = std::numeric_limits<float>::quiet_NaN();
  };
  const auto res = hyperband_run(tiny_space(), tiny_base(), d.tv, d.vv, tiny_hb(), tiny_tc(), opt);
  bool logged = false;
  for (const auto& r : res.audit) {
    if (r.candidate_id != victim) continue;
    if (r.iteration == 1) {
      CHECK(r.status == "failed");
      logged = true;
    }
    CHECK(r.iteration <= 1);
  }
  CHECK(logged);
  CHECK(res.ranking.back().id == victim);
  CHECK(res.ranking.back().failed);
}

TEST_CASE("multi-bracket mode runs one bracket per iteration count") {
  Data d;
  auto hb = tiny_hb();
  hb.multi_bracket = true;
  hb.iterations = 2;
  const auto res = hyperband_run(tiny_space(), tiny_base(), d.tv, d.vv, hb, tiny_tc());
  std::size_t brackets = 0;
  for (const auto& b : res.budget) brackets = std::max(brackets, b.bracket + 1);
  CHECK(brackets == 2);
  // s = 1: ceil(2 * 3 / 2) = 3 candidates, then 1; s = 0: 2 candidates.
  CHECK(res.ranking.size() == 5);
  CHECK(res.budget.front().candidates == 3);
  CHECK(res.budget.back().candidates == 2);
}

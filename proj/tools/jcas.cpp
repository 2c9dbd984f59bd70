// jcas: simulate -> preprocess -> inspect -> tune -> train -> eval -> hypothesis.

#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "jcas/cli/commands.hpp"

namespace {

using namespace jcas::cli;

void add_common(CLI::App* c, CommonOptions& o, bool with_seed = true) {
  if (with_seed) c->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  c->add_option("--jobs", o.jobs, "Parallel trials or frames")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_flag("--paper-protocol", o.paper_protocol, "Single seed (42) and the fold-0 protocol");
}

void add_training(CLI::App* c, TrainingFlags& t) {
  c->add_option("--model", t.model, "standard, indep or adapt")
      ->capture_default_str()
      ->check(CLI::IsMember({"standard", "indep", "adapt", "domain_independent", "domain_adaptation"}));
  c->add_option("--config", t.config_file, "Model config file (e.g. best_config.txt from tune)");
  c->add_option("--lr", t.lr, "ADAM learning rate")->capture_default_str();
  c->add_option("--batch", t.batch, "Batch size")->capture_default_str();
  c->add_option("--epochs", t.epochs, "Maximum epochs")->capture_default_str();
  c->add_option("--patience", t.patience, "Early-stopping patience")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion recognition from beamforming channel data: simulation, preprocessing, models, tuning"};
  app.require_subcommand(1);
  std::function<void()> action;

  SimulateArgs sim;
  std::optional<std::uint64_t> sim_seed;
  auto* s = app.add_subcommand("simulate", "Write one CSI archive per scenario grid point");
  s->add_option("--spec", sim.spec_file, "Dataset spec file");
  s->add_option("--dataset", sim.dataset, "Preset instead of a spec: 1, 2v1, 2v2, 2v3");
  s->add_option("--out", sim.out, "Output directory")->required();
  s->add_option("--seed", sim_seed, "Overrides the seed in the spec file");
  add_common(s, sim.common, false);
  s->callback([&] {
    sim.seed = sim_seed;
    action = [&] { cmd_simulate(sim, std::cout); };
  });

  PreprocessArgs pre;
  std::optional<double> pre_fs;
  std::optional<std::size_t> pre_window, pre_hop;
  bool unstack = false, no_unstack = false;
  auto* p = app.add_subcommand("preprocess", "CSI archives to DFS archives");
  p->add_option("--in", pre.in, "Directory written by simulate")->required();
  p->add_option("--out", pre.out, "Output directory")->required();
  p->add_flag("--unstack", unstack, "One sample per RX beam");
  p->add_flag("--no-unstack", no_unstack, "Keep the RX beams stacked");
  p->add_option("--reported-fs", pre_fs, "Sampling rate written into the axis metadata");
  p->add_option("--window", pre_window, "STFT window length");
  p->add_option("--hop", pre_hop, "STFT hop");
  p->add_option("--max-degenerate", pre.max_degenerate, "Largest tolerated fraction of degenerate RX channels")
      ->capture_default_str();
  add_common(p, pre.common);
  p->callback([&] {
    if (unstack && no_unstack) throw CLI::ValidationError("--unstack and --no-unstack exclude each other");
    if (unstack) pre.unstack = true;
    if (no_unstack) pre.unstack = false;
    pre.reported_fs = pre_fs;
    pre.window = pre_window;
    pre.hop = pre_hop;
    action = [&] { cmd_preprocess(pre, std::cout); };
  });

  InspectArgs ins;
  std::optional<int> ins_tx;
  std::optional<std::string> ins_class;
  auto* i = app.add_subcommand("inspect", "Render DFS grids as PPM images");
  i->add_option("--in", ins.in, "Directory written by preprocess")->required();
  i->add_option("--out", ins.out, "Output directory")->required();
  i->add_option("--tx", ins_tx, "Only this TX beam");
  i->add_option("--class", ins_class, "Only this class");
  i->add_option("--rows", ins.rows, "Samples per grid")->capture_default_str();
  i->add_option("--scale", ins.scale, "db or linear")->capture_default_str();
  i->add_option("--norm", ins.norm, "frame or global")->capture_default_str();
  i->add_option("--color", ins.color, "heat or mono")->capture_default_str();
  i->add_option("--db-floor", ins.db_floor, "Floor of the dB scale")->capture_default_str();
  add_common(i, ins.common);
  i->callback([&] {
    ins.tx_beam = ins_tx;
    ins.class_name = ins_class;
    action = [&] { cmd_inspect(ins, std::cout); };
  });

  TuneArgs tune;
  auto* t = app.add_subcommand("tune", "Hyperband search over model configurations");
  t->add_option("--in", tune.in, "Directory written by preprocess")->required();
  t->add_option("--out", tune.out, "Output directory")->required();
  add_training(t, tune.train);
  t->add_option("--candidates", tune.candidates, "Initial candidates")->capture_default_str();
  t->add_option("--eta", tune.eta, "Reduction factor")->capture_default_str();
  t->add_option("--iterations", tune.iterations, "Rounds of successive halving")->capture_default_str();
  t->add_option("--initial-epochs", tune.initial_epochs, "Epochs in the first round")->capture_default_str();
  t->add_option("--cap", tune.cap, "Largest number of epochs in one round")->capture_default_str();
  t->add_option("--budget", tune.budget, "Epoch budget")->capture_default_str();
  t->add_option("--space", tune.space, "desk or paper")->capture_default_str();
  t->add_flag("--multi-bracket", tune.multi_bracket, "Several brackets instead of one");
  add_common(t, tune.common);
  t->callback([&] { action = [&] { cmd_tune(tune, std::cout); }; });

  TrainArgs train;
  auto* r = app.add_subcommand("train", "Train one model with early stopping");
  r->add_option("--in", train.in, "Directory written by preprocess")->required();
  r->add_option("--out", train.out, "Run directory")->required();
  add_training(r, train.train);
  add_common(r, train.common);
  r->callback([&] { action = [&] { cmd_train(train, std::cout); }; });

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a trained run");
  e->add_option("--in", ev.in, "Directory written by preprocess")->required();
  e->add_option("--run", ev.run, "Run directory written by train")->required();
  e->add_option("--subset", ev.subset, "train, val, test or all")->capture_default_str();
  e->add_option("--out", ev.out, "Optional directory for eval.txt");
  add_common(e, ev.common);
  e->callback([&] { action = [&] { cmd_eval(ev, std::cout); }; });

  HypothesisArgs hyp;
  auto* h = app.add_subcommand("hypothesis", "Run one of the hypothesis suites 1..5");
  h->add_option("which", hyp.which, "1..5")->required()->check(CLI::Range(1, 5));
  h->add_option("--out", hyp.out, "Output directory")->required();
  h->add_option("--seeds", hyp.seeds, "Replicate seeds")->delimiter(',');
  h->add_option("--inputs", hyp.inputs, "Hypothesis 5: two preprocessed directories")->delimiter(',');
  h->add_option("--dataset", hyp.dataset, "2v1, 2v2 or 2v3: paper datasets for 4 and 5");
  add_training(h, hyp.train);
  add_common(h, hyp.common);
  h->callback([&] { action = [&] { cmd_hypothesis(hyp, std::cout); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kSpecError;
  }
  return guarded(action, std::cerr);
}

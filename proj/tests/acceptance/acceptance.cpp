// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any of them fails.
//
//   acceptance [--only 1,2,...]

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "jcas/cli/manifest.hpp"
#include "jcas/experiments/hypotheses.hpp"
#include "jcas/experiments/metrics.hpp"
#include "jcas/experiments/synthetic.hpp"
#include "jcas/experiments/training.hpp"
#include "jcas/models/attention.hpp"
#include "jcas/models/model.hpp"
#include "jcas/nn/checkpoint.hpp"
#include "jcas/nn/layers.hpp"
#include "jcas/preprocess/dataset.hpp"
#include "jcas/preprocess/pipeline.hpp"
#include "jcas/tuning/hyperband.hpp"

namespace fs = std::filesystem;
using namespace jcas;
using clk = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

double seconds_since(clk::time_point t0) { return std::chrono::duration<double>(clk::now() - t0).count(); }

// 1. Dataset counts ----------------------------------------------------------

Outcome dataset_counts() {
  Outcome o;
  const auto t0 = clk::now();
  struct Want {
    preprocess::DatasetKind kind;
    std::size_t samples, domains;
  };
  for (const Want& w : {Want{preprocess::DatasetKind::Dataset1, 384, 96}, Want{preprocess::DatasetKind::Dataset2V1, 195, 24},
                        Want{preprocess::DatasetKind::Dataset2V2, 3120, 384}}) {
    const auto spec = preprocess::DatasetSpec::preset(w.kind);
    const auto ds = preprocess::build_dataset(spec, 42);
    const std::string name = preprocess::to_string(w.kind);
    o.require(ds.samples.size() == w.samples, fmt::format("{}: {} samples, want {}", name, ds.samples.size(), w.samples));
    o.require(ds.domain_count == w.domains, fmt::format("{}: {} domains, want {}", name, ds.domain_count, w.domains));
    // Dataset 2 leaves some factor combinations unobserved; dataset 1 covers all.
    if (w.kind == preprocess::DatasetKind::Dataset1)
      o.require(ds.present_domain_count == w.domains,
                fmt::format("{}: {} observed domains, want {}", name, ds.present_domain_count, w.domains));
    o.note(fmt::format("{} {}/{} ({} observed)", name, ds.samples.size(), ds.domain_count, ds.present_domain_count));
  }
  const double dt = seconds_since(t0);
  o.require(dt < 60.0, fmt::format("took {:.1f}s", dt));
  o.note(fmt::format("{:.1f}s", dt));
  return o;
}

// 2. Pipeline oracles --------------------------------------------------------

preprocess::CsiFrame random_frame(std::size_t A, std::size_t K, std::size_t T, std::mt19937_64& rng) {
  preprocess::CsiFrame f(A, K, T);
  std::normal_distribution<float> nd(0, 1);
  for (auto& v : f.values) v = {nd(rng), nd(rng)};
  return f;
}

std::vector<preprocess::cplx> tone(double f_hz, double fs, std::size_t n) {
  std::vector<preprocess::cplx> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::polar(1.0, 2 * std::numbers::pi * f_hz * i / fs);
  return x;
}

std::size_t peak_bin(const preprocess::DfsFrame& d, std::size_t t) {
  std::size_t best = 0;
  for (std::size_t b = 1; b < d.B; ++b)
    if (d.at(0, b, t) > d.at(0, best, t)) best = b;
  return best;
}

Outcome pipeline_oracles() {
  using namespace preprocess;
  Outcome o;
  double worst_pca = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(500 + seed);
    const std::size_t K = 64, T = 100;
    const auto f = random_frame(1, K, T, rng);
    Eigen::MatrixXcd X(K, T);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t t = 0; t < T; ++t) X(k, t) = std::complex<double>(f.at(0, k, t));
    const Eigen::MatrixXcd Xc = X.colwise() - X.rowwise().mean();
    const Eigen::MatrixXcd C = Xc * Xc.adjoint() / static_cast<double>(T - 1);
    const double lambda = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(C).eigenvalues().maxCoeff();
    const auto s = pca_first_component(f);
    cplx mean = 0;
    for (const auto& z : s) mean += z;
    mean /= static_cast<double>(T);
    double var = 0;
    for (const auto& z : s) var += std::norm(z - mean);
    var /= static_cast<double>(T - 1);
    worst_pca = std::max(worst_pca, std::abs(var - lambda) / lambda);
  }
  o.require(worst_pca < 1e-6, fmt::format("PCA rel. error {:.2e}", worst_pca));
  o.note(fmt::format("PCA rel. error {:.2e}", worst_pca));

  // +-1 bin, i.e. within one bin width of 10 Hz.
  for (double hz : {10.0, -20.0, 31.0}) {
    const auto d = stft_spectrogram(tone(hz, 100.0, 100), 1, 100, StftConfig{100.0, 64, 1});
    const auto axis = d.doppler_axis();
    double off = 0;
    for (std::size_t t = 32; t < 68; ++t) off = std::max(off, std::abs(axis[peak_bin(d, t)] - hz));
    o.require(off <= 100.0 / 64, fmt::format("tone {} Hz found {:.2f} Hz away", hz, off));
  }

  std::mt19937_64 rng(77);
  const auto frame = random_frame(16, 20, 100, rng);
  PipelineOptions a, b;
  a.stft.reported_fs = 100;
  b.stft.reported_fs = 800;
  const auto da = csi_to_dfs(frame, a), db = csi_to_dfs(frame, b);
  o.require(da.values == db.values, "reported fs changed tensor values");
  o.require(da.doppler_axis() != db.doppler_axis(), "reported fs left the Doppler axis unchanged");
  const auto axa = da.doppler_axis(), axb = db.doppler_axis();
  bool scaled = axa.size() == axb.size();
  for (std::size_t i = 0; scaled && i < axa.size(); ++i) scaled = std::abs(axb[i] - 8 * axa[i]) <= 1e-9 * (1 + std::abs(axb[i]));
  o.require(scaled, "Doppler axis not scaled by 8");

  for (auto [n, want] : {std::pair<std::size_t, std::size_t>{100, 128}, {200, 256}}) {
    const auto d = pad_pow2(stft_spectrogram(tone(5.0, 100.0, n), 1, n, {}));
    o.require(d.T == want, fmt::format("padding {} -> {}, want {}", n, d.T, want));
  }
  return o;
}

// 3. Gradient suite ----------------------------------------------------------

nn::Tensor<double> random_tensor(nn::Shape s, nn::Rng& rng, double lo = -1.0, double hi = 1.0) {
  nn::Tensor<double> t(s);
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.vec()) v = d(rng);
  return t;
}

struct GradTally {
  struct Worst {
    double error = 0, tol = 0;
    std::string where;
  };
  std::map<std::string, Worst> worst;
  std::size_t checks = 0;

  void add(const std::string& name, const nn::GradcheckResult& r, double tol) {
    auto& w = worst.try_emplace(name, Worst{0.0, tol, {}}).first->second;
    const double err = std::isfinite(r.max_rel_error) ? r.max_rel_error : 1e300;
    if (err >= w.error) w = {err, tol, r.worst};
    ++checks;
  }
  void layer(const std::string& name, nn::Layer<double>& l, nn::Tensor<double> x, nn::Rng& rng, double tol,
             nn::Mode mode = nn::Mode::Train) {
    add(name, nn::gradcheck_layer(l, std::move(x), mode, rng), tol);
  }
};

// Same loss and probes as gradcheck_layer, but with the fourth-order
// five-point stencil. For smooth nets whose gradients get as small as 1e-6
// the central difference's roundoff alone would exceed a 1e-6 relative error.
nn::GradcheckResult stencil_check(nn::Layer<double>& layer, nn::Tensor<double> x, nn::Rng& rng, double h = 1e-3) {
  using namespace nn;
  Tensor<double> r(layer.output_shape(x.shape()));
  std::normal_distribution<double> nd(0.0, 1.0);
  for (auto& v : r.vec()) v = nd(rng);
  ParamList<double> params;
  layer.collect(params);
  for (auto* p : params) p->grad.fill(0.0);
  layer.forward(x, Mode::Train);
  const Tensor<double> gx = layer.backward(r);
  auto loss = [&] {
    const Tensor<double> y = layer.forward(x, Mode::Train);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    return s;
  };
  auto probes = sample_param_probes(params, 50, rng);
  const auto in = sample_tensor_probes(x, gx, 20, rng);
  probes.insert(probes.end(), in.begin(), in.end());
  GradcheckResult res;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    double& v = *probes[i].value;
    const double v0 = v;
    auto at = [&](double d) {
      v = v0 + d;
      return loss();
    };
    const double numeric = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
    v = v0;
    const double err = relative_error(probes[i].analytic, numeric);
    if (err >= res.max_rel_error) {
      res.max_rel_error = err;
      res.worst = fmt::format("probe {}: analytic {:.6e} numeric {:.6e}", i, probes[i].analytic, numeric);
    }
    ++res.coordinates;
  }
  return res;
}

models::ModelConfig tiny_model(models::Family f, bool bn) {
  auto c = models::ModelConfig::reference(f, 8, 8, 2);
  c.first_filters = 3;
  c.first_kernel = {3, 2};
  c.final_kernel = {2, 2};
  c.cls_widths = {6, 5};
  c.attn_a_kernel = {3, 3};
  c.attn_b_pool = {2, 2};
  c.attn_b_stride = {1, 1};
  c.attn_b_widths = {7};
  c.decoder_kernel1 = {3, 3};
  c.decoder_kernel2 = {2, 3};
  c.batchnorm = bn;
  return c;
}

void zero_grads(const nn::ParamList<double>& ps) {
  for (auto* p : ps) p->grad.fill(0.0);
}

void layer_suite(GradTally& g, std::uint64_t seed) {
  using namespace nn;
  Rng rng(7000 + seed);
  std::uniform_int_distribution<std::size_t> d(2, 5);
  const std::size_t n = d(rng), h = d(rng) + 1, w = d(rng) + 1, c = d(rng) - 1;
  const Shape s{n, h, w, c};

  Conv2D<double> example("c", 3, 4, 3, 3, rng);
  g.layer("conv2d 2x6x6x3 * 3x3x3x4", example, random_tensor({2, 6, 6, 3}, rng), rng, 1e-4);
  Conv2D<double> conv("c", c, d(rng), d(rng) - 1, d(rng) - 1, rng, d(rng) % 2 + 1, d(rng) % 2 + 1);
  g.layer("conv2d", conv, random_tensor(s, rng), rng, 1e-4);
  DepthwiseConv2D<double> dw("dw", c, d(rng) - 1, d(rng) - 1, rng);
  g.layer("depthwise", dw, random_tensor(s, rng), rng, 1e-4);
  Dense<double> dense("d", 8, 5, rng);
  g.layer("dense 3x8 -> 3x5", dense, random_tensor({3, 1, 1, 8}, rng), rng, 1e-4);
  Dense<double> flat("d", h * w * c, d(rng), rng, seed % 2 == 0);
  g.layer("dense", flat, random_tensor(s, rng), rng, 1e-4);
  for (Act a : {Act::Identity, Act::Relu, Act::Relu6, Act::Swish, Act::Sigmoid, Act::Softmax}) {
    Activation<double> act(a);
    g.layer("activation " + act_name(a), act, random_tensor(s, rng, -3.0, 7.0), rng, 1e-4);
  }
  MaxPool2D<double> mp(2, d(rng) - 1, 2, d(rng) % 2 + 1);
  g.layer("maxpool", mp, random_tensor(s, rng), rng, 1e-4);
  AvgPool2D<double> ap(d(rng) - 1, 2, d(rng) % 2 + 1, 2);
  g.layer("avgpool", ap, random_tensor(s, rng), rng, 1e-4);
  GlobalMaxPool<double> gm;
  g.layer("global maxpool", gm, random_tensor(s, rng), rng, 1e-4);
  GlobalAvgPool<double> ga;
  g.layer("global avgpool", ga, random_tensor(s, rng), rng, 1e-4);
  Upsample2D<double> up(d(rng) - 1, d(rng) - 1);
  g.layer("upsample", up, random_tensor(s, rng), rng, 1e-4);
  BatchNorm<double> bn("bn", c);
  g.layer("batchnorm train", bn, random_tensor(s, rng), rng, 1e-3);
  g.layer("batchnorm infer", bn, random_tensor(s, rng), rng, 1e-3, Mode::Infer);
  SqueezeExcite<double> se("se", c, 0.25 * static_cast<double>(d(rng) - 1), rng);
  g.layer("squeeze-excite", se, random_tensor(s, rng), rng, 1e-3);
  MBConv<double> mb("mb", {.in_channels = c, .out_channels = 2 * c, .expansion = d(rng) - 1, .se_rate = 0.25,
                           .residual = false, .batchnorm = seed % 2 == 1},
                    rng);
  g.layer("mbconv", mb, random_tensor(s, rng), rng, 1e-3);
  MBConv<double> res("mb", {.in_channels = c, .out_channels = c, .expansion = 2, .se_rate = 0.5, .residual = true},
                     rng);
  g.layer("mbconv residual", res, random_tensor(s, rng), rng, 1e-3);
  models::AttentionA<double> aa("a", c, {d(rng) - 1, d(rng) - 1}, rng);
  g.layer("attention A", aa, random_tensor(s, rng), rng, 1e-3);
  models::AttentionB<double> ab("b", s, {2, 2}, {1 + seed % 2, 1}, {d(rng) + 2}, rng);
  g.layer("attention B", ab, random_tensor(s, rng), rng, 1e-3);

  Sequential<double> dense_net;
  dense_net.emplace<Dense<double>>("d1", h * w * c, 7, rng);
  dense_net.emplace<Activation<double>>(Act::Sigmoid);
  dense_net.emplace<Dense<double>>("d2", 7, 6, rng);
  dense_net.emplace<Activation<double>>(Act::Swish);
  dense_net.emplace<Dense<double>>("d3", 6, 4, rng);
  dense_net.emplace<Activation<double>>(Act::Softmax);
  g.add("dense-only net", stencil_check(dense_net, random_tensor(s, rng), rng), 1e-6);

  Sequential<double> conv_net;
  conv_net.emplace<Conv2D<double>>("c1", c, 4, 3, 3, rng);
  conv_net.emplace<Activation<double>>(Act::Relu);
  conv_net.emplace<MaxPool2D<double>>(2, 2, 2, 2);
  conv_net.emplace<Conv2D<double>>("c2", 4, 3, 2, 2, rng);
  conv_net.emplace<AvgPool2D<double>>(2, 2, 1, 1);
  conv_net.emplace<GlobalMaxPool<double>>();
  conv_net.emplace<Dense<double>>("d", 3, 4, rng);
  g.layer("conv+pool net", conv_net, random_tensor(s, rng), rng, 1e-4);

  Sequential<double> bn_net;
  bn_net.emplace<Conv2D<double>>("c1", c, 4, 3, 3, rng);
  bn_net.emplace<BatchNorm<double>>("bn1", 4);
  bn_net.emplace<Activation<double>>(Act::Swish);
  bn_net.emplace<AvgPool2D<double>>(2, 2, 2, 2);
  bn_net.emplace<GlobalAvgPool<double>>();
  bn_net.emplace<Dense<double>>("d", 4, 5, rng);
  bn_net.emplace<BatchNorm<double>>("bn2", 5);
  g.add("batchnorm net", stencil_check(bn_net, random_tensor(s, rng), rng), 1e-3);
}

void model_suite(GradTally& g, std::uint64_t seed) {
  for (auto f : {models::Family::Standard, models::Family::DomainIndependent, models::Family::DomainAdaptation}) {
    nn::Rng rng(9000 + seed);
    auto c = tiny_model(f, seed % 2 == 1);
    c.block_reps = seed % 3 == 0 ? 1 : 0;
    models::Model<double> m(c, seed);
    const auto x = random_tensor(m.input_shape(3), rng, 0.0, 1.0);
    std::vector<int> y(3);
    for (auto& v : y) v = static_cast<int>(rng() % 4);
    const auto truth = nn::one_hot<double>(y, 4);
    const auto ps = m.all_params();

    zero_grads(ps);
    m.backward(nn::softmax_cross_entropy_grad(m.forward(x, nn::Mode::Train), truth));
    const auto probes = nn::sample_param_probes(ps, 60, rng);
    const auto r = nn::gradcheck([&] { return nn::cross_entropy(m.forward(x, nn::Mode::Train), truth); }, probes);
    g.add("model " + models::to_string(f), r, 1e-3);

    if (f == models::Family::DomainAdaptation) {
      zero_grads(ps);
      m.reconstruct_backward(nn::mse_grad(x, m.reconstruct_forward(x, nn::Mode::Train)));
      const auto rp = nn::sample_param_probes(ps, 60, rng);
      const auto rr = nn::gradcheck([&] { return nn::mse(x, m.reconstruct_forward(x, nn::Mode::Train)); }, rp);
      g.add("model reconstruction", rr, 1e-3);
    }
  }
}

Outcome gradient_suite() {
  Outcome o;
  const auto t0 = clk::now();
  GradTally g;
  const std::size_t seeds = 20;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    layer_suite(g, seed);
    model_suite(g, seed);
  }
  for (const auto& [name, w] : g.worst)
    o.require(w.error < w.tol, fmt::format("{} error {:.2e} >= {:.0e} at {}", name, w.error, w.tol, w.where));
  const double dt = seconds_since(t0);
  o.require(dt < 600.0, fmt::format("took {:.1f}s", dt));
  o.note(fmt::format("{} checks over {} seeds and {} layer kinds, {:.1f}s", g.checks, seeds, g.worst.size(), dt));
  return o;
}

// 4. Learnability ------------------------------------------------------------

Outcome learnability() {
  using namespace experiments;
  Outcome o;
  {
    const auto set = banded_set(32, 4, 32, 64, 16, 11);
    const auto all = DataView::all(set);
    TrainConfig tc;  // lr 1e-4, batch 12
    tc.max_epochs = 200;
    tc.patience = 200;
    tc.restore_best = false;
    TrainingSession s(models::ModelConfig::reference(models::Family::Standard, 32, 64, 16), 42, tc);
    double acc = 0;
    std::size_t epoch = 0;
    while (epoch < 200 && acc < 0.95) {
      s.run(1, all, all);
      ++epoch;
      acc = evaluate_metrics(s.model(), all).accuracy;
    }
    o.require(acc >= 0.95, fmt::format("overfit reached {:.3f} train accuracy in 200 epochs", acc));
    o.note(fmt::format("32-sample overfit {:.3f} at epoch {}", acc, epoch));
  }

  const auto spec = preprocess::DatasetSpec::preset(preprocess::DatasetKind::HighSnr);
  const auto ds = preprocess::build_dataset(spec, 42);
  std::vector<preprocess::DfsFrame> frames;
  for (const auto& s : ds.samples) frames.push_back(s.dfs);
  const auto set = to_tensor_set(frames, 4);
  o.require(set.size() == 240, fmt::format("{} high-SNR samples, want 240", set.size()));
  const auto sp = split_dataset(set.size(), {});
  const DataView tr(set, sp.train), va(set, sp.val);
  for (auto f : {models::Family::Standard, models::Family::DomainIndependent, models::Family::DomainAdaptation}) {
    const auto t0 = clk::now();
    const auto r = train_with_early_stopping(models::ModelConfig::reference(f, 32, 64, 16), tr, va, TrainConfig{});
    const double dt = seconds_since(t0);
    const std::string name = models::to_string(f);
    o.require(!r.failed, name + " failed: " + r.message);
    o.require(r.val.accuracy >= 0.80, fmt::format("{} val accuracy {:.3f}", name, r.val.accuracy));
    o.require(dt < 1800.0, fmt::format("{} took {:.0f}s", name, dt));
    o.note(fmt::format("{} val {:.3f} ({} epochs, {:.0f}s)", name, r.val.accuracy, r.epochs_run, dt));
  }
  return o;
}

// 5. Domain shift ------------------------------------------------------------

Outcome domain_shift() {
  Outcome o;
  experiments::HypothesisOptions opt;  // 5 seeds
  experiments::DomainShiftSpec stress;
  const auto a = experiments::run_domain_shift(stress, opt);
  const double gap = a.number("gap_mean");
  o.require(gap >= 0.2, fmt::format("stress gap {:.3f} < 0.2", gap));
  experiments::DomainShiftSpec control;
  control.stress = false;
  const auto b = experiments::run_domain_shift(control, opt);
  o.require(b.number("intervals_overlap") == 1.0, "control intervals do not overlap");
  o.note(fmt::format("stress gap {:.3f} (in {:.3f}, cross {:.3f}); control gap {:.3f} [{:.3f}, {:.3f}]", gap,
                     a.number("in_domain_kappa_mean"), a.number("cross_domain_kappa_mean"), b.number("gap_mean"),
                     b.number("gap_ci_lo"), b.number("gap_ci_hi")));
  return o;
}

// 6. Dilution ----------------------------------------------------------------

Outcome dilution() {
  Outcome o;
  experiments::DilutionSpec spec;
  const int uninformative = __builtin_popcount(spec.uninformative_rx);
  o.require(uninformative >= 8, fmt::format("only {} of 16 RX beams uninformative", uninformative));
  const auto r = experiments::run_dilution(spec, experiments::HypothesisOptions{});
  o.require(r.number("unstacked_no_better") == 1.0, "unstacked training beat stacked training");
  o.note(fmt::format("stacked kappa {:.3f}, unstacked {:.3f}", r.number("stacked.val_kappa_mean"),
                     r.number("unstacked.val_kappa_mean")));
  return o;
}

// 7. Hyperband ---------------------------------------------------------------

Outcome hyperband() {
  using namespace experiments;
  Outcome o;
  tuning::HyperbandConfig big;
  big.initial_candidates = 1000;
  const auto sched = tuning::survivor_schedule(big);
  o.require(sched == std::vector<std::size_t>{1000, 333, 111, 37, 12}, "survivor schedule for 1000 candidates");

  const auto t0 = clk::now();
  const auto train = dot_pair_set(288, 16, 16, 6, 4, 1);
  const auto val = dot_pair_set(96, 16, 16, 6, 4, 2);
  const auto tv = DataView::all(train), vv = DataView::all(val);
  auto base = models::ModelConfig::reference(models::Family::Standard, 16, 16, 1);
  base.classes = 2;
  // Only the first-kernel height decides; everything else stays small.
  auto space = models::SearchSpace::desk(1);
  space.first_filters = {4, 8};
  space.first_kernel = {2, 9};
  space.first_pool = {2, 3};
  space.depth = {2, 2};
  space.expansion = {2, 3};
  space.block_reps = {0, 0};
  space.block_pool = {2, 2};
  space.final_kernel = {2, 3};
  space.cls_depth = {1, 1};
  space.cls_width = {16, 32};
  space.batchnorm = {0, 0};
  TrainConfig tc;
  tc.lr = 1e-3;
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    tuning::HyperbandConfig hc;
    hc.seed = seed;
    const auto r = tuning::hyperband_run(space, base, tv, vv, hc, tc);
    wins += r.best().config.first_kernel.h >= 7;
  }
  const double dt = seconds_since(t0);
  o.require(wins >= 9, fmt::format("planted family won {}/10", wins));
  o.require(dt < 3600.0, fmt::format("took {:.0f}s", dt));
  o.note(fmt::format("schedule ok; planted family won {}/10 in {:.0f}s", wins, dt));
  return o;
}

// 8. Kappa -------------------------------------------------------------------

double brute_kappa(const std::vector<int>& t, const std::vector<int>& p) {
  const double n = static_cast<double>(t.size());
  double po = 0, pe = 0;
  for (std::size_t i = 0; i < t.size(); ++i) po += t[i] == p[i];
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = 0; j < t.size(); ++j) pe += t[i] == p[j];
  po /= n;
  pe /= n * n;
  return pe == 1.0 ? 0.0 : (po - pe) / (1 - pe);
}

Outcome kappa() {
  using experiments::Confusion;
  Outcome o;
  std::mt19937_64 rng(2024);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 6, m = 1 + rng() % 60;
    std::vector<int> truth, pred;
    for (std::size_t i = 0; i < m; ++i) {
      truth.push_back(static_cast<int>(rng() % n));
      pred.push_back(rng() % 3 == 0 ? truth.back() : static_cast<int>(rng() % n));
    }
    const double k = experiments::cohen_kappa(Confusion::from_pairs(n, truth, pred));
    worst = std::max(worst, std::abs(k - brute_kappa(truth, pred)));
  }
  o.require(worst < 1e-12, fmt::format("largest difference {:.2e}", worst));
  for (std::size_t n = 2; n <= 8; ++n) {
    Confusion d(n), u(n);
    for (std::size_t i = 0; i < n; ++i) d.at(i, i) = static_cast<long>(1 + rng() % 9);
    for (auto& v : u.cells) v = 7;
    o.require(experiments::cohen_kappa(d) == 1.0, fmt::format("diagonal {}x{} kappa != 1", n, n));
    o.require(experiments::cohen_kappa(u) == 0.0, fmt::format("uniform {}x{} kappa != 0", n, n));
  }
  o.note(fmt::format("1000 matrices, largest difference {:.1e}", worst));
  return o;
}

// 9. Determinism through the command-line tool -------------------------------

const char* kRerunSpec = R"([dataset]
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

int run_tool(const fs::path& root, const std::string& args) {
  const std::string cmd =
      fmt::format("JCAS_RUN_DIR='{}' '{}' {} > '{}' 2>&1", root.string(), JCAS_BIN, args, (root / "log.txt").string());
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Outcome determinism() {
  Outcome o;
  const fs::path base = fs::temp_directory_path() / fmt::format("jcas-acceptance-{}", getpid());
  fs::remove_all(base);
  const std::vector<std::string> steps = {
      "simulate --spec small.spec --out sim",
      "preprocess --in sim --out dfs",
      "train --in dfs --out run --epochs 5",
      "eval --in dfs --run run --out eval",
  };
  std::vector<fs::path> roots = {base / "a", base / "b"};
  for (const auto& root : roots) {
    fs::create_directories(root);
    std::ofstream(root / "small.spec") << kRerunSpec;
    for (const auto& s : steps) {
      const int rc = run_tool(root, s);
      if (rc != 0) {
        o.require(false, fmt::format("'jcas {}' exited {}: {}", s, rc, slurp(root / "log.txt")));
        return o;
      }
    }
  }
  const fs::path &a = roots[0], &b = roots[1];
  const std::string ha = cli::blob_hash(a / "run" / "metrics.csv"), hb = cli::blob_hash(b / "run" / "metrics.csv");
  o.require(ha == hb, "metrics.csv hashes differ");
  for (const char* dir : {"sim", "dfs", "run", "eval"}) {
    o.require(slurp(a / dir / cli::kManifestName) == slurp(b / dir / cli::kManifestName),
              fmt::format("{} manifests differ", dir));
    o.require(cli::RunManifest::read(a / dir).stale_artifacts(a / dir).empty(), fmt::format("{} is stale", dir));
  }
  const auto rows = experiments::read_metrics_csv(a / "run" / "metrics.csv");
  const std::string eval = slurp(a / "eval" / "eval.txt");
  o.require(!rows.empty() && rows.back().arm == "test", "no test row in metrics.csv");
  if (!rows.empty()) {
    o.require(eval.find(fmt::format("accuracy = {:.9g}\n", rows.back().rec.accuracy)) != std::string::npos,
              "eval accuracy differs from the test row");
    o.require(eval.find(fmt::format("kappa = {:.9g}\n", rows.back().rec.kappa)) != std::string::npos,
              "eval kappa differs from the test row");
  }
  o.note(fmt::format("metrics.csv {} in both runs", ha.substr(0, 12)));
  if (o.pass) fs::remove_all(base);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-9"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria")->delimiter(',')->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"dataset arithmetic", dataset_counts}, {"pipeline oracles", pipeline_oracles},
      {"gradient suite", gradient_suite},     {"learnability", learnability},
      {"domain shift", domain_shift},         {"dilution", dilution},
      {"hyperband", hyperband},               {"kappa", kappa},
      {"determinism", determinism},
  };
  const std::set<int> selected(only.begin(), only.end());
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = clk::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.require(false, std::string("threw: ") + e.what());
    }
    all = all && o.pass;
    std::cout << fmt::format("criterion {}: {} {} ({:.1f}s) {}", id, o.pass ? "PASS" : "FAIL", criteria[i].first,
                             seconds_since(t0), o.detail)
              << std::endl;
  }
  return all ? 0 : 1;
}

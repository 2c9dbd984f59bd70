#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "jcas/models/model.hpp"
#include "jcas/nn/checkpoint.hpp"

using namespace jcas::models;
using jcas::nn::Rng;

namespace {

template <typename T = double>
Tensor<T> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(s);
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.vec()) v = static_cast<T>(d(rng));
  return t;
}

ModelConfig tiny(Family f, bool bn = false) {
  ModelConfig c = ModelConfig::reference(f, 8, 8, 2);
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

std::vector<int> random_labels(std::size_t n, std::size_t classes, Rng& rng) {
  std::uniform_int_distribution<int> d(0, static_cast<int>(classes) - 1);
  std::vector<int> y(n);
  for (auto& v : y) v = d(rng);
  return y;
}

template <typename T>
void zero_all(const ParamList<T>& ps) {
  for (auto* p : ps) p->grad.fill(T(0));
}

}  // namespace

TEST_CASE("backbone channel doubling and shape arithmetic") {
  ModelConfig c = ModelConfig::reference(Family::Standard, 128, 128, 16);
  c.first_filters = 16;
  c.depth = 2;
  Model<float> m(c, 1);
  CHECK(m.latent_width() == 2 * (2 * (2 * 16)));
  CHECK(m.block_channels() == std::vector<std::size_t>{32, 64});
  for (std::size_t d = 2; d <= 5; ++d) {
    c.depth = d;
    Model<float> md(c, 1);
    const std::size_t expect = (128 + (std::size_t{1} << (d + 1)) - 1) >> (d + 1);
    CHECK(md.feature_shape().h == expect);
    CHECK(md.feature_shape().w == expect);
  }
  // 8 x 8 input: depth 3 already needs a halving of a 1-wide map.
  ModelConfig small = ModelConfig::reference(Family::Standard, 8, 8, 1);
  small.depth = 3;
  CHECK_THROWS_AS(Model<float>(small, 1), ConfigError);
}

TEST_CASE("identical config and seed give identical parameters") {
  const ModelConfig c = tiny(Family::DomainAdaptation, true);
  Model<double> a(c, 5), b(c, 5), other(c, 6);
  const auto pa = a.all_params(), pb = b.all_params(), po = other.all_params();
  REQUIRE(pa.size() == pb.size());
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    CHECK(pa[i]->value.vec() == pb[i]->value.vec());
    if (pa[i]->trainable && pa[i]->value.vec() != po[i]->value.vec()) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("classifier shape and categorical output") {
  ModelConfig c = tiny(Family::Standard);
  c.cls_widths = {16};
  Model<double> m(c, 2);
  auto& cls = m.classifier();
  REQUIRE(cls.size() == 3);
  CHECK(cls.describe().find("dense(" + std::to_string(m.latent_width()) + "->16)") != std::string::npos);
  CHECK(cls.at(1).describe() == "activation(relu)");
  CHECK(cls.at(2).describe().find("dense(16->4)") != std::string::npos);
  Rng rng(3);
  for (Family f : {Family::Standard, Family::DomainIndependent, Family::DomainAdaptation}) {
    Model<double> mf(tiny(f, true), 4);
    const auto x = random_tensor(mf.input_shape(5), rng, 0.0, 1.0);
    for (const auto& p : {mf.predict(x), mf.forward(x, Mode::Train)}) {
      REQUIRE(p.c() == 4);
      for (std::size_t r = 0; r < 5; ++r) {
        double s = 0;
        for (std::size_t k = 0; k < 4; ++k) s += p[r * 4 + k];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("attention A examples") {
  Rng rng(7);
  AttentionA<double> a("a", 3, {3, 3}, rng);
  const auto x = random_tensor(Shape{2, 5, 4, 3}, rng);
  a.conv().kernel().value.fill(0.0);
  const auto y = a.forward(x, Mode::Train);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(1.5 * x[i]).epsilon(1e-12));
  AttentionA<double> b("b", 3, {3, 3}, rng);
  const auto z = b.predict(Tensor<double>(Shape{1, 5, 4, 3}));
  for (double v : z.vec()) CHECK(v == 0.0);
  // Gate in (0, 1): out lies between x and 2x.
  const auto xp = random_tensor(Shape{2, 5, 4, 3}, rng, 0.1, 2.0);
  const auto yp = b.forward(xp, Mode::Train);
  for (std::size_t i = 0; i < xp.size(); ++i) {
    CHECK(yp[i] >= xp[i]);
    CHECK(yp[i] <= 2 * xp[i]);
  }
  for (int seed = 0; seed < 5; ++seed) {
    Rng r(100 + seed);
    AttentionA<double> g("g", 2, {3, 2}, r);
    CHECK(jcas::nn::gradcheck_layer(g, random_tensor(Shape{3, 4, 5, 2}, r), Mode::Train, r).max_rel_error < 1e-3);
  }
}

TEST_CASE("attention B examples") {
  Rng rng(8);
  const Shape s{2, 6, 5, 3};
  AttentionB<double> b("b", s, {2, 3}, {2, 2}, {9, 4}, rng);
  CHECK(b.pooled_shape() == Shape{1, 3, 3, 3});

  // Constant map: both forks see the same pooled input.
  Tensor<double> z(s, 0.7);
  const auto y = b.forward(z, Mode::Train);
  const Tensor<double> c(b.pooled_shape(), 0.7);
  const auto mlp = b.mlp().predict(c);
  for (std::size_t yy = 0; yy < s.h; ++yy)
    for (std::size_t xx = 0; xx < s.w; ++xx)
      for (std::size_t ch = 0; ch < s.c; ++ch) {
        const std::size_t py = yy * 3 / s.h, px = xx * 3 / s.w;
        const double g = 1.0 / (1.0 + std::exp(-2.0 * mlp[(py * 3 + px) * 3 + ch]));
        CHECK(y.at(1, yy, xx, ch) == doctest::Approx(0.7 * g).epsilon(1e-12));
      }

  ParamList<double> ps;
  b.collect(ps);
  for (auto* p : ps) p->value.fill(0.0);
  const auto x = random_tensor(s, rng);
  const auto half = b.predict(x);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(half[i] == doctest::Approx(0.5 * x[i]).epsilon(1e-12));

  for (int seed = 0; seed < 5; ++seed) {
    Rng r(200 + seed);
    AttentionB<double> g("g", {3, 4, 6, 2}, {2, 2}, {2, 3}, {5}, r);
    CHECK(jcas::nn::gradcheck_layer(g, random_tensor(Shape{3, 4, 6, 2}, r), Mode::Train, r).max_rel_error < 1e-3);
  }
}

TEST_CASE("decoder mirrors the MBConv stack") {
  ModelConfig c = ModelConfig::reference(Family::DomainAdaptation, 128, 128, 16);
  c.first_filters = 16;
  Model<float> big(c, 1);
  CHECK(big.reconstruct_forward(Tensor<float>(big.input_shape(1), 0.5f), Mode::Train).shape() == big.input_shape(1));

  ModelConfig d = tiny(Family::DomainAdaptation);
  d.first_filters = 4;
  d.depth = 2;
  d.expansion = 2;
  d.se_rate = 0.25;
  d.decoder_kernel1 = {3, 3};
  d.decoder_kernel2 = {3, 3};
  Model<double> m(d, 3);
  CHECK(m.block_channels() == std::vector<std::size_t>{8, 16});
  CHECK(m.decoder_channels() == std::vector<std::size_t>{8, 4});
  // MBConv(cin -> cout, e = 2, se 0.25, 3x3 depthwise):
  //   expand cin*E, depthwise 9*E, SE E*s + s + s*E + E, project E*cout.
  const std::size_t mb16_8 = 16 * 32 + 9 * 32 + (32 * 8 + 8 + 8 * 32 + 32) + 32 * 8;
  const std::size_t mb8_4 = 8 * 16 + 9 * 16 + (16 * 4 + 4 + 4 * 16 + 16) + 16 * 4;
  const std::size_t convs = 3 * 3 * 4 * 4 + 3 * 3 * 4 * 2;
  REQUIRE(m.decoder() != nullptr);
  CHECK(jcas::nn::parameter_count(*m.decoder()) == mb16_8 + mb8_4 + convs);

  Rng rng(4);
  for (bool bn : {false, true}) {
    Model<double> mm(tiny(Family::DomainAdaptation, bn), 9);
    const auto x = random_tensor(mm.input_shape(3), rng);
    CHECK(mm.reconstruct(x).shape() == x.shape());
  }
  // 12 x 8 input, depth 2: 12 -> 6 -> 3 -> 2, and 2 * 2 != 3.
  ModelConfig odd = tiny(Family::DomainAdaptation);
  odd.input_b = 12;
  CHECK_THROWS_AS(Model<double>(odd, 1), ConfigError);
}

TEST_CASE("residual flag takes effect only on block repetitions") {
  ModelConfig c = tiny(Family::Standard);
  c.residual = true;
  c.block_reps = 0;
  CHECK_FALSE(Model<double>(c, 1).residual_effective());
  c.block_reps = 2;
  Model<double> m(c, 1);
  CHECK(m.residual_effective());
  CHECK(m.head().describe().find("residual") != std::string::npos);
}

TEST_CASE("assembled models pass finite-difference checks") {
  for (Family f : {Family::Standard, Family::DomainIndependent, Family::DomainAdaptation}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(300 + seed);
      ModelConfig c = tiny(f, seed % 2 == 1);
      c.block_reps = seed % 3 == 0 ? 1 : 0;
      Model<double> m(c, seed);
      const auto x = random_tensor(m.input_shape(3), rng, 0.0, 1.0);
      const auto y = random_labels(3, 4, rng);
      const auto truth = jcas::nn::one_hot<double>(y, 4);
      const auto ps = m.all_params();

      zero_all(ps);
      const auto p = m.forward(x, Mode::Train);
      m.backward(jcas::nn::softmax_cross_entropy_grad(p, truth));
      auto probes = jcas::nn::sample_param_probes(ps, 60, rng);
      auto loss = [&] { return jcas::nn::cross_entropy(m.forward(x, Mode::Train), truth); };
      const auto r = jcas::nn::gradcheck(loss, probes);
      INFO(to_string(f) << " seed " << seed << " worst " << r.worst);
      CHECK(r.coordinates >= 60);
      CHECK(r.max_rel_error < 1e-3);

      if (f == Family::DomainAdaptation) {
        zero_all(ps);
        const auto out = m.reconstruct_forward(x, Mode::Train);
        m.reconstruct_backward(jcas::nn::mse_grad(x, out));
        auto rprobes = jcas::nn::sample_param_probes(ps, 60, rng);
        auto rloss = [&] { return jcas::nn::mse(x, m.reconstruct_forward(x, Mode::Train)); };
        const auto rr = jcas::nn::gradcheck(rloss, rprobes);
        INFO("reconstruction worst " << rr.worst);
        CHECK(rr.max_rel_error < 1e-3);
      }
    }
  }
}

TEST_CASE("standard training step") {
  Rng rng(11);
  const ModelConfig c = tiny(Family::Standard);
  const auto x = random_tensor(Shape{12, 8, 8, 2}, rng, 0.0, 1.0);
  const auto y = random_labels(12, 4, rng);

  std::vector<double> losses;
  {
    Model<double> m(c, 21);
    Trainer<double> t(m);
    for (int i = 0; i < 12; ++i) losses.push_back(t.step_standard(x, y));
  }
  for (std::size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] < losses[i - 1]);
  {
    Model<double> m(c, 21);
    Trainer<double> t(m);
    CHECK(t.step_standard(x, y) == losses[0]);
    CHECK(t.step_standard(x, y) == losses[1]);
  }

  // Outputs forced onto the true class: zero loss and a negligible update.
  Model<double> m(c, 22);
  auto& out = dynamic_cast<jcas::nn::Dense<double>&>(m.classifier().at(m.classifier().size() - 1));
  out.weight().value.fill(0.0);
  out.bias().value.fill(0.0);
  out.bias().value[2] = 80.0;
  const std::vector<int> twos(12, 2);
  const auto before = jcas::nn::snapshot(m.all_params());
  Trainer<double> t(m);
  CHECK(t.step_standard(x, twos) < 1e-30);
  const auto after = jcas::nn::snapshot(m.all_params());
  double moved = 0;
  for (std::size_t i = 0; i < before.size(); ++i)
    for (std::size_t j = 0; j < before[i].size(); ++j) moved = std::max(moved, std::abs(before[i][j] - after[i][j]));
  CHECK(moved < 1e-12);

  Tensor<double> bad = x;
  bad[0] = std::nan("");
  Model<double> mb(c, 23);
  Trainer<double> tb(mb);
  CHECK_THROWS_AS(tb.step_standard(bad, y), jcas::nn::NumericalError);
}

TEST_CASE("adaptation step runs two updates in sequence") {
  Rng rng(12);
  const ModelConfig c = tiny(Family::DomainAdaptation);
  const auto src = random_tensor(Shape{4, 8, 8, 2}, rng, 0.0, 1.0);
  const auto tgt = random_tensor(Shape{4, 8, 8, 2}, rng, 0.0, 1.0);
  const auto y = random_labels(4, 4, rng);

  CHECK(jcas::nn::mse(src, src) == 0.0);

  // target == source: the reconstruction loss is twice the single-flow loss,
  // measured after the classification update.
  Model<double> a(c, 31), b(c, 31);
  Trainer<double> ta(a), tb(b);
  const auto [cls_a, rec_a] = ta.step_adaptation(src, y, src);
  const double cls_b = tb.step_standard(src, y);
  CHECK(cls_a == cls_b);
  CHECK(rec_a == doctest::Approx(2.0 * jcas::nn::mse(src, b.reconstruct(src))).epsilon(1e-12));

  Model<double> s(c, 32), u(c, 32);
  Trainer<double> ts(s), tu(u);
  ts.step_adaptation(src, y, tgt);
  tu.step_combined(src, y, tgt);
  const auto ps = jcas::nn::snapshot(s.all_params()), pu = jcas::nn::snapshot(u.all_params());
  double diff = 0;
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (std::size_t j = 0; j < ps[i].size(); ++j) diff = std::max(diff, std::abs(ps[i][j] - pu[i][j]));
  CHECK(diff > 1e-6);
  CHECK(ts.classification_optimizer().steps() == 1);
  CHECK(ts.reconstruction_optimizer().steps() == 1);

  Model<double> std_model(tiny(Family::Standard), 1);
  Trainer<double> tstd(std_model);
  CHECK_THROWS_AS(tstd.step_adaptation(src, y, tgt), ConfigError);
}

TEST_CASE("trainer checkpoint restores weights and both optimiser states") {
  Rng rng(13);
  const ModelConfig c = tiny(Family::DomainAdaptation, true);
  const auto src = random_tensor(Shape{4, 8, 8, 2}, rng, 0.0, 1.0);
  const auto y = random_labels(4, 4, rng);
  Model<float> a(c, 41), b(c, 42);
  Trainer<float> ta(a), tb(b);
  ta.step_adaptation(src.cast<float>(), y, src.cast<float>());
  const auto path = std::filesystem::temp_directory_path() / "jcas_model_ckpt.jcnn";
  ta.save(path);
  tb.load(path);
  std::filesystem::remove(path);
  const auto pa = a.all_params(), pb = b.all_params();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value.vec() == pb[i]->value.vec());
  CHECK(tb.reconstruction_optimizer().steps() == 1);
  const auto next_a = ta.step_adaptation(src.cast<float>(), y, src.cast<float>());
  const auto next_b = tb.step_adaptation(src.cast<float>(), y, src.cast<float>());
  CHECK(next_a == next_b);
}

TEST_CASE("model config text round trip") {
  ModelConfig c = tiny(Family::DomainIndependent, true);
  c.se_rate = 0.123456789012345;
  c.cls_widths = {17, 300, 16};
  const auto text = c.to_text();
  CHECK(text.find("family = domain_independent\n") == 0);
  CHECK(ModelConfig::from_text(text) == c);
  CHECK_THROWS_AS(ModelConfig::from_text("depth = 2\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(ModelConfig::from_text("depth = two\n"), ConfigError);
  CHECK(family_from_string("indep") == Family::DomainIndependent);
  CHECK(family_from_string("adapt") == Family::DomainAdaptation);
  CHECK(ModelConfig::reference(Family::Standard, 32, 64, 16).within(SearchSpace::desk(16)));
  std::string why;
  CHECK_FALSE(ModelConfig::reference(Family::Standard, 32, 64, 16).within(SearchSpace::paper(16), &why));
  CHECK(why.find("first_kernel") != std::string::npos);
}

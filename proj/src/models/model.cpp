#include "jcas/models/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "jcas/nn/checkpoint.hpp"

namespace jcas::models {

namespace {

using nn::Act;

// Stride-2 pooling with same padding must halve a real extent.
void check_halvable(const Shape& s, const char* where) {
  if (s.h < 2 || s.w < 2) {
    throw ConfigError(std::string("pooling collapses a spatial dim below 1 at ") + where + " (input " + s.str() + ")");
  }
}

template <typename T>
void add_pool(nn::Sequential<T>& seq, Shape& s, Hw pool, const char* where) {
  check_halvable(s, where);
  auto& p = seq.template emplace<nn::MaxPool2D<T>>(pool.h, pool.w, 2, 2);
  s = p.output_shape(s);
}

template <typename T>
void add_conv_block(nn::Sequential<T>& seq, const std::string& name, Shape& s, std::size_t filters, Hw k,
                    bool bn, nn::Rng& rng) {
  if (bn) seq.template emplace<nn::BatchNorm<T>>(name + "/bn", s.c);
  seq.template emplace<nn::Conv2D<T>>(name + "/conv", s.c, filters, k.h, k.w, rng);
  seq.template emplace<nn::Activation<T>>(Act::Swish);
  s.c = filters;
}

template <typename T>
void add_mbconv(nn::Sequential<T>& seq, const std::string& name, Shape& s, std::size_t out, const ModelConfig& cfg,
                bool residual, nn::Rng& rng) {
  nn::MBConvSpec spec;
  spec.in_channels = s.c;
  spec.out_channels = out;
  spec.expansion = cfg.expansion;
  spec.se_rate = cfg.se_rate;
  spec.residual = residual;
  spec.batchnorm = cfg.batchnorm;
  spec.depthwise_kernel = cfg.depthwise_kernel;
  seq.template emplace<nn::MBConv<T>>(name, spec, rng);
  s.c = out;
}

template <typename T>
void append(ParamList<T>& out, nn::Layer<T>& l) {
  l.collect(out);
}

template <typename T>
ParamList<T> unique(const ParamList<T>& ps) {
  ParamList<T> out;
  std::set<const void*> seen;
  for (auto* p : ps)
    if (seen.insert(p).second) out.push_back(p);
  return out;
}

}  // namespace

template <typename T>
Model<T>::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  nn::Rng rng(seed);
  Shape s = input_shape(1);

  if (cfg_.family == Family::DomainIndependent) {
    attn_a_ = std::make_unique<AttentionA<T>>("attn_a", s.c, cfg_.attn_a_kernel, rng);
  }

  std::vector<Shape> pre_pool;  // shapes entering each stride-2 pool
  add_conv_block(head_, "stem", s, cfg_.first_filters, cfg_.first_kernel, cfg_.batchnorm, rng);
  pre_pool.push_back(s);
  add_pool(head_, s, cfg_.first_pool, "first pool");
  residual_effective_ = cfg_.residual && cfg_.block_reps > 0;
  for (std::size_t i = 0; i < cfg_.depth; ++i) {
    const std::string name = "block" + std::to_string(i);
    add_mbconv(head_, name, s, 2 * s.c, cfg_, false, rng);
    for (std::size_t r = 0; r < cfg_.block_reps; ++r)
      add_mbconv(head_, name + "/rep" + std::to_string(r), s, s.c, cfg_, residual_effective_, rng);
    block_channels_.push_back(s.c);
    pre_pool.push_back(s);
    add_pool(head_, s, cfg_.block_pool, "block pool");
  }
  feature_shape_ = s;

  add_conv_block(tail_, "final", s, 2 * s.c, cfg_.final_kernel, cfg_.batchnorm, rng);
  final_shape_ = s;
  if (cfg_.family == Family::DomainIndependent) {
    attn_b_ = std::make_unique<AttentionB<T>>("attn_b", s, cfg_.attn_b_pool, cfg_.attn_b_stride, cfg_.attn_b_widths,
                                              rng);
  }

  std::size_t prev = s.c;
  for (std::size_t i = 0; i < cfg_.cls_widths.size(); ++i) {
    classifier_.template emplace<nn::Dense<T>>("cls/dense" + std::to_string(i), prev, cfg_.cls_widths[i], rng);
    classifier_.template emplace<nn::Activation<T>>(Act::Relu);
    prev = cfg_.cls_widths[i];
  }
  classifier_.template emplace<nn::Dense<T>>("cls/out", prev, cfg_.classes, rng);

  if (cfg_.family == Family::DomainAdaptation) {
    decoder_ = std::make_unique<nn::Sequential<T>>();
    Shape d = feature_shape_;
    auto upsample = [&](const Shape& want) {
      decoder_->template emplace<nn::Upsample2D<T>>(2, 2);
      d.h *= 2;
      d.w *= 2;
      if (d.h != want.h || d.w != want.w) {
        throw ConfigError("decoder upsampling cannot restore " + want.str() + " from " + d.str());
      }
    };
    for (std::size_t i = cfg_.depth; i-- > 0;) {
      const std::string name = "dec/block" + std::to_string(i);
      upsample(pre_pool[i + 1]);
      for (std::size_t r = cfg_.block_reps; r-- > 0;)
        add_mbconv(*decoder_, name + "/rep" + std::to_string(r), d, d.c, cfg_, residual_effective_, rng);
      add_mbconv(*decoder_, name, d, d.c / 2, cfg_, false, rng);
      decoder_channels_.push_back(d.c);
    }
    add_conv_block(*decoder_, "dec/conv1", d, cfg_.first_filters, cfg_.decoder_kernel1, cfg_.batchnorm, rng);
    upsample(pre_pool[0]);
    add_conv_block(*decoder_, "dec/conv2", d, cfg_.input_a, cfg_.decoder_kernel2, cfg_.batchnorm, rng);
    if (!(d == input_shape(1))) throw ConfigError("decoder output " + d.str() + " differs from input");
  }
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> h = attn_a_ ? attn_a_->forward(x, mode) : x;
  h = tail_.forward(head_.forward(h, mode), mode);
  if (attn_b_) h = attn_b_->forward(h, mode);
  return nn::activate(classifier_.forward(gpool_.forward(h, mode), mode), Act::Softmax);
}

template <typename T>
void Model<T>::backward(const Tensor<T>& grad_logits) {
  Tensor<T> g = gpool_.backward(classifier_.backward(grad_logits));
  if (attn_b_) g = attn_b_->backward(g);
  g = head_.backward(tail_.backward(g));
  if (attn_a_) attn_a_->backward(g);
}

template <typename T>
Tensor<T> Model<T>::predict(const Tensor<T>& x) const {
  Tensor<T> h = attn_a_ ? attn_a_->predict(x) : x;
  h = tail_.predict(head_.predict(h));
  if (attn_b_) h = attn_b_->predict(h);
  return nn::activate(classifier_.predict(gpool_.predict(h)), Act::Softmax);
}

template <typename T>
Tensor<T> Model<T>::reconstruct_forward(const Tensor<T>& x, Mode mode) {
  if (!decoder_) throw ConfigError("model family has no decoder");
  Tensor<T> h = attn_a_ ? attn_a_->forward(x, mode) : x;
  return decoder_->forward(head_.forward(h, mode), mode);
}

template <typename T>
void Model<T>::reconstruct_backward(const Tensor<T>& grad) {
  Tensor<T> g = head_.backward(decoder_->backward(grad));
  if (attn_a_) attn_a_->backward(g);
}

template <typename T>
Tensor<T> Model<T>::reconstruct(const Tensor<T>& x) const {
  if (!decoder_) throw ConfigError("model family has no decoder");
  Tensor<T> h = attn_a_ ? attn_a_->predict(x) : x;
  return decoder_->predict(head_.predict(h));
}

template <typename T>
ParamList<T> Model<T>::classification_params() {
  ParamList<T> out;
  if (attn_a_) append(out, *attn_a_);
  append(out, head_);
  append(out, tail_);
  if (attn_b_) append(out, *attn_b_);
  append(out, classifier_);
  return out;
}

template <typename T>
ParamList<T> Model<T>::reconstruction_params() {
  ParamList<T> out;
  if (attn_a_) append(out, *attn_a_);
  append(out, head_);
  if (decoder_) append(out, *decoder_);
  return out;
}

template <typename T>
ParamList<T> Model<T>::all_params() {
  ParamList<T> out = classification_params();
  if (decoder_) append(out, *decoder_);
  return unique(out);
}

template <typename T>
std::string Model<T>::describe() const {
  std::string s = to_string(cfg_.family) + "\n";
  if (attn_a_) s += "  " + attn_a_->describe() + "\n";
  s += "  head " + head_.describe() + "\n  tail " + tail_.describe() + "\n";
  if (attn_b_) s += "  " + attn_b_->describe() + "\n";
  s += "  classifier " + classifier_.describe() + "\n";
  if (decoder_) s += "  decoder " + decoder_->describe() + "\n";
  return s;
}

template <typename T>
std::size_t count_params(const ParamList<T>& ps) {
  std::size_t n = 0;
  for (auto* p : ps)
    if (p->trainable) n += p->value.size();
  return n;
}

template <typename T>
Tensor<T> stack_batch(const std::vector<const Tensor<T>*>& samples) {
  if (samples.empty()) throw nn::ShapeError("empty batch");
  Shape s = samples[0]->shape();
  const std::size_t per = s.per_sample();
  std::vector<T> v;
  v.reserve(per * samples.size());
  for (const auto* t : samples) {
    if (t->shape().per_sample() != per || t->h() != s.h || t->w() != s.w) {
      throw nn::ShapeError("batch member " + t->shape().str() + " vs " + s.str());
    }
    v.insert(v.end(), t->vec().begin(), t->vec().end());
  }
  s.n = v.size() / per;
  return Tensor<T>(s, std::move(v));
}

// ---------------------------------------------------------------- training

template <typename T>
Trainer<T>::Trainer(Model<T>& model, nn::AdamConfig adam)
    : model_(model), adam_(adam), cls_(model.classification_params(), adam) {
  if (model.has_decoder()) rec_ = nn::ParamStore<T>(model.reconstruction_params(), adam);
}

namespace {

void require_finite(double loss, const char* what) {
  if (!std::isfinite(loss)) throw nn::NumericalError(std::string("non-finite ") + what + " loss");
}

}  // namespace

template <typename T>
double Trainer<T>::step_standard(const Tensor<T>& x, const std::vector<int>& labels) {
  cls_.zero_grad();
  const Tensor<T> truth = nn::one_hot<T>(labels, model_.config().classes);
  const Tensor<T> probs = model_.forward(x, Mode::Train);
  const double loss = nn::cross_entropy(probs, truth);
  require_finite(loss, "classification");
  model_.backward(nn::softmax_cross_entropy_grad(probs, truth));
  cls_.step();
  return loss;
}

template <typename T>
double Trainer<T>::reconstruction_pass(const Tensor<T>& source, const Tensor<T>& target) {
  // Both flows go through one batch; the loss is the sum of per-flow means.
  const std::size_t n = source.n();
  const Tensor<T> both = nn::concat_batch(source, target);
  const Tensor<T> out = model_.reconstruct_forward(both, Mode::Train);
  const Tensor<T> out_s = out.slice_batch(0, n), out_t = out.slice_batch(n, target.n());
  const double loss = nn::reconstruction_loss({nn::mse(source, out_s), nn::mse(target, out_t)});
  require_finite(loss, "reconstruction");
  model_.reconstruct_backward(nn::concat_batch(nn::mse_grad(source, out_s), nn::mse_grad(target, out_t)));
  return loss;
}

template <typename T>
std::pair<double, double> Trainer<T>::step_adaptation(const Tensor<T>& source, const std::vector<int>& labels,
                                                      const Tensor<T>& target) {
  if (!model_.has_decoder()) throw ConfigError("step_adaptation needs the domain-adaptation family");
  const double cls = step_standard(source, labels);
  rec_.zero_grad();
  const double rec = reconstruction_pass(source, target);
  rec_.step();
  return {cls, rec};
}

template <typename T>
std::pair<double, double> Trainer<T>::step_combined(const Tensor<T>& source, const std::vector<int>& labels,
                                                    const Tensor<T>& target) {
  if (!model_.has_decoder()) throw ConfigError("step_combined needs the domain-adaptation family");
  if (!combined_) combined_ = std::make_unique<nn::ParamStore<T>>(model_.all_params(), adam_);
  combined_->zero_grad();
  const Tensor<T> truth = nn::one_hot<T>(labels, model_.config().classes);
  const Tensor<T> probs = model_.forward(source, Mode::Train);
  const double cls = nn::cross_entropy(probs, truth);
  require_finite(cls, "classification");
  model_.backward(nn::softmax_cross_entropy_grad(probs, truth));
  const double rec = reconstruction_pass(source, target);
  combined_->step();
  return {cls, rec};
}

template <typename T>
void Trainer<T>::save(const std::filesystem::path& path) const {
  std::vector<const nn::ParamStore<T>*> stores{&cls_};
  if (model_.has_decoder()) stores.push_back(&rec_);
  nn::save_params<T>(path, model_.all_params(), stores);
}

template <typename T>
void Trainer<T>::load(const std::filesystem::path& path) {
  std::vector<nn::ParamStore<T>*> stores{&cls_};
  if (model_.has_decoder()) stores.push_back(&rec_);
  nn::load_params<T>(path, model_.all_params(), stores);
}

template <typename T>
Evaluation evaluate(const Model<T>& model, const std::vector<const Tensor<T>*>& samples,
                    const std::vector<int>& labels, std::size_t batch) {
  if (samples.size() != labels.size()) throw nn::ShapeError("evaluate: samples and labels differ in length");
  Evaluation ev;
  double total = 0;
  for (std::size_t i = 0; i < samples.size(); i += batch) {
    const std::size_t m = std::min(batch, samples.size() - i);
    std::vector<const Tensor<T>*> part(samples.begin() + static_cast<std::ptrdiff_t>(i),
                                       samples.begin() + static_cast<std::ptrdiff_t>(i + m));
    std::vector<int> lab(labels.begin() + static_cast<std::ptrdiff_t>(i),
                         labels.begin() + static_cast<std::ptrdiff_t>(i + m));
    const Tensor<T> probs = model.predict(stack_batch(part));
    total += nn::cross_entropy(probs, nn::one_hot<T>(lab, model.config().classes)) * static_cast<double>(m);
    const std::size_t c = probs.c();
    for (std::size_t r = 0; r < m; ++r) {
      const T* row = probs.data() + r * c;
      ev.predictions.push_back(static_cast<int>(std::max_element(row, row + c) - row));
    }
  }
  ev.loss = samples.empty() ? 0.0 : total / static_cast<double>(samples.size());
  return ev;
}

#define JCAS_MODEL_INSTANTIATE(T)                                                                 \
  template class Model<T>;                                                                        \
  template class Trainer<T>;                                                                      \
  template std::size_t count_params<T>(const ParamList<T>&);                                      \
  template Tensor<T> stack_batch<T>(const std::vector<const Tensor<T>*>&);                        \
  template Evaluation evaluate<T>(const Model<T>&, const std::vector<const Tensor<T>*>&,           \
                                  const std::vector<int>&, std::size_t);

JCAS_MODEL_INSTANTIATE(float)
JCAS_MODEL_INSTANTIATE(double)

}  // namespace jcas::models

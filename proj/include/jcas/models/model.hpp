#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <utility>
#include <vector>

#include "jcas/models/attention.hpp"
#include "jcas/models/config.hpp"
#include "jcas/nn/optim.hpp"

namespace jcas::models {

// One of the three families built from a ModelConfig.
//
// Backbone: [bn] conv(swish) -> maxpool /2 -> depth x {MBConv c->2c, block_reps
// x MBConv 2c->2c, maxpool /2} -> [bn] conv 2c(swish) -> global max pool. The
// domain-independent family puts attention A in front of the backbone and
// attention B on the final conv output. The domain-adaptation family adds a
// decoder fed by the MBConv stack output.
template <typename T>
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  // Residual connections are only possible on block repetitions, where the
  // channel count is unchanged.
  bool residual_effective() const { return residual_effective_; }
  const std::vector<std::size_t>& block_channels() const { return block_channels_; }
  const std::vector<std::size_t>& decoder_channels() const { return decoder_channels_; }
  Shape feature_shape() const { return feature_shape_; }  // MBConv stack output, n = 1
  Shape final_shape() const { return final_shape_; }      // final conv output, n = 1
  std::size_t latent_width() const { return final_shape_.c; }
  Shape input_shape(std::size_t n = 1) const { return {n, cfg_.input_b, cfg_.input_t, cfg_.input_a}; }

  // Class probabilities (n, 1, 1, N). forward() caches for backward(), which
  // takes the gradient with respect to the pre-softmax logits.
  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  void backward(const Tensor<T>& grad_logits);
  Tensor<T> predict(const Tensor<T>& x) const;

  // Decoder output with the input's shape (adaptation family only).
  Tensor<T> reconstruct_forward(const Tensor<T>& x, Mode mode);
  void reconstruct_backward(const Tensor<T>& grad);
  Tensor<T> reconstruct(const Tensor<T>& x) const;
  bool has_decoder() const { return decoder_ != nullptr; }

  // Attention A, backbone, attention B, classifier.
  ParamList<T> classification_params();
  // Backbone up to the MBConv stack, then the decoder.
  ParamList<T> reconstruction_params();
  ParamList<T> all_params();

  AttentionA<T>* attention_a() { return attn_a_.get(); }
  AttentionB<T>* attention_b() { return attn_b_.get(); }
  nn::Sequential<T>& head() { return head_; }
  nn::Sequential<T>& tail() { return tail_; }
  nn::Sequential<T>& classifier() { return classifier_; }
  nn::Sequential<T>* decoder() { return decoder_.get(); }
  std::string describe() const;

 private:
  ModelConfig cfg_;
  bool residual_effective_ = false;
  std::vector<std::size_t> block_channels_, decoder_channels_;
  Shape feature_shape_{}, final_shape_{};
  std::unique_ptr<AttentionA<T>> attn_a_;
  nn::Sequential<T> head_, tail_;
  std::unique_ptr<AttentionB<T>> attn_b_;
  nn::GlobalMaxPool<T> gpool_;
  nn::Sequential<T> classifier_;
  std::unique_ptr<nn::Sequential<T>> decoder_;
};

// Sum of trainable parameter sizes over a list.
template <typename T>
std::size_t count_params(const ParamList<T>& ps);

// Stacks single-sample tensors along the batch axis.
template <typename T>
Tensor<T> stack_batch(const std::vector<const Tensor<T>*>& samples);

template <typename T>
class Trainer {
 public:
  explicit Trainer(Model<T>& model, nn::AdamConfig adam = {});

  // Cross-entropy forward/backward and one ADAM step on the classification
  // parameters.
  double step_standard(const Tensor<T>& x, const std::vector<int>& labels);
  // Two updates in sequence: classification loss on the source flow through
  // the classification optimiser, then the summed source + target
  // reconstruction loss through the reconstruction optimiser.
  std::pair<double, double> step_adaptation(const Tensor<T>& source, const std::vector<int>& labels,
                                            const Tensor<T>& target);
  // Single update on classification + reconstruction loss with one optimiser
  // over the union of parameters. Kept for comparison with step_adaptation.
  std::pair<double, double> step_combined(const Tensor<T>& source, const std::vector<int>& labels,
                                          const Tensor<T>& target);

  nn::ParamStore<T>& classification_optimizer() { return cls_; }
  nn::ParamStore<T>& reconstruction_optimizer() { return rec_; }
  Model<T>& model() { return model_; }

  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  double reconstruction_pass(const Tensor<T>& source, const Tensor<T>& target);

  Model<T>& model_;
  nn::AdamConfig adam_;
  nn::ParamStore<T> cls_, rec_;
  std::unique_ptr<nn::ParamStore<T>> combined_;
};

struct Evaluation {
  double loss = 0;
  std::vector<int> predictions;
};

// Mean cross-entropy and argmax predictions in inference mode.
template <typename T>
Evaluation evaluate(const Model<T>& model, const std::vector<const Tensor<T>*>& samples,
                    const std::vector<int>& labels, std::size_t batch = 32);

}  // namespace jcas::models

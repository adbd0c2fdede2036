#pragma once

// Attention-prediction baselines: an unconditioned model, a multi-branch
// model with one decoder head per driver state, and a model whose final
// decoder layers are conditional convolutions routed by the driver state.

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "drivatt/nn/autograd.hpp"
#include "drivatt/nn/optim.hpp"
#include "drivatt/types.hpp"

namespace drivatt::models {

enum class Backbone { small_conv, pretrained_external };
enum class Temporal { recurrent_conv, none };
enum class ModelType { unconditioned, multi_branch, cond_conv };

std::string_view to_string(Backbone b);
std::string_view to_string(Temporal t);
std::string_view to_string(ModelType k);
Backbone parse_backbone(std::string_view s);
Temporal parse_temporal(std::string_view s);
// Accepts "multi_branch" and "multi-branch" (likewise "cond_conv").
ModelType parse_model_type(std::string_view s);

struct EncoderConfig {
  Backbone backbone = Backbone::small_conv;
  int feature_channels = 8;
  Temporal temporal = Temporal::recurrent_conv;
  int stem_channels = 8;  // width of the first two strided convolutions
  int scene_height = kDefaultMapHeight * kSceneScale;
  int scene_width = kDefaultMapWidth * kSceneScale;

  int map_height() const { return scene_height / kSceneScale; }
  int map_width() const { return scene_width / kSceneScale; }
  void validate() const;
};

struct CondConvLayerConfig {
  int num_experts = 4;
  int in_channels = 1;
  int out_channels = 1;
  int kernel_size = 3;
  double dropout = 0.7;  // applied to this layer's input during training

  void validate() const;
};

struct ModelKind {
  ModelType kind = ModelType::unconditioned;
  ConditionType condition_type = ConditionType::none;

  // unconditioned <=> condition_type none.
  void validate() const;
};

struct HeadConfig {
  int channels = 8;
  double dropout = 0.5;  // before non-conditional decoder heads
  // Appends normalized (row, col) coordinate planes to the decoder input.
  bool coord_channels = true;
};

struct ModelConfig {
  ModelKind kind;
  EncoderConfig encoder;
  HeadConfig head;
  int num_experts = 4;
  double cond_dropout = 0.7;

  void validate() const;
};

// Per-call forward settings. Dropout is active only when training.
struct ForwardContext {
  bool training = false;
  std::mt19937_64* rng = nullptr;
};

// Pluggable backbone: maps a scene to a [F, H/8, W/8] feature grid.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual int feature_channels() const = 0;
  virtual nn::Var extract(const SceneTensor& frame) const = 0;
};

// Converts an interleaved HxWxC scene to a [C, H, W] tensor.
nn::Tensor scene_to_tensor(const SceneTensor& frame);

struct Conv2d {
  nn::Var weight;
  nn::Var bias;  // may be null
  int stride = 1;
  int pad = 0;

  nn::Var operator()(const nn::Var& x) const { return nn::conv2d(x, weight, bias, stride, pad); }
};

// He-normal kernel [out, in, k, k] scaled by `gain`, zero bias.
Conv2d make_conv(nn::ParameterSet& params, const std::string& name, int in, int out, int k, int stride,
                 std::mt19937_64& rng, double gain = 1.0, bool with_bias = true);

// Four-layer strided convolutional encoder (total stride 8).
class SmallConvEncoder : public FeatureExtractor {
 public:
  SmallConvEncoder(const EncoderConfig& cfg, nn::ParameterSet& params, const std::string& prefix,
                   std::mt19937_64& rng);
  int feature_channels() const override { return channels_; }
  nn::Var extract(const SceneTensor& frame) const override;

 private:
  std::vector<Conv2d> layers_;
  int channels_;
  int scene_height_, scene_width_;
};

// h_t = tanh(Wx * x_t + Wh * h_{t-1} + b), 3x3 same-padded convolutions.
class ConvRecurrentCell {
 public:
  ConvRecurrentCell(int in_channels, int hidden_channels, nn::ParameterSet& params, const std::string& prefix,
                    std::mt19937_64& rng);
  nn::Var step(const nn::Var& x, const nn::Var& previous) const;

 private:
  Conv2d input_;
  Conv2d hidden_;
};

// Encoder + optional extra per-frame input planes + optional recurrence.
class SequenceBackbone {
 public:
  SequenceBackbone(const EncoderConfig& cfg, int extra_channels, nn::ParameterSet& params, std::mt19937_64& rng,
                   std::shared_ptr<const FeatureExtractor> external);

  int output_channels() const { return out_channels_; }
  const FeatureExtractor& extractor() const { return *extractor_; }
  // extras[t] (if given) is concatenated to the encoded features of frame t
  // before the recurrent cell. zero_features blanks the scene features
  // (ablation).
  std::vector<nn::Var> run(std::span<const FrameSample> frames, std::span<const nn::Var> extras,
                           bool zero_features = false) const;

 private:
  EncoderConfig cfg_;
  std::shared_ptr<const FeatureExtractor> extractor_;
  std::optional<ConvRecurrentCell> cell_;
  int out_channels_;
};

// Plain decoder head: [dropout] -> 3x3 conv -> ReLU -> 1x1 conv -> + prior.
class AttentionHead {
 public:
  AttentionHead(int in_channels, const HeadConfig& cfg, int map_height, int map_width, nn::ParameterSet& params,
                const std::string& prefix, std::mt19937_64& rng);
  nn::Var logits(const nn::Var& features, const ForwardContext& ctx) const;

 private:
  HeadConfig cfg_;
  Conv2d hidden_;
  Conv2d out_;
  nn::Var prior_;
};

// Conditional convolution whose routing function takes the driver state:
// r = sigmoid(W * one_hot(state) + b), K = sum_k r_k W_k, same padding.
class CondConvLayer {
 public:
  CondConvLayer(const CondConvLayerConfig& cfg, ConditionType condition, nn::ParameterSet& params,
                const std::string& prefix, std::mt19937_64& rng);

  const CondConvLayerConfig& config() const { return cfg_; }
  ConditionType condition_type() const { return condition_; }

  std::vector<double> routing_weights(const DriverState& state) const;
  nn::Var forward(const nn::Var& x, const DriverState& state) const;
  // Inference convenience over plain tensors.
  nn::Tensor apply(const nn::Tensor& x, const DriverState& state) const;

  // Test hook: replaces the routing function's output with a fixed vector.
  void force_routing(std::optional<std::vector<double>> routing);

  const nn::Var& expert_kernels() const { return kernels_; }  // [N, O, C, K, K]
  const nn::Var& expert_biases() const { return biases_; }    // [N, O]
  const nn::Var& routing_weight() const { return routing_w_; }  // [N, S]
  const nn::Var& routing_bias() const { return routing_b_; }    // [N]

 private:
  nn::Var routing(const DriverState& state) const;

  CondConvLayerConfig cfg_;
  ConditionType condition_;
  nn::Var kernels_, biases_, routing_w_, routing_b_;
  std::optional<std::vector<double>> forced_;
};

// Head whose two layers are state-routed conditional convolutions.
class CondConvHead {
 public:
  CondConvHead(int in_channels, const ModelConfig& cfg, nn::ParameterSet& params, std::mt19937_64& rng);
  nn::Var logits(const nn::Var& features, const DriverState& state, const ForwardContext& ctx) const;
  CondConvLayer& layer(int i) { return i == 0 ? hidden_ : out_; }
  const CondConvLayer& layer(int i) const { return i == 0 ? hidden_ : out_; }

 private:
  bool coord_channels_;
  CondConvLayer hidden_;
  CondConvLayer out_;
  nn::Var prior_;
};

// Anything that maps a frame sequence plus driver states to attention maps.
class AttentionPredictor {
 public:
  virtual ~AttentionPredictor() = default;
  virtual ConditionType condition_type() const = 0;
  virtual std::vector<AttentionMap> predict(std::span<const FrameSample> frames,
                                            std::span<const DriverState> states) const = 0;
};

class AttentionModel : public AttentionPredictor {
 public:
  AttentionModel(ModelConfig cfg, std::uint64_t seed, std::shared_ptr<const FeatureExtractor> external = nullptr);

  const ModelConfig& config() const { return cfg_; }
  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }
  ConditionType condition_type() const override { return cfg_.kind.condition_type; }

  // Per-frame encoder output (before recurrence).
  std::vector<nn::Tensor> encode(std::span<const SceneTensor> frames) const;

  // Unnormalized per-frame logits [1, h, w].
  std::vector<nn::Var> forward(std::span<const FrameSample> frames, std::span<const DriverState> states,
                               const ForwardContext& ctx) const;

  std::vector<AttentionMap> predict(std::span<const FrameSample> frames,
                                    std::span<const DriverState> states) const override;

  // Mean cross-entropy against frames[t].gt_map over the sequence.
  nn::Var sequence_loss(std::span<const FrameSample> frames, std::span<const DriverState> states,
                        const ForwardContext& ctx) const;

  int branch_count() const { return static_cast<int>(branches_.size()); }
  CondConvHead* cond_head() { return cond_head_ ? &*cond_head_ : nullptr; }

 private:
  void check_states(std::span<const DriverState> states, std::size_t frames) const;

  ModelConfig cfg_;
  nn::ParameterSet params_;
  std::unique_ptr<SequenceBackbone> backbone_;
  std::vector<AttentionHead> branches_;
  std::optional<CondConvHead> cond_head_;
};

// Branch index for the multi-branch model: argmax of one_hot(state).
int multi_branch_select(const DriverState& state, int branch_count);

// -sum_i gt_i ln pred_i. Requires strictly positive pred where gt > 0.
double attention_loss(const AttentionMap& pred, const AttentionMap& gt);

AttentionMap logits_to_map(const nn::Tensor& logits);

// Predicts the ground-truth map of each frame (upper bound reference).
class OraclePredictor : public AttentionPredictor {
 public:
  explicit OraclePredictor(ConditionType condition = ConditionType::none) : condition_(condition) {}
  ConditionType condition_type() const override { return condition_; }
  std::vector<AttentionMap> predict(std::span<const FrameSample> frames,
                                    std::span<const DriverState> states) const override;

 private:
  ConditionType condition_;
};

// Predicts the uniform map (maximum-entropy reference).
class UniformPredictor : public AttentionPredictor {
 public:
  explicit UniformPredictor(ConditionType condition = ConditionType::none) : condition_(condition) {}
  ConditionType condition_type() const override { return condition_; }
  std::vector<AttentionMap> predict(std::span<const FrameSample> frames,
                                    std::span<const DriverState> states) const override;

 private:
  ConditionType condition_;
};

}  // namespace drivatt::models

#include "drivatt/models.hpp"

#include <cmath>

#include "drivatt/errors.hpp"

namespace drivatt::models {
namespace {

nn::Tensor normal_tensor(std::vector<int> shape, double stddev, std::mt19937_64& rng) {
  nn::Tensor t(std::move(shape), 0.0);
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

nn::Var coordinate_planes(int h, int w) {
  nn::Tensor t({2, h, w}, 0.0);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      t[i] = h > 1 ? 2.0 * r / (h - 1) - 1.0 : 0.0;
      t[static_cast<std::size_t>(h) * w + i] = w > 1 ? 2.0 * c / (w - 1) - 1.0 : 0.0;
    }
  return nn::constant(std::move(t));
}

nn::Var maybe_dropout(const nn::Var& x, double rate, const ForwardContext& ctx) {
  if (!ctx.training || rate <= 0.0) return x;
  if (!ctx.rng) throw InvalidArgument("training forward pass needs an RNG for dropout");
  return nn::dropout(x, rate, *ctx.rng);
}

}  // namespace

std::string_view to_string(Backbone b) { return b == Backbone::small_conv ? "small_conv" : "pretrained_external"; }
std::string_view to_string(Temporal t) { return t == Temporal::recurrent_conv ? "recurrent_conv" : "none"; }
std::string_view to_string(ModelType k) {
  switch (k) {
    case ModelType::unconditioned: return "unconditioned";
    case ModelType::multi_branch: return "multi_branch";
    case ModelType::cond_conv: return "cond_conv";
  }
  return "unconditioned";
}

Backbone parse_backbone(std::string_view s) {
  if (s == "small_conv") return Backbone::small_conv;
  if (s == "pretrained_external") return Backbone::pretrained_external;
  throw InvalidArgument("unknown backbone: " + std::string(s));
}

Temporal parse_temporal(std::string_view s) {
  if (s == "recurrent_conv") return Temporal::recurrent_conv;
  if (s == "none") return Temporal::none;
  throw InvalidArgument("unknown temporal mode: " + std::string(s));
}

ModelType parse_model_type(std::string_view s) {
  if (s == "unconditioned") return ModelType::unconditioned;
  if (s == "multi_branch" || s == "multi-branch") return ModelType::multi_branch;
  if (s == "cond_conv" || s == "cond-conv") return ModelType::cond_conv;
  throw InvalidArgument("unknown model type: " + std::string(s));
}

void EncoderConfig::validate() const {
  if (feature_channels <= 0 || stem_channels <= 0) throw InvalidArgument("encoder channel counts must be positive");
  if (scene_height <= 0 || scene_width <= 0 || scene_height % kSceneScale != 0 || scene_width % kSceneScale != 0)
    throw InvalidArgument("scene size must be a positive multiple of 8");
}

void CondConvLayerConfig::validate() const {
  if (num_experts < 2) throw InvalidArgument("conditional convolution needs at least two experts");
  if (in_channels <= 0 || out_channels <= 0 || kernel_size <= 0 || kernel_size % 2 == 0)
    throw InvalidArgument("conditional convolution needs positive channels and an odd kernel");
  if (dropout < 0.0 || dropout >= 1.0) throw InvalidArgument("dropout must be in [0, 1)");
}

void ModelKind::validate() const {
  if (kind == ModelType::unconditioned && condition_type != ConditionType::none)
    throw InvalidArgument("the unconditioned model takes no condition type");
  if (kind != ModelType::unconditioned && condition_type == ConditionType::none)
    throw InvalidArgument("conditioned models need a condition type");
}

void ModelConfig::validate() const {
  kind.validate();
  encoder.validate();
  if (head.channels <= 0) throw InvalidArgument("head channels must be positive");
  if (head.dropout < 0.0 || head.dropout >= 1.0) throw InvalidArgument("head dropout must be in [0, 1)");
  if (kind.kind == ModelType::cond_conv) {
    CondConvLayerConfig probe{num_experts, 1, 1, 3, cond_dropout};
    probe.validate();
  }
}

nn::Tensor scene_to_tensor(const SceneTensor& frame) {
  nn::Tensor t({frame.channels, frame.height, frame.width}, 0.0);
  const std::size_t plane = static_cast<std::size_t>(frame.height) * frame.width;
  for (int r = 0; r < frame.height; ++r)
    for (int c = 0; c < frame.width; ++c)
      for (int ch = 0; ch < frame.channels; ++ch)
        t[ch * plane + static_cast<std::size_t>(r) * frame.width + c] = frame.at(r, c, ch);
  return t;
}

Conv2d make_conv(nn::ParameterSet& params, const std::string& name, int in, int out, int k, int stride,
                 std::mt19937_64& rng, double gain, bool with_bias) {
  Conv2d conv;
  const double stddev = gain * std::sqrt(2.0 / (static_cast<double>(in) * k * k));
  conv.weight = params.add(name + ".weight", normal_tensor({out, in, k, k}, stddev, rng));
  if (with_bias) conv.bias = params.add(name + ".bias", nn::Tensor({out}, 0.0));
  conv.stride = stride;
  conv.pad = k / 2;
  return conv;
}

SmallConvEncoder::SmallConvEncoder(const EncoderConfig& cfg, nn::ParameterSet& params, const std::string& prefix,
                                   std::mt19937_64& rng)
    : channels_(cfg.feature_channels), scene_height_(cfg.scene_height), scene_width_(cfg.scene_width) {
  layers_.push_back(make_conv(params, prefix + ".conv1", 3, cfg.stem_channels, 3, 2, rng));
  layers_.push_back(make_conv(params, prefix + ".conv2", cfg.stem_channels, cfg.stem_channels, 3, 2, rng));
  layers_.push_back(make_conv(params, prefix + ".conv3", cfg.stem_channels, cfg.feature_channels, 3, 2, rng));
  layers_.push_back(make_conv(params, prefix + ".conv4", cfg.feature_channels, cfg.feature_channels, 3, 1, rng));
}

nn::Var SmallConvEncoder::extract(const SceneTensor& frame) const {
  if (frame.height != scene_height_ || frame.width != scene_width_ || frame.channels != 3)
    throw ShapeMismatch("scene is " + std::to_string(frame.height) + "x" + std::to_string(frame.width) + "x" +
                        std::to_string(frame.channels) + ", encoder expects " + std::to_string(scene_height_) +
                        "x" + std::to_string(scene_width_) + "x3");
  nn::Var x = nn::constant(scene_to_tensor(frame));
  for (const Conv2d& layer : layers_) x = nn::relu(layer(x));
  return x;
}

ConvRecurrentCell::ConvRecurrentCell(int in_channels, int hidden_channels, nn::ParameterSet& params,
                                     const std::string& prefix, std::mt19937_64& rng)
    : input_(make_conv(params, prefix + ".input", in_channels, hidden_channels, 3, 1, rng, 0.5)),
      hidden_(make_conv(params, prefix + ".hidden", hidden_channels, hidden_channels, 3, 1, rng, 0.25, false)) {}

nn::Var ConvRecurrentCell::step(const nn::Var& x, const nn::Var& previous) const {
  nn::Var pre = input_(x);
  if (previous) pre = nn::add(pre, hidden_(previous));
  return nn::tanh(pre);
}

SequenceBackbone::SequenceBackbone(const EncoderConfig& cfg, int extra_channels, nn::ParameterSet& params,
                                   std::mt19937_64& rng, std::shared_ptr<const FeatureExtractor> external)
    : cfg_(cfg) {
  cfg.validate();
  if (cfg.backbone == Backbone::pretrained_external) {
    if (!external) throw InvalidArgument("pretrained_external backbone requires a FeatureExtractor");
    extractor_ = std::move(external);
  } else {
    extractor_ = std::make_shared<SmallConvEncoder>(cfg, params, "encoder", rng);
  }
  const int in = extractor_->feature_channels() + extra_channels;
  out_channels_ = in;
  if (cfg.temporal == Temporal::recurrent_conv) {
    cell_.emplace(in, cfg.feature_channels, params, "temporal", rng);
    out_channels_ = cfg.feature_channels;
  }
}

std::vector<nn::Var> SequenceBackbone::run(std::span<const FrameSample> frames,
                                           std::span<const nn::Var> extras, bool zero_features) const {
  if (!extras.empty() && extras.size() != frames.size())
    throw ShapeMismatch("extra inputs must match the frame count");
  std::vector<nn::Var> out;
  out.reserve(frames.size());
  nn::Var state;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    nn::Var x = extractor_->extract(frames[t].frame);
    if (zero_features) x = nn::scale(x, 0.0);
    if (!extras.empty()) x = nn::concat_channels(x, extras[t]);
    if (cell_) {
      state = cell_->step(x, state);
      out.push_back(state);
    } else {
      out.push_back(x);
    }
  }
  return out;
}

AttentionHead::AttentionHead(int in_channels, const HeadConfig& cfg, int map_height, int map_width,
                             nn::ParameterSet& params, const std::string& prefix, std::mt19937_64& rng)
    : cfg_(cfg),
      hidden_(make_conv(params, prefix + ".hidden", in_channels + (cfg.coord_channels ? 2 : 0), cfg.channels, 3, 1,
                        rng)),
      out_(make_conv(params, prefix + ".out", cfg.channels, 1, 1, 1, rng, 0.1)),
      prior_(params.add(prefix + ".prior", nn::Tensor({1, map_height, map_width}, 0.0))) {}

nn::Var AttentionHead::logits(const nn::Var& features, const ForwardContext& ctx) const {
  nn::Var x = maybe_dropout(features, cfg_.dropout, ctx);
  if (cfg_.coord_channels) x = nn::concat_channels(x, coordinate_planes(x->value.dim(1), x->value.dim(2)));
  x = nn::relu(hidden_(x));
  return nn::add(out_(x), prior_);
}

CondConvLayer::CondConvLayer(const CondConvLayerConfig& cfg, ConditionType condition, nn::ParameterSet& params,
                             const std::string& prefix, std::mt19937_64& rng)
    : cfg_(cfg), condition_(condition) {
  cfg.validate();
  const int n = cfg.num_experts, k = cfg.kernel_size;
  const double he = std::sqrt(2.0 / (static_cast<double>(cfg.in_channels) * k * k));
  // Sigmoid routing starts near 0.5 per expert; scale so the mixed kernel
  // starts at He magnitude.
  const double stddev = he * 2.0 / n;
  kernels_ = params.add(prefix + ".experts", normal_tensor({n, cfg.out_channels, cfg.in_channels, k, k}, stddev, rng));
  biases_ = params.add(prefix + ".expert_bias", nn::Tensor({n, cfg.out_channels}, 0.0));
  routing_w_ = params.add(prefix + ".routing.weight", normal_tensor({n, num_states(condition)}, 1.0, rng));
  routing_b_ = params.add(prefix + ".routing.bias", nn::Tensor({n}, 0.0));
}

nn::Var CondConvLayer::routing(const DriverState& state) const {
  if (state.kind != condition_)
    throw InvalidArgument("driver state of kind '" + std::string(to_string(state.kind)) +
                          "' given to a layer conditioned on '" + std::string(to_string(condition_)) + "'");
  if (forced_) {
    if (forced_->size() != static_cast<std::size_t>(cfg_.num_experts))
      throw ShapeMismatch("forced routing vector has the wrong length");
    return nn::constant(nn::Tensor({cfg_.num_experts}, *forced_));
  }
  const std::vector<double> code = one_hot(state);
  nn::Var input = nn::constant(nn::Tensor({static_cast<int>(code.size())}, code));
  return nn::sigmoid(nn::affine(routing_w_, input, routing_b_));
}

std::vector<double> CondConvLayer::routing_weights(const DriverState& state) const {
  nn::NoGradGuard guard;
  const nn::Var r = routing(state);
  return {r->value.data().begin(), r->value.data().end()};
}

nn::Var CondConvLayer::forward(const nn::Var& x, const DriverState& state) const {
  if (x->value.rank() != 3 || x->value.dim(0) != cfg_.in_channels)
    throw ShapeMismatch("conditional convolution input has " + nn::shape_string(x->value.shape()) + ", expected " +
                        std::to_string(cfg_.in_channels) + " channels");
  const nn::Var r = routing(state);
  const nn::Var kernel = nn::mix(r, kernels_);
  const nn::Var bias = nn::mix(r, biases_);
  return nn::conv2d(x, kernel, bias, 1, cfg_.kernel_size / 2);
}

nn::Tensor CondConvLayer::apply(const nn::Tensor& x, const DriverState& state) const {
  nn::NoGradGuard guard;
  return forward(nn::constant(x), state)->value;
}

void CondConvLayer::force_routing(std::optional<std::vector<double>> routing) { forced_ = std::move(routing); }

CondConvHead::CondConvHead(int in_channels, const ModelConfig& cfg, nn::ParameterSet& params, std::mt19937_64& rng)
    : coord_channels_(cfg.head.coord_channels),
      hidden_({cfg.num_experts, in_channels + (cfg.head.coord_channels ? 2 : 0), cfg.head.channels, 3,
               cfg.cond_dropout},
              cfg.kind.condition_type, params, "head.cond1", rng),
      out_({cfg.num_experts, cfg.head.channels, 1, 1, cfg.cond_dropout}, cfg.kind.condition_type, params,
           "head.cond2", rng),
      prior_(params.add("head.prior", nn::Tensor({1, cfg.encoder.map_height(), cfg.encoder.map_width()}, 0.0))) {}

nn::Var CondConvHead::logits(const nn::Var& features, const DriverState& state, const ForwardContext& ctx) const {
  nn::Var x = maybe_dropout(features, hidden_.config().dropout, ctx);
  if (coord_channels_) x = nn::concat_channels(x, coordinate_planes(x->value.dim(1), x->value.dim(2)));
  x = nn::relu(hidden_.forward(x, state));
  x = maybe_dropout(x, out_.config().dropout, ctx);
  return nn::add(out_.forward(x, state), prior_);
}

AttentionModel::AttentionModel(ModelConfig cfg, std::uint64_t seed, std::shared_ptr<const FeatureExtractor> external)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  backbone_ = std::make_unique<SequenceBackbone>(cfg_.encoder, 0, params_, rng, std::move(external));
  const int features = backbone_->output_channels();
  const int h = cfg_.encoder.map_height(), w = cfg_.encoder.map_width();
  switch (cfg_.kind.kind) {
    case ModelType::unconditioned:
      branches_.emplace_back(features, cfg_.head, h, w, params_, "head", rng);
      break;
    case ModelType::multi_branch:
      for (int b = 0; b < num_states(cfg_.kind.condition_type); ++b)
        branches_.emplace_back(features, cfg_.head, h, w, params_, "branch" + std::to_string(b), rng);
      break;
    case ModelType::cond_conv:
      cond_head_.emplace(features, cfg_, params_, rng);
      break;
  }
}

std::vector<nn::Tensor> AttentionModel::encode(std::span<const SceneTensor> frames) const {
  nn::NoGradGuard guard;
  std::vector<nn::Tensor> out;
  out.reserve(frames.size());
  for (const SceneTensor& f : frames) out.push_back(backbone_->extractor().extract(f)->value);
  return out;
}

void AttentionModel::check_states(std::span<const DriverState> states, std::size_t frames) const {
  if (cfg_.kind.kind == ModelType::unconditioned) {
    if (!states.empty() && states.size() != frames) throw ShapeMismatch("state count must match frame count");
    return;
  }
  if (states.size() != frames) throw ShapeMismatch("state count must match frame count");
  for (const DriverState& s : states)
    if (s.kind != cfg_.kind.condition_type || !s.well_formed())
      throw InvalidArgument("driver state '" + state_label(s) + "' does not match the model's condition type '" +
                            std::string(to_string(cfg_.kind.condition_type)) + "'");
}

std::vector<nn::Var> AttentionModel::forward(std::span<const FrameSample> frames, std::span<const DriverState> states,
                                             const ForwardContext& ctx) const {
  check_states(states, frames.size());
  const std::vector<nn::Var> features = backbone_->run(frames, {});
  std::vector<nn::Var> logits;
  logits.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    switch (cfg_.kind.kind) {
      case ModelType::unconditioned:
        logits.push_back(branches_.front().logits(features[t], ctx));
        break;
      case ModelType::multi_branch: {
        const int b = multi_branch_select(states[t], branch_count());
        logits.push_back(branches_[static_cast<std::size_t>(b)].logits(features[t], ctx));
        break;
      }
      case ModelType::cond_conv:
        logits.push_back(cond_head_->logits(features[t], states[t], ctx));
        break;
    }
  }
  return logits;
}

std::vector<AttentionMap> AttentionModel::predict(std::span<const FrameSample> frames,
                                                  std::span<const DriverState> states) const {
  nn::NoGradGuard guard;
  const std::vector<nn::Var> logits = forward(frames, states, ForwardContext{});
  std::vector<AttentionMap> maps;
  maps.reserve(logits.size());
  for (const nn::Var& l : logits) maps.push_back(logits_to_map(l->value));
  return maps;
}

nn::Var AttentionModel::sequence_loss(std::span<const FrameSample> frames, std::span<const DriverState> states,
                                      const ForwardContext& ctx) const {
  if (frames.empty()) throw InvalidArgument("cannot compute a loss on an empty sequence");
  const std::vector<nn::Var> logits = forward(frames, states, ctx);
  nn::Var total;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const AttentionMap& gt = frames[t].gt_map;
    const nn::Tensor target({1, gt.height(), gt.width()}, std::vector<double>(gt.values().begin(), gt.values().end()));
    if (target.shape() != logits[t]->value.shape()) throw ShapeMismatch("ground-truth map does not match model output");
    nn::Var ce = nn::softmax_cross_entropy(logits[t], target);
    total = total ? nn::add(total, ce) : ce;
  }
  return nn::scale(total, 1.0 / static_cast<double>(frames.size()));
}

int multi_branch_select(const DriverState& state, int branch_count) {
  const std::vector<double> code = one_hot(state);
  if (static_cast<int>(code.size()) != branch_count)
    throw InvalidArgument("branch count " + std::to_string(branch_count) + " does not match state encoding length " +
                          std::to_string(code.size()));
  return state_index(state);
}

double attention_loss(const AttentionMap& pred, const AttentionMap& gt) {
  if (!same_shape(pred, gt)) throw ShapeMismatch("attention_loss: maps differ in shape");
  const auto p = pred.values();
  const auto g = gt.values();
  double loss = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] == 0.0) continue;
    if (!(p[i] > 0.0)) throw InvalidArgument("attention_loss: prediction has zero mass where ground truth does not");
    loss -= g[i] * std::log(p[i]);
  }
  return loss;
}

AttentionMap logits_to_map(const nn::Tensor& logits) {
  if (logits.rank() != 3 || logits.dim(0) != 1) throw ShapeMismatch("logits must be [1, H, W]");
  const nn::Tensor p = nn::softmax(logits);
  return AttentionMap(logits.dim(1), logits.dim(2), std::vector<double>(p.data().begin(), p.data().end()));
}

std::vector<AttentionMap> OraclePredictor::predict(std::span<const FrameSample> frames,
                                                   std::span<const DriverState>) const {
  std::vector<AttentionMap> out;
  out.reserve(frames.size());
  for (const FrameSample& f : frames) out.push_back(f.gt_map);
  return out;
}

std::vector<AttentionMap> UniformPredictor::predict(std::span<const FrameSample> frames,
                                                    std::span<const DriverState>) const {
  std::vector<AttentionMap> out;
  out.reserve(frames.size());
  for (const FrameSample& f : frames) out.push_back(AttentionMap::uniform(f.gt_map.height(), f.gt_map.width()));
  return out;
}

}  // namespace drivatt::models

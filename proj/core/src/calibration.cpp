#include "drivatt/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "drivatt/errors.hpp"

namespace drivatt::calibration {

void CalibrationConfig::validate() const {
  if (window < 1) throw InvalidArgument("calibration window must be >= 1");
  if (max_offset < 0) throw InvalidArgument("max_offset must be >= 0");
}

CellOffset coarse_offset(std::span<const AttentionMap> window, int max_offset) {
  if (window.empty()) throw InvalidArgument("coarse_offset needs a non-empty window");
  const int h = window.front().height(), w = window.front().width();
  std::vector<double> acc(static_cast<std::size_t>(h) * w, 0.0);
  for (const AttentionMap& m : window) {
    if (!same_shape(m, window.front())) throw ShapeMismatch("window maps differ in shape");
    const auto v = m.values();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
  }
  std::size_t peak = 0;
  for (std::size_t i = 1; i < acc.size(); ++i)
    if (acc[i] > acc[peak]) peak = i;
  const int peak_row = static_cast<int>(peak) / w;
  const int peak_col = static_cast<int>(peak) % w;
  return {std::clamp(h / 2 - peak_row, -max_offset, max_offset),
          std::clamp(w / 2 - peak_col, -max_offset, max_offset)};
}

AttentionMap apply_shift(const AttentionMap& m, CellOffset offset) {
  if (offset.row == 0 && offset.col == 0) return m;
  const int h = m.height(), w = m.width();
  Grid out(h, w, 0.0);
  for (int r = 0; r < h; ++r) {
    const int rr = r + offset.row;
    if (rr < 0 || rr >= h) continue;
    for (int c = 0; c < w; ++c) {
      const int cc = c + offset.col;
      if (cc >= 0 && cc < w) out(rr, cc) = m(r, c);
    }
  }
  return AttentionMap::normalized_or_uniform(std::move(out));
}

SlidingWindowAggregator::SlidingWindowAggregator(int window, int max_offset)
    : window_(static_cast<std::size_t>(window)), max_offset_(max_offset) {
  if (window < 1) throw InvalidArgument("calibration window must be >= 1");
}

CellOffset SlidingWindowAggregator::push(const AttentionMap& m) {
  maps_.push_back(m);
  if (maps_.size() > window_) maps_.pop_front();
  const std::vector<AttentionMap> current(maps_.begin(), maps_.end());
  return coarse_offset(current, max_offset_);
}

nn::Tensor gaze_input_plane(const AttentionMap& m) {
  const double cells = static_cast<double>(m.size());
  nn::Tensor t({1, m.height(), m.width()}, 0.0);
  const auto v = m.values();
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = std::log(cells * v[i] + 1e-3);
  return t;
}

CalibrationNet::CalibrationNet(CalibrationNetConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.encoder.validate();
  std::mt19937_64 rng(seed);
  backbone_ = std::make_unique<models::SequenceBackbone>(cfg_.encoder, 1, params_, rng, nullptr);
  head_ = std::make_unique<models::AttentionHead>(backbone_->output_channels(), cfg_.head, cfg_.encoder.map_height(),
                                                  cfg_.encoder.map_width(), params_, "head", rng);
}

std::vector<nn::Var> CalibrationNet::forward(std::span<const FrameSample> frames, std::span<const AttentionMap> inputs,
                                             const models::ForwardContext& ctx, bool ablate_scene) const {
  if (frames.size() != inputs.size()) throw ShapeMismatch("fine calibration needs one gaze map per frame");
  std::vector<nn::Var> extras;
  extras.reserve(inputs.size());
  for (const AttentionMap& m : inputs) {
    if (m.height() != cfg_.encoder.map_height() || m.width() != cfg_.encoder.map_width())
      throw ShapeMismatch("gaze map resolution does not match the calibration network");
    extras.push_back(nn::constant(gaze_input_plane(m)));
  }
  const std::vector<nn::Var> features = backbone_->run(frames, extras, ablate_scene);
  std::vector<nn::Var> logits;
  logits.reserve(features.size());
  for (const nn::Var& f : features) logits.push_back(head_->logits(f, ctx));
  return logits;
}

std::vector<AttentionMap> CalibrationNet::calibrate(std::span<const FrameSample> frames,
                                                    std::span<const AttentionMap> inputs, bool ablate_scene) const {
  nn::NoGradGuard guard;
  std::vector<AttentionMap> out;
  for (const nn::Var& l : forward(frames, inputs, models::ForwardContext{}, ablate_scene))
    out.push_back(models::logits_to_map(l->value));
  return out;
}

nn::Var CalibrationNet::sequence_loss(std::span<const FrameSample> frames, std::span<const AttentionMap> inputs,
                                      const models::ForwardContext& ctx) const {
  if (frames.empty()) throw InvalidArgument("cannot compute a loss on an empty sequence");
  const std::vector<nn::Var> logits = forward(frames, inputs, ctx);
  nn::Var total;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const AttentionMap& gt = frames[t].gt_map;
    const nn::Tensor target({1, gt.height(), gt.width()}, std::vector<double>(gt.values().begin(), gt.values().end()));
    nn::Var ce = nn::softmax_cross_entropy(logits[t], target);
    total = total ? nn::add(total, ce) : ce;
  }
  return nn::scale(total, 1.0 / static_cast<double>(frames.size()));
}

std::vector<AttentionMap> fine_calibrate(std::span<const FrameSample> scene_frames,
                                         std::span<const AttentionMap> centered_maps, const CalibrationNet& net) {
  if (scene_frames.size() != centered_maps.size())
    throw InvalidArgument("fine_calibrate: frame and map sequences differ in length");
  return net.calibrate(scene_frames, centered_maps);
}

std::vector<AttentionMap> coarse_stage(const SessionRecord& session, const CalibrationConfig& cfg) {
  cfg.validate();
  std::vector<AttentionMap> raw;
  raw.reserve(session.frames.size());
  for (std::size_t t = 0; t < session.frames.size(); ++t) {
    if (!session.frames[t].webcam_map)
      throw InvalidArgument("session '" + session.session_id + "' frame " + std::to_string(t) + " has no webcam map");
    raw.push_back(*session.frames[t].webcam_map);
  }
  if (!cfg.coarse || raw.empty()) return raw;

  std::vector<AttentionMap> out;
  out.reserve(raw.size());
  if (cfg.per_sequence) {
    const CellOffset offset = coarse_offset(raw, cfg.max_offset);
    for (const AttentionMap& m : raw) out.push_back(apply_shift(m, offset));
    return out;
  }
  SlidingWindowAggregator window(cfg.window, cfg.max_offset);
  for (const AttentionMap& m : raw) out.push_back(apply_shift(m, window.push(m)));
  return out;
}

std::vector<AttentionMap> calibrate_pipeline(const SessionRecord& session, const CalibrationConfig& cfg,
                                             const CalibrationNet* net) {
  std::vector<AttentionMap> maps = coarse_stage(session, cfg);
  if (!cfg.fine_tune) return maps;
  if (!net) throw InvalidArgument("the fine calibration stage needs a trained calibration network");
  if (net->config().trained_on_centered != cfg.coarse)
    throw InvalidArgument(std::string("calibration network was trained on ") +
                          (net->config().trained_on_centered ? "centered" : "raw") + " gaze maps but coarse stage is " +
                          (cfg.coarse ? "on" : "off"));
  return fine_calibrate(session.frames, maps, *net);
}

}  // namespace drivatt::calibration

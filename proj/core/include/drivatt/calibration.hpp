#pragma once

// Two-scale gaze calibration for low-resolution (webcam) attention maps:
// a coarse integer re-centering from the density peak of a sliding window
// of past maps, followed by a recurrent convolutional refinement that
// sees the scene features and the centered map.

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "drivatt/models.hpp"
#include "drivatt/types.hpp"

namespace drivatt::calibration {

struct CalibrationConfig {
  int window = 64;      // frames
  int max_offset = 12;  // cells, per axis
  bool coarse = true;
  bool fine_tune = true;
  // Use one offset from the whole session instead of the causal window.
  bool per_sequence = false;

  void validate() const;
};

// center - argmax(mean of window), ties broken by smallest (row, col),
// each component clamped to [-max_offset, max_offset].
// center = (floor(H/2), floor(W/2)).
CellOffset coarse_offset(std::span<const AttentionMap> window, int max_offset = 12);

// Integer translation; mass leaving the grid is dropped, vacated cells are
// zero, result renormalized (uniform if nothing remains).
AttentionMap apply_shift(const AttentionMap& m, CellOffset offset);

// Single-session causal window over the most recent maps.
class SlidingWindowAggregator {
 public:
  SlidingWindowAggregator(int window, int max_offset);
  // Adds a map and returns the offset computed over the current window.
  CellOffset push(const AttentionMap& m);
  std::size_t size() const { return maps_.size(); }

 private:
  std::size_t window_;
  int max_offset_;
  std::deque<AttentionMap> maps_;
};

struct CalibrationNetConfig {
  models::EncoderConfig encoder;
  models::HeadConfig head;
  // Whether the network was trained on coarse-centered input maps.
  bool trained_on_centered = true;
};

// Encoder features concatenated with the (log-scaled) input gaze map, a
// recurrent convolutional cell, and a softmax decoder head.
class CalibrationNet {
 public:
  CalibrationNet(CalibrationNetConfig cfg, std::uint64_t seed);

  const CalibrationNetConfig& config() const { return cfg_; }
  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }

  std::vector<nn::Var> forward(std::span<const FrameSample> frames, std::span<const AttentionMap> inputs,
                               const models::ForwardContext& ctx, bool ablate_scene = false) const;
  std::vector<AttentionMap> calibrate(std::span<const FrameSample> frames, std::span<const AttentionMap> inputs,
                                      bool ablate_scene = false) const;
  // Mean cross-entropy against frames[t].gt_map.
  nn::Var sequence_loss(std::span<const FrameSample> frames, std::span<const AttentionMap> inputs,
                        const models::ForwardContext& ctx) const;

 private:
  CalibrationNetConfig cfg_;
  nn::ParameterSet params_;
  std::unique_ptr<models::SequenceBackbone> backbone_;
  std::unique_ptr<models::AttentionHead> head_;
};

// Network input plane for a gaze map: ln(H*W*m + floor).
nn::Tensor gaze_input_plane(const AttentionMap& m);

std::vector<AttentionMap> fine_calibrate(std::span<const FrameSample> scene_frames,
                                         std::span<const AttentionMap> centered_maps, const CalibrationNet& net);

// Webcam maps of the session after the coarse stage (or unchanged when
// cfg.coarse is off). Throws InvalidArgument on missing webcam maps.
std::vector<AttentionMap> coarse_stage(const SessionRecord& session, const CalibrationConfig& cfg);

// Runs the enabled stages. `net` is required iff cfg.fine_tune; its
// training input (centered or raw) must match cfg.coarse.
std::vector<AttentionMap> calibrate_pipeline(const SessionRecord& session, const CalibrationConfig& cfg,
                                             const CalibrationNet* net);

}  // namespace drivatt::calibration

#pragma once

// Seeded synthetic driving sessions: procedural scenes, state-dependent
// ground-truth attention and degraded webcam gaze.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "drivatt/models.hpp"
#include "drivatt/types.hpp"

namespace drivatt::synth {

enum class TunnelScope { everywhere, near_intersections };

std::string_view to_string(TunnelScope s);
TunnelScope parse_tunnel_scope(std::string_view s);

struct SynthScenarioConfig {
  std::uint64_t seed = 0;
  int n_sessions = 4;
  int frames_per_session = 64;
  DriveMode mode = DriveMode::manual;
  ConditionType condition_type = ConditionType::intention;
  double tunnel_strength = 1.0;
  double cross_gaze_strength = 1.0;
  CellOffset webcam_shift{4, 8};
  double webcam_dispersion = 2.0;  // cells
  double intersection_spacing = 120.0;  // meters

  int map_height = kDefaultMapHeight;
  int map_width = kDefaultMapWidth;
  double fps = 4.0;
  double speed = 8.33;  // meters per second
  int segment_frames = 40;  // distraction state is redrawn per segment
  double intention_radius = 45.0;  // intention is announced within this distance
  TunnelScope tunnel_scope = TunnelScope::everywhere;
  double tunnel_radius = 30.0;  // used with TunnelScope::near_intersections
  bool with_webcam = true;
  // Off leaves frames empty (gaze-only experiments); nothing else changes.
  bool with_scenes = true;
  int webcam_shift_jitter = 0;  // per-session uniform extra shift, cells per axis
  double car_rate = 0.08;  // probability per frame that an oncoming car appears

  int scene_height() const { return map_height * kSceneScale; }
  int scene_width() const { return map_width * kSceneScale; }
  void validate() const;

  // Mode-specific defaults: distraction is stronger in autopilot.
  static SynthScenarioConfig defaults(DriveMode mode, ConditionType condition);
};

double default_tunnel_strength(DriveMode mode);

// Everything besides the driver state that shapes a frame's attention.
struct FrameContext {
  double dist_to_intersection = kOpenRoad;
  std::optional<std::pair<double, double>> car;  // (row, col) in map cells
};

// Ground-truth mixture for the given context and state. Unconditioned
// (none) states contribute no state-dependent term.
AttentionMap gt_map_for(const SynthScenarioConfig& cfg, const FrameContext& ctx, const DriverState& state);

// shift (plus rounded N(0, (dispersion/2)^2) jitter per axis when dispersion
// > 0) -> Gaussian blur sigma = dispersion -> 0.9 map + 0.1 uniform.
AttentionMap degrade_to_webcam(const AttentionMap& gt, CellOffset shift, double dispersion, std::mt19937_64& rng);

SessionRecord generate_session(const SynthScenarioConfig& cfg, int session_index);

// Session plus the per-frame generator context.
struct GeneratedSession {
  SessionRecord session;
  std::vector<FrameContext> contexts;
};
GeneratedSession generate_session_with_context(const SynthScenarioConfig& cfg, int session_index);

std::vector<SessionRecord> generate_sessions(const SynthScenarioConfig& cfg);

// Predicts the generator's state-dependent structure from the frame's
// distance to the next intersection alone (no scene content).
class StructurePredictor : public models::AttentionPredictor {
 public:
  explicit StructurePredictor(SynthScenarioConfig cfg) : cfg_(std::move(cfg)) {}
  ConditionType condition_type() const override { return cfg_.condition_type; }
  std::vector<AttentionMap> predict(std::span<const FrameSample> frames,
                                    std::span<const DriverState> states) const override;

 private:
  SynthScenarioConfig cfg_;
};

}  // namespace drivatt::synth

#include "drivatt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "drivatt/calibration.hpp"
#include "drivatt/errors.hpp"
#include "drivatt/preprocess.hpp"

namespace drivatt::synth {

std::string_view to_string(TunnelScope s) {
  return s == TunnelScope::everywhere ? "everywhere" : "near_intersections";
}

TunnelScope parse_tunnel_scope(std::string_view s) {
  if (s == "everywhere") return TunnelScope::everywhere;
  if (s == "near_intersections" || s == "near-intersections") return TunnelScope::near_intersections;
  throw InvalidArgument("unknown tunnel scope: " + std::string(s));
}

void SynthScenarioConfig::validate() const {
  if (n_sessions < 0) throw InvalidArgument("n_sessions must be >= 0");
  if (frames_per_session < 1) throw InvalidArgument("frames_per_session must be >= 1");
  if (condition_type == ConditionType::none) throw InvalidArgument("synthetic sessions need a condition type");
  if (!(tunnel_strength >= 0.0)) throw InvalidArgument("tunnel_strength must be >= 0");
  if (!(cross_gaze_strength >= 0.0)) throw InvalidArgument("cross_gaze_strength must be >= 0");
  if (!(webcam_dispersion >= 0.0)) throw InvalidArgument("webcam_dispersion must be >= 0");
  if (!(intersection_spacing > 0.0)) throw InvalidArgument("intersection_spacing must be > 0");
  if (map_height < 4 || map_width < 4) throw InvalidArgument("synthetic maps must be at least 4x4");
  if (!(fps > 0.0) || !(speed > 0.0)) throw InvalidArgument("fps and speed must be > 0");
  if (segment_frames < 1) throw InvalidArgument("segment_frames must be >= 1");
  if (webcam_shift_jitter < 0) throw InvalidArgument("webcam_shift_jitter must be >= 0");
  if (car_rate < 0.0 || car_rate > 1.0) throw InvalidArgument("car_rate must lie in [0, 1]");
}

double default_tunnel_strength(DriveMode mode) { return mode == DriveMode::autopilot ? 2.0 : 1.0; }

SynthScenarioConfig SynthScenarioConfig::defaults(DriveMode mode, ConditionType condition) {
  SynthScenarioConfig cfg;
  cfg.mode = mode;
  cfg.condition_type = condition;
  cfg.tunnel_strength = default_tunnel_strength(mode);
  return cfg;
}

namespace {

void add_gaussian(Grid& g, double row, double col, double sr, double sc, double weight) {
  if (weight == 0.0) return;
  std::vector<double> wr(static_cast<std::size_t>(g.rows())), wc(static_cast<std::size_t>(g.cols()));
  double zr = 0.0, zc = 0.0;
  for (int r = 0; r < g.rows(); ++r) {
    const double d = (r + 0.5 - row) / sr;
    wr[r] = std::exp(-0.5 * d * d);
    zr += wr[r];
  }
  for (int c = 0; c < g.cols(); ++c) {
    const double d = (c + 0.5 - col) / sc;
    wc[c] = std::exp(-0.5 * d * d);
    zc += wc[c];
  }
  // Each component carries `weight` total mass on the grid.
  if (zr <= 0.0 || zc <= 0.0) return;
  for (int r = 0; r < g.rows(); ++r)
    for (int c = 0; c < g.cols(); ++c) g(r, c) += weight * wr[r] * wc[c] / (zr * zc);
}

int mirror_rows(int h) { return std::max(1, static_cast<int>(std::lround(4.0 * h / kDefaultMapHeight))); }

struct MirrorCols {
  int begin, end;
};
MirrorCols mirror_cols(int w) {
  return {static_cast<int>(std::floor(0.38 * w)), std::max(static_cast<int>(std::ceil(0.62 * w)), 1)};
}

}  // namespace

AttentionMap gt_map_for(const SynthScenarioConfig& cfg, const FrameContext& ctx, const DriverState& state) {
  const int h = cfg.map_height, w = cfg.map_width;
  const double sy = h / static_cast<double>(kDefaultMapHeight);
  const double sx = w / static_cast<double>(kDefaultMapWidth);
  const double center_row = h / 2 + 0.5, center_col = w / 2 + 0.5;
  Grid g(h, w, 0.0);
  add_gaussian(g, center_row, center_col, 2.5 * sy, 5.0 * sx, 1.0);
  if (ctx.car) add_gaussian(g, ctx.car->first, ctx.car->second, 1.5 * sy, 3.0 * sx, 0.3);

  if (state.kind == ConditionType::intention) {
    if (state.intention == Intention::left)
      add_gaussian(g, 0.45 * h, 0.82 * w, 3.0 * sy, 5.0 * sx, cfg.cross_gaze_strength);
    else if (state.intention == Intention::right)
      add_gaussian(g, 0.45 * h, 0.18 * w, 3.0 * sy, 5.0 * sx, cfg.cross_gaze_strength);
  } else if (state.kind == ConditionType::distraction) {
    const bool active =
        cfg.tunnel_scope == TunnelScope::everywhere || ctx.dist_to_intersection <= cfg.tunnel_radius;
    if (active && state.distraction == Distraction::distracted) {
      add_gaussian(g, center_row, center_col, 1.2 * sy, 2.0 * sx, cfg.tunnel_strength);
    } else if (active && state.distraction == Distraction::attentive && cfg.tunnel_strength > 0.0) {
      const int rows = mirror_rows(h);
      const MirrorCols mc = mirror_cols(w);
      const double cell = 0.5 * cfg.tunnel_strength / (rows * (mc.end - mc.begin));
      for (int r = 0; r < rows; ++r)
        for (int c = mc.begin; c < mc.end; ++c) g(r, c) += cell;
    }
  }
  return AttentionMap::normalized(std::move(g));
}

AttentionMap degrade_to_webcam(const AttentionMap& gt, CellOffset shift, double dispersion, std::mt19937_64& rng) {
  if (!(dispersion >= 0.0)) throw InvalidArgument("dispersion must be >= 0");
  CellOffset total = shift;
  if (dispersion > 0.0) {
    std::normal_distribution<double> jitter(0.0, dispersion / 2.0);
    total.row += static_cast<int>(std::lround(jitter(rng)));
    total.col += static_cast<int>(std::lround(jitter(rng)));
  }
  AttentionMap moved = calibration::apply_shift(gt, total);
  if (dispersion > 0.0) moved = AttentionMap::normalized_or_uniform(preprocess::gaussian_blur(moved.grid(), dispersion));
  const double floor = 0.1 / static_cast<double>(moved.size());
  Grid out(moved.height(), moved.width(), 0.0);
  const auto v = moved.values();
  auto o = out.cells();
  for (std::size_t i = 0; i < v.size(); ++i) o[i] = 0.9 * v[i] + floor;
  return AttentionMap::normalized(std::move(out));
}

namespace {

struct Rgb {
  double r, g, b;
};

void paint(SceneTensor& s, int y, int x, Rgb c) {
  s.at(y, x, 0) = static_cast<float>(c.r);
  s.at(y, x, 1) = static_cast<float>(c.g);
  s.at(y, x, 2) = static_cast<float>(c.b);
}

void fill_rect(SceneTensor& s, int y0, int y1, int x0, int x1, Rgb c) {
  y0 = std::max(y0, 0), x0 = std::max(x0, 0);
  y1 = std::min(y1, s.height), x1 = std::min(x1, s.width);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) paint(s, y, x, c);
}

struct CarTrack {
  int age = 0;
  int duration = 0;
  bool active() const { return age < duration; }
  double progress() const { return duration > 1 ? static_cast<double>(age) / (duration - 1) : 1.0; }
};

SceneTensor render_scene(const SynthScenarioConfig& cfg, double ego_s, const FrameContext& ctx, double ahead,
                         double car_progress) {
  const int hs = cfg.scene_height(), ws = cfg.scene_width();
  SceneTensor s(hs, ws, 3);
  const double horizon = 0.42 * hs;
  constexpr double kDepth = 6.0;  // meters of road at the bottom row
  for (int y = 0; y < hs; ++y) {
    if (y < horizon) {
      const double t = 1.0 - y / horizon;
      for (int x = 0; x < ws; ++x) paint(s, y, x, {0.55, 0.70, 0.80 + 0.15 * t});
      continue;
    }
    const double f = (y + 0.5 - horizon) / (hs - horizon);
    const double half = ws * (0.02 + 0.43 * f);
    const double z = kDepth / std::max(f, 1e-3);  // distance ahead of this row
    const bool dash = std::fmod(ego_s + z, 6.0) < 3.0;
    const double line_half = std::max(1.0, 0.006 * ws * f);
    const bool crossing = ahead >= 0.0 && std::abs(z - ahead) < 6.0;
    for (int x = 0; x < ws; ++x) {
      const double dx = std::abs(x + 0.5 - ws / 2.0);
      if (crossing) {
        paint(s, y, x, std::abs(z - ahead + 5.0) < 0.6 ? Rgb{0.95, 0.95, 0.95} : Rgb{0.34, 0.34, 0.36});
      } else if (dx <= half) {
        paint(s, y, x, dash && dx <= line_half ? Rgb{0.95, 0.95, 0.90} : Rgb{0.38, 0.38, 0.40});
      } else {
        paint(s, y, x, {0.22, 0.45, 0.18});
      }
    }
  }
  // Rear-view mirror band.
  const MirrorCols mc = mirror_cols(cfg.map_width);
  const int mirror_h = mirror_rows(cfg.map_height) * kSceneScale;
  fill_rect(s, 0, mirror_h, mc.begin * kSceneScale, mc.end * kSceneScale, {0.12, 0.12, 0.15});
  fill_rect(s, 2, mirror_h - 2, mc.begin * kSceneScale + 2, mc.end * kSceneScale - 2, {0.30, 0.33, 0.36});

  if (ctx.car) {
    const double scale = hs / 256.0;
    const int cy = static_cast<int>(ctx.car->first * kSceneScale);
    const int cx = static_cast<int>(ctx.car->second * kSceneScale);
    const int hh = static_cast<int>(std::lround((4.0 + 6.0 * car_progress) * scale)) + 1;
    const int hw = static_cast<int>(std::lround((6.0 + 10.0 * car_progress) * scale)) + 1;
    fill_rect(s, cy - hh, cy + hh, cx - hw, cx + hw, {0.85, 0.10, 0.10});
  }
  for (float& v : s.data) v = quantize_pixel(v);
  return s;
}

std::mt19937_64 session_rng(std::uint64_t seed, int session_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(session_index), 0x5157u};
  return std::mt19937_64(seq);
}

}  // namespace

GeneratedSession generate_session_with_context(const SynthScenarioConfig& cfg, int session_index) {
  cfg.validate();
  if (session_index < 0) throw InvalidArgument("session_index must be >= 0");
  std::mt19937_64 rng = session_rng(cfg.seed, session_index);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  GeneratedSession out;
  SessionRecord& session = out.session;
  char id[64];
  std::snprintf(id, sizeof id, "synth-%llu-%04d", static_cast<unsigned long long>(cfg.seed), session_index);
  session.session_id = id;
  session.fps = cfg.fps;
  session.mode = cfg.mode;
  session.ego_positions.emplace();

  const double step = cfg.speed / cfg.fps;
  const double start = unit(rng) * cfg.intersection_spacing;
  CellOffset session_shift = cfg.webcam_shift;
  if (cfg.webcam_shift_jitter > 0) {
    std::uniform_int_distribution<int> j(-cfg.webcam_shift_jitter, cfg.webcam_shift_jitter);
    session_shift.row += j(rng);
    session_shift.col += j(rng);
  }

  long long intention_for = -1;
  Intention intention = Intention::forward;
  int segment = -1;
  Distraction distraction = Distraction::attentive;
  CarTrack car;

  for (int t = 0; t < cfg.frames_per_session; ++t) {
    const double s = start + step * t;
    const long long nearest = std::llround(s / cfg.intersection_spacing);
    const long long next = static_cast<long long>(std::ceil(s / cfg.intersection_spacing));
    const double dist = std::abs(s - nearest * cfg.intersection_spacing);
    const double ahead = next * cfg.intersection_spacing - s;

    DriverState state;
    if (cfg.condition_type == ConditionType::intention) {
      if (next != intention_for) {
        intention_for = next;
        intention = static_cast<Intention>(std::uniform_int_distribution<int>(0, 2)(rng));
      }
      const bool announced = ahead <= cfg.intention_radius;
      state = DriverState::of(announced ? intention : Intention::forward);
    } else {
      if (t / cfg.segment_frames != segment) {
        segment = t / cfg.segment_frames;
        distraction = unit(rng) < 0.5 ? Distraction::distracted : Distraction::attentive;
      }
      state = DriverState::of(distraction);
    }

    if (!car.active() && unit(rng) < cfg.car_rate) {
      car.age = 0;
      car.duration = std::uniform_int_distribution<int>(6, 10)(rng);
    }
    FrameContext ctx;
    ctx.dist_to_intersection = dist;
    double progress = 0.0;
    if (car.active()) {
      progress = car.progress();
      ctx.car = std::make_pair(cfg.map_height * (0.47 + 0.17 * progress), cfg.map_width * (0.46 - 0.24 * progress));
      ++car.age;
    }

    FrameSample f;
    if (cfg.with_scenes) f.frame = render_scene(cfg, s, ctx, ahead, progress);
    f.timestamp = t / cfg.fps;
    f.state = state;
    f.gt_map = gt_map_for(cfg, ctx, state);
    if (cfg.with_webcam) f.webcam_map = degrade_to_webcam(f.gt_map, session_shift, cfg.webcam_dispersion, rng);
    f.dist_to_intersection = dist;
    f.mode = cfg.mode;
    session.frames.push_back(std::move(f));
    session.ego_positions->push_back({s, 0.0});
    out.contexts.push_back(ctx);
  }
  return out;
}

SessionRecord generate_session(const SynthScenarioConfig& cfg, int session_index) {
  return generate_session_with_context(cfg, session_index).session;
}

std::vector<SessionRecord> generate_sessions(const SynthScenarioConfig& cfg) {
  std::vector<SessionRecord> out;
  out.reserve(static_cast<std::size_t>(cfg.n_sessions));
  for (int i = 0; i < cfg.n_sessions; ++i) out.push_back(generate_session(cfg, i));
  return out;
}

std::vector<AttentionMap> StructurePredictor::predict(std::span<const FrameSample> frames,
                                                      std::span<const DriverState> states) const {
  if (states.size() != frames.size()) throw ShapeMismatch("one driver state per frame is required");
  std::vector<AttentionMap> out;
  out.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    FrameContext ctx;
    ctx.dist_to_intersection = frames[t].dist_to_intersection;
    out.push_back(gt_map_for(cfg_, ctx, states[t]));
  }
  return out;
}

}  // namespace drivatt::synth

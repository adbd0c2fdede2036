#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "drivatt/analysis.hpp"
#include "drivatt/errors.hpp"
#include "drivatt/metrics.hpp"
#include "drivatt/synth.hpp"

using namespace drivatt;
using namespace drivatt::analysis;
namespace fs = std::filesystem;

namespace {

synth::SynthScenarioConfig distraction_cfg(int frames, int sessions) {
  auto cfg = synth::SynthScenarioConfig::defaults(DriveMode::autopilot, ConditionType::distraction);
  cfg.map_height = 8;
  cfg.map_width = 16;
  cfg.frames_per_session = frames;
  cfg.n_sessions = sessions;
  cfg.with_webcam = false;
  return cfg;
}

// Predicts the same map whatever the state.
class StateBlind : public models::AttentionPredictor {
 public:
  ConditionType condition_type() const override { return ConditionType::distraction; }
  std::vector<AttentionMap> predict(std::span<const FrameSample> frames, std::span<const DriverState>) const override {
    std::vector<AttentionMap> out;
    for (const auto& f : frames) out.push_back(f.gt_map);
    return out;
  }
};

}  // namespace

TEST_SUITE("analysis") {
  TEST_CASE("distracted aggregate has lower entropy than attentive") {
    const auto sessions = synth::generate_sessions(distraction_cfg(240, 4));
    const auto maps = condition_heatmaps(sessions, ConditionType::distraction);
    REQUIRE(maps.size() == 2);
    CHECK(metrics::entropy(maps.at("distracted").aggregate) < metrics::entropy(maps.at("attentive").aggregate));
    for (const auto& [label, h] : maps)
      for (double v : h.heatmap.cells()) CHECK(v <= 0.05);
  }

  TEST_CASE("single-condition input gives one heatmap") {
    auto sessions = synth::generate_sessions(distraction_cfg(40, 1));
    for (auto& f : sessions[0].frames) f.state = DriverState::of(Distraction::attentive);
    CHECK(condition_heatmaps(sessions, ConditionType::distraction).size() == 1);
  }

  TEST_CASE("huge stride samples at most one frame per session") {
    const auto sessions = synth::generate_sessions(distraction_cfg(40, 3));
    HeatmapConfig cfg;
    cfg.stride = 1e6;
    std::size_t total = 0;
    for (const auto& [label, h] : condition_heatmaps(sessions, ConditionType::distraction, cfg)) total += h.frames;
    CHECK(total == 3);
  }

  TEST_CASE("stride sampling is location uniform") {
    const auto sessions = synth::generate_sessions(distraction_cfg(120, 1));
    std::size_t total = 0;
    for (const auto& [label, h] : condition_heatmaps(sessions, ConditionType::distraction)) total += h.frames;
    const auto& ego = *sessions[0].ego_positions;
    const double travelled = ego.back().x - ego.front().x;
    CHECK(std::abs(static_cast<double>(total) - travelled / 10.0) <= 2.0);
  }

  TEST_CASE("heatmap errors") {
    auto sessions = synth::generate_sessions(distraction_cfg(10, 1));
    CHECK_THROWS_AS(condition_heatmaps(sessions, ConditionType::intention), InvalidArgument);
    sessions[0].ego_positions.reset();
    CHECK_THROWS_AS(condition_heatmaps(sessions, ConditionType::distraction), InvalidArgument);
  }

  TEST_CASE("state-blind predictor has zero risk everywhere") {
    const auto sessions = synth::generate_sessions(distraction_cfg(60, 2));
    const auto pts = risk_map(StateBlind(), sessions);
    CHECK_FALSE(pts.empty());
    for (const auto& p : pts) {
      CHECK(p.risk == 0.0);
      CHECK(p.raw_mean == 0.0);
    }
  }

  TEST_CASE("risk concentrates where the divergence is") {
    auto cfg = distraction_cfg(240, 2);
    cfg.tunnel_scope = synth::TunnelScope::near_intersections;
    const auto sessions = synth::generate_sessions(cfg);
    const auto pts = risk_map(synth::StructurePredictor(cfg), sessions);
    double near = 0, mid = 0;
    int nn = 0, nm = 0;
    for (const auto& p : pts) {
      CHECK(p.risk >= 0.0);
      const double d = std::abs(p.x - std::round(p.x / cfg.intersection_spacing) * cfg.intersection_spacing);
      if (d <= 20) near += p.risk, ++nn;
      if (d >= 45) mid += p.risk, ++nm;
    }
    REQUIRE(nn > 0);
    REQUIRE(nm > 0);
    CHECK(near / nn > mid / nm);
  }

  TEST_CASE("risk map output is sorted and deterministic") {
    auto cfg = distraction_cfg(60, 2);
    const auto sessions = synth::generate_sessions(cfg);
    const auto a = risk_map(synth::StructurePredictor(cfg), sessions);
    const auto b = risk_map(synth::StructurePredictor(cfg), sessions);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].risk == b[i].risk);
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(std::make_pair(a[i - 1].x, a[i - 1].y) < std::make_pair(a[i].x, a[i].y));
  }

  TEST_CASE("risk map preconditions") {
    auto sessions = synth::generate_sessions(distraction_cfg(10, 1));
    CHECK_THROWS_AS(risk_map(models::UniformPredictor(ConditionType::intention), sessions), InvalidArgument);
    sessions[0].ego_positions.reset();
    CHECK_THROWS_AS(risk_map(StateBlind(), sessions), InvalidArgument);
  }

  TEST_CASE("median filter of side 1 is the identity and is idempotent") {
    std::mt19937_64 rng(1);
    std::vector<RiskPoint> cells;
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 3; ++j) {
        const double v = std::uniform_real_distribution<double>(0, 1)(rng);
        cells.push_back({i * 5.0 + 2.5, j * 5.0 + 2.5, v, v, 1});
      }
    const auto once = median_filter(cells, 1, 5.0);
    for (std::size_t i = 0; i < cells.size(); ++i) CHECK(once[i].risk == cells[i].raw_mean);
    const auto twice = median_filter(once, 1, 5.0);
    for (std::size_t i = 0; i < cells.size(); ++i) CHECK(twice[i].risk == once[i].risk);
  }

  TEST_CASE("median filter removes an isolated spike") {
    std::vector<RiskPoint> cells;
    for (int i = 0; i < 5; ++i) cells.push_back({i * 5.0 + 2.5, 2.5, 0, i == 2 ? 9.0 : 1.0, 1});
    const auto f = median_filter(cells, 3, 5.0);
    CHECK(f[2].risk == 1.0);
    CHECK_THROWS_AS(median_filter(cells, 2, 5.0), InvalidArgument);
  }

  TEST_CASE("automatic downsampling") {
    CHECK(auto_downsample_factor(32, 64) == 4);
    CHECK(auto_downsample_factor(8, 16) == 1);
    CHECK(auto_downsample_factor(16, 32) == 2);
  }

  TEST_CASE("risk table round trip and image") {
    const fs::path dir = fs::temp_directory_path() / ("drivatt_an_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
    const std::vector<RiskPoint> pts{{2.5, 2.5, 0.25, 0.3, 2}, {7.5, 2.5, 1.5, 1.5, 1}};
    write_risk_table(dir / "r.csv", pts, {{"config_hash", "abc"}});
    std::ifstream in(dir / "r.csv");
    std::string first;
    std::getline(in, first);
    CHECK(first == "# config_hash=abc");
    const auto back = read_risk_table(dir / "r.csv");
    REQUIRE(back.size() == 2);
    CHECK(back[1].x == 7.5);
    CHECK(back[1].risk == 1.5);
    render_risk_ppm(dir / "r.ppm", pts, 64, 32);
    std::ifstream img(dir / "r.ppm", std::ios::binary);
    std::string magic;
    img >> magic;
    CHECK(magic == "P6");
    CHECK(fs::file_size(dir / "r.ppm") > 64 * 32 * 3);
    fs::remove_all(dir);
  }
}

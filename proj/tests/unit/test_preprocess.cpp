#include <doctest.h>

#include <cmath>
#include <numeric>

#include "drivatt/errors.hpp"
#include "drivatt/metrics.hpp"
#include "drivatt/preprocess.hpp"

using namespace drivatt;
using namespace drivatt::preprocess;

namespace {

GazeRecord rec(double t, double x, double y, EyeEvent e = EyeEvent::fixation, bool valid = true) {
  GazeRecord g;
  g.timestamp = t;
  g.x = x;
  g.y = y;
  g.event = e;
  g.valid = valid;
  return g;
}

}  // namespace

TEST_SUITE("preprocess") {
  TEST_CASE("filter keeps fixations in order") {
    const std::vector<GazeRecord> in{rec(0, 0.1, 0.1), rec(1, 0.2, 0.2, EyeEvent::blink),
                                     rec(2, 0.3, 0.3, EyeEvent::saccade), rec(3, 0.4, 0.4)};
    const auto out = filter_events(in);
    REQUIRE(out.size() == 2);
    CHECK(out[0].timestamp == 0);
    CHECK(out[1].timestamp == 3);
  }

  TEST_CASE("filter drops blinks, invalid samples and empty input") {
    const std::vector<GazeRecord> blinks{rec(0, 0, 0, EyeEvent::blink), rec(1, 0, 0, EyeEvent::blink)};
    CHECK(filter_events(blinks).empty());
    CHECK(filter_events({}).empty());
    const std::vector<GazeRecord> invalid{rec(0, 0.5, 0.5, EyeEvent::fixation, false)};
    CHECK(filter_events(invalid).empty());
  }

  TEST_CASE("aggregation window is inclusive") {
    const std::vector<GazeRecord> in{rec(0.0, 0.1, 0.2), rec(0.005, 0.3, 0.4), rec(0.02, 0.5, 0.6)};
    const auto pts = aggregate_fixations(in, 0.0, 0.01);
    REQUIRE(pts.size() == 2);
    CHECK(pts[0] == GazePoint{0.1, 0.2});
    CHECK(pts[1] == GazePoint{0.3, 0.4});
    CHECK(aggregate_fixations(in, 0.005, 0.0).size() == 1);
    CHECK(aggregate_fixations(in, 5.0, 0.01).empty());
  }

  TEST_CASE("gaussian kernel is normalized, symmetric and truncated at 4 sigma") {
    const auto k = gaussian_kernel(1.5);
    CHECK(k.size() == 2 * 6 + 1);
    CHECK(std::accumulate(k.begin(), k.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < k.size(); ++i) CHECK(k[i] == doctest::Approx(k[k.size() - 1 - i]));
  }

  TEST_CASE("single centre point peaks at (16, 32) symmetrically") {
    const std::vector<GazePoint> pts{{0.5, 0.5}};
    const AttentionMap m = rasterize_and_smooth(pts, {});
    CHECK(validate_map(m));
    int br = 0, bc = 0;
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 64; ++c)
        if (m(r, c) > m(br, bc)) br = r, bc = c;
    CHECK(br == 16);
    CHECK(bc == 32);
    for (int d = 1; d <= 6; ++d) {
      CHECK(m(16 + d, 32) == doctest::Approx(m(16 - d, 32)).epsilon(1e-12));
      CHECK(m(16, 32 + d) == doctest::Approx(m(16, 32 - d)).epsilon(1e-12));
    }
  }

  TEST_CASE("no points gives the uniform map") {
    CHECK(rasterize_and_smooth({}, {}) == AttentionMap::uniform(32, 64));
  }

  TEST_CASE("two mirrored points give equal mass per mode") {
    const std::vector<GazePoint> pts{{0.1, 0.1}, {0.9, 0.9}};
    const AttentionMap m = rasterize_and_smooth(pts, {});
    double top = 0, bottom = 0;
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 64; ++c) (r < 16 ? top : bottom) += m(r, c);
    CHECK(std::abs(top - bottom) <= 1e-6);
    CHECK(top == doctest::Approx(0.5));
  }

  TEST_CASE("points on the far edge stay inside the grid") {
    const std::vector<GazePoint> pts{{1.0, 1.0}};
    const AttentionMap m = rasterize_and_smooth(pts, {});
    CHECK(validate_map(m));
    CHECK(m(31, 63) > m(0, 0));
  }

  TEST_CASE("blur drops mass at the border") {
    Grid g(8, 8, 0.0);
    g(0, 0) = 1.0;
    const Grid b = gaussian_blur(g, 1.0);
    CHECK(b.sum() < 1.0);
    CHECK(b(0, 0) > b(1, 1));
  }

  TEST_CASE("frame pipeline filters then aggregates") {
    const std::vector<GazeRecord> in{rec(1.0, 0.5, 0.5), rec(1.0, 0.1, 0.1, EyeEvent::blink),
                                     rec(3.0, 0.9, 0.9)};
    PreprocessConfig cfg;
    const AttentionMap m = frame_attention(in, 1.0, cfg);
    const std::vector<GazePoint> only{{0.5, 0.5}};
    CHECK(m == rasterize_and_smooth(only, cfg));
  }

  TEST_CASE("config validation") {
    PreprocessConfig cfg;
    cfg.gaussian_sigma = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.target_height = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  }

  TEST_CASE("cumulative heatmap of identical maps") {
    const AttentionMap m = rasterize_and_smooth(std::vector<GazePoint>{{0.3, 0.6}}, {});
    const std::vector<AttentionMap> maps(5, m);
    const Grid h = cumulative_heatmap(maps, 0.05);
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 64; ++c) CHECK(h(r, c) == doctest::Approx(std::min(m(r, c), 0.05)).epsilon(1e-12));
  }

  TEST_CASE("clip 1 leaves a delta unchanged") {
    const AttentionMap d = AttentionMap::delta(32, 64, {3, 4});
    const std::vector<AttentionMap> maps{d};
    CHECK(cumulative_heatmap(maps, 1.0) == d.grid());
  }

  TEST_CASE("two disjoint deltas clip to 0.05") {
    const std::vector<AttentionMap> maps{AttentionMap::delta(32, 64, {3, 4}), AttentionMap::delta(32, 64, {20, 50})};
    const Grid h = cumulative_heatmap(maps, 0.05);
    CHECK(h(3, 4) == 0.05);
    CHECK(h(20, 50) == 0.05);
    CHECK(h.sum() == doctest::Approx(0.1));
    const AttentionMap agg = mean_map(maps);
    CHECK(agg(3, 4) == doctest::Approx(0.5));
  }

  TEST_CASE("cumulative heatmap needs input") {
    CHECK_THROWS_AS(cumulative_heatmap({}, 0.05), InvalidArgument);
  }
}

#include <doctest.h>

#include <cmath>
#include <random>

#include "drivatt/errors.hpp"
#include "drivatt/metrics.hpp"
#include "drivatt/models.hpp"
#include "oracles.hpp"

using namespace drivatt;
using namespace drivatt::metrics;

TEST_SUITE("metrics") {
  TEST_CASE("cc self correlation and oracle agreement") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 10; ++i) {
      const AttentionMap p = testing::random_map(8, 16, rng);
      const AttentionMap q = testing::random_map(8, 16, rng);
      CHECK(cc(p, p) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(cc(p, q) == doctest::Approx(testing::naive_pearson(p.values(), q.values())).epsilon(1e-12));
    }
  }

  TEST_CASE("cc is affine invariant on raw grids") {
    std::mt19937_64 rng(2);
    const AttentionMap p = testing::random_map(4, 8, rng);
    Grid q = p.grid();
    for (double& v : q.cells()) v = 3.5 * v + 2.0;
    CHECK(cc(p.grid(), q) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("cc of neighbouring deltas on 1x4") {
    const AttentionMap p = AttentionMap::delta(1, 4, {0, 0});
    const AttentionMap q = AttentionMap::delta(1, 4, {0, 1});
    CHECK(cc(p, q) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  }

  TEST_CASE("cc is undefined on constant maps and checks shapes") {
    std::mt19937_64 rng(3);
    CHECK_THROWS_AS(cc(AttentionMap::uniform(4, 4), testing::random_map(4, 4, rng)), UndefinedMetric);
    CHECK_THROWS_AS(cc(testing::random_map(4, 4, rng), testing::random_map(2, 8, rng)), ShapeMismatch);
  }

  TEST_CASE("kl closed forms") {
    std::mt19937_64 rng(4);
    const AttentionMap p = testing::random_map(32, 64, rng);
    CHECK(kl(p, p) <= 2e-6);
    CHECK(kl(AttentionMap::uniform(32, 64), AttentionMap::delta(32, 64, {5, 5})) ==
          doctest::Approx(std::log(2048.0)).epsilon(1e-3 / std::log(2048.0)));
    const AttentionMap gt(1, 2, {1.0, 0.0});
    const AttentionMap pred(1, 2, {0.5, 0.5});
    CHECK(std::abs(kl(pred, gt) - std::log(2.0)) < 1e-4);
  }

  TEST_CASE("kl penalizes missing prediction mass more than spurious mass") {
    const AttentionMap gt(1, 2, {0.9, 0.1});
    const AttentionMap miss(1, 2, {0.999, 0.001});
    const AttentionMap spread(1, 2, {0.5, 0.5});
    CHECK(kl(miss, gt) > kl(gt, miss));
    CHECK(kl(spread, gt) >= 0.0);
  }

  TEST_CASE("entropy closed forms") {
    CHECK(entropy(AttentionMap::delta(32, 64, {1, 2})) == 0.0);
    CHECK(std::abs(entropy(AttentionMap::uniform(32, 64)) - std::log(2048.0)) <= 1e-9);
    CHECK(entropy(AttentionMap(1, 2, {0.5, 0.5})) == doctest::Approx(std::log(2.0)));
  }

  TEST_CASE("emd small cases") {
    std::mt19937_64 rng(5);
    const AttentionMap p = testing::random_map(4, 4, rng);
    CHECK(emd(p, p) == 0.0);
    CHECK(emd(AttentionMap(1, 2, {1, 0}), AttentionMap(1, 2, {0, 1})) == doctest::Approx(1.0).epsilon(1e-12));
    const AttentionMap a(1, 3, {0.5, 0.5, 0});
    const AttentionMap b(1, 3, {0, 0.5, 0.5});
    CHECK(emd(a, b) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(testing::emd_lp(a, b) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("emd uses Euclidean ground distance") {
    CHECK(emd(AttentionMap::delta(4, 4, {0, 0}), AttentionMap::delta(4, 4, {3, 4 - 1})) ==
          doctest::Approx(std::sqrt(18.0)).epsilon(1e-12));
  }

  TEST_CASE("emd agrees with the LP oracle on non-square grids") {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 5; ++i) {
      const AttentionMap p = testing::random_map(2, 5, rng);
      const AttentionMap q = testing::random_map(2, 5, rng);
      CHECK(std::abs(emd(p, q) - testing::emd_lp(p, q)) <= 1e-9);
    }
  }

  TEST_CASE("emd limits") {
    CHECK_THROWS_AS(emd(AttentionMap::uniform(32, 64), AttentionMap::uniform(32, 64)), InvalidArgument);
    CHECK_THROWS_AS(emd(AttentionMap::uniform(4, 4), AttentionMap::uniform(2, 8)), ShapeMismatch);
  }

  TEST_CASE("downsample") {
    std::mt19937_64 rng(7);
    const AttentionMap p = testing::random_map(32, 64, rng);
    CHECK(downsample_map(p, 1) == p);
    const AttentionMap u = downsample_map(AttentionMap::uniform(32, 64), 4);
    CHECK(u.height() == 8);
    CHECK(u.width() == 16);
    for (double v : u.values()) CHECK(v == doctest::Approx(1.0 / 128));
    const AttentionMap d = downsample_map(AttentionMap::delta(32, 64, {13, 42}), 4);
    CHECK(d == AttentionMap::delta(8, 16, {3, 10}));
    CHECK_THROWS_AS(downsample_map(p, 5), InvalidArgument);
  }

  TEST_CASE("cross-entropy against a smoothed target approaches the entropy") {
    std::mt19937_64 rng(8);
    const AttentionMap gt = testing::random_map(32, 64, rng);
    Grid smoothed = gt.grid();
    for (double& v : smoothed.cells()) v += 1e-9;
    const AttentionMap pred = AttentionMap::normalized(smoothed);
    CHECK(models::attention_loss(pred, gt) - entropy(gt) <= 1e-3);
    CHECK(models::attention_loss(AttentionMap::uniform(32, 64), AttentionMap::delta(32, 64, {0, 0})) ==
          doctest::Approx(std::log(2048.0)));
    CHECK(models::attention_loss(AttentionMap::uniform(32, 64), AttentionMap::uniform(32, 64)) ==
          doctest::Approx(std::log(2048.0)));
  }

  TEST_CASE("accumulator averages and tolerates undefined cc") {
    MetricAccumulator acc;
    CHECK_THROWS_AS(acc.report(), InvalidArgument);
    const AttentionMap gt = AttentionMap::delta(32, 64, {1, 1});
    acc.add(AttentionMap::uniform(32, 64), gt);
    acc.add(AttentionMap::uniform(32, 64), gt);
    const MetricReport r = acc.report();
    CHECK(r.count == 2);
    CHECK(r.cc_count == 0);
    CHECK(std::isnan(r.cc));
    CHECK(r.entropy == doctest::Approx(std::log(2048.0)));
    CHECK(r.kl == doctest::Approx(std::log(2048.0)).epsilon(1e-4));
  }
}

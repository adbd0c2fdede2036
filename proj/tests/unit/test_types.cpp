#include <doctest.h>

#include <cmath>

#include "drivatt/errors.hpp"
#include "drivatt/types.hpp"

using namespace drivatt;

TEST_SUITE("core") {
  TEST_CASE("uniform map is a valid distribution") {
    const AttentionMap u = AttentionMap::uniform(32, 64);
    CHECK(validate_map(u));
    CHECK(u(0, 0) == doctest::Approx(1.0 / 2048));
  }

  TEST_CASE("negative cell is rejected") {
    std::vector<double> v(2048, 1.1 / 2047);
    v[5] = -0.1;
    CHECK_FALSE(validate_map(AttentionMap(32, 64, v)));
  }

  TEST_CASE("mass 1.01 is rejected") {
    std::vector<double> v(2048, 1.01 / 2048);
    CHECK_FALSE(validate_map(AttentionMap(32, 64, v)));
  }

  TEST_CASE("non-finite and empty maps are rejected") {
    std::vector<double> v(4, 0.25);
    v[1] = std::nan("");
    CHECK_FALSE(validate_map(AttentionMap(2, 2, v)));
    CHECK_FALSE(validate_map(AttentionMap()));
  }

  TEST_CASE("map construction checks dimensions") {
    CHECK_THROWS_AS(AttentionMap(2, 2, std::vector<double>(3, 0.3)), InvalidArgument);
  }

  TEST_CASE("normalized divides by mass and rejects empty grids") {
    Grid g(1, 4, 0.0);
    g(0, 1) = 3.0;
    g(0, 2) = 1.0;
    const AttentionMap m = AttentionMap::normalized(g);
    CHECK(m(0, 1) == doctest::Approx(0.75));
    CHECK_THROWS_AS(AttentionMap::normalized(Grid(2, 2, 0.0)), InvalidArgument);
    CHECK(AttentionMap::normalized_or_uniform(Grid(2, 2, 0.0)) == AttentionMap::uniform(2, 2));
  }

  TEST_CASE("one-hot encodings") {
    CHECK(one_hot(DriverState::of(Intention::left)) == std::vector<double>{1, 0, 0});
    CHECK(one_hot(DriverState::of(Distraction::attentive)) == std::vector<double>{0, 1});
    CHECK_THROWS_AS(one_hot(DriverState{}), InvalidArgument);
    const DriverState mixed{ConditionType::intention, Intention::left, Distraction::attentive};
    CHECK_FALSE(mixed.well_formed());
    CHECK_THROWS_AS(one_hot(mixed), InvalidArgument);
  }

  TEST_CASE("state indices follow the encoding order") {
    CHECK(state_index(DriverState::of(Intention::left)) == 0);
    CHECK(state_index(DriverState::of(Intention::forward)) == 2);
    CHECK(state_index(DriverState::of(Distraction::distracted)) == 0);
    for (ConditionType t : {ConditionType::intention, ConditionType::distraction})
      for (int i = 0; i < num_states(t); ++i) CHECK(state_index(state_from_index(t, i)) == i);
    CHECK(all_states(ConditionType::intention).size() == 3);
  }

  TEST_CASE("labels and parsing round-trip") {
    CHECK(state_label(DriverState::of(Distraction::distracted)) == "distracted");
    CHECK(parse_condition_type("distraction") == ConditionType::distraction);
    CHECK(parse_drive_mode("autopilot") == DriveMode::autopilot);
    CHECK_THROWS_AS(parse_condition_type("sleepy"), InvalidArgument);
  }

  TEST_CASE("pixel quantization is byte exact") {
    for (int b = 0; b < 256; ++b) CHECK(pixel_to_byte(byte_to_pixel(static_cast<std::uint8_t>(b))) == b);
    CHECK(byte_to_pixel(pixel_to_byte(quantize_pixel(0.3))) == quantize_pixel(0.3));
  }

  TEST_CASE("session invariants") {
    SessionRecord s;
    s.session_id = "s";
    FrameSample f;
    f.frame = SceneTensor(16, 32);
    f.gt_map = AttentionMap::uniform(2, 4);
    f.state = DriverState::of(Intention::left);
    f.timestamp = 0.0;
    s.frames.push_back(f);
    f.timestamp = 0.25;
    s.frames.push_back(f);
    CHECK(session_problem(s).empty());
    s.frames[1].timestamp = 0.0;
    CHECK_FALSE(session_problem(s).empty());
  }
}

#include "doctest.h"
#include "uwa/environment.hpp"

#include <cmath>

using namespace uwa;

TEST_CASE("built-in environment is valid and matches the documented profile") {
    Environment env = baseline_environment();
    CHECK_NOTHROW(env.validate());
    CHECK(env.water_depth_m == doctest::Approx(216.5));
    CHECK(env.termination_depth_m == doctest::Approx(416.5));
    CHECK(env.water_speed_at(0.0) == doctest::Approx(1521.95));
    CHECK(env.water_speed_at(216.5) == doctest::Approx(1488.70));
    // Downward refracting: speed decreases with depth.
    CHECK(env.water_speed_at(0.0) > env.water_speed_at(100.0));
    CHECK(env.water_speed_at(100.0) > env.water_speed_at(216.5));
    REQUIRE(env.sediment.size() == 1);
    CHECK(env.sediment[0].thickness_m == doctest::Approx(200.0));
    CHECK(env.sediment[0].density_g_cm3 == doctest::Approx(1.76));
    CHECK(env.sediment[0].c_top_m_s == doctest::Approx(1572.37));
    CHECK(env.sediment[0].c_bottom_m_s == doctest::Approx(1593.02));
    CHECK(env.sediment[0].attenuation_db_per_km_hz == doctest::Approx(0.2));
}

TEST_CASE("water_speed_at interpolates linearly and clamps") {
    Environment env;
    env.water_depth_m = 100.0;
    env.termination_depth_m = 150.0;
    env.ssp_depths_m = {0.0, 100.0};
    env.ssp_speeds_m_s = {1500.0, 1520.0};
    env.sediment = {{50.0, 1.7, 1600.0, 1600.0, 0.5}};
    env.validate();
    CHECK(env.water_speed_at(50.0) == doctest::Approx(1510.0));
    CHECK(env.water_speed_at(-5.0) == doctest::Approx(1500.0));
    CHECK(env.water_speed_at(200.0) == doctest::Approx(1520.0));
}

TEST_CASE("environment invariants are enforced") {
    Environment env = baseline_environment();
    Environment bad = env;
    bad.water_depth_m = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = env;
    bad.termination_depth_m = bad.water_depth_m;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = env;
    bad.ssp_depths_m[2] = bad.ssp_depths_m[1];  // not strictly increasing
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = env;
    bad.ssp_speeds_m_s[0] = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = env;
    bad.sediment[0].attenuation_db_per_km_hz = -0.1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("hash is stable and content-sensitive") {
    Environment a = baseline_environment();
    Environment b = baseline_environment();
    CHECK(a.hash() == b.hash());
    b.ssp_speeds_m_s[0] += 1e-9;
    CHECK(a.hash() != b.hash());
}

TEST_CASE("array geometry: default VLA and invariants") {
    ArrayGeometry arr = baseline_array();
    REQUIRE(arr.size() == 21);
    CHECK(arr.hydrophone_depths_m.front() == doctest::Approx(94.125));
    CHECK(arr.hydrophone_depths_m.back() == doctest::Approx(212.25));
    double spacing = (212.25 - 94.125) / 20.0;
    for (std::size_t i = 1; i < arr.size(); ++i)
        CHECK(arr.hydrophone_depths_m[i] - arr.hydrophone_depths_m[i - 1] ==
              doctest::Approx(spacing));
    CHECK_NOTHROW(arr.validate(216.5));
    CHECK_THROWS_AS(arr.validate(200.0), std::invalid_argument);

    ArrayGeometry empty;
    CHECK_THROWS_AS(empty.validate(216.5), std::invalid_argument);
}

TEST_CASE("environment text format round trip") {
    Environment env = baseline_environment();
    std::string text = format_environment(env);
    Environment back = parse_environment(text);
    CHECK(back.hash() == env.hash());
    CHECK(back.water_depth_m == doctest::Approx(env.water_depth_m));
    CHECK(back.sediment.size() == env.sediment.size());

    CHECK_THROWS_AS(parse_environment("nonsense line"), std::invalid_argument);
}

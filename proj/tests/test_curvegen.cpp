#include <doctest.h>

#include <cmath>

#include "steerlab/curvegen.hpp"
#include "steerlab/errors.hpp"
#include "support.hpp"

using namespace steerlab;
using namespace steerlab::curvegen;

TEST_CASE("solved amplitude reaches the target curvature") {
  for (double target : {10.0, 16.0, 22.0}) {
    SinusoidSpec spec{{1, 3}, 2.0, 0.0};
    spec.amplitude = solve_amplitude(spec, target);
    const auto c = realize(spec);
    CHECK(geometry::total_curvature(c) == doctest::Approx(target).epsilon(1e-4));
    const auto oracle = testing::sinusoid_oracle(spec, 200'000);
    CHECK(oracle.total_curvature == doctest::Approx(target).epsilon(1e-4));
  }
}

TEST_CASE("total curvature grows with amplitude") {
  double prev = -1.0;
  for (double a = 0.0; a <= 400.0; a += 25.0) {
    const SinusoidSpec spec{{1, 2, 4}, 0.7, a};
    const double k = geometry::total_curvature(realize(spec, 2048));
    CHECK(k > prev);
    prev = k;
  }
}

TEST_CASE("saturated curvature is reported as unreachable") {
  const SinusoidSpec spec{{1}, 0.5, 0.0};
  SolveOptions opts;
  opts.n_samples = 2048;
  CHECK_THROWS_AS(solve_amplitude(spec, 40.0, opts), UnreachableError);
  CHECK_THROWS_AS(solve_amplitude(spec, -1.0, opts), ValidationError);
}

TEST_CASE("sinusoid specs are validated") {
  CHECK_THROWS_AS(SinusoidSpec({}, 1.0, 1.0).validate(), ValidationError);
  CHECK_THROWS_AS(SinusoidSpec({0}, 1.0, 1.0).validate(), ValidationError);
  CHECK_THROWS_AS(SinusoidSpec({1}, 0.0, 1.0).validate(), ValidationError);
  CHECK_THROWS_AS(SinusoidSpec({1}, 1.0, -1.0).validate(), ValidationError);
  CHECK_NOTHROW(SinusoidSpec({1, 2}, 1.0, 0.0).validate());
}

TEST_CASE("trial ids round-trip") {
  CHECK(trial_id(2, 1) == "L2-K1");
  CHECK(parse_trial_id("L0-K2") == std::pair{0, 2});
  for (const char* bad : {"", "L1", "L1-K", "L-1-K0", "L1-K2x", "l1-k2", "L01-K2"}) {
    CHECK_THROWS_AS(parse_trial_id(bad), ParseError);
  }
}

TEST_CASE("multiplier combinations are strictly increasing subsets") {
  const ParamGrid g = ParamGrid::combinations(3, 5, {1.0, 2.0});
  CHECK(g.multiplier_sets.size() == 25);
  CHECK(g.size() == 50);
  for (const auto& set : g.multiplier_sets) {
    for (std::size_t i = 1; i < set.size(); ++i) CHECK(set[i] > set[i - 1]);
  }
  CHECK(ParamGrid::default_grid().size() == 25 * 141);
}

TEST_CASE("small grid search fills the shortest length level") {
  GridSearchConfig cfg;
  cfg.grid.multiplier_sets = {{1, 3}};
  cfg.grid.periods = {1.25, 2.0, 2.75};
  const GridSearchResult r = grid_search(cfg);
  for (int k = 0; k < 3; ++k) CHECK(r.cell_counts.contains({0, k}));
  CHECK(r.empty_cells.size() == 6);
  for (const TrialSpec& t : r.candidates) {
    CHECK(std::abs(t.total_curvature - cfg.k_targets[t.level_K]) <= cfg.k_tolerance);
    CHECK(cfg.bands[t.level_L].contains(t.length));
    CHECK(t.min_radius >= cfg.min_radius);
  }
  CHECK_THROWS_AS(assemble_trialset(r.candidates), AssemblyError);
  const auto set = assemble_trialset(r.candidates, SelectionPolicy::kMinLengthSpread, 1, 3);
  REQUIRE(set.size() == 3);
  CHECK(set[0].trial_id == "L0-K0");
  CHECK(set[2].trial_id == "L0-K2");
}

TEST_CASE("assembly picks the combination with the least length spread") {
  auto cand = [](int l, int k, double len) {
    TrialSpec t;
    t.level_L = l;
    t.level_K = k;
    t.trial_id = trial_id(l, k);
    t.length = len;
    return t;
  };
  const std::vector<TrialSpec> c = {cand(0, 0, 100), cand(0, 0, 110), cand(0, 1, 111), cand(0, 1, 90),
                                    cand(0, 2, 109)};
  const auto set = assemble_trialset(c, SelectionPolicy::kMinLengthSpread, 1, 3);
  CHECK(set[0].length == 110);
  CHECK(set[1].length == 111);
  CHECK(set[2].length == 109);
}

TEST_CASE("validate_trial checks curvature and length") {
  TrialSpec t;
  t.trial_id = "L0-K0";
  t.sinusoid = {{1}, 1.0, 10.0};
  t.total_curvature = 10.005;
  t.length = 1500.0;
  const LengthBand band{1500.0, 5.0};
  CHECK_NOTHROW(validate_trial(t, 10.0, band));
  CHECK_THROWS_AS(validate_trial(t, 10.02, band), ValidationError);
  t.length = 1506.0;
  CHECK_THROWS_AS(validate_trial(t, 10.0, band), ValidationError);
}

TEST_CASE("make_tunnel mirrors on request") {
  TrialSpec t;
  t.sinusoid = {{1, 3}, 2.0, 55.0};
  t.width = 50.0;
  const auto plain = make_tunnel(t, false);
  const auto mirrored = make_tunnel(t, true);
  const auto p = plain.centerline().points();
  const auto q = mirrored.centerline().points();
  CHECK(q[500].y == doctest::Approx(-p[500].y));
  attach_polyline(t, 513);
  CHECK(t.polyline.size() == 513);
  CHECK(make_tunnel(t, true).centerline().points()[64].y == doctest::Approx(-t.polyline[64].y));
}

#include <doctest.h>

#include <cmath>

#include "steerlab/errors.hpp"
#include "steerlab/inference.hpp"
#include "steerlab/random.hpp"
#include "support.hpp"

using namespace steerlab;
using namespace steerlab::inference;

namespace {

void check_against_oracle(const AnovaReport& r, const testing::OracleAnova& o, double tol) {
  const std::pair<const char*, const testing::OracleEffect*> pairs[] = {{"L", &o.a}, {"K", &o.b}, {"LxK", &o.ab}};
  for (const auto& [name, want] : pairs) {
    const AnovaEffect& e = r.effect(name);
    CHECK(e.F == doctest::Approx(want->F).epsilon(tol));
    CHECK(e.gg_epsilon == doctest::Approx(want->epsilon).epsilon(tol));
    CHECK(e.partial_eta_sq == doctest::Approx(want->eta).epsilon(tol));
    CHECK(e.ss_effect == doctest::Approx(want->ss).epsilon(tol));
    CHECK(e.ss_error == doctest::Approx(want->ss_error).epsilon(tol));
  }
}

}  // namespace

TEST_CASE("fixture matches the sums-of-squares oracle") {
  const RmDataset d = testing::anova_fixture();
  const auto oracle = testing::anova_oracle(d);
  check_against_oracle(rm_anova(d), oracle, 1e-9);

  // Frozen oracle output.
  CHECK(oracle.a.F == doctest::Approx(644.1416225).epsilon(1e-9));
  CHECK(oracle.a.epsilon == doctest::Approx(0.5510980911).epsilon(1e-9));
  CHECK(oracle.a.eta == doctest::Approx(0.9892496505).epsilon(1e-9));
  CHECK(oracle.b.F == doctest::Approx(437.2295239).epsilon(1e-9));
  CHECK(oracle.b.epsilon == doctest::Approx(0.7904944806).epsilon(1e-9));
  CHECK(oracle.ab.F == doctest::Approx(18.90256924).epsilon(1e-9));
  CHECK(oracle.ab.epsilon == doctest::Approx(0.6132738632).epsilon(1e-9));
  CHECK(oracle.ab.eta == doctest::Approx(0.7297565374).epsilon(1e-9));
}

TEST_CASE("corrected p-values use epsilon-scaled degrees of freedom") {
  const AnovaReport r = rm_anova(testing::anova_fixture());
  // Reference values from an independent F-distribution implementation.
  CHECK(r.effect("L").p == doctest::Approx(8.372191744e-09).epsilon(1e-6));
  CHECK(r.effect("K").p == doctest::Approx(6.237303168e-11).epsilon(1e-6));
  CHECK(r.effect("LxK").p == doctest::Approx(2.251301956e-05).epsilon(1e-6));
  CHECK(r.effect("LxK").p_uncorrected == doctest::Approx(1.242892761e-07).epsilon(1e-6));
  CHECK(r.effect("L").df_effect == 2);
  CHECK(r.effect("L").df_error == 14);
  CHECK(r.effect("LxK").df_error == 28);
}

TEST_CASE("random datasets match the oracle") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    RmDataset d;
    d.participants = 3 + rng.index(20);
    for (std::size_t i = 0; i < d.participants * 9; ++i) d.values.push_back(rng.normal(10.0, 3.0));
    check_against_oracle(rm_anova(d), testing::anova_oracle(d), 1e-8);
  }
}

TEST_CASE("sums of squares decompose the within-subject variation") {
  const RmDataset d = testing::anova_fixture();
  const AnovaReport r = rm_anova(d);
  double parts = 0.0;
  for (const auto& e : r.effects) parts += e.ss_effect + e.ss_error;
  CHECK(parts == doctest::Approx(r.ss_within).epsilon(1e-10));
}

TEST_CASE("additive data has no interaction") {
  Rng rng(3);
  const RmDataset d = testing::additive_fixture(20, rng);
  const AnovaReport r = rm_anova(d);
  CHECK(r.effect("LxK").F < 1e-6);
  CHECK(r.effect("L").F > 10.0);
}

TEST_CASE("constant data is degenerate with F = 0") {
  RmDataset d;
  d.participants = 5;
  d.values.assign(45, 7.0);
  const AnovaReport r = rm_anova(d);
  for (const auto& e : r.effects) {
    CHECK(e.F == 0.0);
    CHECK(e.degenerate);
    CHECK(e.p == 1.0);
  }
}

TEST_CASE("zero error with a real effect gives an infinite F") {
  RmDataset d;
  d.participants = 4;
  for (std::size_t p = 0; p < 4; ++p)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) d.values.push_back(10.0 * p + 3.0 * a + b);
  const AnovaReport r = rm_anova(d);
  CHECK(std::isinf(r.effect("L").F));
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("results are invariant to participant order and constant shifts") {
  const RmDataset d = testing::anova_fixture();
  const AnovaReport base = rm_anova(d);
  RmDataset shuffled = d;
  for (std::size_t p = 0; p < d.participants; ++p)
    for (std::size_t c = 0; c < 9; ++c) shuffled.values[p * 9 + c] = d.values[(d.participants - 1 - p) * 9 + c];
  RmDataset shifted = d;
  for (std::size_t p = 0; p < d.participants; ++p)
    for (std::size_t c = 0; c < 9; ++c) shifted.values[p * 9 + c] += 100.0 * static_cast<double>(p) + 5.0;
  for (const RmDataset* other : {&shuffled, &shifted}) {
    const AnovaReport r = rm_anova(*other);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(r.effects[i].F == doctest::Approx(base.effects[i].F).epsilon(1e-9));
      CHECK(r.effects[i].gg_epsilon == doctest::Approx(base.effects[i].gg_epsilon).epsilon(1e-9));
    }
  }
}

TEST_CASE("permuting factor levels leaves the tests unchanged") {
  const RmDataset d = testing::anova_fixture();
  RmDataset swapped = d;
  const std::size_t perm[3] = {2, 0, 1};
  for (std::size_t p = 0; p < d.participants; ++p)
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b) swapped.at(p, perm[a], perm[b]) = d.at(p, a, b);
  const AnovaReport r0 = rm_anova(d), r1 = rm_anova(swapped);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r1.effects[i].F == doctest::Approx(r0.effects[i].F).epsilon(1e-9));
    CHECK(r1.effects[i].gg_epsilon == doctest::Approx(r0.effects[i].gg_epsilon).epsilon(1e-9));
  }
}

TEST_CASE("one-way ANOVA matches the two-way main effect") {
  const RmDataset d = testing::anova_fixture();
  std::vector<std::vector<double>> rows(d.participants, std::vector<double>(3, 0.0));
  for (std::size_t p = 0; p < d.participants; ++p)
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b) rows[p][a] += d.at(p, a, b) / 3.0;
  const AnovaReport one = rm_anova_oneway(rows, "L");
  CHECK(one.effects.front().F == doctest::Approx(rm_anova(d).effect("L").F).epsilon(1e-9));
  CHECK_THROWS_AS(rm_anova_oneway({{1, 2, 3}}), InsufficientDataError);
  CHECK_THROWS_AS(rm_anova_oneway({{1, 2, 3}, {1, 2}}), ShapeError);
}

TEST_CASE("epsilon bounds") {
  CHECK(gg_epsilon({1, 0, 0, 1}, 2) == doctest::Approx(1.0));
  CHECK(gg_epsilon({1, 0, 0, 0}, 2) == doctest::Approx(0.5));
  CHECK_THROWS_AS(gg_epsilon({1, 0, 0}, 2), ShapeError);
}

TEST_CASE("dataset shape is validated") {
  RmDataset d;
  d.participants = 2;
  d.values.assign(17, 1.0);
  CHECK_THROWS_AS(rm_anova(d), ShapeError);
  d.participants = 1;
  d.values.assign(9, 1.0);
  CHECK_THROWS_AS(rm_anova(d), InsufficientDataError);
  CHECK_THROWS_AS(rm_anova(testing::anova_fixture()).effect("Q"), ReferenceError);
}

TEST_CASE("power law of practice") {
  std::vector<double> mt;
  for (int n = 0; n < 15; ++n) mt.push_back(20000.0 * std::pow(n + 1.0, -0.1));
  const PowerLawFit f = fit_power_law_of_practice(mt);
  CHECK(f.a == doctest::Approx(20000.0).epsilon(1e-10));
  CHECK(f.b == doctest::Approx(0.1).epsilon(1e-10));
  CHECK(f.n_points == 15);

  // Grid-search oracle on noisy data.
  Rng rng(8);
  std::vector<double> noisy;
  for (int n = 0; n < 15; ++n) noisy.push_back(15000.0 * std::pow(n + 1.0, -0.2) * std::exp(rng.normal(0, 0.05)));
  const PowerLawFit g = fit_power_law_of_practice(noisy);
  auto rss = [&](double ln_a, double b) {
    double s = 0;
    for (int n = 0; n < 15; ++n) {
      const double r = std::log(noisy[n]) - ln_a + b * std::log(n + 1.0);
      s += r * r;
    }
    return s;
  };
  double best = INFINITY, best_b = 0.0;
  for (double b = 0.0; b <= 0.4; b += 0.0005)
    for (double la = std::log(12000.0); la <= std::log(18000.0); la += 0.0005) {
      const double v = rss(la, b);
      if (v < best) {
        best = v;
        best_b = b;
      }
    }
  CHECK(g.rss_log <= best + 1e-12);
  CHECK(g.b == doctest::Approx(best_b).epsilon(0.01));
  CHECK(g.se_b > 0.0);

  CHECK_THROWS_AS(fit_power_law_of_practice({1, 2}), InsufficientDataError);
  CHECK_THROWS_AS(fit_power_law_of_practice({1, 0, 2}), DomainError);
  const PowerLawFit flat = fit_power_law_of_practice({5, 5, 5, 5});
  CHECK(flat.b == doctest::Approx(0.0));
}

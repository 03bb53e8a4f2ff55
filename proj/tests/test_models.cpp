#include <doctest.h>

#include <cmath>

#include "steerlab/errors.hpp"
#include "steerlab/models.hpp"

using namespace steerlab;
using namespace steerlab::models;

namespace {

TrialFeatures feat(double L, double K, std::optional<double> nl = std::nullopt) {
  TrialFeatures f;
  f.L = L;
  f.K = K;
  f.nl = nl;
  return f;
}

}  // namespace

TEST_CASE("form names round-trip") {
  for (FormId id : all_forms()) CHECK(form_from_string(to_string(id)) == id);
  CHECK(all_forms().size() == 8);
  CHECK_THROWS_AS(form_from_string("SL"), ParseError);
  CHECK(label({FormId::kLiu, false}) == "LIU/no-intercept");
  CHECK(label({FormId::kCompLogK, true}) == "COMP_LOGK");
}

TEST_CASE("coefficient names follow the intercept flag") {
  CHECK(coefficient_names({FormId::kCompK, true}) == std::vector<std::string>{"a", "b", "c", "d"});
  CHECK(coefficient_names({FormId::kLiu, false}) == std::vector<std::string>{"b", "c"});
  CHECK(coefficient_count({FormId::kNl, false}) == 1);
  CHECK(coefficient_count({FormId::kYm, true}) == 3);
  CHECK(requires_nl({FormId::kNl, true}));
  CHECK_FALSE(requires_nl({FormId::kAddK, true}));
  CHECK_THROWS_AS(validate_form({FormId::kYm, false}), ValidationError);
}

TEST_CASE("predictions follow the closed forms") {
  const TrialFeatures f = feat(1500.0, 15.0, 300.0);
  CHECK(predict({FormId::kSlBase, true}, {{-900.0, 9.0}}, f) == doctest::Approx(-900 + 9 * 1500));
  CHECK(predict({FormId::kAddK, true}, {{1, 2, 3}}, f) == doctest::Approx(1 + 3000 + 45));
  CHECK(predict({FormId::kAddLogK, true}, {{1, 2, 3}}, f) == doctest::Approx(1 + 3000 + 3 * 4.0));
  CHECK(predict({FormId::kCompK, true}, {{1, 2, 3, 0.5}}, f) == doctest::Approx(1 + 3000 + 45 + 0.5 * 22500));
  CHECK(predict({FormId::kCompLogK, true}, {{1, 2, 3, 0.5}}, f) == doctest::Approx(1 + 3000 + 12 + 0.5 * 22500));
  CHECK(predict({FormId::kNl, true}, {{5, 0.01}}, f) == doctest::Approx(5 + 0.01 * 1500 * 300));
  CHECK(predict({FormId::kNl, false}, {{0.01}}, f) == doctest::Approx(0.01 * 1500 * 300));
  CHECK(predict({FormId::kYm, true}, {{10, 2, 4}}, f) == doctest::Approx(10 + 2 * 1500.0 * 1500 / 1560));
  CHECK(predict({FormId::kLiu, true}, {{0.2, 1.2, 8.0}}, f) ==
        doctest::Approx(std::pow(10.0, 0.2 + 1.2 * std::log10(1500.0) + 8.0 * 15 / 1500)));
  CHECK(predict({FormId::kLiu, false}, {{1.2, 8.0}}, f) ==
        doctest::Approx(std::pow(10.0, 1.2 * std::log10(1500.0) + 8.0 * 15 / 1500)));
}

TEST_CASE("prediction errors") {
  CHECK_THROWS_AS(predict({FormId::kNl, true}, {{1, 2}}, feat(10, 1)), MissingFeatureError);
  CHECK_THROWS_AS(predict({FormId::kSlBase, true}, {{1}}, feat(10, 1)), ValidationError);
  CHECK_THROWS_AS(predict({FormId::kYm, true}, {{0, 1, -20}}, feat(10, 1)), EvaluationError);
}

TEST_CASE("linear design rows and targets") {
  const TrialFeatures f = feat(100.0, 3.0);
  const auto row = std::get<LinearRow>(design_row({FormId::kCompLogK, true}, f));
  CHECK(row.predictors == std::vector<double>{1.0, 100.0, 2.0, 300.0});
  CHECK(row.target == Target::kMt);
  const auto bare = std::get<LinearRow>(design_row({FormId::kNl, false}, feat(100.0, 3.0, 7.0)));
  CHECK(bare.predictors == std::vector<double>{700.0});
  const auto liu = std::get<LinearRow>(design_row({FormId::kLiu, true}, f));
  CHECK(liu.target == Target::kLog10Mt);
  CHECK(liu.predictors[1] == doctest::Approx(2.0));
  CHECK(liu.predictors[2] == doctest::Approx(0.03));
}

TEST_CASE("YM design row is a residual closure") {
  TrialFeatures f = feat(100.0, 5.0);
  CHECK_THROWS_AS(design_row({FormId::kYm, true}, f), MissingFeatureError);
  f.mt_mean = 500.0;
  const auto row = std::get<NonlinearRow>(design_row({FormId::kYm, true}, f));
  const double theta[] = {100.0, 4.0, 0.0};
  CHECK(row.residual(theta) == doctest::Approx(500.0 - 100.0 - 400.0));
}

TEST_CASE("feature validation") {
  CHECK_THROWS_AS(feat(0.0, 1.0).validate(), ValidationError);
  CHECK_THROWS_AS(feat(10.0, -1.0).validate(), ValidationError);
  TrialFeatures f = feat(10.0, 0.0);
  f.mt_mean = 0.0;
  CHECK_THROWS_AS(f.validate(), ValidationError);
  CHECK(catalog().size() == 8);
}

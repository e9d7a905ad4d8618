#include <doctest.h>

#include <map>

#include "softmil/labels.hpp"

using namespace softmil;

namespace {

GroundTruthMark gt_with(std::int64_t gt_id, std::int64_t image_id, int score, int readers) {
  GroundTruthMark gt;
  gt.gt_id = gt_id;
  gt.image_id = image_id;
  gt.score = score;
  gt.distinct_readers = readers;
  gt.representative_ellipse.r1_mm = 5.0;
  gt.representative_ellipse.r2_mm = 5.0;
  return gt;
}

}  // namespace

TEST_CASE("naive probability is the reader proportion") {
  CHECK(naive_probability(4, 4) == 1.0);
  CHECK(naive_probability(2, 4) == 0.5);
  CHECK(naive_probability(3, 5) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK_THROWS_AS(naive_probability(0, 4), std::invalid_argument);
  CHECK_THROWS_AS(naive_probability(5, 4), std::invalid_argument);
}

TEST_CASE("single annotator probability is depressed and decays with readers") {
  const LabelConfig defaults;
  CHECK(single_annotator_probability(4, defaults) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(single_annotator_probability(8, defaults) == doctest::Approx(0.005).epsilon(1e-12));

  LabelConfig no_depression = defaults;
  no_depression.depression = 1.0;
  CHECK(single_annotator_probability(4, no_depression) ==
        doctest::Approx(2.0 / 25.0).epsilon(1e-15));

  CHECK_THROWS_AS(single_annotator_probability(3, defaults), std::invalid_argument);
}

TEST_CASE("soft target assignment dispatches on distinct readers") {
  const LabelConfig cfg;
  std::map<std::int64_t, int> readers{{1, 5}, {2, 4}};
  std::vector<GroundTruthMark> gts{gt_with(1, 1, 3, 3), gt_with(2, 2, 1, 1), gt_with(3, 2, 4, 4)};
  const auto targets = assign_soft_targets(gts, readers, cfg);
  REQUIRE(targets.size() == 3);
  CHECK(targets[0].p_target == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(targets[0].n_annotators == 5);
  CHECK(targets[1].p_target == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(targets[2].p_target == 1.0);
}

TEST_CASE("missing reader roster is rejected by image") {
  const LabelConfig cfg;
  std::map<std::int64_t, int> readers{{1, 5}};
  std::vector<GroundTruthMark> gts{gt_with(7, 99, 2, 2)};
  CHECK_THROWS_WITH_AS(assign_soft_targets(gts, readers, cfg),
                       doctest::Contains("image 99"), std::invalid_argument);
}

TEST_CASE("targets are monotone in reader agreement") {
  const LabelConfig cfg;
  std::map<std::int64_t, int> readers{{1, 7}};
  double previous = -1.0;
  for (int dr = 1; dr <= 7; ++dr) {
    const auto targets = assign_soft_targets({gt_with(1, 1, dr, dr)}, readers, cfg);
    CHECK(targets[0].p_target >= previous);
    CHECK(targets[0].p_target >= 0.0);
    CHECK(targets[0].p_target <= 1.0);
    previous = targets[0].p_target;
  }
}

TEST_CASE("singleton targets decay strictly with the roster size") {
  const LabelConfig cfg;
  double previous = single_annotator_probability(cfg.n_readers_min, cfg);
  CHECK(previous == doctest::Approx(cfg.depression * cfg.smallest_probability()));
  for (int n = cfg.n_readers_min + 1; n <= 12; ++n) {
    const double p = single_annotator_probability(n, cfg);
    CHECK(p < previous);
    previous = p;
  }
}

TEST_CASE("label config validation") {
  LabelConfig bad;
  bad.n_readers_min = 10;
  bad.n_readers_max = 4;
  CHECK_THROWS_AS(validate_label_config(bad), std::invalid_argument);
  bad = LabelConfig{};
  bad.depression = 0.0;
  CHECK_THROWS_AS(validate_label_config(bad), std::invalid_argument);
}

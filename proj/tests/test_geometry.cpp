#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "oracles.hpp"
#include "softmil/geometry.hpp"
#include "softmil/numeric.hpp"

using namespace softmil;

namespace {

EllipseMark circle(std::int64_t id, std::int64_t reader, double x, double y, double r,
                   std::int64_t image = 1) {
  EllipseMark m;
  m.mark_id = id;
  m.image_id = image;
  m.reader_id = reader;
  m.center_mm = {x, y};
  m.r1_mm = r;
  m.r2_mm = r;
  return m;
}

EllipseMark ellipse(std::int64_t id, std::int64_t reader, double x, double y, double r1, double r2,
                    double theta, std::int64_t image = 1) {
  EllipseMark m = circle(id, reader, x, y, r1, image);
  m.r2_mm = r2;
  m.rotation_rad = theta;
  return m;
}

EllipseMark random_mark(Rng& rng, std::int64_t id, std::int64_t reader) {
  const double r1 = rng.uniform(3.0, 20.0);
  return ellipse(id, reader, rng.uniform(0.0, 200.0), rng.uniform(0.0, 200.0), r1,
                 rng.uniform(0.3 * r1, r1), rng.uniform(0.0, 3.14159));
}

}  // namespace

TEST_CASE("polygonized ellipse preserves area") {
  const EllipseMark e = ellipse(1, 1, 12.0, -4.0, 9.0, 4.0, 1.1);
  const double poly = polygon_area(ellipse_polygon(e));
  CHECK(poly == doctest::Approx(e.area_mm2()).epsilon(1e-12));
}

TEST_CASE("intersection of identical ellipses is the full area") {
  const EllipseMark a = ellipse(1, 1, 50.0, 50.0, 10.0, 6.0, 0.7);
  EllipseMark b = a;
  b.mark_id = 2;
  b.reader_id = 2;
  CHECK(ellipse_intersection_area(a, b) ==
        doctest::Approx(a.area_mm2()).epsilon(1e-9));
}

TEST_CASE("disjoint ellipses intersect with zero area") {
  const EllipseMark a = circle(1, 1, 0.0, 0.0, 10.0);
  const EllipseMark b = circle(2, 2, 25.0, 0.0, 10.0);
  CHECK(ellipse_intersection_area(a, b) == 0.0);
}

TEST_CASE("circle pair matches the closed-form lens area") {
  const EllipseMark a = circle(1, 1, 0.0, 0.0, 10.0);
  const EllipseMark b = circle(2, 2, 10.0, 0.0, 10.0);
  const double exact = testing::circle_lens_area(10.0, 10.0);
  const double approx = ellipse_intersection_area(a, b);
  CHECK(std::abs(approx - exact) / exact < 0.005);
}

TEST_CASE("random circle pairs stay within half a percent of the lens formula") {
  Rng rng(20260810);
  for (int trial = 0; trial < 40; ++trial) {
    const double r = rng.uniform(4.0, 30.0);
    const double d = rng.uniform(0.1, 1.9) * r;
    const EllipseMark a = circle(1, 1, 0.0, 0.0, r);
    const EllipseMark b = circle(2, 2, d, 0.0, r);
    const double exact = testing::circle_lens_area(r, d);
    const double approx = ellipse_intersection_area(a, b);
    CHECK(std::abs(approx - exact) / exact < 0.005);
  }
}

TEST_CASE("intersection is symmetric and bounded by the smaller mark") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const EllipseMark a = random_mark(rng, 1, 1);
    const EllipseMark b = random_mark(rng, 2, 2);
    const double ab = ellipse_intersection_area(a, b);
    const double ba = ellipse_intersection_area(b, a);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-9));
    CHECK(ab >= 0.0);
    CHECK(ab <= std::min(a.area_mm2(), b.area_mm2()) * (1.0 + 1e-9));
  }
}

TEST_CASE("hit threshold follows the adaptive rule") {
  const HitConfig cfg;
  SUBCASE("similar 10 mm pair") {
    const EllipseMark a = circle(1, 1, 0.0, 0.0, 5.0);
    const EllipseMark b = circle(2, 2, 0.0, 0.0, 5.0);
    CHECK(hit_threshold(a, b, cfg) == doctest::Approx(0.315).epsilon(1e-12));
  }
  SUBCASE("large pair saturates at t0") {
    const EllipseMark a = circle(1, 1, 0.0, 0.0, 50.0);
    const EllipseMark b = circle(2, 2, 0.0, 0.0, 50.0);
    CHECK(hit_threshold(a, b, cfg) == doctest::Approx(0.63).epsilon(1e-12));
  }
  SUBCASE("dissimilar pair uses the smaller size") {
    const EllipseMark a = circle(1, 1, 0.0, 0.0, 20.0);  // D = 40
    const EllipseMark b = circle(2, 2, 0.0, 0.0, 5.0);   // D = 10
    CHECK(hit_threshold(a, b, cfg) == doctest::Approx(0.315).epsilon(1e-12));
  }
}

TEST_CASE("marks_hit combines overlap ratio and threshold") {
  const HitConfig cfg;
  SUBCASE("identical marks from different readers hit") {
    const EllipseMark a = ellipse(1, 1, 10.0, 10.0, 8.0, 5.0, 0.3);
    EllipseMark b = a;
    b.mark_id = 2;
    b.reader_id = 2;
    CHECK(marks_hit(a, b, cfg));
    CHECK(marks_hit(b, a, cfg));
  }
  SUBCASE("same reader never hits") {
    const EllipseMark a = ellipse(1, 3, 10.0, 10.0, 8.0, 5.0, 0.3);
    EllipseMark b = a;
    b.mark_id = 2;
    CHECK_FALSE(marks_hit(a, b, cfg));
  }
  SUBCASE("disjoint marks do not hit") {
    const EllipseMark a = circle(1, 1, 0.0, 0.0, 5.0);
    const EllipseMark b = circle(2, 2, 30.0, 0.0, 5.0);
    CHECK_FALSE(marks_hit(a, b, cfg));
  }
  SUBCASE("overlap ratio 0.40 clears the 0.315 threshold") {
    // Find the center distance giving a 0.40 normalized overlap of two
    // 10 mm circles from the closed form, then check the predicate.
    const double r = 5.0;
    double lo = 0.0, hi = 2.0 * r;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      const double ratio = testing::circle_lens_area(r, mid) / (std::numbers::pi * r * r);
      (ratio > 0.40 ? lo : hi) = mid;
    }
    const EllipseMark a = circle(1, 1, 0.0, 0.0, r);
    const EllipseMark b = circle(2, 2, lo, 0.0, r);
    CHECK(hit_threshold(a, b, cfg) == doctest::Approx(0.315));
    CHECK(marks_hit(a, b, cfg));
  }
}

TEST_CASE("merge fuses identical marks from two readers") {
  const EllipseMark a = ellipse(1, 1, 40.0, 40.0, 9.0, 6.0, 0.2);
  EllipseMark b = a;
  b.mark_id = 2;
  b.reader_id = 2;
  const auto gts = merge_marks({a, b}, HitConfig{}, 7);
  REQUIRE(gts.size() == 1);
  CHECK(gts[0].score == 2);
  CHECK(gts[0].distinct_readers == 2);
  CHECK(gts[0].referred_marks == std::vector<std::int64_t>{1, 2});
}

TEST_CASE("merge keeps disjoint marks separate") {
  const EllipseMark a = circle(1, 1, 0.0, 0.0, 5.0);
  const EllipseMark b = circle(2, 2, 50.0, 0.0, 5.0);
  const auto gts = merge_marks({a, b}, HitConfig{}, 7);
  REQUIRE(gts.size() == 2);
  CHECK(gts[0].score == 1);
  CHECK(gts[1].score == 1);
}

TEST_CASE("merge handles the empty input") {
  CHECK(merge_marks({}, HitConfig{}, 1).empty());
}

TEST_CASE("hub mark configuration collapses to one score-5 GT") {
  // One large mark overlapping four small pairwise-disjoint marks.
  std::vector<EllipseMark> marks{circle(1, 1, 0.0, 0.0, 4.6),
                                 circle(2, 2, 2.7, 0.0, 1.8),
                                 circle(3, 3, -2.7, 0.0, 1.8),
                                 circle(4, 4, 0.0, 2.7, 1.8),
                                 circle(5, 5, 0.0, -2.7, 1.8)};
  const HitConfig cfg;
  for (std::size_t i = 1; i < marks.size(); ++i) {
    CHECK(marks_hit(marks[0], marks[i], cfg));
    for (std::size_t j = i + 1; j < marks.size(); ++j) {
      CHECK_FALSE(marks_hit(marks[i], marks[j], cfg));
    }
  }
  const auto gts = merge_marks(marks, cfg, 3);
  REQUIRE(gts.size() == 1);
  CHECK(gts[0].score == 5);
  CHECK(gts[0].distinct_readers == 5);
}

TEST_CASE("median-size representative, lower median on even lists") {
  const HitConfig cfg;
  std::vector<EllipseMark> marks;
  for (int i = 0; i < 4; ++i) {
    marks.push_back(circle(i + 1, i + 1, 0.0, 0.0, 4.0 + i));  // sizes 8, 10, 12, 14
  }
  const auto gts = merge_marks(marks, cfg, 11);
  REQUIRE(gts.size() == 1);
  CHECK(gts[0].score == 4);
  CHECK(gts[0].representative_ellipse.mark_id == 2);  // lower median size 10
}

TEST_CASE("two-mark representative is a reproducible seeded pick") {
  const EllipseMark a = circle(10, 1, 5.0, 5.0, 6.0);
  EllipseMark b = a;
  b.mark_id = 20;
  b.reader_id = 2;
  const auto first = merge_marks({a, b}, HitConfig{}, 42);
  const auto second = merge_marks({a, b}, HitConfig{}, 42);
  REQUIRE(first.size() == 1);
  const std::int64_t rep = first[0].representative_ellipse.mark_id;
  CHECK((rep == 10 || rep == 20));
  CHECK(second[0].representative_ellipse.mark_id == rep);
}

TEST_CASE("coinciding single-reader primaries merge in the final pass") {
  // The same reader drawing twice produces no step-1 hits, but the final
  // merge (reader constraint waived) fuses the coinciding primaries.
  const EllipseMark a = circle(1, 1, 10.0, 10.0, 6.0);
  EllipseMark b = a;
  b.mark_id = 2;
  const auto gts = merge_marks({a, b}, HitConfig{}, 5);
  REQUIRE(gts.size() == 1);
  CHECK(gts[0].score == 2);
  CHECK(gts[0].distinct_readers == 1);
}

TEST_CASE("randomized merge keeps partition, scores and seed stability") {
  Rng rng(31337);
  for (int config = 0; config < 200; ++config) {
    const int n = rng.uniform_int(0, 12);
    std::vector<EllipseMark> marks;
    std::set<std::int64_t> input_ids;
    for (int i = 0; i < n; ++i) {
      EllipseMark m = random_mark(rng, i + 1, rng.uniform_int(1, 5));
      marks.push_back(m);
      input_ids.insert(m.mark_id);
    }
    const std::uint64_t seed = rng.next_u64();
    const auto gts = merge_marks(marks, HitConfig{}, seed);

    std::set<std::int64_t> covered;
    int total_score = 0;
    for (const auto& gt : gts) {
      CHECK(gt.score == static_cast<int>(gt.referred_marks.size()));
      CHECK(gt.distinct_readers >= 1);
      CHECK(gt.distinct_readers <= gt.score);
      CHECK(std::count(gt.referred_marks.begin(), gt.referred_marks.end(),
                       gt.representative_ellipse.mark_id) == 1);
      total_score += gt.score;
      for (std::int64_t id : gt.referred_marks) {
        CHECK(covered.insert(id).second);  // pairwise disjoint
      }
    }
    CHECK(covered == input_ids);
    CHECK(total_score == n);

    const auto replay = merge_marks(marks, HitConfig{}, seed);
    REQUIRE(replay.size() == gts.size());
    for (std::size_t g = 0; g < gts.size(); ++g) {
      CHECK(replay[g].referred_marks == gts[g].referred_marks);
      CHECK(replay[g].representative_ellipse.mark_id == gts[g].representative_ellipse.mark_id);
      CHECK(replay[g].score == gts[g].score);
    }
  }
}

TEST_CASE("input validation rejects malformed marks and configs") {
  EllipseMark bad = circle(1, 1, 0.0, 0.0, 5.0);
  bad.r2_mm = 7.0;  // r2 > r1
  CHECK_THROWS_AS(merge_marks({bad}, HitConfig{}, 1), std::invalid_argument);

  HitConfig bad_cfg;
  bad_cfg.t0 = 0.0;
  CHECK_THROWS_AS(merge_marks({circle(1, 1, 0, 0, 5.0)}, bad_cfg, 1), std::invalid_argument);

  const EllipseMark a = circle(1, 1, 0.0, 0.0, 5.0, 1);
  const EllipseMark b = circle(2, 2, 0.0, 0.0, 5.0, 2);
  CHECK_THROWS_AS(ellipse_intersection_area(a, b), std::invalid_argument);
  CHECK_THROWS_AS(merge_marks({a, b}, HitConfig{}, 1), std::invalid_argument);
}

TEST_CASE("point_in_ellipse respects rotation and scale") {
  const EllipseMark e = ellipse(1, 1, 0.0, 0.0, 10.0, 2.0, std::numbers::pi / 2.0 - 1e-9);
  // Nearly vertical major axis: (0, 9) is inside, (9, 0) is not.
  CHECK(point_in_ellipse({0.0, 9.0}, e));
  CHECK_FALSE(point_in_ellipse({9.0, 0.0}, e));
  CHECK(point_in_ellipse({9.0, 0.0}, e, 5.0));
}

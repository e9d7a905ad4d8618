// Copyright 2026 The softmil Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "softmil/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "softmil/numeric.hpp"

namespace softmil {

namespace {

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// Disjoint-set over primary GT indices for the final coincide merge.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }
  void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

 private:
  std::vector<std::size_t> parent_;
};

// Median-size representative: lower median by D, ties by smaller mark_id.
// Two-mark lists are resolved by a reproducible coin seeded from
// (seed, sorted mark ids) so the pick does not depend on processing order.
const EllipseMark* pick_representative(std::vector<const EllipseMark*> group,
                                       std::uint64_t seed) {
  if (group.size() == 1) return group.front();
  if (group.size() == 2) {
    const EllipseMark* lo = group[0];
    const EllipseMark* hi = group[1];
    if (lo->mark_id > hi->mark_id) std::swap(lo, hi);
    std::uint64_t state = seed;
    state ^= splitmix64(state) + static_cast<std::uint64_t>(lo->mark_id);
    state ^= splitmix64(state) + static_cast<std::uint64_t>(hi->mark_id);
    return (splitmix64(state) & 1u) ? hi : lo;
  }
  std::sort(group.begin(), group.end(), [](const EllipseMark* a, const EllipseMark* b) {
    if (a->size_mm() != b->size_mm()) return a->size_mm() < b->size_mm();
    return a->mark_id < b->mark_id;
  });
  return group[(group.size() - 1) / 2];
}

}  // namespace

double EllipseMark::area_mm2() const { return std::numbers::pi * r1_mm * r2_mm; }

void validate_mark(const EllipseMark& mark) {
  const auto fail = [&](const std::string& what) {
    throw std::invalid_argument("mark " + std::to_string(mark.mark_id) + ": " + what);
  };
  if (!(mark.r2_mm > 0.0) || !(mark.r1_mm >= mark.r2_mm)) {
    fail("semi-axes must satisfy r1_mm >= r2_mm > 0");
  }
  if (!(mark.rotation_rad >= 0.0) || !(mark.rotation_rad < std::numbers::pi)) {
    fail("rotation_rad must lie in [0, pi)");
  }
  if (!mark.center_mm.allFinite() || !std::isfinite(mark.r1_mm) || !std::isfinite(mark.r2_mm)) {
    fail("non-finite geometry");
  }
}

void validate_hit_config(const HitConfig& cfg) {
  if (!(cfg.t0 > 0.0) || !(cfg.t0 <= 1.0)) {
    throw std::invalid_argument("hit config: t0 must be in (0, 1]");
  }
  if (!(cfg.similar_size_fraction > 0.0) || !(cfg.similar_size_fraction < 1.0)) {
    throw std::invalid_argument("hit config: similar_size_fraction must be in (0, 1)");
  }
  if (!(cfg.similar_center_distance > 0.0)) {
    throw std::invalid_argument("hit config: similar_center_distance must be positive");
  }
}

std::vector<Eigen::Vector2d> ellipse_polygon(const EllipseMark& e, int vertices) {
  if (vertices < 8) throw std::invalid_argument("ellipse_polygon: need at least 8 vertices");
  const double step = 2.0 * std::numbers::pi / vertices;
  // Inscribed n-gon area is (n/2) sin(step) r1 r2; scale radially so the
  // polygon area equals the ellipse area.
  const double scale = std::sqrt(step / std::sin(step));
  const double c = std::cos(e.rotation_rad);
  const double s = std::sin(e.rotation_rad);
  std::vector<Eigen::Vector2d> poly;
  poly.reserve(static_cast<std::size_t>(vertices));
  for (int i = 0; i < vertices; ++i) {
    const double t = step * i;
    const double u = scale * e.r1_mm * std::cos(t);
    const double v = scale * e.r2_mm * std::sin(t);
    poly.emplace_back(e.center_mm.x() + c * u - s * v, e.center_mm.y() + s * u + c * v);
  }
  return poly;
}

double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
  if (poly.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    twice += cross2(poly[j], poly[i]);
  }
  return 0.5 * std::abs(twice);
}

std::vector<Eigen::Vector2d> convex_clip(const std::vector<Eigen::Vector2d>& subject,
                                         const std::vector<Eigen::Vector2d>& clip) {
  std::vector<Eigen::Vector2d> output = subject;
  std::vector<Eigen::Vector2d> input;
  input.reserve(subject.size() + clip.size());
  for (std::size_t i = 0, j = clip.size() - 1; i < clip.size(); j = i++) {
    const Eigen::Vector2d& a = clip[j];
    const Eigen::Vector2d edge = clip[i] - a;
    input.swap(output);
    output.clear();
    if (input.empty()) break;
    Eigen::Vector2d prev = input.back();
    double prev_side = cross2(edge, prev - a);
    for (const Eigen::Vector2d& cur : input) {
      const double cur_side = cross2(edge, cur - a);
      if (cur_side >= 0.0) {
        if (prev_side < 0.0) {
          const double t = prev_side / (prev_side - cur_side);
          output.push_back(prev + t * (cur - prev));
        }
        output.push_back(cur);
      } else if (prev_side >= 0.0) {
        const double t = prev_side / (prev_side - cur_side);
        output.push_back(prev + t * (cur - prev));
      }
      prev = cur;
      prev_side = cur_side;
    }
  }
  return output;
}

bool point_in_ellipse(const Eigen::Vector2d& p, const EllipseMark& e, double scale) {
  const Eigen::Vector2d d = p - e.center_mm;
  const double c = std::cos(e.rotation_rad);
  const double s = std::sin(e.rotation_rad);
  const double u = (c * d.x() + s * d.y()) / e.r1_mm;
  const double v = (-s * d.x() + c * d.y()) / e.r2_mm;
  return u * u + v * v <= scale * scale;
}

double ellipse_intersection_area(const EllipseMark& a, const EllipseMark& b, int vertices) {
  if (a.image_id != b.image_id) {
    throw std::invalid_argument("ellipse_intersection_area: marks on different images");
  }
  const double center_dist = (a.center_mm - b.center_mm).norm();
  if (center_dist >= a.r1_mm + b.r1_mm) return 0.0;
  const auto pa = ellipse_polygon(a, vertices);
  const auto pb = ellipse_polygon(b, vertices);
  return polygon_area(convex_clip(pa, pb));
}

double hit_threshold(const EllipseMark& a, const EllipseMark& b, const HitConfig& cfg) {
  const double da = a.size_mm();
  const double db = b.size_mm();
  const double dmax = std::max(da, db);
  const double dmin = std::min(da, db);
  const bool similar = dmin / dmax > cfg.similar_size_fraction &&
                       (a.center_mm - b.center_mm).norm() / dmax < cfg.similar_center_distance;
  const double size = similar ? dmax : dmin;
  return std::min(cfg.t0, cfg.t0 / 20.0 * size);
}

bool marks_coincide(const EllipseMark& a, const EllipseMark& b, const HitConfig& cfg) {
  if (a.image_id != b.image_id) {
    throw std::invalid_argument("marks_coincide: marks on different images");
  }
  const double inter = ellipse_intersection_area(a, b);
  if (inter <= 0.0) return false;
  return inter / std::max(a.area_mm2(), b.area_mm2()) > hit_threshold(a, b, cfg);
}

bool marks_hit(const EllipseMark& a, const EllipseMark& b, const HitConfig& cfg) {
  if (a.reader_id == b.reader_id) return false;
  return marks_coincide(a, b, cfg);
}

std::vector<GroundTruthMark> merge_marks(const std::vector<EllipseMark>& marks,
                                         const HitConfig& cfg, std::uint64_t seed) {
  validate_hit_config(cfg);
  if (marks.empty()) return {};
  const std::int64_t image_id = marks.front().image_id;
  for (const EllipseMark& m : marks) {
    validate_mark(m);
    if (m.image_id != image_id) {
      throw std::invalid_argument("merge_marks: marks span multiple images");
    }
  }

  const std::size_t n = marks.size();
  std::vector<std::vector<char>> hits(n, std::vector<char>(n, 0));
  std::vector<int> score(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (marks_hit(marks[i], marks[j], cfg)) {
        hits[i][j] = hits[j][i] = 1;
        ++score[i];
        ++score[j];
      }
    }
  }

  // Step 2 order: descending hit count, ascending mark_id on ties.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return marks[a].mark_id < marks[b].mark_id;
  });

  // Steps 3-5: greedy absorption of the seed's unconsumed hitting marks.
  std::vector<char> consumed(n, 0);
  std::vector<std::vector<std::size_t>> primaries;
  for (std::size_t seed_idx : order) {
    if (consumed[seed_idx]) continue;
    std::vector<std::size_t> group{seed_idx};
    consumed[seed_idx] = 1;
    for (std::size_t j = 0; j < n; ++j) {
      if (!consumed[j] && hits[seed_idx][j]) {
        group.push_back(j);
        consumed[j] = 1;
      }
    }
    primaries.push_back(std::move(group));
  }

  // Final pass: coinciding primaries (representatives hit, reader constraint
  // waived) are merged and the score corrected to the total referred marks.
  std::vector<const EllipseMark*> primary_rep(primaries.size());
  for (std::size_t p = 0; p < primaries.size(); ++p) {
    std::vector<const EllipseMark*> group;
    group.reserve(primaries[p].size());
    for (std::size_t idx : primaries[p]) group.push_back(&marks[idx]);
    primary_rep[p] = pick_representative(std::move(group), seed);
  }
  UnionFind uf(primaries.size());
  for (std::size_t p = 0; p < primaries.size(); ++p) {
    for (std::size_t q = p + 1; q < primaries.size(); ++q) {
      if (marks_coincide(*primary_rep[p], *primary_rep[q], cfg)) uf.unite(p, q);
    }
  }

  std::vector<std::vector<std::size_t>> final_groups;
  {
    std::vector<int> root_slot(primaries.size(), -1);
    for (std::size_t p = 0; p < primaries.size(); ++p) {
      const std::size_t root = uf.find(p);
      if (root_slot[root] < 0) {
        root_slot[root] = static_cast<int>(final_groups.size());
        final_groups.emplace_back();
      }
      auto& dst = final_groups[static_cast<std::size_t>(root_slot[root])];
      dst.insert(dst.end(), primaries[p].begin(), primaries[p].end());
    }
  }

  std::vector<GroundTruthMark> result;
  result.reserve(final_groups.size());
  for (auto& group : final_groups) {
    std::sort(group.begin(), group.end(), [&](std::size_t a, std::size_t b) {
      return marks[a].mark_id < marks[b].mark_id;
    });
    GroundTruthMark gt;
    gt.image_id = image_id;
    std::vector<const EllipseMark*> members;
    std::vector<std::int64_t> readers;
    for (std::size_t idx : group) {
      gt.referred_marks.push_back(marks[idx].mark_id);
      members.push_back(&marks[idx]);
      readers.push_back(marks[idx].reader_id);
    }
    gt.representative_ellipse = *pick_representative(std::move(members), seed);
    gt.score = static_cast<int>(group.size());
    std::sort(readers.begin(), readers.end());
    gt.distinct_readers =
        static_cast<int>(std::unique(readers.begin(), readers.end()) - readers.begin());
    result.push_back(std::move(gt));
  }

  std::sort(result.begin(), result.end(), [](const GroundTruthMark& a, const GroundTruthMark& b) {
    return a.referred_marks.front() < b.referred_marks.front();
  });
  for (std::size_t i = 0; i < result.size(); ++i) {
    result[i].gt_id = static_cast<std::int64_t>(i) + 1;
  }
  return result;
}

}  // namespace softmil

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

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace softmil {

/// One annotator's ellipse on one image. All geometry is in millimeters.
struct EllipseMark {
  std::int64_t mark_id = 0;
  std::int64_t image_id = 0;
  std::int64_t reader_id = 0;
  Eigen::Vector2d center_mm = Eigen::Vector2d::Zero();
  double r1_mm = 0.0;  // major semi-axis, r1 >= r2 > 0
  double r2_mm = 0.0;
  double rotation_rad = 0.0;  // in [0, pi)

  double area_mm2() const;
  /// Mark size D: the diameter along the major axis.
  double size_mm() const { return 2.0 * r1_mm; }
};

/// Throws std::invalid_argument naming the mark if an invariant is broken.
void validate_mark(const EllipseMark& mark);

/// Parameters of the adaptive hit test between two marks.
struct HitConfig {
  double t0 = 0.63;
  double similar_size_fraction = 0.7;
  double similar_center_distance = 0.1;
};

void validate_hit_config(const HitConfig& cfg);

/// Intermediate merge product: a seed mark plus everything it absorbed.
struct PrimaryGt {
  std::vector<std::int64_t> referred_marks;
  std::int64_t representative = 0;
  int score = 0;
};

/// Final merged ground-truth region.
struct GroundTruthMark {
  std::int64_t gt_id = 0;
  std::int64_t image_id = 0;
  std::vector<std::int64_t> referred_marks;
  EllipseMark representative_ellipse;
  int score = 0;             // == referred_marks.size()
  int distinct_readers = 0;  // readers contributing at least one mark
};

// --- polygon primitives -----------------------------------------------------

/// Discretizes the ellipse boundary into a convex CCW polygon. Vertices are
/// placed slightly outside the boundary so the polygon area matches the
/// ellipse area exactly.
std::vector<Eigen::Vector2d> ellipse_polygon(const EllipseMark& e, int vertices = 256);

double polygon_area(const std::vector<Eigen::Vector2d>& poly);

/// Sutherland-Hodgman clip of one convex CCW polygon against another.
std::vector<Eigen::Vector2d> convex_clip(const std::vector<Eigen::Vector2d>& subject,
                                         const std::vector<Eigen::Vector2d>& clip);

/// True when p lies inside (or on) the ellipse scaled about its center.
bool point_in_ellipse(const Eigen::Vector2d& p, const EllipseMark& e, double scale = 1.0);

// --- mark fusion ------------------------------------------------------------

/// Area of the geometric intersection of two marks on the same image, mm^2.
/// Polygon-clipping approximation, relative error well under 0.5%.
double ellipse_intersection_area(const EllipseMark& a, const EllipseMark& b,
                                 int vertices = 256);

/// Adaptive threshold T for the pair: the similar-pair branch uses
/// max(D_a, D_b), all other pairs use min(D_a, D_b).
double hit_threshold(const EllipseMark& a, const EllipseMark& b, const HitConfig& cfg);

/// Hit predicate between marks of different readers; same-reader pairs never
/// hit. Symmetric.
bool marks_hit(const EllipseMark& a, const EllipseMark& b, const HitConfig& cfg);

/// Geometric hit with the reader constraint waived; used when testing whether
/// two primary GT representatives coincide and in reader statistics.
bool marks_coincide(const EllipseMark& a, const EllipseMark& b, const HitConfig& cfg);

/// Greedy merge of one image's marks into final scored ground-truth regions.
/// Deterministic in (marks order, cfg, seed). The returned GTs partition the
/// input marks; gt_id is a per-call index ordered by smallest referred mark.
std::vector<GroundTruthMark> merge_marks(const std::vector<EllipseMark>& marks,
                                         const HitConfig& cfg, std::uint64_t seed);

}  // namespace softmil

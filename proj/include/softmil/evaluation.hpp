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
#include <map>
#include <vector>

#include "softmil/geometry.hpp"
#include "softmil/labels.hpp"
#include "softmil/mil.hpp"

namespace softmil {

/// A lesion candidate with its extracted feature vector (no intercept; the
/// constant-1 component is appended when bags or eval sets are built).
struct Candidate {
  std::int64_t candidate_id = 0;
  std::int64_t image_id = 0;
  Eigen::Vector2d location_mm = Eigen::Vector2d::Zero();
  Eigen::VectorXd features;
};

/// Evaluation-time truth: a GT marked by more than one reader.
struct PseudoGoldenGt {
  std::int64_t gt_id = 0;
  std::int64_t image_id = 0;
  EllipseMark representative_ellipse;
};

std::vector<PseudoGoldenGt> pseudo_golden_gts(const std::vector<GroundTruthMark>& gts);

/// Sensitivities (percent) at fixed FP-per-image operating points.
/// achieved_fp is the realized FP rate at each threshold; in induced mode the
/// fp_points column itself holds the induced values.
struct RocTable {
  std::vector<double> fp_points;
  std::vector<double> thresholds;
  std::vector<double> gt_sensitivity;
  std::vector<double> image_sensitivity;
  std::vector<double> achieved_fp;
};

struct BagBuildConfig {
  double ellipse_scale = 1.0;  // containment test scale on the GT ellipse
  int n_readers_max = 25;      // annotator-weight denominator
};

struct BagBuildResult {
  std::vector<Bag> bags;
  std::vector<std::int64_t> missed_gt_ids;  // GTs no candidate fell into
};

/// Candidates inside a GT's representative ellipse form that GT's bag (ties
/// go to the higher-target GT, then the smaller gt_id); every other candidate
/// becomes a single-instance hard-negative bag.
BagBuildResult build_bags(const std::vector<Candidate>& candidates,
                          const std::vector<GroundTruthMark>& gts,
                          const std::vector<SoftTarget>& targets,
                          const std::map<std::int64_t, int>& readers_per_image,
                          const BagBuildConfig& cfg = {});

/// Precomputed geometry for FROC scoring of one image subset.
struct EvalSet {
  Eigen::MatrixXd candidate_features;  // n x d, intercept column appended
  std::vector<std::int64_t> candidate_ids;
  std::vector<std::int64_t> candidate_image_ids;
  std::vector<std::vector<std::size_t>> candidate_matches;  // indices into pseudo_gts
  std::vector<PseudoGoldenGt> pseudo_gts;
  std::vector<std::int64_t> image_ids;  // every image of the subset, healthy included
};

EvalSet make_eval_set(const std::vector<Candidate>& candidates,
                      const std::vector<GroundTruthMark>& gts,
                      const std::vector<std::int64_t>& image_ids, double ellipse_scale = 1.0);

/// Per-candidate malignancy probability sigmoid(w'x).
Eigen::VectorXd candidate_scores(const EvalSet& eval, const ModelWeights& weights);

/// FROC-style table: for each FP budget the lowest threshold whose realized
/// FP-per-image (over all images) stays within budget; detection is
/// score strictly above threshold.
RocTable froc(const EvalSet& eval, const Eigen::VectorXd& scores,
              const std::vector<double>& fp_points);

/// Applies externally chosen thresholds (threshold transfer); the fp_points
/// column of the result carries the induced FP per image.
RocTable froc_at_thresholds(const EvalSet& eval, const Eigen::VectorXd& scores,
                            const std::vector<double>& thresholds);

struct ReaderStats {
  std::int64_t reader_id = 0;
  int images_read = 0;
  int pseudo_gts_on_read_images = 0;
  int pseudo_gts_hit = 0;
  double sensitivity = 0.0;
  int false_positive_marks = 0;
  double fp_rate_per_image = 0.0;
};

/// Per-reader sensitivity and FP rate against the pseudo golden GTs, over the
/// images each reader read. Readers with no read images are excluded.
std::vector<ReaderStats> reader_stats(
    const std::vector<EllipseMark>& marks, const std::vector<GroundTruthMark>& gts,
    const std::map<std::int64_t, std::vector<std::int64_t>>& readers_per_image,
    const HitConfig& cfg = {});

}  // namespace softmil

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

#include "softmil/evaluation.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "softmil/numeric.hpp"

namespace softmil {

namespace {

Eigen::VectorXd with_intercept(const Eigen::VectorXd& features) {
  Eigen::VectorXd x(features.size() + 1);
  x.head(features.size()) = features;
  x[features.size()] = 1.0;
  return x;
}

// Sensitivities for one threshold; detection is score > threshold.
struct Counts {
  int fp = 0;
  int detected_gts = 0;
  int detected_images = 0;
};

Counts count_at_threshold(const EvalSet& eval, const Eigen::VectorXd& scores, double threshold) {
  Counts out;
  std::vector<char> gt_detected(eval.pseudo_gts.size(), 0);
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (!(scores[i] > threshold)) continue;
    const auto& matches = eval.candidate_matches[static_cast<std::size_t>(i)];
    if (matches.empty()) {
      ++out.fp;
    } else {
      for (std::size_t g : matches) gt_detected[g] = 1;
    }
  }
  std::set<std::int64_t> detected_images;
  for (std::size_t g = 0; g < eval.pseudo_gts.size(); ++g) {
    if (gt_detected[g]) {
      ++out.detected_gts;
      detected_images.insert(eval.pseudo_gts[g].image_id);
    }
  }
  out.detected_images = static_cast<int>(detected_images.size());
  return out;
}

void append_row(RocTable& table, const EvalSet& eval, const Eigen::VectorXd& scores,
                double fp_point, double threshold) {
  const Counts c = count_at_threshold(eval, scores, threshold);
  const double n_images = static_cast<double>(eval.image_ids.size());
  std::set<std::int64_t> gt_images;
  for (const PseudoGoldenGt& g : eval.pseudo_gts) gt_images.insert(g.image_id);
  const double n_gt_images = static_cast<double>(gt_images.size());

  table.fp_points.push_back(fp_point);
  table.thresholds.push_back(threshold);
  table.achieved_fp.push_back(n_images > 0 ? c.fp / n_images : 0.0);
  table.gt_sensitivity.push_back(
      eval.pseudo_gts.empty() ? 0.0 : 100.0 * c.detected_gts / static_cast<double>(eval.pseudo_gts.size()));
  table.image_sensitivity.push_back(n_gt_images > 0 ? 100.0 * c.detected_images / n_gt_images : 0.0);
}

}  // namespace

std::vector<PseudoGoldenGt> pseudo_golden_gts(const std::vector<GroundTruthMark>& gts) {
  std::vector<PseudoGoldenGt> out;
  for (const GroundTruthMark& gt : gts) {
    if (gt.distinct_readers >= 2) {
      out.push_back(PseudoGoldenGt{gt.gt_id, gt.image_id, gt.representative_ellipse});
    }
  }
  return out;
}

BagBuildResult build_bags(const std::vector<Candidate>& candidates,
                          const std::vector<GroundTruthMark>& gts,
                          const std::vector<SoftTarget>& targets,
                          const std::map<std::int64_t, int>& readers_per_image,
                          const BagBuildConfig& cfg) {
  std::unordered_map<std::int64_t, const SoftTarget*> target_by_gt;
  for (const SoftTarget& t : targets) target_by_gt[t.gt_id] = &t;

  const auto annotator_weight = [&](std::int64_t image_id) {
    const auto it = readers_per_image.find(image_id);
    if (it == readers_per_image.end()) {
      throw std::invalid_argument("build_bags: no reader count for image " +
                                  std::to_string(image_id));
    }
    if (it->second < 1 || it->second > cfg.n_readers_max) {
      throw std::invalid_argument("build_bags: image " + std::to_string(image_id) + " has " +
                                  std::to_string(it->second) +
                                  " readers, outside [1, n_readers_max]");
    }
    return static_cast<double>(it->second) / static_cast<double>(cfg.n_readers_max);
  };

  // Candidate -> GT assignment: containment in the representative ellipse;
  // several containing GTs resolve to the highest target, then smallest id.
  std::unordered_map<std::int64_t, std::vector<std::size_t>> gt_members;
  std::vector<char> assigned(candidates.size(), 0);
  for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
    const Candidate& cand = candidates[ci];
    const GroundTruthMark* best = nullptr;
    double best_target = -1.0;
    for (const GroundTruthMark& gt : gts) {
      if (gt.image_id != cand.image_id) continue;
      if (!point_in_ellipse(cand.location_mm, gt.representative_ellipse, cfg.ellipse_scale)) {
        continue;
      }
      const auto t = target_by_gt.find(gt.gt_id);
      if (t == target_by_gt.end()) {
        throw std::invalid_argument("build_bags: gt " + std::to_string(gt.gt_id) +
                                    " has no soft target");
      }
      const double p = t->second->p_target;
      if (p > best_target || (p == best_target && best != nullptr && gt.gt_id < best->gt_id)) {
        best = &gt;
        best_target = p;
      }
    }
    if (best != nullptr) {
      gt_members[best->gt_id].push_back(ci);
      assigned[ci] = 1;
    }
  }

  BagBuildResult result;
  std::int64_t next_bag_id = 1;
  for (const GroundTruthMark& gt : gts) {
    const auto t = target_by_gt.find(gt.gt_id);
    if (t == target_by_gt.end()) {
      throw std::invalid_argument("build_bags: gt " + std::to_string(gt.gt_id) +
                                  " has no soft target");
    }
    const auto members = gt_members.find(gt.gt_id);
    if (members == gt_members.end()) {
      result.missed_gt_ids.push_back(gt.gt_id);
      continue;
    }
    Bag bag;
    bag.bag_id = next_bag_id++;
    bag.image_id = gt.image_id;
    bag.p_target = t->second->p_target;
    bag.annotator_weight = annotator_weight(gt.image_id);
    bag.kind = BagKind::kSoftPositive;
    const Eigen::Index d = candidates[members->second.front()].features.size() + 1;
    bag.instances.resize(static_cast<Eigen::Index>(members->second.size()), d);
    for (std::size_t r = 0; r < members->second.size(); ++r) {
      bag.instances.row(static_cast<Eigen::Index>(r)) =
          with_intercept(candidates[members->second[r]].features).transpose();
    }
    result.bags.push_back(std::move(bag));
  }

  for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
    if (assigned[ci]) continue;
    Bag bag;
    bag.bag_id = next_bag_id++;
    bag.image_id = candidates[ci].image_id;
    bag.p_target = 0.0;
    bag.annotator_weight = annotator_weight(candidates[ci].image_id);
    bag.kind = BagKind::kHardNegative;
    bag.instances = with_intercept(candidates[ci].features).transpose();
    result.bags.push_back(std::move(bag));
  }
  return result;
}

EvalSet make_eval_set(const std::vector<Candidate>& candidates,
                      const std::vector<GroundTruthMark>& gts,
                      const std::vector<std::int64_t>& image_ids, double ellipse_scale) {
  EvalSet eval;
  eval.image_ids = image_ids;
  const std::unordered_set<std::int64_t> image_set(image_ids.begin(), image_ids.end());
  for (const GroundTruthMark& gt : gts) {
    if (gt.distinct_readers >= 2 && image_set.count(gt.image_id) > 0) {
      eval.pseudo_gts.push_back(PseudoGoldenGt{gt.gt_id, gt.image_id, gt.representative_ellipse});
    }
  }

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (image_set.count(candidates[i].image_id) == 0) {
      throw std::invalid_argument("make_eval_set: candidate " +
                                  std::to_string(candidates[i].candidate_id) +
                                  " references image " + std::to_string(candidates[i].image_id) +
                                  " outside the subset");
    }
    kept.push_back(i);
  }

  const Eigen::Index n = static_cast<Eigen::Index>(kept.size());
  const Eigen::Index d = n > 0 ? candidates[kept.front()].features.size() + 1 : 1;
  eval.candidate_features.resize(n, d);
  eval.candidate_ids.reserve(kept.size());
  eval.candidate_image_ids.reserve(kept.size());
  eval.candidate_matches.resize(kept.size());
  for (std::size_t r = 0; r < kept.size(); ++r) {
    const Candidate& cand = candidates[kept[r]];
    eval.candidate_features.row(static_cast<Eigen::Index>(r)) =
        with_intercept(cand.features).transpose();
    eval.candidate_ids.push_back(cand.candidate_id);
    eval.candidate_image_ids.push_back(cand.image_id);
    for (std::size_t g = 0; g < eval.pseudo_gts.size(); ++g) {
      if (eval.pseudo_gts[g].image_id == cand.image_id &&
          point_in_ellipse(cand.location_mm, eval.pseudo_gts[g].representative_ellipse,
                           ellipse_scale)) {
        eval.candidate_matches[r].push_back(g);
      }
    }
  }
  return eval;
}

Eigen::VectorXd candidate_scores(const EvalSet& eval, const ModelWeights& weights) {
  if (eval.candidate_features.rows() > 0 && eval.candidate_features.cols() != weights.dim()) {
    throw std::invalid_argument("candidate_scores: feature dimension " +
                                std::to_string(eval.candidate_features.cols()) +
                                " does not match weight dimension " +
                                std::to_string(weights.dim()));
  }
  Eigen::VectorXd scores = eval.candidate_features * weights.w;
  for (Eigen::Index i = 0; i < scores.size(); ++i) scores[i] = sigmoid(scores[i]);
  return scores;
}

RocTable froc(const EvalSet& eval, const Eigen::VectorXd& scores,
              const std::vector<double>& fp_points) {
  if (static_cast<std::size_t>(scores.size()) != eval.candidate_matches.size()) {
    throw std::invalid_argument("froc: one score per candidate required");
  }
  for (std::size_t i = 0; i < fp_points.size(); ++i) {
    if (!(fp_points[i] > 0.0) || (i > 0 && !(fp_points[i] > fp_points[i - 1]))) {
      throw std::invalid_argument("froc: fp_points must be positive and increasing");
    }
  }
  if (eval.image_ids.empty() && scores.size() > 0) {
    throw std::invalid_argument("froc: empty image list with candidates present");
  }

  // Candidate thresholds: 0 (scores are probabilities, so it detects all)
  // plus every distinct score, ascending. FP count is nonincreasing along it.
  std::vector<double> levels{0.0};
  std::vector<double> fp_scores;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    levels.push_back(scores[i]);
    if (eval.candidate_matches[static_cast<std::size_t>(i)].empty()) {
      fp_scores.push_back(scores[i]);
    }
  }
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  std::sort(fp_scores.begin(), fp_scores.end());

  const double n_images = std::max<std::size_t>(eval.image_ids.size(), 1);
  const auto fp_rate = [&](double level) {
    const auto above = fp_scores.end() - std::upper_bound(fp_scores.begin(), fp_scores.end(), level);
    return static_cast<double>(above) / n_images;
  };

  RocTable table;
  for (double fp_point : fp_points) {
    // Lowest threshold whose FP rate stays within budget; the rate is
    // nonincreasing in the threshold, so the admissible levels are a suffix.
    const auto it = std::partition_point(levels.begin(), levels.end(),
                                         [&](double level) { return fp_rate(level) > fp_point; });
    const double chosen = it != levels.end() ? *it : levels.back();
    append_row(table, eval, scores, fp_point, chosen);
  }
  return table;
}

RocTable froc_at_thresholds(const EvalSet& eval, const Eigen::VectorXd& scores,
                            const std::vector<double>& thresholds) {
  if (static_cast<std::size_t>(scores.size()) != eval.candidate_matches.size()) {
    throw std::invalid_argument("froc_at_thresholds: one score per candidate required");
  }
  RocTable table;
  for (double threshold : thresholds) {
    append_row(table, eval, scores, 0.0, threshold);
    table.fp_points.back() = table.achieved_fp.back();  // induced FP
  }
  return table;
}

std::vector<ReaderStats> reader_stats(
    const std::vector<EllipseMark>& marks, const std::vector<GroundTruthMark>& gts,
    const std::map<std::int64_t, std::vector<std::int64_t>>& readers_per_image,
    const HitConfig& cfg) {
  const std::vector<PseudoGoldenGt> pgts = pseudo_golden_gts(gts);
  std::unordered_map<std::int64_t, std::vector<const PseudoGoldenGt*>> pgts_by_image;
  for (const PseudoGoldenGt& g : pgts) pgts_by_image[g.image_id].push_back(&g);

  std::map<std::int64_t, std::vector<std::int64_t>> images_by_reader;
  for (const auto& [image_id, roster] : readers_per_image) {
    for (std::int64_t reader : roster) images_by_reader[reader].push_back(image_id);
  }

  std::unordered_map<std::int64_t, std::unordered_map<std::int64_t, std::vector<const EllipseMark*>>>
      marks_by_reader_image;
  for (const EllipseMark& m : marks) marks_by_reader_image[m.reader_id][m.image_id].push_back(&m);

  std::vector<ReaderStats> out;
  for (const auto& [reader, images] : images_by_reader) {
    ReaderStats stats;
    stats.reader_id = reader;
    stats.images_read = static_cast<int>(images.size());
    const auto reader_marks = marks_by_reader_image.find(reader);
    for (std::int64_t image_id : images) {
      const std::vector<const EllipseMark*>* my_marks = nullptr;
      if (reader_marks != marks_by_reader_image.end()) {
        const auto it = reader_marks->second.find(image_id);
        if (it != reader_marks->second.end()) my_marks = &it->second;
      }
      const auto pg = pgts_by_image.find(image_id);
      const std::vector<const PseudoGoldenGt*>* image_pgts =
          pg != pgts_by_image.end() ? &pg->second : nullptr;

      if (image_pgts != nullptr) {
        stats.pseudo_gts_on_read_images += static_cast<int>(image_pgts->size());
        for (const PseudoGoldenGt* g : *image_pgts) {
          if (my_marks == nullptr) continue;
          for (const EllipseMark* m : *my_marks) {
            if (marks_coincide(*m, g->representative_ellipse, cfg)) {
              ++stats.pseudo_gts_hit;
              break;
            }
          }
        }
      }
      if (my_marks != nullptr) {
        for (const EllipseMark* m : *my_marks) {
          bool hits_any = false;
          if (image_pgts != nullptr) {
            for (const PseudoGoldenGt* g : *image_pgts) {
              if (marks_coincide(*m, g->representative_ellipse, cfg)) {
                hits_any = true;
                break;
              }
            }
          }
          stats.false_positive_marks += !hits_any;
        }
      }
    }
    stats.sensitivity = stats.pseudo_gts_on_read_images > 0
                            ? static_cast<double>(stats.pseudo_gts_hit) /
                                  static_cast<double>(stats.pseudo_gts_on_read_images)
                            : 0.0;
    stats.fp_rate_per_image = stats.images_read > 0
                                  ? static_cast<double>(stats.false_positive_marks) /
                                        static_cast<double>(stats.images_read)
                                  : 0.0;
    if (stats.images_read > 0) out.push_back(stats);
  }
  return out;
}

}  // namespace softmil

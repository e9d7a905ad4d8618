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

#include "softmil/labels.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace softmil {

void validate_label_config(const LabelConfig& cfg) {
  if (cfg.n_readers_min < 1 || cfg.n_readers_max < cfg.n_readers_min) {
    throw std::invalid_argument("label config: need 1 <= n_readers_min <= n_readers_max");
  }
  if (!(cfg.depression > 0.0) || !(cfg.depression <= 1.0)) {
    throw std::invalid_argument("label config: depression must be in (0, 1]");
  }
}

double naive_probability(int distinct_readers, int n_annotators) {
  if (distinct_readers < 1 || distinct_readers > n_annotators) {
    throw std::invalid_argument("naive_probability: need 1 <= distinct_readers (" +
                                std::to_string(distinct_readers) + ") <= n_annotators (" +
                                std::to_string(n_annotators) + ")");
  }
  return static_cast<double>(distinct_readers) / static_cast<double>(n_annotators);
}

double single_annotator_probability(int n_annotators, const LabelConfig& cfg) {
  validate_label_config(cfg);
  if (n_annotators < cfg.n_readers_min) {
    throw std::invalid_argument("single_annotator_probability: image read by " +
                                std::to_string(n_annotators) + " readers, below the allowed minimum " +
                                std::to_string(cfg.n_readers_min));
  }
  const double depressed = cfg.depression * cfg.smallest_probability();
  return depressed * cfg.n_readers_min / n_annotators;
}

std::vector<SoftTarget> assign_soft_targets(const std::vector<GroundTruthMark>& gts,
                                            const std::map<std::int64_t, int>& readers_per_image,
                                            const LabelConfig& cfg) {
  validate_label_config(cfg);
  std::vector<SoftTarget> targets;
  targets.reserve(gts.size());
  for (const GroundTruthMark& gt : gts) {
    const auto it = readers_per_image.find(gt.image_id);
    if (it == readers_per_image.end()) {
      throw std::invalid_argument("assign_soft_targets: no reader count for image " +
                                  std::to_string(gt.image_id) + " (gt " +
                                  std::to_string(gt.gt_id) + ")");
    }
    const int n_annotators = it->second;
    if (gt.distinct_readers < 1) {
      throw std::invalid_argument("assign_soft_targets: gt " + std::to_string(gt.gt_id) +
                                  " has no contributing readers");
    }
    SoftTarget t;
    t.gt_id = gt.gt_id;
    t.image_id = gt.image_id;
    t.n_annotators = n_annotators;
    t.p_target = gt.distinct_readers == 1
                     ? single_annotator_probability(n_annotators, cfg)
                     : naive_probability(gt.distinct_readers, n_annotators);
    t.p_target = std::clamp(t.p_target, 0.0, 1.0);
    targets.push_back(t);
  }
  return targets;
}

}  // namespace softmil

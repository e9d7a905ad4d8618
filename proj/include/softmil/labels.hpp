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

#include <cstdint>
#include <map>
#include <vector>

#include "softmil/geometry.hpp"

namespace softmil {

/// Soft-label parameters. smallest_probability() is the probability assigned
/// when only two readers out of the maximal roster mark a region.
struct LabelConfig {
  int n_readers_min = 4;
  int n_readers_max = 25;
  double depression = 1.0 / 8.0;  // k_d

  double smallest_probability() const { return 2.0 / n_readers_max; }
};

void validate_label_config(const LabelConfig& cfg);

/// Target malignancy probability attached to one ground-truth region.
struct SoftTarget {
  std::int64_t gt_id = 0;
  std::int64_t image_id = 0;
  double p_target = 0.0;
  int n_annotators = 1;  // readers of the image
};

/// Proportion of positive reader responses among readers of the image.
double naive_probability(int distinct_readers, int n_annotators);

/// Depressed probability for a region marked by a single reader; decays
/// proportionally with the number of readers beyond n_readers_min.
double single_annotator_probability(int n_annotators, const LabelConfig& cfg);

/// Applies the single-annotator rule to score-1-reader GTs and the naive
/// proportion otherwise. readers_per_image maps image_id to its reader count.
std::vector<SoftTarget> assign_soft_targets(const std::vector<GroundTruthMark>& gts,
                                            const std::map<std::int64_t, int>& readers_per_image,
                                            const LabelConfig& cfg);

}  // namespace softmil

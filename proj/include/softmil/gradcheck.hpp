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
#include <span>
#include <vector>

#include "softmil/mil.hpp"

namespace softmil {

/// Central finite differences of the unpenalized objective; checks the
/// analytic gradient without touching its code path.
Eigen::VectorXd finite_difference_gradient(std::span<const Bag> bags, const ModelWeights& weights,
                                           const NormalizationMode& mode,
                                           bool use_annotator_weights, double step = 1e-5);

/// Central finite differences of the analytic gradient, column by column.
Eigen::MatrixXd finite_difference_hessian(std::span<const Bag> bags, const ModelWeights& weights,
                                          const NormalizationMode& mode,
                                          bool use_annotator_weights, double step = 1e-5);

/// max-norm relative disagreement ||a - b||_inf / max(||a||_inf, 1e-12).
double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric);
double relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric);

/// Deterministic random problem used by the derivative checks: a mix of soft
/// bags with up to max_bag_size instances and single-instance hard negatives.
std::vector<Bag> random_bags(std::uint64_t seed, int n_bags, Eigen::Index dim, int max_bag_size);

ModelWeights random_weights(std::uint64_t seed, Eigen::Index dim);

struct GradCheckCase {
  Eigen::Index dim = 0;
  int bag_size = 0;
  Normalization normalization = Normalization::kRaw;
  bool use_annotator_weights = false;
  double gradient_error = 0.0;
  double hessian_error = 0.0;
};

/// One randomized derivative check per configuration drawn from the given
/// dimensions and bag sizes, cycling through normalization modes and
/// annotator weighting. Used by the check-gradients command and the
/// acceptance run.
std::vector<GradCheckCase> gradient_check_sweep(std::uint64_t seed, int n_cases,
                                                std::span<const int> dims,
                                                std::span<const int> bag_sizes,
                                                bool with_hessian, double step = 1e-5);

}  // namespace softmil

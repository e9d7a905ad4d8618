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
#include <optional>
#include <span>
#include <vector>

namespace softmil {

/// Probabilities are clamped to [kProbEps, 1 - kProbEps] before logs.
inline constexpr double kProbEps = 1e-12;

enum class BagKind { kSoftPositive, kHardNegative };

/// A labeled group of instances. Rows of `instances` are feature vectors and
/// already carry the constant-1 intercept component. Hard-negative bags hold
/// exactly one instance and a zero target; they take a cheaper derivative
/// path.
struct Bag {
  std::int64_t bag_id = 0;
  std::int64_t image_id = 0;
  Eigen::MatrixXd instances;  // K x d
  double p_target = 0.0;
  double annotator_weight = 1.0;  // a = n_readers / n_readers_max
  BagKind kind = BagKind::kSoftPositive;

  Eigen::Index size() const { return instances.rows(); }
};

void validate_bag(const Bag& bag);

/// Dense weight vector plus the L1 mask; the intercept entry is unpenalized.
struct ModelWeights {
  Eigen::VectorXd w;
  Eigen::Array<bool, Eigen::Dynamic, 1> penalized;

  /// Zero weights of dimension d with the trailing `unpenalized_tail`
  /// coordinates (the intercept) excluded from the penalty.
  static ModelWeights zeros(Eigen::Index d, Eigen::Index unpenalized_tail = 1);

  Eigen::Index dim() const { return w.size(); }
};

void validate_weights(const ModelWeights& weights);

enum class Normalization { kRaw, kPerSample, kPerClass };

/// How bag divergences are weighted, plus the L1 strength. The penalty is
/// always lambda / d times the L1 norm of the penalized coordinates.
struct NormalizationMode {
  Normalization kind = Normalization::kRaw;
  double lambda = 0.0;
};

struct ObjectiveReport {
  double value = 0.0;          // divergence + L1 penalty
  Eigen::VectorXd gradient;    // of the divergence part only
  std::optional<Eigen::MatrixXd> hessian;
};

/// p+ = 1 - prod_k (1 - sigmoid(w'x_k)), accumulated in log space.
double bag_positive_probability(const Bag& bag, const ModelWeights& weights);

struct BagLogProb {
  double log_p;            // log p+, clamped
  double log_one_minus_p;  // log(1 - p+), clamped
};

BagLogProb bag_log_probability(const Bag& bag, const ModelWeights& weights);

/// Cross-entropy between the bag target and the modeled bag probability:
/// -[p~ log p+ + (1 - p~) log(1 - p+)]. Differs from the true KL by the
/// entropy of p~, constant in w.
double bag_divergence(const Bag& bag, const ModelWeights& weights);

/// Mode-weighted divergence over all bags plus (lambda / d) * l1(w_penalized).
double objective(std::span<const Bag> bags, const ModelWeights& weights,
                 const NormalizationMode& mode, bool use_annotator_weights);

/// Gradient of the divergence part (the penalty is the optimizer's job).
Eigen::VectorXd gradient(std::span<const Bag> bags, const ModelWeights& weights,
                         const NormalizationMode& mode, bool use_annotator_weights);

/// Hessian of the divergence part; symmetric d x d.
Eigen::MatrixXd hessian(std::span<const Bag> bags, const ModelWeights& weights,
                        const NormalizationMode& mode, bool use_annotator_weights);

/// Value, gradient and optionally the Hessian in one pass over the bags.
ObjectiveReport evaluate_objective(std::span<const Bag> bags, const ModelWeights& weights,
                                   const NormalizationMode& mode, bool use_annotator_weights,
                                   bool with_hessian = false);

/// The hard-label reduction: requires every p_target in {0, 1} and evaluates
/// the unnormalized, unpenalized objective through the identical code path,
/// i.e. the negated MIL logistic log-likelihood.
double hard_label_objective(std::span<const Bag> bags, const ModelWeights& weights);

}  // namespace softmil

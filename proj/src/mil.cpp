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

#include "softmil/mil.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "softmil/numeric.hpp"

namespace softmil {

namespace {

const double kLogProbEps = std::log(kProbEps);

void check_dimensions(const Bag& bag, const ModelWeights& weights) {
  if (bag.instances.cols() != weights.dim()) {
    throw std::invalid_argument("bag " + std::to_string(bag.bag_id) + ": instance dimension " +
                                std::to_string(bag.instances.cols()) +
                                " does not match weight dimension " +
                                std::to_string(weights.dim()));
  }
}

// log(1 - e^{-s}) for s > 0 without cancellation.
double log_one_minus_exp_neg(double s) {
  if (s <= 0.6931471805599453) {
    return std::log(-std::expm1(-s));
  }
  return std::log1p(-std::exp(-s));
}

struct BagEval {
  double softplus_sum = 0.0;   // -log(1 - p+)
  Eigen::VectorXd sig;         // per-instance positive probabilities
};

BagEval eval_instances(const Bag& bag, const ModelWeights& weights) {
  BagEval out;
  const Eigen::VectorXd z = bag.instances * weights.w;
  out.sig.resize(z.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    out.softplus_sum += softplus(z[k]);
    out.sig[k] = sigmoid(z[k]);
  }
  return out;
}

BagLogProb log_prob_from_sum(double softplus_sum) {
  BagLogProb lp;
  lp.log_one_minus_p = std::max(-softplus_sum, kLogProbEps);
  lp.log_p = std::max(log_one_minus_exp_neg(softplus_sum), kLogProbEps);
  return lp;
}

double divergence_from_log_prob(double p_target, const BagLogProb& lp) {
  return -(p_target * lp.log_p + (1.0 - p_target) * lp.log_one_minus_p);
}

// Per-bag normalization weight; the three modes only differ here.
class ModeWeights {
 public:
  ModeWeights(std::span<const Bag> bags, const NormalizationMode& mode) {
    switch (mode.kind) {
      case Normalization::kRaw:
        positive_ = negative_ = 1.0;
        break;
      case Normalization::kPerSample:
        positive_ = negative_ = 1.0 / static_cast<double>(bags.size());
        break;
      case Normalization::kPerClass: {
        std::ptrdiff_t m_pos = 0;
        for (const Bag& bag : bags) m_pos += bag.kind == BagKind::kSoftPositive;
        const std::ptrdiff_t m_neg = static_cast<std::ptrdiff_t>(bags.size()) - m_pos;
        if (m_pos == 0 || m_neg == 0) {
          throw std::runtime_error(
              "per-class normalization needs at least one soft-positive and one "
              "hard-negative bag");
        }
        positive_ = 1.0 / static_cast<double>(m_pos);
        negative_ = 1.0 / static_cast<double>(m_neg);
        break;
      }
    }
  }

  double operator()(const Bag& bag) const {
    return bag.kind == BagKind::kSoftPositive ? positive_ : negative_;
  }

 private:
  double positive_ = 1.0;
  double negative_ = 1.0;
};

double l1_penalty(const ModelWeights& weights, double lambda) {
  double l1 = 0.0;
  for (Eigen::Index i = 0; i < weights.dim(); ++i) {
    if (weights.penalized[i]) l1 += std::abs(weights.w[i]);
  }
  return lambda / static_cast<double>(weights.dim()) * l1;
}

void check_inputs(std::span<const Bag> bags, const ModelWeights& weights) {
  if (bags.empty()) throw std::invalid_argument("objective: empty bag list");
  validate_weights(weights);
  for (const Bag& bag : bags) {
    validate_bag(bag);
    check_dimensions(bag, weights);
  }
}

}  // namespace

void validate_bag(const Bag& bag) {
  const auto fail = [&](const std::string& what) {
    throw std::invalid_argument("bag " + std::to_string(bag.bag_id) + ": " + what);
  };
  if (bag.instances.rows() < 1) fail("needs at least one instance");
  if (!bag.instances.allFinite()) fail("non-finite features");
  if (!(bag.p_target >= 0.0) || !(bag.p_target <= 1.0)) fail("p_target outside [0, 1]");
  if (!(bag.annotator_weight > 0.0) || !(bag.annotator_weight <= 1.0)) {
    fail("annotator_weight outside (0, 1]");
  }
  if (bag.kind == BagKind::kHardNegative &&
      (bag.p_target != 0.0 || bag.instances.rows() != 1)) {
    fail("hard-negative bags carry exactly one instance and a zero target");
  }
}

ModelWeights ModelWeights::zeros(Eigen::Index d, Eigen::Index unpenalized_tail) {
  ModelWeights m;
  m.w = Eigen::VectorXd::Zero(d);
  m.penalized = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(d, true);
  for (Eigen::Index i = d - unpenalized_tail; i < d; ++i) m.penalized[i] = false;
  return m;
}

void validate_weights(const ModelWeights& weights) {
  if (!weights.w.allFinite()) throw std::invalid_argument("weights: non-finite entries");
  if (weights.penalized.size() != weights.w.size()) {
    throw std::invalid_argument("weights: penalized mask size does not match dimension");
  }
}

double bag_positive_probability(const Bag& bag, const ModelWeights& weights) {
  validate_bag(bag);
  validate_weights(weights);
  check_dimensions(bag, weights);
  return -std::expm1(-eval_instances(bag, weights).softplus_sum);
}

BagLogProb bag_log_probability(const Bag& bag, const ModelWeights& weights) {
  validate_bag(bag);
  validate_weights(weights);
  check_dimensions(bag, weights);
  return log_prob_from_sum(eval_instances(bag, weights).softplus_sum);
}

double bag_divergence(const Bag& bag, const ModelWeights& weights) {
  return divergence_from_log_prob(bag.p_target, bag_log_probability(bag, weights));
}

double objective(std::span<const Bag> bags, const ModelWeights& weights,
                 const NormalizationMode& mode, bool use_annotator_weights) {
  check_inputs(bags, weights);
  const ModeWeights mode_weight(bags, mode);
  double divergence = 0.0;
  for (const Bag& bag : bags) {
    const double d_bag =
        divergence_from_log_prob(bag.p_target, log_prob_from_sum(eval_instances(bag, weights).softplus_sum));
    const double a = use_annotator_weights ? bag.annotator_weight : 1.0;
    divergence += mode_weight(bag) * a * d_bag;
  }
  return divergence + l1_penalty(weights, mode.lambda);
}

Eigen::VectorXd gradient(std::span<const Bag> bags, const ModelWeights& weights,
                         const NormalizationMode& mode, bool use_annotator_weights) {
  return std::move(evaluate_objective(bags, weights, mode, use_annotator_weights, false).gradient);
}

ObjectiveReport evaluate_objective(std::span<const Bag> bags, const ModelWeights& weights,
                                   const NormalizationMode& mode, bool use_annotator_weights,
                                   bool with_hessian) {
  check_inputs(bags, weights);
  const ModeWeights mode_weight(bags, mode);
  const Eigen::Index d = weights.dim();

  ObjectiveReport report;
  report.gradient = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd hess;
  if (with_hessian) hess = Eigen::MatrixXd::Zero(d, d);

  double divergence = 0.0;
  for (const Bag& bag : bags) {
    const BagEval ev = eval_instances(bag, weights);
    const BagLogProb lp = log_prob_from_sum(ev.softplus_sum);
    const double scale =
        mode_weight(bag) * (use_annotator_weights ? bag.annotator_weight : 1.0);
    divergence += scale * divergence_from_log_prob(bag.p_target, lp);

    if (bag.kind == BagKind::kHardNegative) {
      // Single negative instance: g = x sigma, H = x x' sigma (1 - sigma).
      const double sig = ev.sig[0];
      report.gradient.noalias() += (scale * sig) * bag.instances.row(0).transpose();
      if (with_hessian) {
        const double c = sig * (1.0 - sig);
        hess.noalias() +=
            (scale * c) * (bag.instances.row(0).transpose() * bag.instances.row(0));
      }
      continue;
    }

    const double p = std::clamp(-std::expm1(-ev.softplus_sum), kProbEps, 1.0 - kProbEps);
    const double ratio = bag.p_target / p - 1.0;
    const Eigen::VectorXd xg = bag.instances.transpose() * ev.sig;
    report.gradient.noalias() += (-scale * ratio) * xg;
    if (with_hessian) {
      const Eigen::ArrayXd c = ev.sig.array() * (1.0 - ev.sig.array());
      const Eigen::MatrixXd weighted = c.matrix().asDiagonal() * bag.instances;
      const double beta_term = (1.0 - p) / (p * p);  // beta (beta + 1)
      hess.noalias() += (-scale * ratio) * (bag.instances.transpose() * weighted);
      hess.noalias() += (scale * bag.p_target * beta_term) * (xg * xg.transpose());
    }
  }

  report.value = divergence + l1_penalty(weights, mode.lambda);
  if (with_hessian) {
    hess = ((hess + hess.transpose()) * 0.5).eval();  // enforce exact symmetry
    report.hessian = std::move(hess);
  }
  return report;
}

Eigen::MatrixXd hessian(std::span<const Bag> bags, const ModelWeights& weights,
                        const NormalizationMode& mode, bool use_annotator_weights) {
  return *std::move(evaluate_objective(bags, weights, mode, use_annotator_weights, true).hessian);
}

double hard_label_objective(std::span<const Bag> bags, const ModelWeights& weights) {
  for (const Bag& bag : bags) {
    if (bag.p_target != 0.0 && bag.p_target != 1.0) {
      throw std::invalid_argument("hard_label_objective: bag " + std::to_string(bag.bag_id) +
                                  " has a non-binary target");
    }
  }
  return objective(bags, weights, NormalizationMode{Normalization::kRaw, 0.0}, false);
}

}  // namespace softmil

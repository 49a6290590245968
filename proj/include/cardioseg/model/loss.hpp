#pragma once

#include <random>
#include <set>
#include <vector>

#include "cardioseg/core/image.hpp"
#include "cardioseg/model/network.hpp"

namespace cardioseg::model {

inline constexpr double kDiceEpsilon = 1e-5;

/// Ground truth for one batch element. Classes outside `labeled` are merged into
/// background: the truth cannot distinguish them, so the loss does not either.
struct Target {
  const LabelMask2D* mask = nullptr;
  std::set<ClassId> labeled{ClassId::RV, ClassId::LVM, ClassId::LVC};
};

struct LossTerms {
  double ce = 0;    // mean pixel cross-entropy
  double dice = 0;  // 1 - mean soft dice over the classes present in the target's class groups
  double l2 = 0;    // weight_decay * sum of squared conv weights
  double total() const { return ce + dice + l2; }
};

/// CE and soft-dice terms evaluated on probabilities (no gradients).
LossTerms loss_from_probs(const Tensor& probs, const std::vector<Target>& targets);

/// Mean over batch elements and class groups of (2 sum pg + eps) / (sum p + sum g + eps).
double soft_dice(const Tensor& probs, const std::vector<Target>& targets);

/// CE + dice terms from logits; writes d(ce + dice)/d(logits) into `dlogits` when non-null.
LossTerms loss_from_logits(const Tensor& logits, const std::vector<Target>& targets, Tensor* dlogits);

double l2_penalty(const Network& net, double weight_decay);

struct LossAndGrad {
  LossTerms terms;
  std::vector<Tensor> grads;  // one per net.params entry
};

/// Full objective for one batch: forward (dropout driven by `dropout_rng` when non-null),
/// CE + dice + L2, and the analytic gradient of every parameter.
LossAndGrad loss_and_gradients(const Network& net, const Tensor& batch, const std::vector<Target>& targets,
                               double weight_decay, std::mt19937_64* dropout_rng);

}  // namespace cardioseg::model

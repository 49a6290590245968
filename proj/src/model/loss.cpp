#include "cardioseg/model/loss.hpp"

#include <cmath>

#include "cardioseg/core/error.hpp"

namespace cardioseg::model {

namespace {

struct Groups {
  std::vector<int> of;      // class -> group id (a class id)
  std::vector<int> ids;     // distinct group ids, ascending
};

Groups groups_for(const Target& t, int classes) {
  Groups g;
  g.of.resize(classes);
  for (int c = 0; c < classes; ++c) {
    const bool own = c == 0 || c >= kNumClasses || t.labeled.count(static_cast<ClassId>(c));
    g.of[c] = own ? c : 0;
    if (own) g.ids.push_back(c);
  }
  return g;
}

void check_targets(const Tensor& t, const std::vector<Target>& targets) {
  if (targets.size() != static_cast<std::size_t>(t.n))
    throw Error(ErrorCode::ShapeMismatch, "batch has " + std::to_string(t.n) + " elements but " +
                                              std::to_string(targets.size()) + " targets");
  for (const auto& tg : targets) {
    if (!tg.mask) throw Error(ErrorCode::ShapeMismatch, "target without mask");
    if (tg.mask->height() != t.h || tg.mask->width() != t.w)
      throw Error(ErrorCode::ShapeMismatch, "target mask dimensions differ from prediction");
    for (auto v : tg.mask->pixels())
      if (v >= t.c) throw Error(ErrorCode::InvalidMask, "target class " + std::to_string(v) + " out of range");
  }
}

struct DiceSums {
  std::vector<double> inter, sp, sg;  // indexed by group id
};

DiceSums dice_sums(const Tensor& probs, int n, const Groups& g, const LabelMask2D& mask) {
  const std::size_t P = probs.plane();
  DiceSums s{std::vector<double>(probs.c), std::vector<double>(probs.c), std::vector<double>(probs.c)};
  const double* base = probs.v.data() + static_cast<std::size_t>(n) * probs.c * P;
  for (std::size_t i = 0; i < P; ++i) {
    const int gt = g.of[mask.pixels()[i]];
    for (int c = 0; c < probs.c; ++c) {
      const double p = base[c * P + i];
      s.sp[g.of[c]] += p;
      if (g.of[c] == gt) s.inter[gt] += p;
    }
    s.sg[gt] += 1.0;
  }
  return s;
}

double mean_dice(const DiceSums& s, const Groups& g) {
  double acc = 0;
  for (int id : g.ids) acc += (2 * s.inter[id] + kDiceEpsilon) / (s.sp[id] + s.sg[id] + kDiceEpsilon);
  return acc / static_cast<double>(g.ids.size());
}

}  // namespace

double soft_dice(const Tensor& probs, const std::vector<Target>& targets) {
  check_targets(probs, targets);
  double acc = 0;
  for (int n = 0; n < probs.n; ++n) {
    const Groups g = groups_for(targets[n], probs.c);
    acc += mean_dice(dice_sums(probs, n, g, *targets[n].mask), g);
  }
  return acc / probs.n;
}

LossTerms loss_from_probs(const Tensor& probs, const std::vector<Target>& targets) {
  check_targets(probs, targets);
  const std::size_t P = probs.plane();
  LossTerms t;
  for (int n = 0; n < probs.n; ++n) {
    const Groups g = groups_for(targets[n], probs.c);
    const double* base = probs.v.data() + static_cast<std::size_t>(n) * probs.c * P;
    for (std::size_t i = 0; i < P; ++i) {
      const int gt = g.of[targets[n].mask->pixels()[i]];
      double q = 0;
      for (int c = 0; c < probs.c; ++c)
        if (g.of[c] == gt) q += base[c * P + i];
      t.ce -= std::log(q);
    }
  }
  t.ce /= static_cast<double>(probs.n) * P;
  t.dice = 1.0 - soft_dice(probs, targets);
  return t;
}

LossTerms loss_from_logits(const Tensor& logits, const std::vector<Target>& targets, Tensor* dlogits) {
  check_targets(logits, targets);
  const Tensor probs = softmax(logits);
  const std::size_t P = logits.plane();
  const int C = logits.c;
  const double inv_pixels = 1.0 / (static_cast<double>(logits.n) * P);
  const double inv_batch = 1.0 / logits.n;
  if (dlogits) *dlogits = Tensor(logits.n, logits.c, logits.h, logits.w);

  LossTerms t;
  double dice_acc = 0;
  std::vector<double> z(C), dp(C), dP(C);
  for (int n = 0; n < logits.n; ++n) {
    const Groups g = groups_for(targets[n], C);
    const LabelMask2D& mask = *targets[n].mask;
    const std::size_t off = static_cast<std::size_t>(n) * C * P;
    const DiceSums s = dice_sums(probs, n, g, mask);
    dice_acc += mean_dice(s, g);
    const double wg = inv_batch / static_cast<double>(g.ids.size());

    for (std::size_t i = 0; i < P; ++i) {
      const int gt = g.of[mask.pixels()[i]];
      double mx = -INFINITY;
      for (int c = 0; c < C; ++c) {
        z[c] = logits.v[off + c * P + i];
        mx = std::max(mx, z[c]);
      }
      double all = 0, grp = 0;
      for (int c = 0; c < C; ++c) {
        const double e = std::exp(z[c] - mx);
        all += e;
        if (g.of[c] == gt) grp += e;
      }
      t.ce += std::log(all) - std::log(grp);
      if (!dlogits) continue;

      // dice gradient w.r.t. the group probabilities, then w.r.t. each class probability
      for (int id : g.ids) {
        const double den = s.sp[id] + s.sg[id] + kDiceEpsilon;
        const double num = 2 * s.inter[id] + kDiceEpsilon;
        const double gi = id == gt ? 1.0 : 0.0;
        dP[id] = -wg * (2 * gi / den - num / (den * den));
      }
      double dot = 0;
      for (int c = 0; c < C; ++c) {
        dp[c] = dP[g.of[c]];
        dot += probs.v[off + c * P + i] * dp[c];
      }
      for (int c = 0; c < C; ++c) {
        const double p = probs.v[off + c * P + i];
        const double in_grp = g.of[c] == gt ? std::exp(z[c] - mx) / grp : 0.0;
        dlogits->v[off + c * P + i] = (p - in_grp) * inv_pixels + p * (dp[c] - dot);
      }
    }
  }
  t.ce *= inv_pixels;
  t.dice = 1.0 - dice_acc * inv_batch;
  return t;
}

double l2_penalty(const Network& net, double weight_decay) {
  double s = 0;
  for (const auto& p : net.params)
    if (p.kind == ParamKind::ConvWeight)
      for (double w : p.value.v) s += w * w;
  return weight_decay * s;
}

LossAndGrad loss_and_gradients(const Network& net, const Tensor& batch, const std::vector<Target>& targets,
                               double weight_decay, std::mt19937_64* dropout_rng) {
  Graph g(true);
  std::vector<NodeId> pn;
  const NodeId x = g.constant(batch);
  const NodeId logits = forward_logits(g, net, x, pn, dropout_rng);
  LossAndGrad out;
  Tensor dl;
  out.terms = loss_from_logits(g.value(logits), targets, &dl);
  out.terms.l2 = l2_penalty(net, weight_decay);
  g.backward(logits, dl);
  out.grads.reserve(net.params.size());
  for (std::size_t i = 0; i < net.params.size(); ++i) {
    const Tensor& v = net.params[i].value;
    const Tensor& gr = g.grad(pn[i]);
    Tensor d = gr.size() ? gr : Tensor(v.n, v.c, v.h, v.w);
    if (net.params[i].kind == ParamKind::ConvWeight)
      for (std::size_t k = 0; k < d.size(); ++k) d.v[k] += 2 * weight_decay * v.v[k];
    out.grads.push_back(std::move(d));
  }
  return out;
}

}  // namespace cardioseg::model

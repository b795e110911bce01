#pragma once

#include <map>
#include <string>
#include <vector>

#include "attnseg/ops.hpp"

namespace attnseg {

struct LossWeights {
  Scalar adv = 0.1;
  Scalar dice = 1.0;
  Scalar ssim = 1.0;
  Scalar l1 = 1.0;
  Scalar guide = 1.0;
  Scalar cross_entropy = 0.0;
  std::vector<Scalar> stage_weights;  // empty = 1 for every stage

  Scalar stage_weight(int s) const {
    return stage_weights.empty() ? Scalar(1) : stage_weights.at((size_t)s);
  }
  void validate(bool guided_attention) const;
};

// mean absolute difference over all elements
Var l1_loss(const Var& pred, const Var& target);

// 1 - (2*sum(p*y)+eps)/(sum(p^2)+sum(y^2)+eps), per (sample, channel) plane,
// averaged. Inputs in [0,1].
Var dice_loss(const Var& pred, const Var& target, Scalar eps = 1e-6);

// Mean windowed structural similarity over every (sample, channel) plane.
// 11x11 uniform window, stride 1, symmetric reflective padding, constants for
// dynamic range 1. Accepts [N,C,H,W] or [H,W].
Var ssim(const Var& a, const Var& b);
Var ssim_loss(const Var& a, const Var& b);  // 1 - ssim

// least-squares adversarial objectives
Var adversarial_g_loss(const Var& fake_logits);
Var adversarial_g_loss(const std::vector<Var>& fake_logit_maps);
Var adversarial_d_loss(const Var& real_logits, const Var& fake_logits);

// -mean log p at the target class (behind a config flag, off by default)
Var cross_entropy_loss(const Var& pred_probs, const Var& target_onehot);

struct LossBreakdown {
  // e.g. {"stage0/dice": 0.4, ..., "guide": 0.1, "total": ...}
  std::map<std::string, Scalar> terms;
};

// Composite multi-stage generator objective:
//   sum_s w_s * [adv*adv_s + dice*dice_s + ssim*ssim_s + l1*l1_s (+ ce)]
//   + guide * guided_attention_penalty(maps, mask)
// fake_logit_maps may be empty when weights.adv == 0; maps may be empty when
// weights.guide == 0 or attention produces no spatial map.
Var total_generator_loss(const std::vector<Var>& stage_preds,
                         const std::vector<Var>& stage_targets,
                         const std::vector<Var>& fake_logit_maps,
                         const std::vector<Var>& attention_maps, const Tensor& mask,
                         const LossWeights& weights, LossBreakdown* breakdown);

}  // namespace attnseg

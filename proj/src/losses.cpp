#include "attnseg/losses.hpp"

#include <cmath>

#include "attnseg/attention.hpp"

namespace attnseg {

void LossWeights::validate(bool guided_attention) const {
  if (adv < 0 || dice < 0 || ssim < 0 || l1 < 0 || guide < 0 || cross_entropy < 0)
    throw ConfigError("loss weights must be non-negative");
  if (dice <= 0 && ssim <= 0 && l1 <= 0)
    throw ConfigError("at least one of dice/ssim/l1 weights must be positive");
  if (guide > 0 && !guided_attention)
    throw ConfigError("guide weight requires guided attention");
  for (Scalar w : stage_weights)
    if (w < 0) throw ConfigError("stage weights must be non-negative");
}

Var l1_loss(const Var& pred, const Var& target) {
  check_shape(pred.value().same_shape(target.value()), "l1_loss: shape mismatch");
  return ops::mean_all(ops::abs_(ops::sub(pred, target)));
}

Var dice_loss(const Var& pred, const Var& target, Scalar eps) {
  check_shape(pred.value().same_shape(target.value()), "dice_loss: shape mismatch");
  Var p = pred, y = target;
  if (pred.value().rank() == 2) {
    const auto& s = pred.value().shape();
    p = ops::reshape(p, {1, 1, s[0], s[1]});
    y = ops::reshape(y, {1, 1, s[0], s[1]});
  }
  check_shape(p.value().rank() == 4, "dice_loss: expected [N,C,H,W] or [H,W]");
  Var inter = ops::sum_hw(ops::mul(p, y));           // [N,C]
  Var pp = ops::sum_hw(ops::mul(p, p));
  Var yy = ops::sum_hw(ops::mul(y, y));
  Var ratio = ops::div(ops::add_scalar(ops::mul_scalar(inter, 2), eps),
                       ops::add_scalar(ops::add(pp, yy), eps));
  return ops::add_scalar(ops::mul_scalar(ops::mean_all(ratio), -1), 1);
}

namespace {

constexpr int kSsimWindow = 11;
constexpr Scalar kSsimC1 = 0.01 * 0.01;  // dynamic range 1
constexpr Scalar kSsimC2 = 0.03 * 0.03;

// separable uniform window; combined weight 1/121
Var box_filter(const Var& x) {
  const auto& s = x.value().shape();
  const int planes = s[0] * s[1];
  Var r = ops::reshape(x, {planes, 1, s[2], s[3]});
  Var padded = ops::reflect_pad2d(r, kSsimWindow / 2);
  static const Tensor kRow = Tensor::full({1, 1, kSsimWindow, 1}, 1.0 / kSsimWindow);
  static const Tensor kCol = Tensor::full({1, 1, 1, kSsimWindow}, 1.0 / kSsimWindow);
  Var v = ops::conv2d(padded, constant(kRow), Var(), 1, 0);
  v = ops::conv2d(v, constant(kCol), Var(), 1, 0);
  return ops::reshape(v, s);
}

}  // namespace

Var ssim(const Var& a, const Var& b) {
  check_shape(a.value().same_shape(b.value()), "ssim: shape mismatch");
  Var x = a, y = b;
  if (a.value().rank() == 2) {
    const auto& s = a.value().shape();
    x = ops::reshape(x, {1, 1, s[0], s[1]});
    y = ops::reshape(y, {1, 1, s[0], s[1]});
  }
  check_shape(x.value().rank() == 4, "ssim: expected [N,C,H,W] or [H,W]");
  check_shape(x.value().dim(2) >= kSsimWindow / 2 && x.value().dim(3) >= kSsimWindow / 2,
              "ssim: image smaller than half the window");
  Var mx = box_filter(x);
  Var my = box_filter(y);
  Var mxy = box_filter(ops::mul(x, y));
  Var mxx = box_filter(ops::mul(x, x));
  Var myy = box_filter(ops::mul(y, y));
  Var mx_my = ops::mul(mx, my);
  Var cov = ops::sub(mxy, mx_my);
  Var vx = ops::sub(mxx, ops::mul(mx, mx));
  Var vy = ops::sub(myy, ops::mul(my, my));
  Var num = ops::mul(ops::add_scalar(ops::mul_scalar(mx_my, 2), kSsimC1),
                     ops::add_scalar(ops::mul_scalar(cov, 2), kSsimC2));
  Var den = ops::mul(
      ops::add_scalar(ops::add(ops::mul(mx, mx), ops::mul(my, my)), kSsimC1),
      ops::add_scalar(ops::add(vx, vy), kSsimC2));
  return ops::mean_all(ops::div(num, den));
}

Var ssim_loss(const Var& a, const Var& b) {
  return ops::add_scalar(ops::mul_scalar(ssim(a, b), -1), 1);
}

Var adversarial_g_loss(const Var& fake_logits) {
  return ops::mean_all(
      ops::pow_scalar(ops::add_scalar(fake_logits, -1), 2));
}

Var adversarial_g_loss(const std::vector<Var>& fake_logit_maps) {
  check_shape(!fake_logit_maps.empty(), "adversarial_g_loss: no logit maps");
  Var acc;
  for (const Var& m : fake_logit_maps) {
    Var t = adversarial_g_loss(m);
    acc = acc.defined() ? ops::add(acc, t) : t;
  }
  return ops::mul_scalar(acc, Scalar(1) / (Scalar)fake_logit_maps.size());
}

Var adversarial_d_loss(const Var& real_logits, const Var& fake_logits) {
  Var real_term = ops::mean_all(ops::pow_scalar(ops::add_scalar(real_logits, -1), 2));
  Var fake_term = ops::mean_all(ops::pow_scalar(fake_logits, 2));
  return ops::add(real_term, fake_term);
}

Var cross_entropy_loss(const Var& pred_probs, const Var& target_onehot) {
  check_shape(pred_probs.value().same_shape(target_onehot.value()),
              "cross_entropy_loss: shape mismatch");
  const auto& s = pred_probs.value().shape();
  Var ln = ops::mul(target_onehot, ops::log_(ops::add_scalar(pred_probs, 1e-12)));
  const Scalar pixels = (Scalar)s[0] * s[2] * s[3];
  return ops::mul_scalar(ops::sum_all(ln), -1.0 / pixels);
}

Var total_generator_loss(const std::vector<Var>& stage_preds,
                         const std::vector<Var>& stage_targets,
                         const std::vector<Var>& fake_logit_maps,
                         const std::vector<Var>& attention_maps, const Tensor& mask,
                         const LossWeights& weights, LossBreakdown* breakdown) {
  check_shape(stage_preds.size() == stage_targets.size(),
              "total_generator_loss: stage count mismatch");
  if (weights.adv > 0)
    check_shape(fake_logit_maps.size() == stage_preds.size(),
                "total_generator_loss: need one logit map per stage");
  Var total;
  auto record = [&](const std::string& key, const Var& v) {
    if (breakdown) breakdown->terms[key] = v.item();
  };
  auto push = [&](const Var& v) { total = total.defined() ? ops::add(total, v) : v; };

  for (size_t s = 0; s < stage_preds.size(); ++s) {
    const Scalar w = weights.stage_weight((int)s);
    const std::string tag = "stage" + std::to_string(s) + "/";
    if (weights.adv > 0) {
      Var adv = adversarial_g_loss(fake_logit_maps[s]);
      record(tag + "adv", adv);
      push(ops::mul_scalar(adv, w * weights.adv));
    }
    if (weights.dice > 0) {
      Var d = dice_loss(stage_preds[s], stage_targets[s]);
      record(tag + "dice", d);
      push(ops::mul_scalar(d, w * weights.dice));
    }
    if (weights.ssim > 0) {
      Var sl = ssim_loss(stage_preds[s], stage_targets[s]);
      record(tag + "ssim", sl);
      push(ops::mul_scalar(sl, w * weights.ssim));
    }
    if (weights.l1 > 0) {
      Var l = l1_loss(stage_preds[s], stage_targets[s]);
      record(tag + "l1", l);
      push(ops::mul_scalar(l, w * weights.l1));
    }
    if (weights.cross_entropy > 0) {
      Var ce = cross_entropy_loss(stage_preds[s], stage_targets[s]);
      record(tag + "ce", ce);
      push(ops::mul_scalar(ce, w * weights.cross_entropy));
    }
  }
  if (weights.guide > 0 && !attention_maps.empty()) {
    Var g = guided_attention_penalty(attention_maps, mask);
    record("guide", g);
    push(ops::mul_scalar(g, weights.guide));
  }
  if (!total.defined()) total = constant(Tensor::scalar(0));
  if (breakdown) breakdown->terms["total"] = total.item();
  return total;
}

}  // namespace attnseg

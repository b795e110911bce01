#include "attnseg/attention.hpp"

#include "attnseg/data.hpp"

namespace attnseg {

AttentionKind attention_kind_from_string(const std::string& s) {
  if (s == "none") return AttentionKind::none;
  if (s == "channel") return AttentionKind::channel;
  if (s == "spatial") return AttentionKind::spatial;
  if (s == "serial") return AttentionKind::serial;
  if (s == "parallel") return AttentionKind::parallel;
  throw ConfigError("unknown attention kind: " + s);
}

std::string to_string(AttentionKind k) {
  switch (k) {
    case AttentionKind::none: return "none";
    case AttentionKind::channel: return "channel";
    case AttentionKind::spatial: return "spatial";
    case AttentionKind::serial: return "serial";
    case AttentionKind::parallel: return "parallel";
  }
  return "?";
}

AttentionPlacement attention_placement_from_string(const std::string& s) {
  if (s == "last_stage") return AttentionPlacement::last_stage;
  if (s == "multi_stage") return AttentionPlacement::multi_stage;
  throw ConfigError("unknown attention placement: " + s);
}

std::string to_string(AttentionPlacement p) {
  return p == AttentionPlacement::last_stage ? "last_stage" : "multi_stage";
}

ChannelGateForm channel_gate_from_string(const std::string& s) {
  if (s == "paper") return ChannelGateForm::paper;
  if (s == "single_sigmoid") return ChannelGateForm::single_sigmoid;
  throw ConfigError("unknown channel gate form: " + s);
}

std::string to_string(ChannelGateForm f) {
  return f == ChannelGateForm::paper ? "paper" : "single_sigmoid";
}

void AttentionConfig::validate() const {
  if (reduction < 1) throw ConfigError("attention.reduction must be >= 1");
  if (guided && !has_spatial_map())
    throw ConfigError("attention.guided requires a kind with a spatial map "
                      "(spatial, serial or parallel)");
}

ChannelAttention::ChannelAttention(int channels, int reduction, ChannelGateForm form,
                                   Rng& rng)
    : form_(form), channels_(channels) {
  if (reduction < 1 || channels % reduction != 0)
    throw ConfigError("channel attention: reduction must divide channel count");
  const int hidden = channels / reduction;
  fc1_ = nn::Linear(channels, hidden, rng);
  fc2_ = nn::Linear(hidden, channels, rng);
}

Var ChannelAttention::gate(const Var& f) const {
  check_shape(f.value().rank() == 4 && f.value().dim(1) == channels_,
              "channel attention: channel mismatch");
  Var avg = fc2_(ops::relu(fc1_(ops::mean_hw(f))));
  Var mx = fc2_(ops::relu(fc1_(ops::max_hw(f))));
  if (form_ == ChannelGateForm::paper)
    return ops::add(ops::sigmoid(avg), ops::sigmoid(mx));
  return ops::sigmoid(ops::add(avg, mx));
}

void ChannelAttention::collect(const std::string& prefix, nn::ParamList& out) const {
  fc1_.collect(prefix + ".fc1", out);
  fc2_.collect(prefix + ".fc2", out);
}

SpatialAttention::SpatialAttention(int channels, Rng& rng) : channels_(channels) {
  conv_ = nn::Conv2d(channels, 1, 1, 1, 0, rng);
}

Var SpatialAttention::map(const Var& f) const {
  check_shape(f.value().rank() == 4 && f.value().dim(1) == channels_,
              "spatial attention: channel mismatch");
  return ops::sigmoid(conv_(f));
}

void SpatialAttention::collect(const std::string& prefix, nn::ParamList& out) const {
  conv_.collect(prefix + ".conv", out);
}

AttentionOut apply_serial(const Var& f, const ChannelAttention& ca,
                          const SpatialAttention& sa) {
  Var gated = ca.apply(f);
  Var map = sa.map(gated);
  return {ops::scale_spatial(gated, map), map};
}

AttentionOut apply_parallel(const Var& f, const ChannelAttention& ca,
                            const SpatialAttention& sa) {
  Var gate = ca.gate(f);
  Var map = sa.map(f);
  return {ops::scale_spatial(ops::scale_channels(f, gate), map), map};
}

AttentionBlock::AttentionBlock(int channels, const AttentionConfig& cfg, Rng& rng)
    : kind_(cfg.kind) {
  cfg.validate();
  if (cfg.has_channel_gate())
    channel_ = ChannelAttention(channels, cfg.reduction, cfg.channel_gate, rng);
  if (cfg.has_spatial_map()) spatial_ = SpatialAttention(channels, rng);
}

AttentionOut AttentionBlock::forward(const Var& f) const {
  switch (kind_) {
    case AttentionKind::none:
      return {f, Var()};
    case AttentionKind::channel:
      return {channel_.apply(f), Var()};
    case AttentionKind::spatial: {
      Var m = spatial_.map(f);
      return {ops::scale_spatial(f, m), m};
    }
    case AttentionKind::serial:
      return apply_serial(f, channel_, spatial_);
    case AttentionKind::parallel:
      return apply_parallel(f, channel_, spatial_);
  }
  return {f, Var()};
}

void AttentionBlock::collect(const std::string& prefix, nn::ParamList& out) const {
  if (kind_ == AttentionKind::channel || kind_ == AttentionKind::serial ||
      kind_ == AttentionKind::parallel)
    channel_.collect(prefix + ".channel", out);
  if (kind_ == AttentionKind::spatial || kind_ == AttentionKind::serial ||
      kind_ == AttentionKind::parallel)
    spatial_.collect(prefix + ".spatial", out);
}

Var guided_attention_penalty(const std::vector<Var>& maps, const Tensor& mask) {
  check_shape(!maps.empty(), "guided_attention_penalty: no maps");
  const bool batched = mask.rank() == 3;
  check_shape(batched || mask.rank() == 2,
              "guided_attention_penalty: mask must be [H,W] or [N,H,W]");
  const int H = mask.dim(batched ? 1 : 0);
  const int W = mask.dim(batched ? 2 : 1);
  Var acc;
  for (const Var& m : maps) {
    check_shape(m.value().rank() == 4 && m.value().dim(1) == 1,
                "guided_attention_penalty: maps must be [N,1,h,w]");
    const int h = m.value().dim(2), w = m.value().dim(3);
    if (h < 1 || H % h != 0 || w < 1 || W % w != 0)
      throw ShapeError("guided_attention_penalty: map size must divide mask size");
    const int f = H / h;
    if (W / w != f)
      throw ShapeError("guided_attention_penalty: anisotropic map/mask ratio");
    const int N = m.value().dim(0);
    if (batched)
      check_shape(N == mask.dim(0), "guided_attention_penalty: batch mismatch");
    else
      check_shape(N == 1, "guided_attention_penalty: [H,W] mask needs N=1 maps");
    Tensor target({N, 1, h, w});
    for (int n = 0; n < N; ++n) {
      Tensor slice({H, W});
      const Scalar* src = mask.data() + (batched ? (long long)n * H * W : 0);
      std::copy(src, src + (long long)H * W, slice.data());
      Tensor down = data::downsample_mask(slice, f);
      std::copy(down.data(), down.data() + (long long)h * w,
                target.data() + (long long)n * h * w);
    }
    Var term = ops::mean_all(ops::abs_(ops::sub(m, constant(std::move(target)))));
    acc = acc.defined() ? ops::add(acc, term) : term;
  }
  return ops::mul_scalar(acc, Scalar(1) / (Scalar)maps.size());
}

}  // namespace attnseg

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "attnseg/nn.hpp"

namespace attnseg {

enum class AttentionKind { none, channel, spatial, serial, parallel };
enum class AttentionPlacement { last_stage, multi_stage };
// The channel gate as printed is a sum of two sigmoids with range (0,2);
// single_sigmoid is the conventional variant for comparison.
enum class ChannelGateForm { paper, single_sigmoid };

AttentionKind attention_kind_from_string(const std::string& s);
std::string to_string(AttentionKind k);
AttentionPlacement attention_placement_from_string(const std::string& s);
std::string to_string(AttentionPlacement p);
ChannelGateForm channel_gate_from_string(const std::string& s);
std::string to_string(ChannelGateForm f);

struct AttentionConfig {
  AttentionKind kind = AttentionKind::none;
  AttentionPlacement placement = AttentionPlacement::last_stage;
  bool guided = false;
  int reduction = 8;
  ChannelGateForm channel_gate = ChannelGateForm::paper;

  bool has_spatial_map() const {
    return kind == AttentionKind::spatial || kind == AttentionKind::serial ||
           kind == AttentionKind::parallel;
  }
  bool has_channel_gate() const {
    return kind == AttentionKind::channel || kind == AttentionKind::serial ||
           kind == AttentionKind::parallel;
  }
  void validate() const;
};

// Per-channel gate from globally pooled features through a shared two-layer
// perceptron: gate = sigma(MLP(avgpool F)) + sigma(MLP(maxpool F)).
class ChannelAttention {
 public:
  ChannelAttention() = default;
  ChannelAttention(int channels, int reduction, ChannelGateForm form, Rng& rng);

  Var gate(const Var& f) const;  // [N,C]
  Var apply(const Var& f) const { return ops::scale_channels(f, gate(f)); }
  void collect(const std::string& prefix, nn::ParamList& out) const;
  int channels() const { return channels_; }

 private:
  nn::Linear fc1_, fc2_;
  ChannelGateForm form_ = ChannelGateForm::paper;
  int channels_ = 0;
};

// Per-pixel gate: map = sigma(conv1x1(F)).
class SpatialAttention {
 public:
  SpatialAttention() = default;
  SpatialAttention(int channels, Rng& rng);

  Var map(const Var& f) const;  // [N,1,H,W]
  Var apply(const Var& f) const { return ops::scale_spatial(f, map(f)); }
  void collect(const std::string& prefix, nn::ParamList& out) const;
  int channels() const { return channels_; }

 private:
  nn::Conv2d conv_;
  int channels_ = 0;
};

struct AttentionOut {
  Var features;
  Var map;  // undefined unless the kind produces a spatial map
};

// One attention insertion point: channel / spatial alone, or the serial and
// parallel combinations of both.
class AttentionBlock {
 public:
  AttentionBlock() = default;
  AttentionBlock(int channels, const AttentionConfig& cfg, Rng& rng);

  AttentionOut forward(const Var& f) const;
  void collect(const std::string& prefix, nn::ParamList& out) const;
  AttentionKind kind() const { return kind_; }

 private:
  AttentionKind kind_ = AttentionKind::none;
  ChannelAttention channel_;
  SpatialAttention spatial_;
};

// serial: channel gate first, spatial map computed from the gated features
AttentionOut apply_serial(const Var& f, const ChannelAttention& ca,
                          const SpatialAttention& sa);
// parallel: both gates computed from the same input, applied multiplicatively
AttentionOut apply_parallel(const Var& f, const ChannelAttention& ca,
                            const SpatialAttention& sa);

// Mean over maps of the mean absolute difference between each map and the
// guidance mask averaged down to the map's resolution. mask is [H,W] or
// [N,H,W]; every map size must divide it.
Var guided_attention_penalty(const std::vector<Var>& maps, const Tensor& mask);

}  // namespace attnseg

#pragma once

#include "attnseg/generator.hpp"
#include "attnseg/nn.hpp"

namespace attnseg {

struct DiscriminatorConfig {
  int layers = 3;      // stride-2 convs before the final stride-1 logit conv
  int base_width = 12;
  int kernel = 4;
  bool conditional = true;  // concatenate the scan with the candidate

  void validate() const;
};

// PatchGAN: a stack of stride-2 convs and a final stride-1 conv emitting a
// spatial grid of patch logits.
class PatchDiscriminator {
 public:
  PatchDiscriminator() = default;
  PatchDiscriminator(int in_channels, const DiscriminatorConfig& cfg, uint64_t seed);

  // condition: [N,1,h,w] scan at this stage's scale; candidate: [N,K,h,w].
  // With conditional=false the condition is ignored.
  Var forward(const Var& condition, const Var& candidate) const;

  nn::ParamList parameters() const;
  int in_channels() const { return in_channels_; }

  // conv output-size recurrence o = floor((i + 2p - k)/s) + 1 applied per layer
  static std::pair<int, int> logit_map_size(int h, int w, const DiscriminatorConfig& cfg);
  // input-space receptive field of one logit
  static int receptive_field(const DiscriminatorConfig& cfg);

 private:
  DiscriminatorConfig cfg_;
  int in_channels_ = 0;
  std::vector<nn::Conv2d> convs_;
  std::vector<nn::InstanceNorm> norms_;  // none for the first conv
  nn::Conv2d final_;
};

// One discriminator per generator stage, each sized to that stage's scale.
std::vector<PatchDiscriminator> build_discriminators(const GeneratorConfig& gen_cfg,
                                                     const DiscriminatorConfig& cfg,
                                                     uint64_t seed);

}  // namespace attnseg

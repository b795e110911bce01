#include "attnseg/discriminator.hpp"

namespace attnseg {

void DiscriminatorConfig::validate() const {
  if (layers < 1) throw ConfigError("discriminator: need at least one conv layer");
  if (base_width < 1 || kernel < 2)
    throw ConfigError("discriminator: invalid width or kernel");
}

PatchDiscriminator::PatchDiscriminator(int in_channels, const DiscriminatorConfig& cfg,
                                       uint64_t seed)
    : cfg_(cfg), in_channels_(in_channels) {
  cfg.validate();
  Rng rng(hash_combine(seed, hash_str("discriminator")));
  int ci = in_channels;
  int co = cfg.base_width;
  for (int i = 0; i < cfg.layers; ++i) {
    convs_.push_back(nn::Conv2d(ci, co, cfg.kernel, 2, 1, rng));
    if (i > 0) norms_.push_back(nn::InstanceNorm(co));
    ci = co;
    co *= 2;
  }
  final_ = nn::Conv2d(ci, 1, cfg.kernel, 1, 1, rng);
}

Var PatchDiscriminator::forward(const Var& condition, const Var& candidate) const {
  Var x = cfg_.conditional ? ops::concat_channels(condition, candidate) : candidate;
  check_shape(x.value().dim(1) == in_channels_,
              "discriminator: input channel mismatch");
  for (size_t i = 0; i < convs_.size(); ++i) {
    x = convs_[i](x);
    if (i > 0) x = norms_[i - 1](x);
    x = ops::leaky_relu(x, 0.2);
  }
  return final_(x);
}

nn::ParamList PatchDiscriminator::parameters() const {
  nn::ParamList out;
  for (size_t i = 0; i < convs_.size(); ++i) {
    convs_[i].collect("conv" + std::to_string(i), out);
    if (i > 0) norms_[i - 1].collect("norm" + std::to_string(i), out);
  }
  final_.collect("final", out);
  return out;
}

std::pair<int, int> PatchDiscriminator::logit_map_size(int h, int w,
                                                       const DiscriminatorConfig& cfg) {
  auto step = [&](int v, int stride) { return (v + 2 * 1 - cfg.kernel) / stride + 1; };
  for (int i = 0; i < cfg.layers; ++i) {
    h = step(h, 2);
    w = step(w, 2);
    if (h < 1 || w < 1) throw ShapeError("discriminator: input too small");
  }
  h = step(h, 1);
  w = step(w, 1);
  if (h < 1 || w < 1) throw ShapeError("discriminator: input too small");
  return {h, w};
}

int PatchDiscriminator::receptive_field(const DiscriminatorConfig& cfg) {
  int r = 1;
  r = (r - 1) * 1 + cfg.kernel;  // final stride-1 conv
  for (int i = 0; i < cfg.layers; ++i) r = (r - 1) * 2 + cfg.kernel;
  return r;
}

std::vector<PatchDiscriminator> build_discriminators(const GeneratorConfig& gen_cfg,
                                                     const DiscriminatorConfig& cfg,
                                                     uint64_t seed) {
  const int in_ch = cfg.conditional ? 1 + gen_cfg.classes : gen_cfg.classes;
  std::vector<PatchDiscriminator> out;
  for (int s = 1; s <= gen_cfg.stages; ++s) {
    // check the stage resolution supports the depth
    PatchDiscriminator::logit_map_size(gen_cfg.input_h << s, gen_cfg.input_w << s, cfg);
    out.emplace_back(in_ch, cfg, hash_combine(seed, (uint64_t)s));
  }
  return out;
}

}  // namespace attnseg

#pragma once

#include "attnseg/attention.hpp"
#include "attnseg/nn.hpp"

namespace attnseg {

struct GeneratorConfig {
  int input_h = 16, input_w = 16;  // low-resolution input to the trunk
  int base_width = 32;
  int res_blocks = 4;
  int stages = 2;       // each superresolution stage upsamples x2
  int classes = 8;      // 7 layers + background
  int stage_width_floor = 16;
  AttentionConfig attention;

  int stage_width(int s) const {  // s in 1..stages
    int w = base_width >> s;
    return w < stage_width_floor ? stage_width_floor : w;
  }
  int output_h() const { return input_h << stages; }
  int output_w() const { return input_w << stages; }
  void validate() const;
};

// prediction at stage s (1-based) has spatial size input*2^s; attention_maps
// holds every spatial map produced at or before this stage
struct StageOutput {
  int stage = 0;
  Var prediction;                  // [N,K,h*2^s,w*2^s], per-pixel simplex
  std::vector<Var> attention_maps;
};

class Generator {
 public:
  Generator(const GeneratorConfig& cfg, uint64_t seed);

  // x: [N,1,input_h,input_w] -> one StageOutput per stage
  std::vector<StageOutput> forward(const Var& x) const;

  nn::ParamList parameters() const;
  long long param_count() const;
  const GeneratorConfig& config() const { return cfg_; }

  // number of spatial attention maps forward() will produce
  int expected_map_count() const;

 private:
  struct ResBlock {
    nn::Conv2d conv1, conv2;
    nn::InstanceNorm norm1, norm2;
    Var forward(const Var& x) const;
  };
  // channel-reduced transposed upsampling with a nearest-neighbor skip
  struct StageBlock {
    nn::Conv2d reduce, restore, skip;
    nn::ConvTranspose2d up;
    nn::InstanceNorm norm_reduce, norm_up, norm_restore;
    Var forward(const Var& x) const;
  };

  bool attend_at(int stage) const;  // 1-based

  GeneratorConfig cfg_;
  nn::Conv2d stem_;
  nn::InstanceNorm stem_norm_;
  std::vector<ResBlock> trunk_;
  std::vector<StageBlock> stage_blocks_;
  std::vector<AttentionBlock> attention_;  // aligned with stages; may be empty kind
  std::vector<nn::Conv2d> heads_;
};

// One-hot stage supervision targets: nearest-neighbor downsampled label,
// encoded per class. Returns one [K, h*2^s, w*2^s] tensor per stage (1-based
// stage order), the last at full label resolution.
std::vector<Tensor> stage_targets(const Tensor& label, int stages, int classes);

Tensor one_hot(const Tensor& label, int classes);  // [H,W] -> [K,H,W]

}  // namespace attnseg

#include "attnseg/generator.hpp"

#include <algorithm>

#include "attnseg/data.hpp"

namespace attnseg {

void GeneratorConfig::validate() const {
  if (input_h < 4 || input_w < 4)
    throw ConfigError("generator: input size must be at least 4x4");
  if (stages < 1) throw ConfigError("generator: need at least one stage");
  if (classes < 2) throw ConfigError("generator: need at least two classes");
  if (base_width < 4 || res_blocks < 1)
    throw ConfigError("generator: trunk too small");
  attention.validate();
}

Var Generator::ResBlock::forward(const Var& x) const {
  Var h = ops::relu(norm1(conv1(x)));
  h = norm2(conv2(h));
  return ops::add(x, h);
}

Var Generator::StageBlock::forward(const Var& x) const {
  Var h = ops::relu(norm_reduce(reduce(x)));
  h = ops::relu(norm_up(up(h)));
  h = norm_restore(restore(h));
  Var s = skip(ops::nearest_upsample2x(x));
  return ops::relu(ops::add(h, s));
}

Generator::Generator(const GeneratorConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(hash_combine(seed, hash_str("generator")));
  const int W = cfg_.base_width;
  stem_ = nn::Conv2d(1, W, 3, 1, 1, rng);
  stem_norm_ = nn::InstanceNorm(W);
  for (int i = 0; i < cfg_.res_blocks; ++i) {
    ResBlock b;
    b.conv1 = nn::Conv2d(W, W, 3, 1, 1, rng);
    b.norm1 = nn::InstanceNorm(W);
    b.conv2 = nn::Conv2d(W, W, 3, 1, 1, rng);
    b.norm2 = nn::InstanceNorm(W);
    trunk_.push_back(std::move(b));
  }
  int in_w = W;
  for (int s = 1; s <= cfg_.stages; ++s) {
    const int out_w = cfg_.stage_width(s);
    const int mid = std::max(out_w / 2, 4);
    StageBlock b;
    b.reduce = nn::Conv2d(in_w, mid, 1, 1, 0, rng);
    b.norm_reduce = nn::InstanceNorm(mid);
    b.up = nn::ConvTranspose2d(mid, mid, 4, 2, 1, rng);
    b.norm_up = nn::InstanceNorm(mid);
    b.restore = nn::Conv2d(mid, out_w, 1, 1, 0, rng);
    b.norm_restore = nn::InstanceNorm(out_w);
    b.skip = nn::Conv2d(in_w, out_w, 1, 1, 0, rng);
    stage_blocks_.push_back(std::move(b));

    AttentionConfig acfg = cfg_.attention;
    if (!attend_at(s)) acfg.kind = AttentionKind::none;
    attention_.emplace_back(out_w, acfg, rng);
    heads_.push_back(nn::Conv2d(out_w, cfg_.classes, 1, 1, 0, rng));
    in_w = out_w;
  }
}

bool Generator::attend_at(int stage) const {
  if (cfg_.attention.kind == AttentionKind::none) return false;
  if (cfg_.attention.placement == AttentionPlacement::multi_stage) return true;
  return stage == cfg_.stages;
}

int Generator::expected_map_count() const {
  if (!cfg_.attention.has_spatial_map()) return 0;
  return cfg_.attention.placement == AttentionPlacement::multi_stage ? cfg_.stages : 1;
}

std::vector<StageOutput> Generator::forward(const Var& x) const {
  check_shape(x.value().rank() == 4 && x.value().dim(1) == 1 &&
                  x.value().dim(2) == cfg_.input_h && x.value().dim(3) == cfg_.input_w,
              "generator: input must be [N,1," + std::to_string(cfg_.input_h) + "," +
                  std::to_string(cfg_.input_w) + "]");
  Var f = ops::relu(stem_norm_(stem_(x)));
  for (const auto& b : trunk_) f = b.forward(f);

  std::vector<StageOutput> outputs;
  std::vector<Var> maps;
  for (int s = 1; s <= cfg_.stages; ++s) {
    f = stage_blocks_[(size_t)s - 1].forward(f);
    AttentionOut att = attention_[(size_t)s - 1].forward(f);
    f = att.features;
    if (att.map.defined()) maps.push_back(att.map);
    StageOutput out;
    out.stage = s;
    out.prediction = ops::softmax_channels(heads_[(size_t)s - 1](f));
    out.attention_maps = maps;
    outputs.push_back(std::move(out));
  }
  return outputs;
}

nn::ParamList Generator::parameters() const {
  nn::ParamList out;
  stem_.collect("gen.stem", out);
  stem_norm_.collect("gen.stem_norm", out);
  for (size_t i = 0; i < trunk_.size(); ++i) {
    const std::string p = "gen.res" + std::to_string(i);
    trunk_[i].conv1.collect(p + ".conv1", out);
    trunk_[i].norm1.collect(p + ".norm1", out);
    trunk_[i].conv2.collect(p + ".conv2", out);
    trunk_[i].norm2.collect(p + ".norm2", out);
  }
  for (size_t i = 0; i < stage_blocks_.size(); ++i) {
    const std::string p = "gen.stage" + std::to_string(i + 1);
    stage_blocks_[i].reduce.collect(p + ".reduce", out);
    stage_blocks_[i].norm_reduce.collect(p + ".norm_reduce", out);
    stage_blocks_[i].up.collect(p + ".up", out);
    stage_blocks_[i].norm_up.collect(p + ".norm_up", out);
    stage_blocks_[i].restore.collect(p + ".restore", out);
    stage_blocks_[i].norm_restore.collect(p + ".norm_restore", out);
    stage_blocks_[i].skip.collect(p + ".skip", out);
    attention_[i].collect(p + ".attention", out);
    heads_[i].collect(p + ".head", out);
  }
  return out;
}

long long Generator::param_count() const {
  long long n = 0;
  for (const auto& p : parameters()) n += p.var.value().size();
  return n;
}

Tensor one_hot(const Tensor& label, int classes) {
  check_shape(label.rank() == 2, "one_hot: expected [H,W]");
  const int H = label.dim(0), W = label.dim(1);
  Tensor out({classes, H, W});
  for (long long i = 0; i < label.size(); ++i) {
    const int c = (int)label[i];
    check_shape(c >= 0 && c < classes, "one_hot: label value out of range");
    out[(long long)c * H * W + i] = 1.0;
  }
  return out;
}

std::vector<Tensor> stage_targets(const Tensor& label, int stages, int classes) {
  check_shape(label.rank() == 2, "stage_targets: expected [H,W]");
  std::vector<Tensor> out;
  for (int s = 1; s <= stages; ++s) {
    const int factor = 1 << (stages - s);
    Tensor lab = factor == 1 ? label : data::downsample_label(label, factor);
    out.push_back(one_hot(lab, classes));
  }
  return out;
}

}  // namespace attnseg

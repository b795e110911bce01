#include "attnseg/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

using nlohmann::json;

namespace attnseg {

void ExperimentConfig::validate() const {
  if (optimizer.lr <= 0) throw ConfigError("optimizer.lr must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (folds < 2) throw ConfigError("folds must be >= 2");
  if (sample_size < 8) throw ConfigError("sample_size must be >= 8");
  if (sample_size % (1 << generator.stages) != 0)
    throw ConfigError("sample_size must be divisible by 2^stages");
  if (generator_input() < 4)
    throw ConfigError("sample_size too small for the stage count");
  if (data.window < 8) throw ConfigError("data.window must be >= 8");
  if (data.window != sample_size)
    throw ConfigError("data.window must equal sample_size (crops feed training)");
  if (data.overlap < 0 || data.overlap >= 1)
    throw ConfigError("data.overlap must be in [0,1)");
  generator.validate();
  discriminator.validate();
  loss_weights.validate(generator.attention.guided);
}

namespace {

// strict key handling: every object must be fully consumed
void expect_keys(const json& j, const std::set<std::string>& allowed,
                 const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("unknown config key: " + where + it.key());
}

template <class T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig c;
  expect_keys(j,
              {"name", "seed", "dataset", "runs_dir", "folds", "epochs", "batch_size",
               "sample_size", "optimizer", "data", "generator", "attention",
               "discriminator", "loss_weights"},
              "");
  maybe(j, "name", c.name);
  maybe(j, "seed", c.seed);
  maybe(j, "dataset", c.dataset);
  maybe(j, "runs_dir", c.runs_dir);
  maybe(j, "folds", c.folds);
  maybe(j, "epochs", c.epochs);
  maybe(j, "batch_size", c.batch_size);
  maybe(j, "sample_size", c.sample_size);

  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    expect_keys(o, {"lr", "beta1", "beta2", "eps"}, "optimizer.");
    maybe(o, "lr", c.optimizer.lr);
    maybe(o, "beta1", c.optimizer.beta1);
    maybe(o, "beta2", c.optimizer.beta2);
    maybe(o, "eps", c.optimizer.eps);
  }
  if (j.contains("data")) {
    const json& o = j.at("data");
    expect_keys(o,
                {"window", "overlap", "min_foreground", "augment", "max_rotation_deg",
                 "max_translate_frac"},
                "data.");
    maybe(o, "window", c.data.window);
    maybe(o, "overlap", c.data.overlap);
    maybe(o, "min_foreground", c.data.min_foreground);
    maybe(o, "augment", c.data.augment);
    maybe(o, "max_rotation_deg", c.data.max_rotation_deg);
    maybe(o, "max_translate_frac", c.data.max_translate_frac);
  }
  if (j.contains("generator")) {
    const json& o = j.at("generator");
    expect_keys(o, {"base_width", "res_blocks", "stages", "classes", "stage_width_floor"},
                "generator.");
    maybe(o, "base_width", c.generator.base_width);
    maybe(o, "res_blocks", c.generator.res_blocks);
    maybe(o, "stages", c.generator.stages);
    maybe(o, "classes", c.generator.classes);
    maybe(o, "stage_width_floor", c.generator.stage_width_floor);
  }
  if (j.contains("attention")) {
    const json& o = j.at("attention");
    expect_keys(o, {"kind", "placement", "guided", "reduction", "channel_gate"},
                "attention.");
    if (o.contains("kind"))
      c.generator.attention.kind =
          attention_kind_from_string(o.at("kind").get<std::string>());
    if (o.contains("placement"))
      c.generator.attention.placement =
          attention_placement_from_string(o.at("placement").get<std::string>());
    maybe(o, "guided", c.generator.attention.guided);
    maybe(o, "reduction", c.generator.attention.reduction);
    if (o.contains("channel_gate"))
      c.generator.attention.channel_gate =
          channel_gate_from_string(o.at("channel_gate").get<std::string>());
  }
  if (j.contains("discriminator")) {
    const json& o = j.at("discriminator");
    expect_keys(o, {"layers", "base_width", "kernel", "conditional"}, "discriminator.");
    maybe(o, "layers", c.discriminator.layers);
    maybe(o, "base_width", c.discriminator.base_width);
    maybe(o, "kernel", c.discriminator.kernel);
    maybe(o, "conditional", c.discriminator.conditional);
  }
  if (j.contains("loss_weights")) {
    const json& o = j.at("loss_weights");
    expect_keys(o, {"adv", "dice", "ssim", "l1", "guide", "cross_entropy",
                    "stage_weights"},
                "loss_weights.");
    maybe(o, "adv", c.loss_weights.adv);
    maybe(o, "dice", c.loss_weights.dice);
    maybe(o, "ssim", c.loss_weights.ssim);
    maybe(o, "l1", c.loss_weights.l1);
    maybe(o, "guide", c.loss_weights.guide);
    maybe(o, "cross_entropy", c.loss_weights.cross_entropy);
    maybe(o, "stage_weights", c.loss_weights.stage_weights);
  }
  // If attention is not guided, an untouched default guide weight is inert.
  if (!c.generator.attention.guided) c.loss_weights.guide = 0;

  c.generator.input_h = c.generator.input_w = c.generator_input();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json_text(text);
}

std::string ExperimentConfig::to_json_text() const {
  json j;
  j["name"] = name;
  j["seed"] = seed;
  j["dataset"] = dataset;
  j["runs_dir"] = runs_dir;
  j["folds"] = folds;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["sample_size"] = sample_size;
  j["optimizer"] = {{"lr", optimizer.lr},
                    {"beta1", optimizer.beta1},
                    {"beta2", optimizer.beta2},
                    {"eps", optimizer.eps}};
  j["data"] = {{"window", data.window},
               {"overlap", data.overlap},
               {"min_foreground", data.min_foreground},
               {"augment", data.augment},
               {"max_rotation_deg", data.max_rotation_deg},
               {"max_translate_frac", data.max_translate_frac}};
  j["generator"] = {{"base_width", generator.base_width},
                    {"res_blocks", generator.res_blocks},
                    {"stages", generator.stages},
                    {"classes", generator.classes},
                    {"stage_width_floor", generator.stage_width_floor}};
  j["attention"] = {{"kind", to_string(generator.attention.kind)},
                    {"placement", to_string(generator.attention.placement)},
                    {"guided", generator.attention.guided},
                    {"reduction", generator.attention.reduction},
                    {"channel_gate", to_string(generator.attention.channel_gate)}};
  j["discriminator"] = {{"layers", discriminator.layers},
                        {"base_width", discriminator.base_width},
                        {"kernel", discriminator.kernel},
                        {"conditional", discriminator.conditional}};
  j["loss_weights"] = {{"adv", loss_weights.adv},
                       {"dice", loss_weights.dice},
                       {"ssim", loss_weights.ssim},
                       {"l1", loss_weights.l1},
                       {"guide", loss_weights.guide},
                       {"cross_entropy", loss_weights.cross_entropy},
                       {"stage_weights", loss_weights.stage_weights}};
  return j.dump(2);
}

uint64_t ExperimentConfig::hash() const {
  return hash_str(to_json_text());
}

}  // namespace attnseg

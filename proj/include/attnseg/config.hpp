#pragma once

#include <string>

#include "attnseg/discriminator.hpp"
#include "attnseg/generator.hpp"
#include "attnseg/losses.hpp"

namespace attnseg {

struct OptimizerConfig {
  Scalar lr = 0.001;
  Scalar beta1 = 0.5;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
};

struct DataConfig {
  int window = 64;
  double overlap = 0.75;
  double min_foreground = 0.0;  // drop crops below this foreground fraction
  bool augment = true;
  double max_rotation_deg = 15.0;
  double max_translate_frac = 0.1;
};

struct ExperimentConfig {
  std::string name = "run";
  uint64_t seed = 1;
  std::string dataset;       // directory with manifest.json
  std::string runs_dir = "runs";
  int folds = 5;
  int epochs = 20;
  int batch_size = 8;
  int sample_size = 64;      // full-resolution H=W of the training samples
  OptimizerConfig optimizer;
  DataConfig data;
  GeneratorConfig generator;      // input_h/input_w derived from sample_size
  DiscriminatorConfig discriminator;
  LossWeights loss_weights;

  void validate() const;
  // derived low-resolution generator input extent
  int generator_input() const { return sample_size >> generator.stages; }

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
  std::string to_json_text() const;  // canonical echo
  uint64_t hash() const;
};

}  // namespace attnseg

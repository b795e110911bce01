#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "attnseg/checkpoint.hpp"
#include "attnseg/config.hpp"
#include "attnseg/dataset.hpp"
#include "attnseg/discriminator.hpp"
#include "attnseg/evaluation.hpp"

namespace attnseg {

class Adam {
 public:
  Adam() = default;
  Adam(nn::ParamList params, const OptimizerConfig& cfg);

  void step();
  void zero_grad();
  const nn::ParamList& params() const { return params_; }

 private:
  nn::ParamList params_;
  std::vector<Tensor> m_, v_;
  OptimizerConfig cfg_;
  long long t_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  std::map<std::string, double> train_terms;  // averaged over iterations
  double train_total = 0;
  double val_dice = 0, val_ssim = 0, val_l1 = 0;
  // mean L-1 between spatial attention maps and the downsampled guidance mask
  double guided_penalty = 0;
  bool has_guided_penalty = false;
  double wall_sec = 0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  void write_csv(const std::string& path) const;
};

struct FoldResult {
  int fold = 0;
  TrainingHistory history;
  int best_epoch = 0;
  double best_dice = 0, best_ssim = 0, best_l1 = 0;
  std::string checkpoint_path;
};

struct CvResult {
  std::vector<FoldResult> folds;
  eval::MetricReport report;  // best-checkpoint validation metrics per fold
};

// Deterministic sample pipeline: crops scans to the training window and
// filters by foreground fraction.
std::vector<data::ScanSample> prepare_samples(const std::vector<data::ScanSample>& scans,
                                              const DataConfig& cfg);

struct FoldData {
  std::vector<const data::ScanSample*> train, val;
};
FoldData fold_samples(const std::vector<data::ScanSample>& samples,
                      const data::FoldSplit& split, int fold);

// Trains one fold end to end; writes checkpoint_init.bin, checkpoint.bin,
// history.csv, losses.csv and config.json into out_dir (if non-empty).
FoldResult train_one_fold(const ExperimentConfig& cfg,
                          const std::vector<data::ScanSample>& samples,
                          const data::FoldSplit& split, int fold,
                          const std::string& out_dir);

CvResult run_cv(const ExperimentConfig& cfg, const std::vector<data::ScanSample>& samples,
                const std::string& out_dir, int jobs = 1);

struct AblationGridCell {
  std::string kind;
  std::string placement;
  bool guided = false;
};

std::vector<AblationGridCell> ablation_grid(const std::string& name);  // table1|table2

// Runs one 5-CV training per distinct cell (the no-attention run is shared
// across its placement columns), writes ablation.csv and ablation.txt.
std::vector<eval::AblationCell> run_ablation(const ExperimentConfig& base,
                                             const std::vector<data::ScanSample>& samples,
                                             const std::vector<AblationGridCell>& grid,
                                             const std::string& out_dir, int jobs = 1);

// Evaluation of a trained generator on a sample set (final-stage argmax).
struct EvalSummary {
  double dice = 0, ssim = 0, l1 = 0;
  int count = 0;
};
EvalSummary evaluate_samples(const Generator& gen,
                             const std::vector<const data::ScanSample*>& samples);

// value-only guided penalty (for logging and plots)
double guided_penalty_value(const std::vector<Tensor>& maps, const Tensor& mask_batch);

// deterministic digest used by the detachment tests and reproducibility checks
uint64_t param_digest(const nn::ParamList& params);

struct GanModel {
  Generator gen;
  std::vector<PatchDiscriminator> discs;

  GanModel(const ExperimentConfig& cfg, uint64_t seed);
  nn::ParamList all_params();  // generator + per-stage discriminator namespaces
};

}  // namespace attnseg

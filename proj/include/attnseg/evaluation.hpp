#pragma once

#include <map>
#include <string>
#include <vector>

#include "attnseg/tensor.hpp"

namespace attnseg::eval {

// per-pixel argmax of [K,H,W] class scores
Tensor argmax_channels(const Tensor& scores);

// Macro-averaged overlap 2|P&T|/(|P|+|T|) over classes 1..num_classes present
// in the ground truth.
double dice_metric(const Tensor& pred_label, const Tensor& true_label,
                   int num_classes = 7);

// SSIM / mean absolute error between class-index images normalized by the
// class count (label/K in [0,1)).
double ssim_metric(const Tensor& pred_label, const Tensor& true_label, int classes = 8);
double l1_metric(const Tensor& pred_label, const Tensor& true_label, int classes = 8);

// Percentage reduction of (1 - metric); requires baseline < 1.
double relative_error_reduction(double baseline, double improved);

struct TTestResult {
  double t = 0;
  double p = 0;  // two-sided
  int dof = 0;
};

// Classic paired t statistic on a-b with k-1 degrees of freedom. Throws
// std::invalid_argument("degenerate: identical samples") when the differences
// have zero variance.
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

struct MetricReport {
  std::vector<double> dice, ssim, l1;  // per fold

  static double mean(const std::vector<double>& v);
  static double stdev(const std::vector<double>& v);  // sample std, n-1
};

struct AblationCell {
  std::string kind;       // channel | spatial | parallel | serial | none
  std::string placement;  // last_stage | multi_stage
  bool guided = false;
  MetricReport report;
};

// Aligned-text rendering mirroring the attention/placement grid: one row per
// (metric, attention kind), columns last-stage / multi-stage / no-attention,
// guided rows appended. Values formatted 0.NNNN±0.NNNN.
std::string render_table_text(const std::vector<AblationCell>& cells);
// CSV schema: config_id,attention_kind,placement,guided,fold,dice,ssim,l1
// with aggregate rows flagged via fold=mean|std.
std::string render_table_csv(const std::vector<AblationCell>& cells);

}  // namespace attnseg::eval

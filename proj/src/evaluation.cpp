#include "attnseg/evaluation.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <set>
#include <sstream>

#include "attnseg/autodiff.hpp"
#include "attnseg/losses.hpp"

namespace attnseg::eval {

Tensor argmax_channels(const Tensor& scores) {
  check_shape(scores.rank() == 3, "argmax_channels: expected [K,H,W]");
  const int K = scores.dim(0), H = scores.dim(1), W = scores.dim(2);
  Tensor out({H, W});
  const long long hw = (long long)H * W;
  for (long long p = 0; p < hw; ++p) {
    int best = 0;
    for (int c = 1; c < K; ++c)
      if (scores[(long long)c * hw + p] > scores[(long long)best * hw + p]) best = c;
    out[p] = (Scalar)best;
  }
  return out;
}

double dice_metric(const Tensor& pred_label, const Tensor& true_label, int num_classes) {
  check_shape(pred_label.same_shape(true_label), "dice_metric: shape mismatch");
  double acc = 0;
  int present = 0;
  for (int c = 1; c <= num_classes; ++c) {
    long long inter = 0, np = 0, nt = 0;
    for (long long i = 0; i < true_label.size(); ++i) {
      const bool p = (int)pred_label[i] == c;
      const bool t = (int)true_label[i] == c;
      inter += p && t;
      np += p;
      nt += t;
    }
    if (nt == 0) continue;
    ++present;
    acc += 2.0 * (double)inter / (double)(np + nt);
  }
  if (present == 0) {
    // truth has no foreground; exact only when the prediction agrees
    for (long long i = 0; i < pred_label.size(); ++i)
      if ((int)pred_label[i] != 0) return 0.0;
    return 1.0;
  }
  return acc / present;
}

namespace {
Tensor index_image(const Tensor& label, int classes) {
  Tensor out(label.shape());
  for (long long i = 0; i < label.size(); ++i) out[i] = label[i] / (Scalar)classes;
  return out;
}
}  // namespace

double ssim_metric(const Tensor& pred_label, const Tensor& true_label, int classes) {
  check_shape(pred_label.same_shape(true_label), "ssim_metric: shape mismatch");
  Var a = constant(index_image(pred_label, classes));
  Var b = constant(index_image(true_label, classes));
  return ssim(a, b).item();
}

double l1_metric(const Tensor& pred_label, const Tensor& true_label, int classes) {
  check_shape(pred_label.same_shape(true_label), "l1_metric: shape mismatch");
  double acc = 0;
  for (long long i = 0; i < true_label.size(); ++i)
    acc += std::abs(pred_label[i] - true_label[i]) / (double)classes;
  return acc / (double)true_label.size();
}

double relative_error_reduction(double baseline, double improved) {
  if (baseline >= 1.0)
    throw std::invalid_argument("relative_error_reduction: baseline must be < 1");
  return 100.0 * (improved - baseline) / (1.0 - baseline);
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("paired_t_test: length mismatch");
  const size_t k = a.size();
  if (k < 2) throw std::invalid_argument("paired_t_test: need at least 2 pairs");
  std::vector<double> d(k);
  for (size_t i = 0; i < k; ++i) d[i] = a[i] - b[i];
  double mean = 0;
  for (double v : d) mean += v;
  mean /= (double)k;
  double ss = 0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double var = ss / (double)(k - 1);
  if (var <= 0) throw std::invalid_argument("degenerate: identical samples");
  TTestResult r;
  r.dof = (int)k - 1;
  r.t = mean / std::sqrt(var / (double)k);
  boost::math::students_t_distribution<double> dist((double)r.dof);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

double MetricReport::mean(const std::vector<double>& v) {
  if (v.empty()) return 0;
  double m = 0;
  for (double x : v) m += x;
  return m / (double)v.size();
}

double MetricReport::stdev(const std::vector<double>& v) {
  if (v.size() < 2) return 0;
  const double m = mean(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / (double)(v.size() - 1));
}

namespace {

std::string fmt_cell(const MetricReport& r, const std::vector<double>& v) {
  (void)r;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f±%.4f", MetricReport::mean(v),
                MetricReport::stdev(v));
  return buf;
}

const AblationCell* find_cell(const std::vector<AblationCell>& cells,
                              const std::string& kind, const std::string& placement,
                              bool guided) {
  for (const auto& c : cells)
    if (c.kind == kind && c.guided == guided &&
        (kind == "none" ? true : c.placement == placement))
      return &c;
  return nullptr;
}

std::string row_label(const std::string& kind, bool guided) {
  std::string base;
  if (kind == "channel") base = "Channel";
  else if (kind == "spatial") base = "Spatial";
  else if (kind == "parallel") base = "Ch&Sp-Parallel";
  else if (kind == "serial") base = "Ch&Sp-Sequential";
  else base = kind;
  return guided ? base + "-Guided" : base;
}

}  // namespace

std::string render_table_text(const std::vector<AblationCell>& cells) {
  const std::vector<std::string> kinds = {"channel", "spatial", "parallel", "serial"};
  const std::vector<std::pair<std::string, const std::vector<double> MetricReport::*>>
      metrics = {{"Dice", &MetricReport::dice},
                 {"SSIM", &MetricReport::ssim},
                 {"L-1", &MetricReport::l1}};
  std::ostringstream os;
  os << "Metric | Attention         | Last Stage      | Multi-Stage     | No Attention\n";
  os << "-------+-------------------+-----------------+-----------------+-----------------\n";
  auto emit = [&](const std::string& metric,
                  const std::vector<double> MetricReport::*field,
                  const std::string& kind, bool guided) {
    const AblationCell* last = find_cell(cells, kind, "last_stage", guided);
    const AblationCell* multi = find_cell(cells, kind, "multi_stage", guided);
    const AblationCell* none = find_cell(cells, "none", "", false);
    char line[256];
    std::snprintf(line, sizeof(line), "%-6s | %-17s | %-15s | %-15s | %-15s\n",
                  metric.c_str(), row_label(kind, guided).c_str(),
                  last ? fmt_cell(last->report, last->report.*field).c_str() : "-",
                  multi ? fmt_cell(multi->report, multi->report.*field).c_str() : "-",
                  none ? fmt_cell(none->report, none->report.*field).c_str() : "-");
    os << line;
  };
  for (const auto& [metric, field] : metrics) {
    for (const auto& kind : kinds)
      if (find_cell(cells, kind, "last_stage", false) ||
          find_cell(cells, kind, "multi_stage", false))
        emit(metric, field, kind, false);
    for (const auto& kind : kinds)
      if (find_cell(cells, kind, "last_stage", true) ||
          find_cell(cells, kind, "multi_stage", true))
        emit(metric, field, kind, true);
  }
  return os.str();
}

std::string render_table_csv(const std::vector<AblationCell>& cells) {
  std::ostringstream os;
  os << "config_id,attention_kind,placement,guided,fold,dice,ssim,l1\n";
  auto cfg_id = [](const AblationCell& c) {
    std::string id = c.kind + "-" + c.placement;
    if (c.guided) id += "-guided";
    return id;
  };
  char buf[256];
  for (const auto& c : cells) {
    const size_t folds = c.report.dice.size();
    for (size_t f = 0; f < folds; ++f) {
      std::snprintf(buf, sizeof(buf), "%s,%s,%s,%d,%zu,%.6f,%.6f,%.6f\n",
                    cfg_id(c).c_str(), c.kind.c_str(), c.placement.c_str(),
                    c.guided ? 1 : 0, f, c.report.dice[f], c.report.ssim[f],
                    c.report.l1[f]);
      os << buf;
    }
    std::snprintf(buf, sizeof(buf), "%s,%s,%s,%d,mean,%.6f,%.6f,%.6f\n",
                  cfg_id(c).c_str(), c.kind.c_str(), c.placement.c_str(),
                  c.guided ? 1 : 0, MetricReport::mean(c.report.dice),
                  MetricReport::mean(c.report.ssim), MetricReport::mean(c.report.l1));
    os << buf;
    std::snprintf(buf, sizeof(buf), "%s,%s,%s,%d,std,%.6f,%.6f,%.6f\n",
                  cfg_id(c).c_str(), c.kind.c_str(), c.placement.c_str(),
                  c.guided ? 1 : 0, MetricReport::stdev(c.report.dice),
                  MetricReport::stdev(c.report.ssim), MetricReport::stdev(c.report.l1));
    os << buf;
  }
  return os.str();
}

}  // namespace attnseg::eval

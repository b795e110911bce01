#include "attnseg/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include "attnseg/attention.hpp"
#include "attnseg/kernels.hpp"
#include "attnseg/losses.hpp"

namespace fs = std::filesystem;

namespace attnseg {

Adam::Adam(nn::ParamList params, const OptimizerConfig& cfg)
    : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.push_back(Tensor::zeros(p.var.value().shape()));
    v_.push_back(Tensor::zeros(p.var.value().shape()));
  }
}

void Adam::step() {
  ++t_;
  const Scalar bc1 = 1 - std::pow(cfg_.beta1, (Scalar)t_);
  const Scalar bc2 = 1 - std::pow(cfg_.beta2, (Scalar)t_);
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].var.mutable_value();
    const bool has = params_[i].var.has_grad();
    const Scalar* g = has ? params_[i].var.grad().data() : nullptr;
    Scalar* m = m_[i].data();
    Scalar* v = v_[i].data();
    Scalar* w = p.data();
    for (long long j = 0; j < p.size(); ++j) {
      const Scalar gj = g ? g[j] : Scalar(0);
      m[j] = cfg_.beta1 * m[j] + (1 - cfg_.beta1) * gj;
      v[j] = cfg_.beta2 * v[j] + (1 - cfg_.beta2) * gj * gj;
      w[j] -= cfg_.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

GanModel::GanModel(const ExperimentConfig& cfg, uint64_t seed)
    : gen(cfg.generator, seed),
      discs(build_discriminators(cfg.generator, cfg.discriminator,
                                 hash_combine(seed, hash_str("disc")))) {}

nn::ParamList GanModel::all_params() {
  nn::ParamList out = gen.parameters();
  for (size_t s = 0; s < discs.size(); ++s)
    for (auto& p : discs[s].parameters())
      out.push_back({"disc" + std::to_string(s) + "." + p.name, p.var});
  return out;
}

uint64_t param_digest(const nn::ParamList& params) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params) {
    h = hash_combine(h, hash_str(p.name));
    const Tensor& t = p.var.value();
    const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
    for (long long i = 0; i < t.size() * (long long)sizeof(Scalar); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::vector<data::ScanSample> prepare_samples(const std::vector<data::ScanSample>& scans,
                                              const DataConfig& cfg) {
  std::vector<data::ScanSample> out;
  for (const auto& s : scans) {
    if (s.height() == cfg.window && s.width() == cfg.window) {
      if (data::foreground_fraction(s) >= cfg.min_foreground) out.push_back(s);
      continue;
    }
    for (auto& w : data::crop_windows(s, cfg.window, cfg.overlap))
      if (data::foreground_fraction(w) >= cfg.min_foreground) out.push_back(std::move(w));
  }
  return out;
}

FoldData fold_samples(const std::vector<data::ScanSample>& samples,
                      const data::FoldSplit& split, int fold) {
  std::set<std::string> val(split.val_subjects(fold).begin(),
                            split.val_subjects(fold).end());
  const auto train_list = split.train_subjects(fold);
  std::set<std::string> train(train_list.begin(), train_list.end());
  for (const auto& s : val)
    if (train.count(s))
      throw std::runtime_error("fold leakage: subject " + s + " in train and val");
  FoldData fd;
  for (const auto& s : samples) {
    if (val.count(s.subject_id)) fd.val.push_back(&s);
    else if (train.count(s.subject_id)) fd.train.push_back(&s);
  }
  return fd;
}

namespace {

struct Batch {
  Var input;
  std::vector<Var> targets;
  std::vector<Var> conditions;
  Tensor masks;
  std::vector<int> scan_indices;
};

Batch make_batch(const std::vector<data::ScanSample>& items,
                 const ExperimentConfig& cfg) {
  const int N = (int)items.size();
  const int S = cfg.generator.stages;
  const int K = cfg.generator.classes;
  const int full = cfg.sample_size;
  const int h = cfg.generator_input();

  Batch b;
  Tensor input({N, 1, h, h});
  b.masks = Tensor({N, full, full});
  std::vector<Tensor> targets, conditions;
  for (int s = 1; s <= S; ++s) {
    const int hs = h << s;
    targets.push_back(Tensor({N, K, hs, hs}));
    conditions.push_back(Tensor({N, 1, hs, hs}));
  }

  for (int n = 0; n < N; ++n) {
    const auto& smp = items[(size_t)n];
    check_shape(smp.height() == full && smp.width() == full,
                "batch: sample size mismatch");
    b.scan_indices.push_back(smp.scan_index);
    Tensor low = data::downsample_area(smp.image, 1 << S);
    std::copy(low.data(), low.data() + low.size(),
              input.data() + (long long)n * h * h);
    std::copy(smp.mask.data(), smp.mask.data() + smp.mask.size(),
              b.masks.data() + (long long)n * full * full);
    auto tgts = stage_targets(smp.label, S, K);
    for (int s = 1; s <= S; ++s) {
      const int hs = h << s;
      std::copy(tgts[(size_t)s - 1].data(),
                tgts[(size_t)s - 1].data() + tgts[(size_t)s - 1].size(),
                targets[(size_t)s - 1].data() + (long long)n * K * hs * hs);
      Tensor cond = s == S ? smp.image : data::downsample_area(smp.image, 1 << (S - s));
      std::copy(cond.data(), cond.data() + cond.size(),
                conditions[(size_t)s - 1].data() + (long long)n * hs * hs);
    }
  }
  b.input = constant(std::move(input));
  for (int s = 0; s < S; ++s) {
    b.targets.push_back(constant(std::move(targets[(size_t)s])));
    b.conditions.push_back(constant(std::move(conditions[(size_t)s])));
  }
  return b;
}

struct FreezeGuard {
  nn::ParamList params;
  explicit FreezeGuard(nn::ParamList p) : params(std::move(p)) {
    for (auto& q : params) q.var.set_requires_grad(false);
  }
  ~FreezeGuard() {
    for (auto& q : params) q.var.set_requires_grad(true);
  }
};

}  // namespace

double guided_penalty_value(const std::vector<Tensor>& maps, const Tensor& mask_batch) {
  std::vector<Var> vars;
  vars.reserve(maps.size());
  for (const auto& m : maps) vars.push_back(constant(m));
  return guided_attention_penalty(vars, mask_batch).item();
}

EvalSummary evaluate_samples(const Generator& gen,
                             const std::vector<const data::ScanSample*>& samples) {
  EvalSummary es;
  const auto& cfg = gen.config();
  const int S = cfg.stages;
  for (const auto* smp : samples) {
    Tensor low = data::downsample_area(smp->image, 1 << S);
    Var x = constant(low.reshaped({1, 1, cfg.input_h, cfg.input_w}));
    auto outs = gen.forward(x);
    const Tensor& pred = outs.back().prediction.value();
    Tensor scores = pred.reshaped({cfg.classes, cfg.output_h(), cfg.output_w()});
    Tensor pred_label = eval::argmax_channels(scores);
    es.dice += eval::dice_metric(pred_label, smp->label);
    es.ssim += eval::ssim_metric(pred_label, smp->label, cfg.classes);
    es.l1 += eval::l1_metric(pred_label, smp->label, cfg.classes);
    ++es.count;
  }
  if (es.count > 0) {
    es.dice /= es.count;
    es.ssim /= es.count;
    es.l1 /= es.count;
  }
  return es;
}

void TrainingHistory::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  // stable union of term keys
  std::set<std::string> keys;
  for (const auto& e : epochs)
    for (const auto& [k, v] : e.train_terms) keys.insert(k);
  out << "epoch,train_total";
  for (const auto& k : keys) out << ",train_" << k;
  out << ",val_dice,val_ssim,val_l1,guided_penalty,wall_sec\n";
  char buf[64];
  for (const auto& e : epochs) {
    out << e.epoch;
    std::snprintf(buf, sizeof(buf), ",%.8f", e.train_total);
    out << buf;
    for (const auto& k : keys) {
      auto it = e.train_terms.find(k);
      std::snprintf(buf, sizeof(buf), ",%.8f", it == e.train_terms.end() ? 0.0 : it->second);
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,%.6f", e.val_dice, e.val_ssim, e.val_l1);
    out << buf;
    if (e.has_guided_penalty) {
      std::snprintf(buf, sizeof(buf), ",%.8f", e.guided_penalty);
      out << buf;
    } else {
      out << ",";
    }
    std::snprintf(buf, sizeof(buf), ",%.3f", e.wall_sec);
    out << buf << "\n";
  }
}

FoldResult train_one_fold(const ExperimentConfig& cfg,
                          const std::vector<data::ScanSample>& samples,
                          const data::FoldSplit& split, int fold,
                          const std::string& out_dir) {
  cfg.validate();
  FoldData fd = fold_samples(samples, split, fold);
  if (fd.train.empty() || fd.val.empty())
    throw std::runtime_error("fold " + std::to_string(fold) + ": empty train or val set");

  const uint64_t fold_seed = hash_combine(cfg.seed, (uint64_t)(fold + 1));
  GanModel model(cfg, fold_seed);
  Adam g_opt(model.gen.parameters(), cfg.optimizer);
  std::vector<Adam> d_opts;
  for (auto& d : model.discs) d_opts.emplace_back(d.parameters(), cfg.optimizer);

  const bool use_adv = cfg.loss_weights.adv > 0;
  const int S = cfg.generator.stages;

  std::ofstream losses_csv;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream cfg_echo(fs::path(out_dir) / "config.json");
    cfg_echo << cfg.to_json_text() << "\n";
    losses_csv.open(fs::path(out_dir) / "losses.csv");
    losses_csv << "epoch,iter,stage,term,value\n";
    CheckpointMeta meta{cfg.hash(), cfg.seed, 0};
    save_checkpoint((fs::path(out_dir) / "checkpoint_init.bin").string(),
                    model.all_params(), meta);
  }

  FoldResult result;
  result.fold = fold;
  result.best_dice = -1;

  // snapshot of the best generator parameters, saved at the end
  std::map<std::string, Tensor> best_params;
  int best_epoch = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<int> order(fd.train.size());
    for (size_t i = 0; i < order.size(); ++i) order[(size_t)i] = (int)i;
    Rng shuffle_rng(hash_combine(fold_seed, (uint64_t)epoch));
    shuffle_rng.shuffle(order);

    std::map<std::string, double> term_sums;
    double total_sum = 0, guided_sum = 0;
    int iters = 0, guided_iters = 0;

    for (size_t at = 0; at < order.size(); at += (size_t)cfg.batch_size) {
      const size_t end = std::min(order.size(), at + (size_t)cfg.batch_size);
      std::vector<data::ScanSample> items;
      for (size_t i = at; i < end; ++i) {
        const auto* src = fd.train[(size_t)order[i]];
        if (cfg.data.augment) {
          Rng arng(hash_combine(hash_combine(fold_seed, (uint64_t)epoch * 131071ULL),
                                (uint64_t)order[i]));
          items.push_back(data::augment(
              *src, data::random_augmentation(arng, src->height(), src->width(),
                                              cfg.data.max_rotation_deg,
                                              cfg.data.max_translate_frac)));
        } else {
          items.push_back(*src);
        }
      }
      Batch b = make_batch(items, cfg);
      auto outs = model.gen.forward(b.input);

      if (use_adv) {
        for (int s = 0; s < S; ++s) {
          Var real = model.discs[(size_t)s].forward(b.conditions[(size_t)s],
                                                    b.targets[(size_t)s]);
          Var fake = model.discs[(size_t)s].forward(b.conditions[(size_t)s],
                                                    outs[(size_t)s].prediction.detach());
          Var dl = adversarial_d_loss(real, fake);
          d_opts[(size_t)s].zero_grad();
          dl.backward();
          d_opts[(size_t)s].step();
        }
      }

      std::vector<Var> preds, targets, fake_logits;
      for (int s = 0; s < S; ++s) {
        preds.push_back(outs[(size_t)s].prediction);
        targets.push_back(b.targets[(size_t)s]);
      }
      LossBreakdown bd;
      Var total;
      {
        std::optional<FreezeGuard> freeze;
        if (use_adv) {
          nn::ParamList dparams;
          for (auto& d : model.discs)
            for (auto& p : d.parameters()) dparams.push_back(p);
          freeze.emplace(std::move(dparams));
          for (int s = 0; s < S; ++s)
            fake_logits.push_back(model.discs[(size_t)s].forward(
                b.conditions[(size_t)s], outs[(size_t)s].prediction));
        }
        total = total_generator_loss(preds, targets, fake_logits,
                                     outs.back().attention_maps, b.masks,
                                     cfg.loss_weights, &bd);
        if (!std::isfinite(total.item())) {
          std::ostringstream os;
          os << "non-finite generator loss at epoch " << epoch << " iter " << iters
             << "; scans:";
          for (int idx : b.scan_indices) os << " " << idx;
          os << "; terms:";
          for (const auto& [k, v] : bd.terms) os << " " << k << "=" << v;
          throw std::runtime_error(os.str());
        }
        g_opt.zero_grad();
        total.backward();
        g_opt.step();
      }

      if (!outs.back().attention_maps.empty()) {
        std::vector<Tensor> map_values;
        for (const auto& m : outs.back().attention_maps)
          map_values.push_back(m.value());
        guided_sum += guided_penalty_value(map_values, b.masks);
        ++guided_iters;
      }

      for (const auto& [k, v] : bd.terms) {
        if (k == "total") continue;
        term_sums[k] += v;
        if (losses_csv.is_open()) {
          // term keys look like stage0/dice or guide
          std::string stage = "-", term = k;
          if (auto slash = k.find('/'); slash != std::string::npos) {
            stage = k.substr(5, slash - 5);
            term = k.substr(slash + 1);
          }
          losses_csv << epoch << "," << iters << "," << stage << "," << term << ","
                     << v << "\n";
        }
      }
      total_sum += bd.terms.at("total");
      ++iters;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_total = iters ? total_sum / iters : 0;
    for (const auto& [k, v] : term_sums) rec.train_terms[k] = v / std::max(1, iters);
    EvalSummary es = evaluate_samples(model.gen, fd.val);
    rec.val_dice = es.dice;
    rec.val_ssim = es.ssim;
    rec.val_l1 = es.l1;
    if (guided_iters > 0) {
      rec.guided_penalty = guided_sum / guided_iters;
      rec.has_guided_penalty = true;
    }
    rec.wall_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                       .count();
    result.history.epochs.push_back(rec);

    if (es.dice > result.best_dice) {
      result.best_dice = es.dice;
      result.best_ssim = es.ssim;
      result.best_l1 = es.l1;
      best_epoch = epoch;
      best_params.clear();
      for (const auto& p : model.all_params())
        best_params.emplace(p.name, p.var.value().clone());
    }
  }

  result.best_epoch = best_epoch;
  if (!out_dir.empty()) {
    auto params = model.all_params();
    restore_params(best_params, params);
    CheckpointMeta meta{cfg.hash(), cfg.seed, best_epoch};
    result.checkpoint_path = (fs::path(out_dir) / "checkpoint.bin").string();
    save_checkpoint(result.checkpoint_path, params, meta);
    result.history.write_csv((fs::path(out_dir) / "history.csv").string());
  }
  return result;
}

CvResult run_cv(const ExperimentConfig& cfg, const std::vector<data::ScanSample>& samples,
                const std::string& out_dir, int jobs) {
  cfg.validate();
  auto subjects = data::subject_ids(samples);
  data::FoldSplit split = data::split_kfold(subjects, cfg.folds, cfg.seed);

  CvResult cv;
  cv.folds.resize((size_t)cfg.folds);
  const int total_threads = kernels::threads();

  auto run_fold = [&](int fold) {
    if (jobs > 1) kernels::set_threads(std::max(1, total_threads / jobs));
    const std::string fold_dir =
        out_dir.empty() ? ""
                        : (fs::path(out_dir) / ("fold" + std::to_string(fold))).string();
    cv.folds[(size_t)fold] = train_one_fold(cfg, samples, split, fold, fold_dir);
  };

  if (jobs <= 1) {
    for (int f = 0; f < cfg.folds; ++f) run_fold(f);
  } else {
    std::vector<std::future<void>> futs;
    std::atomic<int> next{0};
    for (int w = 0; w < std::min(jobs, cfg.folds); ++w)
      futs.push_back(std::async(std::launch::async, [&]() {
        for (;;) {
          const int f = next.fetch_add(1);
          if (f >= cfg.folds) return;
          run_fold(f);
        }
      }));
    for (auto& f : futs) f.get();
  }

  for (const auto& fr : cv.folds) {
    cv.report.dice.push_back(fr.best_dice);
    cv.report.ssim.push_back(fr.best_ssim);
    cv.report.l1.push_back(fr.best_l1);
  }

  if (!out_dir.empty()) {
    std::ofstream out(fs::path(out_dir) / "summary.csv");
    out << "fold,best_epoch,dice,ssim,l1\n";
    char buf[128];
    for (const auto& fr : cv.folds) {
      std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%.6f,%.6f\n", fr.fold, fr.best_epoch,
                    fr.best_dice, fr.best_ssim, fr.best_l1);
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), "mean,,%.6f,%.6f,%.6f\n",
                  eval::MetricReport::mean(cv.report.dice),
                  eval::MetricReport::mean(cv.report.ssim),
                  eval::MetricReport::mean(cv.report.l1));
    out << buf;
    std::snprintf(buf, sizeof(buf), "std,,%.6f,%.6f,%.6f\n",
                  eval::MetricReport::stdev(cv.report.dice),
                  eval::MetricReport::stdev(cv.report.ssim),
                  eval::MetricReport::stdev(cv.report.l1));
    out << buf;
  }
  return cv;
}

std::vector<AblationGridCell> ablation_grid(const std::string& name) {
  if (name == "table1") {
    std::vector<AblationGridCell> grid;
    for (const std::string kind : {"channel", "spatial", "parallel", "serial"})
      for (const std::string placement : {"last_stage", "multi_stage"})
        grid.push_back({kind, placement, false});
    grid.push_back({"none", "last_stage", false});
    grid.push_back({"none", "multi_stage", false});
    return grid;
  }
  if (name == "table2") {
    return {{"none", "multi_stage", false},
            {"serial", "multi_stage", false},
            {"serial", "multi_stage", true}};
  }
  throw ConfigError("unknown ablation grid: " + name);
}

std::vector<eval::AblationCell> run_ablation(const ExperimentConfig& base,
                                             const std::vector<data::ScanSample>& samples,
                                             const std::vector<AblationGridCell>& grid,
                                             const std::string& out_dir, int jobs) {
  std::map<std::string, eval::MetricReport> done;  // distinct runs by run id
  std::vector<eval::AblationCell> cells;
  for (const auto& cell : grid) {
    std::string run_id = cell.kind;
    if (cell.kind != "none") {
      run_id += "-" + cell.placement;
      if (cell.guided) run_id += "-guided";
    }
    if (!done.count(run_id)) {
      ExperimentConfig cfg = base;
      cfg.name = run_id;
      cfg.generator.attention.kind = attention_kind_from_string(cell.kind);
      if (cell.kind != "none")
        cfg.generator.attention.placement =
            attention_placement_from_string(cell.placement);
      cfg.generator.attention.guided = cell.guided;
      cfg.loss_weights.guide =
          cell.guided ? (base.loss_weights.guide > 0 ? base.loss_weights.guide : 1.0)
                      : 0.0;
      const std::string run_dir =
          out_dir.empty() ? "" : (fs::path(out_dir) / run_id).string();
      CvResult cv = run_cv(cfg, samples, run_dir, jobs);
      done.emplace(run_id, cv.report);
    }
    eval::AblationCell out;
    out.kind = cell.kind;
    out.placement = cell.placement;
    out.guided = cell.guided;
    out.report = done.at(run_id);
    cells.push_back(std::move(out));
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "ablation.csv");
    csv << eval::render_table_csv(cells);
    std::ofstream txt(fs::path(out_dir) / "ablation.txt");
    txt << eval::render_table_text(cells);
  }
  return cells;
}

}  // namespace attnseg

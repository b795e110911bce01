#pragma once

#include <set>
#include <string>
#include <vector>

#include "attnseg/rng.hpp"
#include "attnseg/tensor.hpp"

namespace attnseg::data {

constexpr int kLayerCount = 7;

// One 2-D scan: grayscale image, integer layer labels (0 = background,
// 1..7 = layers, top to bottom), binary guidance mask.
struct ScanSample {
  Tensor image;  // [1,H,W], values in [0,1]
  Tensor label;  // [H,W], integer values 0..7
  Tensor mask;   // [H,W], {0,1}
  std::string subject_id;
  int scan_index = 0;

  int height() const { return label.dim(0); }
  int width() const { return label.dim(1); }
};

struct PhantomParams {
  int height = 64;
  int width = 64;
  int layers = kLayerCount;

  // shared vertical displacement of the whole layer stack
  double wave_amp_min = 0.5, wave_amp_max = 2.5;   // px
  double wave_freq_min = 0.5, wave_freq_max = 2.0; // cycles across the width
  // independent per-boundary ripple, kept below the layer thickness
  double ripple_amp_max = 0.6;

  double layer_intensity_min = 0.30, layer_intensity_max = 0.95;
  double background_intensity = 0.06;
  double intensity_jitter = 0.04;  // per-scan deviation from the layer ladder

  double speckle_sigma = 0.25;  // std of the mean-1 multiplicative noise; 0 = off

  int vessel_count_min = 1, vessel_count_max = 3;
  int vessel_width_min = 1, vessel_width_max = 2;
  double vessel_attenuation = 0.45;  // image multiplier under a shadow

  double top_margin_frac = 0.14, bottom_margin_frac = 0.18;

  uint64_t seed = 0;

  void validate() const;
};

// The per-scan draw: everything needed to re-render a phantom.
struct PhantomRecipe {
  std::vector<double> layer_means;       // [layers]
  std::vector<double> layer_thickness;   // [layers], px
  double top_offset = 0;                 // px
  double wave_amp = 0, wave_freq = 0, wave_phase = 0;
  std::vector<double> ripple_amp, ripple_phase, ripple_freq;  // per boundary
  struct Vessel { int col; int width; };
  std::vector<Vessel> vessels;
  uint64_t noise_seed = 0;
};

PhantomRecipe sample_recipe(const PhantomParams& p, const std::string& subject_id,
                            int scan_index);
ScanSample render_phantom(const PhantomParams& p, const PhantomRecipe& r,
                          const std::string& subject_id, int scan_index);
ScanSample generate_phantom(const PhantomParams& p, const std::string& subject_id,
                            int scan_index);

enum class AugKind { hflip, translate, rotate };

struct Augmentation {
  AugKind kind = AugKind::hflip;
  double dx = 0, dy = 0;      // translate, px
  double theta_deg = 0;       // rotate
  double max_rotation = 15.0; // clamp bound
};

// Image resampled bilinearly, label and mask nearest-neighbor; out-of-frame
// fills with background. Parameters outside bounds are clamped (logged once
// per call to stderr).
ScanSample augment(const ScanSample& s, const Augmentation& a);

Augmentation random_augmentation(Rng& rng, int height, int width,
                                 double max_rotation_deg, double max_translate_frac);

// Moving crop window: stride = round(window*(1-overlap)); strided positions
// plus a final window flush to each border when the last strided one does not
// touch it; duplicates removed.
std::vector<ScanSample> crop_windows(const ScanSample& s, int window = 224,
                                     double overlap = 0.75);
std::vector<int> crop_positions(int extent, int window, double overlap);

Tensor derive_guidance_mask(const Tensor& label, const std::set<int>& guided_layers);
Tensor derive_guidance_mask(const Tensor& label);  // all layers 1..7

// Block mean pooling; input padded with zeros when not divisible.
Tensor downsample_mask(const Tensor& mask, int factor);
// Same pooling for [C,H,W] or [H,W] images (generator inputs, conditions).
Tensor downsample_area(const Tensor& image, int factor);
// Nearest-neighbor (top-left) subsampling for integer label maps.
Tensor downsample_label(const Tensor& label, int factor);

struct FoldSplit {
  int k = 0;
  std::vector<std::vector<std::string>> validation;  // per fold

  std::vector<std::string> train_subjects(int fold) const;
  const std::vector<std::string>& val_subjects(int fold) const {
    return validation[(size_t)fold];
  }
};

FoldSplit split_kfold(std::vector<std::string> subject_ids, int k, uint64_t seed);

// fraction of non-background label pixels
double foreground_fraction(const ScanSample& s);

}  // namespace attnseg::data

#include "attnseg/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace attnseg::data {

void PhantomParams::validate() const {
  if (height < 32 || width < 32)
    throw ConfigError("phantom: height and width must be >= 32");
  if (layers < 1) throw ConfigError("phantom: need at least one layer");
  if (wave_amp_max < wave_amp_min || wave_freq_max < wave_freq_min ||
      layer_intensity_max < layer_intensity_min || vessel_count_max < vessel_count_min ||
      vessel_width_max < vessel_width_min)
    throw ConfigError("phantom: degenerate parameter range");
  if (speckle_sigma < 0) throw ConfigError("phantom: speckle_sigma must be >= 0");
  const double margin_need = wave_amp_max + ripple_amp_max + 1.0;
  if (top_margin_frac * height < margin_need || bottom_margin_frac * height < margin_need)
    throw ConfigError("phantom: margins too small for the wave amplitude");
  const double band = height * (1.0 - top_margin_frac - bottom_margin_frac);
  if (band * 0.85 / (1.15 * layers) < 2 * ripple_amp_max + 1.0)
    throw ConfigError("phantom: layers cannot fit the band at this height");
}

namespace {

// fixed ladder permutation giving adjacent layers distinct brightness
const int kLadder[kLayerCount] = {0, 6, 1, 5, 2, 4, 3};

double wave_at(const PhantomRecipe& r, int c, int width) {
  return r.wave_amp * std::sin(2 * M_PI * r.wave_freq * c / width + r.wave_phase);
}

double ripple_at(const PhantomRecipe& r, size_t boundary, int c, int width) {
  return r.ripple_amp[boundary] *
         std::sin(2 * M_PI * r.ripple_freq[boundary] * c / width +
                  r.ripple_phase[boundary]);
}

}  // namespace

PhantomRecipe sample_recipe(const PhantomParams& p, const std::string& subject_id,
                            int scan_index) {
  p.validate();
  Rng rng(hash_combine(hash_combine(p.seed, hash_str(subject_id)),
                       (uint64_t)scan_index));
  PhantomRecipe r;
  r.layer_means.resize(p.layers);
  for (int l = 0; l < p.layers; ++l) {
    const double frac = p.layers == 1 ? 0.5 : (double)kLadder[l % kLayerCount] / 6.0;
    const double base =
        p.layer_intensity_min + (p.layer_intensity_max - p.layer_intensity_min) * frac;
    r.layer_means[l] = std::clamp(
        base + rng.uniform(-p.intensity_jitter, p.intensity_jitter), 0.0, 1.0);
  }
  const double band = p.height * (1.0 - p.top_margin_frac - p.bottom_margin_frac);
  std::vector<double> u(p.layers);
  double usum = 0;
  for (auto& v : u) usum += (v = rng.uniform(0.85, 1.15));
  r.layer_thickness.resize(p.layers);
  for (int l = 0; l < p.layers; ++l) r.layer_thickness[l] = band * u[l] / usum;

  r.top_offset = p.height * p.top_margin_frac;
  r.wave_amp = rng.uniform(p.wave_amp_min, p.wave_amp_max);
  r.wave_freq = rng.uniform(p.wave_freq_min, p.wave_freq_max);
  r.wave_phase = rng.uniform(0, 2 * M_PI);
  const int nb = p.layers + 1;
  r.ripple_amp.resize(nb);
  r.ripple_freq.resize(nb);
  r.ripple_phase.resize(nb);
  for (int i = 0; i < nb; ++i) {
    r.ripple_amp[i] = rng.uniform(0, p.ripple_amp_max);
    r.ripple_freq[i] = rng.uniform(1.0, 3.0);
    r.ripple_phase[i] = rng.uniform(0, 2 * M_PI);
  }
  const int nv = rng.uniform_int(p.vessel_count_min, p.vessel_count_max);
  for (int i = 0; i < nv; ++i) {
    PhantomRecipe::Vessel v;
    v.width = rng.uniform_int(p.vessel_width_min, p.vessel_width_max);
    v.col = rng.uniform_int(0, std::max(0, p.width - v.width));
    r.vessels.push_back(v);
  }
  r.noise_seed = rng.next_u64();
  return r;
}

ScanSample render_phantom(const PhantomParams& p, const PhantomRecipe& r,
                          const std::string& subject_id, int scan_index) {
  const int H = p.height, W = p.width, L = p.layers;
  ScanSample s;
  s.subject_id = subject_id;
  s.scan_index = scan_index;
  s.label = Tensor({H, W});
  s.image = Tensor({1, H, W});
  std::vector<int> top_edge(W);

  for (int c = 0; c < W; ++c) {
    // integer boundary rows; +1 keeps every layer at least one pixel tall
    std::vector<int> edge(L + 1);
    double b = r.top_offset + wave_at(r, c, W);
    edge[0] = (int)std::llround(b + ripple_at(r, 0, c, W));
    edge[0] = std::clamp(edge[0], 0, H - L - 1);
    for (int l = 1; l <= L; ++l) {
      b += r.layer_thickness[l - 1];
      int e = (int)std::llround(b + ripple_at(r, (size_t)l, c, W));
      edge[l] = std::max(edge[l - 1] + 1, std::min(e, H - (L - l)));
    }
    top_edge[c] = edge[0];
    for (int row = 0; row < H; ++row) {
      int lab = 0;
      if (row >= edge[0] && row < edge[L]) {
        int l = 1;
        while (row >= edge[l]) ++l;
        lab = l;
      }
      s.label.at(row, c) = (Scalar)lab;
      s.image[(long long)row * W + c] =
          lab == 0 ? p.background_intensity : r.layer_means[lab - 1];
    }
  }

  if (p.speckle_sigma > 0) {
    Rng noise(r.noise_seed);
    const double shape = 1.0 / (p.speckle_sigma * p.speckle_sigma);
    Scalar* img = s.image.data();
    for (long long i = 0; i < (long long)H * W; ++i)
      img[i] *= noise.gamma(shape) / shape;
  }

  for (const auto& v : r.vessels) {
    for (int c = v.col; c < std::min(W, v.col + v.width); ++c)
      for (int row = top_edge[c]; row < H; ++row)
        s.image[(long long)row * W + c] *= p.vessel_attenuation;
  }

  Scalar* img = s.image.data();
  for (long long i = 0; i < (long long)H * W; ++i)
    img[i] = std::clamp(img[i], 0.0, 1.0);

  s.mask = derive_guidance_mask(s.label);
  return s;
}

ScanSample generate_phantom(const PhantomParams& p, const std::string& subject_id,
                            int scan_index) {
  return render_phantom(p, sample_recipe(p, subject_id, scan_index), subject_id,
                        scan_index);
}

namespace {

Tensor warp_nearest(const Tensor& in, double m[6]) {
  const int H = in.dim(0), W = in.dim(1);
  Tensor out({H, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double sx = m[0] * x + m[1] * y + m[2];
      const double sy = m[3] * x + m[4] * y + m[5];
      const int ix = (int)std::llround(sx), iy = (int)std::llround(sy);
      out.at(y, x) = (ix >= 0 && ix < W && iy >= 0 && iy < H) ? in.at(iy, ix) : 0.0;
    }
  return out;
}

Tensor warp_bilinear(const Tensor& in, double m[6]) {
  // in is [1,H,W]
  const int H = in.dim(1), W = in.dim(2);
  Tensor out({1, H, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double sx = m[0] * x + m[1] * y + m[2];
      const double sy = m[3] * x + m[4] * y + m[5];
      const int x0 = (int)std::floor(sx), y0 = (int)std::floor(sy);
      const double fx = sx - x0, fy = sy - y0;
      double acc = 0;
      for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
          const int xx = x0 + dx, yy = y0 + dy;
          if (xx < 0 || xx >= W || yy < 0 || yy >= H) continue;
          const double wgt = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy);
          acc += wgt * in[(long long)yy * W + xx];
        }
      out[(long long)y * W + x] = acc;
    }
  return out;
}

}  // namespace

ScanSample augment(const ScanSample& s, const Augmentation& a) {
  const int H = s.height(), W = s.width();
  ScanSample out;
  out.subject_id = s.subject_id;
  out.scan_index = s.scan_index;

  if (a.kind == AugKind::hflip) {
    out.image = Tensor({1, H, W});
    out.label = Tensor({H, W});
    out.mask = Tensor({H, W});
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        out.image[(long long)y * W + x] = s.image[(long long)y * W + (W - 1 - x)];
        out.label.at(y, x) = s.label.at(y, W - 1 - x);
        out.mask.at(y, x) = s.mask.at(y, W - 1 - x);
      }
    return out;
  }

  double m[6];  // inverse map: source = m * (x, y, 1)
  if (a.kind == AugKind::translate) {
    double dx = a.dx, dy = a.dy;
    const double bx = W - 1, by = H - 1;
    const double cx = std::clamp(dx, -bx, bx), cy = std::clamp(dy, -by, by);
    if (cx != dx || cy != dy)
      std::fprintf(stderr, "augment: translation (%g,%g) clamped to (%g,%g)\n", dx, dy,
                   cx, cy);
    m[0] = 1; m[1] = 0; m[2] = -cx;
    m[3] = 0; m[4] = 1; m[5] = -cy;
  } else {
    double th = a.theta_deg;
    const double bound = std::abs(a.max_rotation);
    const double cth = std::clamp(th, -bound, bound);
    if (cth != th)
      std::fprintf(stderr, "augment: rotation %g deg clamped to %g deg\n", th, cth);
    const double rad = cth * M_PI / 180.0;
    const double c = std::cos(rad), sn = std::sin(rad);
    const double ox = (W - 1) / 2.0, oy = (H - 1) / 2.0;
    // inverse rotation about the image center
    m[0] = c;  m[1] = sn;  m[2] = ox - c * ox - sn * oy;
    m[3] = -sn; m[4] = c;  m[5] = oy + sn * ox - c * oy;
  }

  out.image = warp_bilinear(s.image, m);
  out.label = warp_nearest(s.label, m);
  out.mask = warp_nearest(s.mask, m);
  return out;
}

Augmentation random_augmentation(Rng& rng, int height, int width,
                                 double max_rotation_deg, double max_translate_frac) {
  Augmentation a;
  switch (rng.uniform_int(0, 3)) {
    case 0:
      a.kind = AugKind::hflip;
      break;
    case 1:
      a.kind = AugKind::translate;
      a.dx = rng.uniform(-max_translate_frac, max_translate_frac) * width;
      a.dy = rng.uniform(-max_translate_frac, max_translate_frac) * height;
      break;
    case 2:
      a.kind = AugKind::rotate;
      a.theta_deg = rng.uniform(-max_rotation_deg, max_rotation_deg);
      a.max_rotation = max_rotation_deg;
      break;
    default: {  // identity via zero translation
      a.kind = AugKind::translate;
      a.dx = a.dy = 0;
      break;
    }
  }
  return a;
}

std::vector<int> crop_positions(int extent, int window, double overlap) {
  if (window > extent) throw ConfigError("crop_windows: window exceeds image extent");
  if (overlap < 0 || overlap >= 1)
    throw ConfigError("crop_windows: overlap must be in [0,1)");
  const int stride = std::max(1, (int)std::llround(window * (1.0 - overlap)));
  std::vector<int> pos;
  for (int p = 0; p + window <= extent; p += stride) pos.push_back(p);
  if (pos.empty() || pos.back() + window < extent) pos.push_back(extent - window);
  pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
  return pos;
}

std::vector<ScanSample> crop_windows(const ScanSample& s, int window, double overlap) {
  const int H = s.height(), W = s.width();
  const auto rows = crop_positions(H, window, overlap);
  const auto cols = crop_positions(W, window, overlap);
  std::vector<ScanSample> out;
  out.reserve(rows.size() * cols.size());
  for (int ry : rows)
    for (int cx : cols) {
      ScanSample w2;
      w2.subject_id = s.subject_id;
      w2.scan_index = s.scan_index;
      w2.image = Tensor({1, window, window});
      w2.label = Tensor({window, window});
      w2.mask = Tensor({window, window});
      for (int y = 0; y < window; ++y)
        for (int x = 0; x < window; ++x) {
          w2.image[(long long)y * window + x] =
              s.image[(long long)(ry + y) * W + cx + x];
          w2.label.at(y, x) = s.label.at(ry + y, cx + x);
          w2.mask.at(y, x) = s.mask.at(ry + y, cx + x);
        }
      out.push_back(std::move(w2));
    }
  return out;
}

Tensor derive_guidance_mask(const Tensor& label, const std::set<int>& guided_layers) {
  for (int g : guided_layers)
    if (g < 1 || g > kLayerCount)
      throw ConfigError("derive_guidance_mask: guided layers must be in 1..7");
  Tensor mask(label.shape());
  for (long long i = 0; i < label.size(); ++i)
    mask[i] = guided_layers.count((int)label[i]) ? 1.0 : 0.0;
  return mask;
}

Tensor derive_guidance_mask(const Tensor& label) {
  std::set<int> all;
  for (int l = 1; l <= kLayerCount; ++l) all.insert(l);
  return derive_guidance_mask(label, all);
}

Tensor downsample_mask(const Tensor& mask, int factor) {
  if (factor <= 0) throw ConfigError("downsample_mask: factor must be positive");
  check_shape(mask.rank() == 2, "downsample_mask: expected [H,W]");
  const int H = mask.dim(0), W = mask.dim(1);
  const int Ho = (H + factor - 1) / factor, Wo = (W + factor - 1) / factor;
  Tensor out({Ho, Wo});
  for (int y = 0; y < Ho; ++y)
    for (int x = 0; x < Wo; ++x) {
      Scalar acc = 0;
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx) {
          const int sy = y * factor + dy, sx = x * factor + dx;
          if (sy < H && sx < W) acc += mask.at(sy, sx);  // zero padding
        }
      out.at(y, x) = acc / (Scalar)(factor * factor);
    }
  return out;
}

Tensor downsample_area(const Tensor& image, int factor) {
  if (factor <= 0) throw ConfigError("downsample_area: factor must be positive");
  if (image.rank() == 2) return downsample_mask(image, factor);
  check_shape(image.rank() == 3, "downsample_area: expected [C,H,W] or [H,W]");
  const int C = image.dim(0), H = image.dim(1), W = image.dim(2);
  const int Ho = (H + factor - 1) / factor, Wo = (W + factor - 1) / factor;
  Tensor out({C, Ho, Wo});
  for (int c = 0; c < C; ++c) {
    Tensor plane({H, W});
    std::copy(image.data() + (long long)c * H * W,
              image.data() + (long long)(c + 1) * H * W, plane.data());
    Tensor down = downsample_mask(plane, factor);
    std::copy(down.data(), down.data() + down.size(), out.data() + (long long)c * Ho * Wo);
  }
  return out;
}

Tensor downsample_label(const Tensor& label, int factor) {
  if (factor <= 0) throw ConfigError("downsample_label: factor must be positive");
  check_shape(label.rank() == 2, "downsample_label: expected [H,W]");
  const int H = label.dim(0), W = label.dim(1);
  const int Ho = H / factor, Wo = W / factor;
  check_shape(Ho * factor == H && Wo * factor == W,
              "downsample_label: size must divide");
  Tensor out({Ho, Wo});
  for (int y = 0; y < Ho; ++y)
    for (int x = 0; x < Wo; ++x) out.at(y, x) = label.at(y * factor, x * factor);
  return out;
}

std::vector<std::string> FoldSplit::train_subjects(int fold) const {
  std::vector<std::string> out;
  for (int i = 0; i < k; ++i) {
    if (i == fold) continue;
    out.insert(out.end(), validation[(size_t)i].begin(), validation[(size_t)i].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

FoldSplit split_kfold(std::vector<std::string> subject_ids, int k, uint64_t seed) {
  if (k < 2) throw ConfigError("split_kfold: k must be >= 2");
  if ((int)subject_ids.size() < k)
    throw ConfigError("split_kfold: need at least k subjects");
  Rng rng(hash_combine(seed, 0xf01d5ULL));
  rng.shuffle(subject_ids);
  FoldSplit split;
  split.k = k;
  split.validation.resize((size_t)k);
  const int n = (int)subject_ids.size();
  const int base = n / k, extra = n % k;
  int at = 0;
  for (int i = 0; i < k; ++i) {
    const int sz = base + (i < extra ? 1 : 0);
    for (int j = 0; j < sz; ++j) split.validation[(size_t)i].push_back(subject_ids[(size_t)at++]);
  }
  return split;
}

double foreground_fraction(const ScanSample& s) {
  long long fg = 0;
  for (long long i = 0; i < s.label.size(); ++i)
    if (s.label[i] > 0) ++fg;
  return (double)fg / (double)s.label.size();
}

}  // namespace attnseg::data

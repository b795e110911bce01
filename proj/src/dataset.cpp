#include "attnseg/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "attnseg/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace attnseg::data {

namespace {

json params_to_json(const PhantomParams& p) {
  return json{{"height", p.height},
              {"width", p.width},
              {"layers", p.layers},
              {"wave_amp", {p.wave_amp_min, p.wave_amp_max}},
              {"wave_freq", {p.wave_freq_min, p.wave_freq_max}},
              {"ripple_amp_max", p.ripple_amp_max},
              {"layer_intensity", {p.layer_intensity_min, p.layer_intensity_max}},
              {"background_intensity", p.background_intensity},
              {"intensity_jitter", p.intensity_jitter},
              {"speckle_sigma", p.speckle_sigma},
              {"vessel_count", {p.vessel_count_min, p.vessel_count_max}},
              {"vessel_width", {p.vessel_width_min, p.vessel_width_max}},
              {"vessel_attenuation", p.vessel_attenuation},
              {"margins", {p.top_margin_frac, p.bottom_margin_frac}},
              {"seed", p.seed}};
}

std::string scan_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scan%04d", index);
  return buf;
}

}  // namespace

void write_dataset(const std::string& dir, const std::vector<ScanSample>& samples,
                   const PhantomParams* params) {
  fs::create_directories(dir);
  json manifest;
  manifest["sample_count"] = samples.size();
  if (params) manifest["generator_params"] = params_to_json(*params);
  manifest["samples"] = json::array();

  for (const auto& s : samples) {
    const fs::path sub = fs::path(dir) / s.subject_id;
    fs::create_directories(sub);
    const int H = s.height(), W = s.width();
    const std::string stem = scan_stem(s.scan_index);

    png_io::GrayImage img;
    img.width = W;
    img.height = H;
    img.bit_depth = 16;
    img.pixels.resize((size_t)W * H);
    for (long long i = 0; i < (long long)W * H; ++i)
      img.pixels[(size_t)i] =
          (uint16_t)std::llround(std::clamp(s.image[i], 0.0, 1.0) * 65535.0);
    png_io::write_gray((sub / (stem + "_img.png")).string(), img);

    png_io::GrayImage lbl;
    lbl.width = W;
    lbl.height = H;
    lbl.bit_depth = 8;
    lbl.pixels.resize((size_t)W * H);
    for (long long i = 0; i < (long long)W * H; ++i)
      lbl.pixels[(size_t)i] = (uint16_t)s.label[i];
    png_io::write_gray((sub / (stem + "_lbl.png")).string(), lbl);

    png_io::GrayImage msk = lbl;
    for (long long i = 0; i < (long long)W * H; ++i)
      msk.pixels[(size_t)i] = s.mask[i] > 0.5 ? 255 : 0;
    png_io::write_gray((sub / (stem + "_msk.png")).string(), msk);

    manifest["samples"].push_back(
        {{"subject_id", s.subject_id},
         {"scan_index", s.scan_index},
         {"image", (fs::path(s.subject_id) / (stem + "_img.png")).string()},
         {"label", (fs::path(s.subject_id) / (stem + "_lbl.png")).string()},
         {"mask", (fs::path(s.subject_id) / (stem + "_msk.png")).string()}});
  }
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

std::vector<ScanSample> load_dataset(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw IoError("no manifest.json in " + dir);
  json manifest;
  in >> manifest;

  std::vector<ScanSample> samples;
  for (const auto& entry : manifest.at("samples")) {
    ScanSample s;
    s.subject_id = entry.at("subject_id").get<std::string>();
    s.scan_index = entry.at("scan_index").get<int>();

    const auto img = png_io::read_gray((fs::path(dir) / entry.at("image").get<std::string>()).string());
    const auto lbl = png_io::read_gray((fs::path(dir) / entry.at("label").get<std::string>()).string());
    const auto msk = png_io::read_gray((fs::path(dir) / entry.at("mask").get<std::string>()).string());
    if (img.width != lbl.width || img.height != lbl.height || img.width != msk.width ||
        img.height != msk.height)
      throw IoError("dataset: image/label/mask size mismatch for " + s.subject_id);

    const int H = img.height, W = img.width;
    const double scale = img.bit_depth == 16 ? 65535.0 : 255.0;
    s.image = Tensor({1, H, W});
    s.label = Tensor({H, W});
    s.mask = Tensor({H, W});
    for (long long i = 0; i < (long long)H * W; ++i) {
      s.image[i] = (Scalar)img.pixels[(size_t)i] / scale;
      s.label[i] = (Scalar)lbl.pixels[(size_t)i];
      s.mask[i] = msk.pixels[(size_t)i] > 0 ? 1.0 : 0.0;
    }
    samples.push_back(std::move(s));
  }
  if (samples.size() != manifest.at("sample_count").get<size_t>())
    throw IoError("dataset: manifest count mismatch");
  return samples;
}

std::vector<std::string> subject_ids(const std::vector<ScanSample>& samples) {
  std::set<std::string> ids;
  for (const auto& s : samples) ids.insert(s.subject_id);
  return {ids.begin(), ids.end()};
}

}  // namespace attnseg::data

#pragma once

#include <string>
#include <vector>

#include "attnseg/data.hpp"

namespace attnseg::data {

// On-disk layout: one directory per subject with img/lbl/msk PNGs per scan
// (image 16-bit, label 8-bit class indices, mask 8-bit {0,255}) plus a
// manifest.json recording ids, paths and the generator parameters.
void write_dataset(const std::string& dir, const std::vector<ScanSample>& samples,
                   const PhantomParams* params);

std::vector<ScanSample> load_dataset(const std::string& dir);

std::vector<std::string> subject_ids(const std::vector<ScanSample>& samples);

}  // namespace attnseg::data

// Copyright 2026 The regionmim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "regionmim/dataset.hpp"

namespace regionmim {

// In-organ texture of one class: a sinusoidal grating.
struct ClassTexture {
  double period = 4.0;     // pixels
  double angle = 0.0;      // radians
  double amplitude = 0.25;
  double noise = 0.08;     // stddev of additive Gaussian noise
  double phase = 0.0;      // radians, at pixel (0, 0)
};

struct SyntheticSpec {
  std::size_t size = 32;  // square images
  std::size_t samples_per_class = 100;
  std::uint64_t seed = 0;
  std::size_t patch_size = 8;  // only validated against `size`
  double train_fraction = 0.8;
  double background_level = 0.1;
  double background_noise = 0.05;
  double organ_level = 0.5;
  std::vector<ClassTexture> textures = default_textures();

  static std::vector<ClassTexture> default_textures();
  void validate() const;
};

// Mask: union of two filled ellipses covering 20-50% of the pixels, drawn
// independently of the class. Inside it, class texture plus noise; outside,
// class-independent low-intensity noise.
struct SyntheticSample {
  ImageGrid image;
  MaskImage mask;
  int label = 0;
};
SyntheticSample synthesize_sample(const SyntheticSpec& spec, int label,
                                  std::uint64_t seed);

// Writes images/, masks/ and manifest.csv under out_dir with a per-class
// stratified train/test split.
DatasetManifest generate_synthetic(const SyntheticSpec& spec,
                                   const std::filesystem::path& out_dir);

}  // namespace regionmim

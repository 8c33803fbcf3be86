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

#include "regionmim/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "regionmim/errors.hpp"
#include "regionmim/pgm.hpp"
#include "regionmim/rng.hpp"

namespace regionmim {

std::vector<ClassTexture> SyntheticSpec::default_textures() {
  const double pi = std::numbers::pi;
  return {
      {4.0, 0.0, 0.25, 0.08},
      {4.0, pi / 4, 0.25, 0.08},
      {4.0, pi / 2, 0.25, 0.08},
      {4.0, 3 * pi / 4, 0.25, 0.08},
  };
}

void SyntheticSpec::validate() const {
  if (size < 8) throw ContractError("synthetic images must be at least 8x8");
  if (patch_size == 0 || size % patch_size != 0) {
    throw GeometryError("synthetic size " + std::to_string(size) +
                        " is not divisible by patch size T=" +
                        std::to_string(patch_size));
  }
  if (samples_per_class == 0) throw ContractError("samples_per_class must be positive");
  if (textures.empty()) throw ContractError("at least one class texture is required");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ContractError("train_fraction must lie in (0, 1)");
  }
}

namespace {

constexpr double kMinCoverage = 0.2;
constexpr double kMaxCoverage = 0.5;

MaskImage draw_organ_mask(std::size_t size, Rng& rng) {
  const double s = static_cast<double>(size);
  for (;;) {
    MaskImage mask(size, size);
    // Left and right lobes.
    for (int lobe = 0; lobe < 2; ++lobe) {
      const double cx = lobe == 0 ? rng.uniform(0.2, 0.45) * s
                                  : rng.uniform(0.55, 0.8) * s;
      const double cy = rng.uniform(0.35, 0.65) * s;
      const double ax = rng.uniform(0.1, 0.22) * s;
      const double ay = rng.uniform(0.2, 0.4) * s;
      for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
          const double dx = (x + 0.5 - cx) / ax;
          const double dy = (y + 0.5 - cy) / ay;
          if (dx * dx + dy * dy <= 1.0) mask.at(y, x) = 1;
        }
      }
    }
    std::size_t set = 0;
    for (auto b : mask.bits) set += b;
    const double coverage = static_cast<double>(set) / (s * s);
    if (coverage >= kMinCoverage && coverage <= kMaxCoverage) return mask;
  }
}

double quantize(double v) {
  return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

}  // namespace

SyntheticSample synthesize_sample(const SyntheticSpec& spec, int label,
                                  std::uint64_t seed) {
  if (label < 0 || static_cast<std::size_t>(label) >= spec.textures.size()) {
    throw LabelError("synthetic label " + std::to_string(label) +
                     " has no texture");
  }
  // Geometry and texture use separate streams so the mask never depends on
  // the label.
  Rng shape_rng(derive_seed(seed, {0x6d61736b}));
  Rng pixel_rng(derive_seed(seed, {0x706978}));
  SyntheticSample out;
  out.label = label;
  out.mask = draw_organ_mask(spec.size, shape_rng);
  out.image = ImageGrid(spec.size, spec.size, 1);
  const ClassTexture& tex = spec.textures[label];
  // The grating is anchored to the image origin, so the texture of any organ
  // patch follows from its position and the class alone.
  const double phase = tex.phase;
  const double kx = std::cos(tex.angle) * 2.0 * std::numbers::pi / tex.period;
  const double ky = std::sin(tex.angle) * 2.0 * std::numbers::pi / tex.period;
  for (std::size_t y = 0; y < spec.size; ++y) {
    for (std::size_t x = 0; x < spec.size; ++x) {
      double v;
      if (out.mask.at(y, x)) {
        v = spec.organ_level + tex.amplitude * std::sin(kx * x + ky * y + phase) +
            tex.noise * pixel_rng.normal();
      } else {
        v = spec.background_level + spec.background_noise * pixel_rng.normal();
      }
      out.image.at(y, x) = quantize(v);
    }
  }
  return out;
}

DatasetManifest generate_synthetic(const SyntheticSpec& spec,
                                   const std::filesystem::path& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  fs::create_directories(out_dir / "masks", ec);
  if (ec) throw IngestionError(out_dir.string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.root = fs::absolute(out_dir);
  manifest.num_classes = spec.textures.size();
  const std::size_t per_class = spec.samples_per_class;
  const std::size_t train_count = static_cast<std::size_t>(
      std::lround(spec.train_fraction * static_cast<double>(per_class)));

  for (std::size_t k = 0; k < spec.textures.size(); ++k) {
    manifest.class_names.push_back("class_" + std::to_string(k));
    std::vector<std::size_t> order(per_class);
    for (std::size_t i = 0; i < per_class; ++i) order[i] = i;
    Rng split_rng(derive_seed(spec.seed, {0x73706c6974, k}));
    split_rng.shuffle(std::span<std::size_t>(order));
    std::vector<bool> is_train(per_class, false);
    for (std::size_t i = 0; i < train_count; ++i) is_train[order[i]] = true;

    for (std::size_t i = 0; i < per_class; ++i) {
      const SyntheticSample s = synthesize_sample(
          spec, static_cast<int>(k), derive_seed(spec.seed, {k, i}));
      char name[64];
      std::snprintf(name, sizeof(name), "c%zu_%04zu.pgm", k, i);
      std::vector<std::uint8_t> pixels(s.image.pixels.size());
      for (std::size_t p = 0; p < pixels.size(); ++p) {
        pixels[p] = static_cast<std::uint8_t>(std::lround(s.image.pixels[p] * 255.0));
      }
      std::vector<std::uint8_t> mask(s.mask.bits.size());
      for (std::size_t p = 0; p < mask.size(); ++p) mask[p] = s.mask.bits[p] ? 255 : 0;
      SampleRecord rec;
      rec.image_path = manifest.root / "images" / name;
      rec.mask_path = manifest.root / "masks" / name;
      rec.label_id = static_cast<int>(k);
      rec.split = is_train[i] ? "train" : "test";
      rec.row = manifest.records.size() + 1;
      write_pgm(rec.image_path, spec.size, spec.size, pixels);
      write_pgm(rec.mask_path, spec.size, spec.size, mask);
      manifest.records.push_back(std::move(rec));
    }
  }
  write_manifest(out_dir / "manifest.csv", manifest);
  return manifest;
}

}  // namespace regionmim

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

#include "regionmim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "regionmim/errors.hpp"
#include "regionmim/pgm.hpp"

namespace regionmim {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

std::vector<SampleRecord> DatasetManifest::split(const std::string& tag) const {
  std::vector<SampleRecord> out;
  for (const auto& r : records) {
    if (r.split == tag) out.push_back(r);
  }
  return out;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError(path.string() + ": cannot open manifest");
  DatasetManifest manifest;
  manifest.root = std::filesystem::absolute(path).parent_path();

  std::string line;
  if (!std::getline(in, line) || trim(line) != kManifestHeader) {
    throw IngestionError(path.string() + ": header must be '" +
                         std::string(kManifestHeader) + "'");
  }
  std::set<std::filesystem::path> seen;
  int max_label = -1;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const std::string where = path.string() + " row " + std::to_string(row);
    const auto fields = split_csv(line);
    if (fields.size() != 4) {
      throw IngestionError(where + ": expected 4 fields, got " +
                           std::to_string(fields.size()));
    }
    SampleRecord rec;
    rec.row = row;
    rec.image_path = manifest.root / fields[0];
    rec.mask_path = manifest.root / fields[1];
    try {
      std::size_t used = 0;
      rec.label_id = std::stoi(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw IngestionError(where + ": bad label id '" + fields[2] + "'");
    }
    if (rec.label_id < 0) {
      throw IngestionError(where + ": bad label id '" + fields[2] + "'");
    }
    rec.split = fields[3];
    if (rec.split != "train" && rec.split != "test") {
      throw IngestionError(where + ": split must be train or test, got '" +
                           rec.split + "'");
    }
    if (!std::filesystem::exists(rec.image_path)) {
      throw IngestionError(where + ": missing image file " +
                           rec.image_path.string());
    }
    if (!std::filesystem::exists(rec.mask_path)) {
      throw IngestionError(where + ": missing mask file " +
                           rec.mask_path.string());
    }
    const auto canonical = rec.image_path.lexically_normal();
    if (!seen.insert(canonical).second) {
      throw IngestionError(where + ": duplicate image path " + fields[0]);
    }
    max_label = std::max(max_label, rec.label_id);
    manifest.records.push_back(std::move(rec));
  }
  if (manifest.records.empty()) {
    throw IngestionError(path.string() + ": manifest has no rows");
  }
  manifest.num_classes = static_cast<std::size_t>(max_label + 1);
  std::vector<bool> present(manifest.num_classes, false);
  for (const auto& r : manifest.records) present[r.label_id] = true;
  for (std::size_t k = 0; k < present.size(); ++k) {
    if (!present[k]) {
      throw IngestionError(path.string() + ": label ids must cover 0.." +
                           std::to_string(max_label) + "; " +
                           std::to_string(k) + " is missing");
    }
    manifest.class_names.push_back("class_" + std::to_string(k));
  }
  return manifest;
}

void write_manifest(const std::filesystem::path& path,
                    const DatasetManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw IngestionError(path.string() + ": cannot open for writing");
  out << kManifestHeader << '\n';
  const auto base = std::filesystem::absolute(path).parent_path();
  for (const auto& r : manifest.records) {
    out << std::filesystem::path(r.image_path).lexically_relative(base).generic_string()
        << ',' << std::filesystem::path(r.mask_path).lexically_relative(base).generic_string()
        << ',' << r.label_id << ',' << r.split << '\n';
  }
  if (!out) throw IngestionError(path.string() + ": write failed");
}

std::vector<UnlabeledSample> drop_labels(const std::vector<LabeledSample>& in) {
  std::vector<UnlabeledSample> out;
  out.reserve(in.size());
  for (const auto& s : in) out.push_back({s.image, s.mask});
  return out;
}

ImageGrid resize_bilinear(const ImageGrid& image, std::size_t height,
                          std::size_t width) {
  if (image.height == height && image.width == width) return image;
  if (height == 0 || width == 0) throw GeometryError("resize to empty size");
  ImageGrid out(height, width, image.channels);
  const double sy = static_cast<double>(image.height) / height;
  const double sx = static_cast<double>(image.width) / width;
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(image.height - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(image.width - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (std::size_t c = 0; c < image.channels; ++c) {
        const double top =
            image.at(y0, x0, c) * (1 - wx) + image.at(y0, x1, c) * wx;
        const double bottom =
            image.at(y1, x0, c) * (1 - wx) + image.at(y1, x1, c) * wx;
        out.at(y, x, c) = top * (1 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

MaskImage resize_nearest(const MaskImage& mask, std::size_t height,
                         std::size_t width) {
  if (mask.height == height && mask.width == width) return mask;
  if (height == 0 || width == 0) throw GeometryError("resize to empty size");
  MaskImage out(height, width);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = std::min(
        static_cast<std::size_t>((y + 0.5) * mask.height / height),
        mask.height - 1);
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t sx = std::min(
          static_cast<std::size_t>((x + 0.5) * mask.width / width),
          mask.width - 1);
      out.at(y, x) = mask.at(sy, sx);
    }
  }
  return out;
}

LabeledSample load_sample(const SampleRecord& record, std::size_t height,
                          std::size_t width) {
  const GrayImage img = read_pgm(record.image_path);
  const GrayImage msk = read_pgm(record.mask_path);
  if (img.width != msk.width || img.height != msk.height) {
    throw IngestionError("manifest row " + std::to_string(record.row) +
                         ": image and mask sizes differ");
  }
  ImageGrid grid(img.height, img.width, 1);
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    grid.pixels[i] = static_cast<double>(img.samples[i]) / img.maxval;
  }
  // Threshold at half of maxval before the (nearest, value-preserving)
  // resize; equivalent to thresholding after it.
  MaskImage mask(msk.height, msk.width);
  for (std::size_t i = 0; i < msk.samples.size(); ++i) {
    mask.bits[i] =
        static_cast<double>(msk.samples[i]) / msk.maxval >= 0.5 ? 1 : 0;
  }
  LabeledSample out;
  out.image = resize_bilinear(grid, height, width);
  for (double& v : out.image.pixels) v = std::clamp(v, 0.0, 1.0);
  out.mask = resize_nearest(mask, height, width);
  out.label = record.label_id;
  return out;
}

std::vector<LabeledSample> load_samples(const std::vector<SampleRecord>& records,
                                        std::size_t height, std::size_t width) {
  std::vector<LabeledSample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(load_sample(r, height, width));
  return out;
}

}  // namespace regionmim

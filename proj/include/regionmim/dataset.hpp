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
#include <filesystem>
#include <string>
#include <vector>

#include "regionmim/patching.hpp"

namespace regionmim {

struct SampleRecord {
  std::filesystem::path image_path;  // absolute after load_manifest
  std::filesystem::path mask_path;
  int label_id = 0;
  std::string split;  // "train" or "test"
  std::size_t row = 0;  // 1-based data row in the manifest
};

struct DatasetManifest {
  std::filesystem::path root;
  std::size_t num_classes = 0;
  std::vector<std::string> class_names;
  std::vector<SampleRecord> records;

  std::vector<SampleRecord> split(const std::string& tag) const;
};

inline constexpr const char* kManifestHeader =
    "image_path,mask_path,label_id,split";

// Parses the header-plus-rows CSV. Relative paths resolve against the
// manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    const DatasetManifest& manifest);

struct LabeledSample {
  ImageGrid image;
  MaskImage mask;
  int label = 0;
};

// Image without its label: the only input pretraining accepts.
struct UnlabeledSample {
  ImageGrid image;
  MaskImage mask;
};

std::vector<UnlabeledSample> drop_labels(const std::vector<LabeledSample>& in);

// Half-pixel-centered bilinear resampling with edge clamping. Same-size
// input is returned unchanged.
ImageGrid resize_bilinear(const ImageGrid& image, std::size_t height,
                          std::size_t width);
// Nearest-neighbor resampling of mask values.
MaskImage resize_nearest(const MaskImage& mask, std::size_t height,
                         std::size_t width);

// Decodes, scales the image to [0, 1] and resizes it bilinearly; the mask is
// scaled by its maxval, resized nearest-neighbor, then set where >= 0.5.
LabeledSample load_sample(const SampleRecord& record, std::size_t height,
                          std::size_t width);

std::vector<LabeledSample> load_samples(const std::vector<SampleRecord>& records,
                                        std::size_t height, std::size_t width);

}  // namespace regionmim

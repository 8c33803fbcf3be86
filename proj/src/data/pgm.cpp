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

#include "regionmim/pgm.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include "regionmim/errors.hpp"

namespace regionmim {

namespace {

class HeaderReader {
 public:
  HeaderReader(const std::vector<char>& bytes, const std::string& name)
      : bytes_(bytes), name_(name) {}

  std::size_t read_number() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() ||
        !std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      throw IngestionError(name_ + ": malformed PGM header");
    }
    std::size_t value = 0;
    while (pos_ < bytes_.size() &&
           std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (value > (1u << 30)) throw IngestionError(name_ + ": header value too large");
      ++pos_;
    }
    return value;
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() ||
        !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw IngestionError(name_ + ": malformed PGM header");
    }
    return pos_ + 1;
  }

  std::size_t pos_ = 2;

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<char>& bytes_;
  const std::string& name_;
};

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(name + ": cannot open file");
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  if (bytes.size() < 2 || bytes[0] != 'P') {
    throw IngestionError(name + ": not a PNM file");
  }
  if (bytes[1] == '3' || bytes[1] == '6') {
    throw IngestionError(name + ": color PPM is not grayscale");
  }
  if (bytes[1] != '5') {
    throw IngestionError(name + ": only binary PGM (P5) is supported");
  }
  HeaderReader header(bytes, name);
  GrayImage img;
  img.width = header.read_number();
  img.height = header.read_number();
  const std::size_t maxval = header.read_number();
  if (img.width == 0 || img.height == 0 || maxval == 0 || maxval > 65535) {
    throw IngestionError(name + ": invalid PGM dimensions or maxval");
  }
  img.maxval = static_cast<std::uint32_t>(maxval);
  const std::size_t offset = header.raster_offset();
  const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
  const std::size_t count = img.width * img.height;
  if (bytes.size() - offset < count * bytes_per_sample) {
    throw IngestionError(name + ": truncated raster");
  }
  img.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t v;
    if (bytes_per_sample == 1) {
      v = static_cast<unsigned char>(bytes[offset + i]);
    } else {
      v = (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 2 * i])) << 8) |
          static_cast<unsigned char>(bytes[offset + 2 * i + 1]);
    }
    if (v > maxval) throw IngestionError(name + ": sample exceeds maxval");
    img.samples[i] = static_cast<std::uint16_t>(v);
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, std::size_t width,
               std::size_t height, const std::vector<std::uint8_t>& samples) {
  if (samples.size() != width * height) {
    throw DimensionError("write_pgm: sample count does not match " +
                         std::to_string(width) + "x" + std::to_string(height));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError(path.string() + ": cannot open for writing");
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(samples.data()),
            static_cast<std::streamsize>(samples.size()));
  if (!out) throw IngestionError(path.string() + ": write failed");
}

}  // namespace regionmim

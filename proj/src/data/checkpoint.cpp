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

#include "regionmim/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "regionmim/errors.hpp"

namespace regionmim {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : arrays) {
    if (n == name) return &t;
  }
  return nullptr;
}

void Checkpoint::put(const std::string& name, const Tensor& value) {
  for (auto& [n, t] : arrays) {
    if (n == name) {
      t = value;
      return;
    }
  }
  arrays.emplace_back(name, value);
}

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

constexpr char kMagic[4] = {'R', 'G', 'M', 'M'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes.insert(bytes.end(), p, p + n);
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b, std::size_t limit)
      : bytes_(b), limit_(limit) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const std::uint8_t* take(std::size_t n) {
    if (n > limit_ - pos_) throw CheckpointError("checkpoint is truncated");
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint32_t>(Checkpoint::kVersion);
  std::string config;
  for (const auto& [k, v] : ckpt.config) {
    if (k.find_first_of("=\n") != std::string::npos ||
        v.find('\n') != std::string::npos) {
      throw CheckpointError("config entry '" + k + "' is not serializable");
    }
    config += k + "=" + v + "\n";
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(config.size()));
  w.put_bytes(config.data(), config.size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& [name, t] : ckpt.arrays) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name.data(), name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) w.put<std::uint64_t>(e);
  }
  for (const auto& [name, t] : ckpt.arrays) {
    w.put_bytes(t.data(), t.size() * sizeof(double));
  }
  w.put<std::uint64_t>(fnv1a64(w.bytes.data(), w.bytes.size()));
  return std::move(w.bytes);
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 + 4 + 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  Reader header(bytes, bytes.size());
  header.take(4);
  const auto version = header.get<std::uint32_t>();
  if (version != Checkpoint::kVersion) {
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version) + " (expected " +
                          std::to_string(Checkpoint::kVersion) + ")");
  }
  const std::size_t body = bytes.size() - 8;

  Reader r(bytes, body);
  r.take(8);
  Checkpoint ckpt;
  const auto config_len = r.get<std::uint32_t>();
  const std::string config(reinterpret_cast<const char*>(r.take(config_len)),
                           config_len);
  std::istringstream lines(config);
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("malformed config block");
    ckpt.config[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto count = r.get<std::uint32_t>();
  std::vector<std::pair<std::string, Shape>> table;
  std::set<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint32_t>();
    std::string name(reinterpret_cast<const char*>(r.take(len)), len);
    const auto rank = r.get<std::uint32_t>();
    if (rank == 0 || rank > 8) throw CheckpointError("bad rank for " + name);
    Shape shape(rank);
    for (auto& e : shape) {
      e = static_cast<std::size_t>(r.get<std::uint64_t>());
      if (e == 0 || e > (std::size_t{1} << 32)) {
        throw CheckpointError("bad extent for " + name);
      }
    }
    if (!names.insert(name).second) {
      throw CheckpointError("array '" + name + "' appears twice");
    }
    table.emplace_back(std::move(name), std::move(shape));
  }
  for (auto& [name, shape] : table) {
    const std::size_t n = shape_product(shape);
    std::vector<double> values(n);
    std::memcpy(values.data(), r.take(n * sizeof(double)), n * sizeof(double));
    ckpt.arrays.emplace_back(name, Tensor(shape, std::move(values)));
  }
  if (r.pos() != body) throw CheckpointError("trailing bytes in checkpoint");
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, 8);
  if (stored != fnv1a64(bytes.data(), body)) {
    throw CheckpointError("checkpoint checksum mismatch");
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(tmp.string() + ": cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(tmp.string() + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError(path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(path.string() + ": cannot open checkpoint");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  try {
    return deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::size_t get_size(const Checkpoint& c, const std::string& key) {
  const auto it = c.config.find(key);
  if (it == c.config.end()) throw CheckpointError("missing config key " + key);
  std::size_t v = 0;
  const auto res = std::from_chars(it->second.data(),
                                   it->second.data() + it->second.size(), v);
  if (res.ec != std::errc() || res.ptr != it->second.data() + it->second.size()) {
    throw CheckpointError("bad value for " + key);
  }
  return v;
}

double get_double(const Checkpoint& c, const std::string& key) {
  const auto it = c.config.find(key);
  if (it == c.config.end()) throw CheckpointError("missing config key " + key);
  double v = 0;
  const auto res = std::from_chars(it->second.data(),
                                   it->second.data() + it->second.size(), v);
  if (res.ec != std::errc()) throw CheckpointError("bad value for " + key);
  return v;
}

}  // namespace

void store_model_config(Checkpoint& ckpt, const ModelConfig& config) {
  const EncoderConfig& e = config.encoder;
  const DecoderConfig& d = config.decoder;
  auto& c = ckpt.config;
  c["model.encoder.depth"] = std::to_string(e.depth);
  c["model.encoder.width"] = std::to_string(e.width);
  c["model.encoder.heads"] = std::to_string(e.heads);
  c["model.encoder.mlp_dim"] = std::to_string(e.mlp_dim);
  c["model.encoder.patch_size"] = std::to_string(e.patch_size);
  c["model.encoder.channels"] = std::to_string(e.channels);
  c["model.encoder.max_tokens"] = std::to_string(e.max_tokens);
  c["model.encoder.ln_eps"] = format_double(e.ln_eps);
  c["model.decoder.depth"] = std::to_string(d.depth);
  c["model.decoder.width"] = std::to_string(d.width);
  c["model.decoder.heads"] = std::to_string(d.heads);
  c["model.decoder.mlp_dim"] = std::to_string(d.mlp_dim);
  c["model.num_classes"] = std::to_string(config.num_classes);
}

ModelConfig read_model_config(const Checkpoint& ckpt) {
  ModelConfig config;
  EncoderConfig& e = config.encoder;
  DecoderConfig& d = config.decoder;
  e.depth = get_size(ckpt, "model.encoder.depth");
  e.width = get_size(ckpt, "model.encoder.width");
  e.heads = get_size(ckpt, "model.encoder.heads");
  e.mlp_dim = get_size(ckpt, "model.encoder.mlp_dim");
  e.patch_size = get_size(ckpt, "model.encoder.patch_size");
  e.channels = get_size(ckpt, "model.encoder.channels");
  e.max_tokens = get_size(ckpt, "model.encoder.max_tokens");
  e.ln_eps = get_double(ckpt, "model.encoder.ln_eps");
  d.depth = get_size(ckpt, "model.decoder.depth");
  d.width = get_size(ckpt, "model.decoder.width");
  d.heads = get_size(ckpt, "model.decoder.heads");
  d.mlp_dim = get_size(ckpt, "model.decoder.mlp_dim");
  config.num_classes = get_size(ckpt, "model.num_classes");
  return config;
}

void store_parameters(Checkpoint& ckpt, std::vector<NamedParameter> params) {
  for (const auto& np : params) ckpt.put(np.name, np.param->value);
}

void restore_parameters(const Checkpoint& ckpt,
                        std::vector<NamedParameter> params) {
  for (auto& np : params) {
    const Tensor* t = ckpt.find(np.name);
    if (t == nullptr) {
      throw CheckpointError("checkpoint has no array '" + np.name + "'");
    }
    if (t->shape() != np.param->value.shape()) {
      throw DimensionError("array '" + np.name + "' has shape " +
                            shape_to_string(t->shape()) + ", model expects " +
                            shape_to_string(np.param->value.shape()));
    }
    np.param->value = *t;
    np.param->zero_grad();
  }
}

}  // namespace regionmim

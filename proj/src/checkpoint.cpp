// Copyright 2026 The latentforce Authors
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

#include "latentforce/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "latentforce/errors.hpp"

namespace latentforce {

static_assert(std::endian::native == std::endian::little, "checkpoints assume little-endian hosts");

namespace {

constexpr char kMagic[8] = {'L', 'F', 'C', 'K', 'P', 'T', '\0', '\0'};
constexpr const char* kModelKind = "model";

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_str(std::string& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ArtifactMismatchError("checkpoint is truncated");
  }
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_str() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void get_raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put_str(out, ckpt.kind);
  put_str(out, ckpt.config_json);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const NamedArray& a : ckpt.arrays) {
    put_str(out, a.name);
    put<std::int64_t>(out, a.value.rows());
    put<std::int64_t>(out, a.value.cols());
    out.append(reinterpret_cast<const char*>(a.value.data()), sizeof(double) * a.value.size());
  }
  return out;
}

Checkpoint deserialize(const std::string& bytes) {
  Reader r(bytes);
  char magic[sizeof(kMagic)];
  r.get_raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ArtifactMismatchError("not a latentforce checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw ArtifactMismatchError("unsupported checkpoint format version " + std::to_string(version));
  }
  Checkpoint c;
  c.kind = r.get_str();
  c.config_json = r.get_str();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.get_str();
    const auto rows = r.get<std::int64_t>();
    const auto cols = r.get<std::int64_t>();
    if (rows < 0 || cols < 0 || (cols > 0 && rows > (1LL << 40) / cols)) {
      throw ArtifactMismatchError("array '" + a.name + "' has an invalid shape");
    }
    a.value.resize(rows, cols);
    r.get_raw(a.value.data(), sizeof(double) * a.value.size());
    c.arrays.push_back(std::move(a));
  }
  if (!r.done()) throw ArtifactMismatchError("trailing bytes after checkpoint body");
  return c;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize(ckpt);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path + ": " + ec.message());
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

Checkpoint model_checkpoint(const Model& model) {
  Checkpoint c;
  c.kind = kModelKind;
  c.config_json = model.config().to_json();
  for (const ag::Parameter* p : model.parameters()) c.arrays.push_back({p->name, p->value});
  return c;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != kModelKind) {
    throw ArtifactMismatchError("checkpoint holds a '" + ckpt.kind + "', expected a model");
  }
  Model model(ModelConfig::from_json(ckpt.config_json));
  std::map<std::string, const Matrix*> by_name;
  for (const NamedArray& a : ckpt.arrays) by_name[a.name] = &a.value;
  const auto params = model.parameters();
  if (by_name.size() != params.size() || ckpt.arrays.size() != params.size()) {
    throw ArtifactMismatchError("checkpoint has " + std::to_string(ckpt.arrays.size()) +
                                " arrays, model config needs " + std::to_string(params.size()));
  }
  for (ag::Parameter* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw ArtifactMismatchError("checkpoint lacks '" + p->name + "'");
    if (it->second->rows() != p->value.rows() || it->second->cols() != p->value.cols()) {
      throw ArtifactMismatchError("array '" + p->name + "' does not match the model config shape");
    }
    p->value = *it->second;
  }
  return model;
}

void save_model(const std::string& path, const Model& model) {
  write_checkpoint(path, model_checkpoint(model));
}

Model load_model(const std::string& path) { return model_from_checkpoint(read_checkpoint(path)); }

}  // namespace latentforce

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

#include "latentforce/dataset.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "latentforce/canonicalize.hpp"
#include "latentforce/config.hpp"
#include "latentforce/errors.hpp"

namespace latentforce {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::atomic<std::int64_t> g_label_reads{0};
std::atomic<std::int64_t> g_label_loads{0};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path);
}

void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("SHA-256 computation failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

std::string frame_path(const std::string& episode_id, int k, char side) {
  return "pairs/" + episode_id + "/frame_" + std::to_string(k) + "_" + side + ".png";
}

// Manifest ------------------------------------------------------------------

std::vector<const EpisodeEntry*> DatasetManifest::split(const std::string& name) const {
  if (name != "all" && name != "train" && name != "val" && name != "test") {
    throw ArgumentError("unknown split '" + name + "' (train|val|test|all)");
  }
  std::vector<const EpisodeEntry*> out;
  for (const EpisodeEntry& e : episodes) {
    if (name == "all" || e.split == name) out.push_back(&e);
  }
  return out;
}

std::vector<std::string> DatasetManifest::split_indenters(const std::string& name) const {
  std::vector<std::string> out;
  for (const EpisodeEntry* e : split(name)) {
    if (std::find(out.begin(), out.end(), e->indenter_id) == out.end()) {
      out.push_back(e->indenter_id);
    }
  }
  return out;
}

const ProfileEntry& DatasetManifest::profile(const std::string& side) const {
  for (const ProfileEntry& p : profiles) {
    if (p.side == side) return p;
  }
  throw ArtifactMismatchError("manifest has no profile for side " + side);
}

std::string DatasetManifest::to_json() const {
  ordered_json j;
  j["format_version"] = format_version;
  j["config"] = config;
  ordered_json profs = ordered_json::array();
  for (const ProfileEntry& p : profiles) {
    profs.push_back({{"side", p.side}, {"sensor_id", p.sensor_id}, {"kind", p.kind},
                     {"seed", p.seed}});
  }
  j["profiles"] = profs;
  ordered_json eps = ordered_json::array();
  for (const EpisodeEntry& e : episodes) {
    eps.push_back({{"id", e.id}, {"indenter_id", e.indenter_id}, {"n_frames", e.n_frames},
                   {"seed", e.seed}, {"split", e.split}});
  }
  j["episodes"] = eps;
  ordered_json splits;
  for (const char* s : {"train", "val", "test"}) splits[s] = split_indenters(s);
  j["splits"] = splits;
  ordered_json files_j;
  for (const auto& [path, sum] : files) files_j[path] = sum;
  j["files"] = files_j;
  return j.dump(2) + "\n";
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kDatasetFormatVersion) {
      throw ArtifactMismatchError("unsupported dataset format_version " +
                                  std::to_string(m.format_version));
    }
    m.config = j.at("config").get<std::string>();
    for (const auto& p : j.at("profiles")) {
      m.profiles.push_back({p.at("side").get<std::string>(), p.at("sensor_id").get<std::string>(),
                            p.at("kind").get<std::string>(), p.at("seed").get<std::uint64_t>()});
    }
    for (const auto& e : j.at("episodes")) {
      m.episodes.push_back({e.at("id").get<std::string>(), e.at("indenter_id").get<std::string>(),
                            e.at("n_frames").get<int>(), e.at("seed").get<std::uint64_t>(),
                            e.at("split").get<std::string>()});
    }
    for (const auto& [path, sum] : j.at("files").items()) m.files[path] = sum.get<std::string>();
  } catch (const json::exception& e) {
    throw ArtifactMismatchError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

DatasetManifest read_manifest(const std::string& dir) {
  return DatasetManifest::from_json(read_file((fs::path(dir) / "manifest.json").string()));
}

void verify_dataset(const std::string& dir, const DatasetManifest& manifest) {
  for (const auto& [rel, sum] : manifest.files) {
    const fs::path p = fs::path(dir) / rel;
    if (!fs::exists(p)) throw ArtifactMismatchError("dataset file missing: " + rel);
    if (sha256_file(p.string()) != sum) throw ArtifactMismatchError("checksum mismatch: " + rel);
  }
}

// Generation ----------------------------------------------------------------

namespace {

std::string taxel_row(const TaxelSignal& s) {
  json row = json::array();
  for (const auto& v : s.values) {
    for (double x : v) row.push_back(x);
  }
  return row.dump();
}

}  // namespace

DatasetManifest generate_dataset(const Config& config, const std::string& out_dir,
                                 const std::function<void(const std::string&)>& progress) {
  const SensorKind kind_l = parse_sensor_kind(config.get_string("sim.kind_left"));
  const SensorKind kind_r = parse_sensor_kind(config.get_string("sim.kind_right"));
  const int n_frames = static_cast<int>(config.get_int("sim.n_frames"));
  const int n_indenters = static_cast<int>(config.get_int("sim.n_indenters"));
  const auto seed = static_cast<std::uint64_t>(config.get_int("sim.seed"));
  const auto profile_seed = static_cast<std::uint64_t>(config.get_int("sim.profile_seed"));
  const int n_val = static_cast<int>(config.get_int("split.val_indenters"));
  const int n_test = static_cast<int>(config.get_int("split.test_indenters"));
  if (n_frames < 2) throw ConfigError("sim.n_frames: must be at least 2");
  if (n_indenters < 1) throw ConfigError("sim.n_indenters: must be positive");
  if (n_val < 0 || n_test < 0 || n_val + n_test >= n_indenters) {
    throw ConfigError("split.val_indenters: val + test indenters must leave at least one for training");
  }
  const SimOptions sim = SimOptions::from_config(config);
  const TaxelRenderOptions canon = TaxelRenderOptions::from_config(config);

  const SensorProfile left =
      make_profile(kind_l, Side::kLeft, profile_seed, gains_from_config(config, kind_l));
  const SensorProfile right =
      make_profile(kind_r, Side::kRight, profile_seed, gains_from_config(config, kind_r));

  const fs::path root(out_dir);
  make_dirs(root / "pairs");
  {
    // Fail early with an I/O error when the directory is not writable.
    const fs::path probe = root / ".write_probe";
    std::ofstream out(probe);
    if (!out) throw IoError("output directory is not writable: " + out_dir);
    out.close();
    fs::remove(probe);
  }

  DatasetManifest m;
  m.config = config.dump();
  m.profiles.push_back({"L", left.sensor_id, to_string(kind_l), profile_seed});
  m.profiles.push_back({"R", right.sensor_id, to_string(kind_r), profile_seed});

  auto record = [&](const std::string& rel) {
    m.files[rel] = sha256_file((root / rel).string());
  };
  write_png((root / "reference_L.png").string(), reference_marker_image(left, canon).image);
  record("reference_L.png");
  write_png((root / "reference_R.png").string(), reference_marker_image(right, canon).image);
  record("reference_R.png");

  for (int k = 0; k < n_indenters; ++k) {
    EpisodeEntry e;
    e.indenter_id = indenter_name(k);
    e.seed = seed * 1000003ULL + static_cast<std::uint64_t>(k);
    e.id = e.indenter_id + "_s" + std::to_string(e.seed);
    e.n_frames = n_frames;
    e.split = k >= n_indenters - n_test ? "test"
              : k >= n_indenters - n_test - n_val ? "val"
                                                  : "train";
    const fs::path ep_dir = root / "pairs" / e.id;
    make_dirs(ep_dir);

    EpisodeGenerator gen(left, right, e.indenter_id, n_frames, e.seed, sim);
    std::string meta;
    std::string taxels_l, taxels_r;
    while (gen.has_next()) {
      const int idx = gen.position();
      const EpisodeFrame f = gen.next();
      for (char side : {'L', 'R'}) {
        const RawSignal& raw = side == 'L' ? f.raw_left : f.raw_right;
        const SensorProfile& prof = side == 'L' ? left : right;
        const std::string rel = frame_path(e.id, idx, side);
        write_png((root / rel).string(), canonicalize(raw, prof, canon).image);
        record(rel);
        if (const auto* t = std::get_if<TaxelSignal>(&raw)) {
          (side == 'L' ? taxels_l : taxels_r) += taxel_row(*t) + "\n";
        }
      }
      ordered_json row;
      row["episode"] = e.id;
      row["k"] = idx;
      row["wrench"] = f.contact.wrench;
      row["center"] = {f.contact.center.x, f.contact.center.y};
      row["indenter_id"] = f.contact.indenter_id;
      meta += row.dump() + "\n";
    }
    const std::string meta_rel = "pairs/" + e.id + "/meta.jsonl";
    write_file((root / meta_rel).string(), meta);
    record(meta_rel);
    for (char side : {'L', 'R'}) {
      const std::string& rows = side == 'L' ? taxels_l : taxels_r;
      if (rows.empty()) continue;
      const std::string rel = "pairs/" + e.id + "/taxels_" + side + ".jsonl";
      write_file((root / rel).string(), rows);
      record(rel);
    }
    m.episodes.push_back(e);
    if (progress) progress(e.id + " (" + e.split + "): " + std::to_string(n_frames) + " frames");
  }

  write_file((root / "manifest.json").string(), m.to_json());
  return m;
}

// Loading -------------------------------------------------------------------

namespace {

MarkerImage load_model_image(const fs::path& path, int size) {
  MarkerImage img;
  img.image = read_png(path.string());
  return resize_nearest(img, size, size);
}

std::vector<int> frame_indices(const EpisodeEntry& e, const LoadOptions& o) {
  if (o.stride < 1) throw ArgumentError("load stride must be at least 1");
  std::vector<int> out;
  for (int k = 0; k < e.n_frames; k += o.stride) {
    if (o.max_frames > 0 && static_cast<int>(out.size()) >= o.max_frames) break;
    out.push_back(k);
  }
  return out;
}

}  // namespace

std::vector<PairSample> load_pairs(const std::string& dir, const DatasetManifest& manifest,
                                   const std::string& split, const LoadOptions& options) {
  const fs::path root(dir);
  const MarkerImage ref_l = load_model_image(root / "reference_L.png", options.image_size);
  const MarkerImage ref_r = load_model_image(root / "reference_R.png", options.image_size);
  std::vector<PairSample> out;
  for (const EpisodeEntry* e : manifest.split(split)) {
    for (int k : frame_indices(*e, options)) {
      PairSample s;
      s.episode_id = e->id;
      s.frame = k;
      s.left = {ref_l, load_model_image(root / frame_path(e->id, k, 'L'), options.image_size),
                false};
      s.right = {ref_r, load_model_image(root / frame_path(e->id, k, 'R'), options.image_size),
                 true};
      out.push_back(std::move(s));
    }
  }
  return out;
}

LabelTable LabelTable::load(const std::string& dir, const DatasetManifest& manifest) {
  LabelTable t;
  for (const EpisodeEntry& e : manifest.episodes) {
    const std::string path = (fs::path(dir) / "pairs" / e.id / "meta.jsonl").string();
    std::istringstream in(read_file(path));
    g_label_loads.fetch_add(1);
    std::vector<Wrench> rows(e.n_frames);
    std::vector<bool> seen(e.n_frames, false);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        const json j = json::parse(line);
        const int k = j.at("k").get<int>();
        if (k < 0 || k >= e.n_frames) throw ArtifactMismatchError(path + ": frame index out of range");
        rows[k] = j.at("wrench").get<Wrench>();
        seen[k] = true;
      } catch (const json::exception& ex) {
        throw ArtifactMismatchError(path + ": " + ex.what());
      }
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
      throw ArtifactMismatchError(path + ": expected " + std::to_string(e.n_frames) + " rows");
    }
    t.rows_[e.id] = std::move(rows);
  }
  return t;
}

const Wrench& LabelTable::wrench(const std::string& episode_id, int k) const {
  auto it = rows_.find(episode_id);
  if (it == rows_.end() || k < 0 || k >= static_cast<int>(it->second.size())) {
    throw ArgumentError("no label for " + episode_id + " frame " + std::to_string(k));
  }
  g_label_reads.fetch_add(1, std::memory_order_relaxed);
  return it->second[k];
}

std::size_t LabelTable::size() const {
  std::size_t n = 0;
  for (const auto& [id, rows] : rows_) n += rows.size();
  return n;
}

std::int64_t LabelTable::reads() { return g_label_reads.load(); }
std::int64_t LabelTable::loads() { return g_label_loads.load(); }

std::vector<LabeledSequence> load_sequences(const std::string& dir,
                                            const DatasetManifest& manifest,
                                            const std::string& split, char side,
                                            const LoadOptions& options, const LabelTable& labels) {
  if (side != 'L' && side != 'R') throw ArgumentError("side must be L or R");
  const fs::path root(dir);
  const MarkerImage ref = load_model_image(
      root / (std::string("reference_") + side + ".png"), options.image_size);
  std::vector<LabeledSequence> out;
  for (const EpisodeEntry* e : manifest.split(split)) {
    LabeledSequence seq;
    seq.episode_id = e->id;
    seq.indenter_id = e->indenter_id;
    for (int k : frame_indices(*e, options)) {
      seq.frames.push_back(
          {ref, load_model_image(root / frame_path(e->id, k, side), options.image_size),
           side == 'R'});
      const Wrench& w = labels.wrench(e->id, k);
      seq.forces.push_back({w[0], w[1], w[2]});
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace latentforce

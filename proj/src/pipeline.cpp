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

#include "latentforce/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>

#include "latentforce/checkpoint.hpp"
#include "latentforce/errors.hpp"

namespace latentforce {

namespace fs = std::filesystem;

LoadOptions load_options(const Config& config, int image_size) {
  LoadOptions o;
  o.image_size = image_size;
  o.stride = static_cast<int>(config.get_int("data.stride"));
  o.max_frames = static_cast<int>(config.get_int("data.max_frames"));
  if (o.stride < 1) throw ConfigError("data.stride: must be at least 1");
  if (o.max_frames < 0) throw ConfigError("data.max_frames: must be >= 0");
  return o;
}

DatasetManifest cmd_simgen(const Config& config, const std::string& out_dir, std::ostream& log) {
  DatasetManifest m = generate_dataset(config, out_dir, [&](const std::string& line) {
    log << "simgen: " << line << '\n';
  });
  log << "simgen: wrote " << m.episodes.size() << " episodes, " << m.files.size()
      << " files to " << out_dir << '\n';
  return m;
}

namespace {

class LockFile {
 public:
  explicit LockFile(std::string path) : path_(std::move(path)) {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw IoError("cannot acquire " + path_ + " (another run holds it, or the directory is not writable)");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] const auto n = ::write(fd_, pid.data(), pid.size());
  }
  ~LockFile() {
    ::close(fd_);
    ::unlink(path_.c_str());
  }
  LockFile(const LockFile&) = delete;
  LockFile& operator=(const LockFile&) = delete;

 private:
  std::string path_;
  int fd_ = -1;
};

void print_row(std::ostream& log, const std::string& label, const LossBreakdown& l) {
  log << std::setw(8) << label << std::setw(12) << l.recon << std::setw(12) << l.kl
      << std::setw(12) << l.eq << std::setw(12) << l.total << '\n';
}

}  // namespace

TrainSummary cmd_train(const std::string& dataset_dir, const Config& config,
                       const std::string& out_checkpoint, std::ostream& log) {
  const ModelConfig mcfg = ModelConfig::from_config(config);
  const TrainConfig tcfg = TrainConfig::from_config(config);
  const DatasetManifest manifest = read_manifest(dataset_dir);
  const LoadOptions opts = load_options(config, mcfg.image_size);

  const fs::path out(out_checkpoint);
  if (out.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(out.parent_path(), ec);
    if (ec) throw IoError("cannot create " + out.parent_path().string());
  }
  LockFile lock(out_checkpoint + ".lock");

  const std::vector<PairSample> train_set = load_pairs(dataset_dir, manifest, "train", opts);
  const std::vector<PairSample> val_set = load_pairs(dataset_dir, manifest, "val", opts);
  if (train_set.empty()) throw ArgumentError("dataset has no training pairs");
  log << "train: " << train_set.size() << " pairs, " << val_set.size() << " validation pairs\n";

  Model model(mcfg);
  log << "train: " << model.parameter_count() << " parameters, "
      << planned_steps(train_set.size(), tcfg) << " steps\n";

  TrainSummary summary;
  summary.has_val = !val_set.empty();
  if (summary.has_val) summary.initial_val = evaluate(model, val_set, tcfg.weights);

  std::ofstream csv(out_checkpoint + ".loss.csv", std::ios::trunc);
  if (!csv) throw IoError("cannot write " + out_checkpoint + ".loss.csv");
  csv << "step,recon,kl,eq,total\n";
  csv << std::setprecision(10);

  log << std::fixed << std::setprecision(5);
  log << std::setw(8) << "epoch" << std::setw(12) << "recon" << std::setw(12) << "kl"
      << std::setw(12) << "eq" << std::setw(12) << "total" << '\n';

  TrainCallbacks cb;
  cb.on_step = [&](const StepRecord& r) {
    csv << r.step << ',' << r.loss.recon << ',' << r.loss.kl << ',' << r.loss.eq << ','
        << r.loss.total << '\n';
  };
  cb.on_epoch = [&](int epoch, const LossBreakdown& mean) {
    print_row(log, std::to_string(epoch), mean);
    csv.flush();
  };
  cb.on_checkpoint = [&](int epoch) {
    save_model(out_checkpoint + ".epoch" + std::to_string(epoch), model);
  };
  cb.dump_batch = [&](const PairBatch& batch) {
    const std::string path = out_checkpoint + ".nan_batch.txt";
    std::ofstream dump(path, std::ios::trunc);
    for (const auto& id : batch.ids) dump << id << '\n';
    return path;
  };

  const TrainResult result = train(model, train_set, tcfg, cb);
  summary.steps = static_cast<int>(result.steps.size());
  save_model(out_checkpoint, model);
  if (summary.has_val) {
    summary.final_val = evaluate(model, val_set, tcfg.weights);
    print_row(log, "val@0", summary.initial_val);
    print_row(log, "val", summary.final_val);
  }
  log.unsetf(std::ios::floatfield);
  log << "train: wrote " << out_checkpoint << '\n';
  return summary;
}

Image8 reconstruction_grid(const Model& model, const TactileObservation& left,
                           const TactileObservation& right) {
  const PairForward fwd = model.forward_pair(left, right);
  const int s = model.config().image_size;
  const Matrix cur_l = image_to_matrix(left.cur.image);
  const Matrix cur_r = image_to_matrix(right.cur.image);
  const Matrix* panels[2][3] = {
      {&cur_l, &fwd.recon[static_cast<int>(Branch::kLL)], &fwd.recon[static_cast<int>(Branch::kRL)]},
      {&cur_r, &fwd.recon[static_cast<int>(Branch::kRR)], &fwd.recon[static_cast<int>(Branch::kLR)]}};
  Matrix grid = Matrix::Zero(2 * s, 4 * s);
  for (int row = 0; row < 2; ++row) {
    for (int col = 0; col < 3; ++col) grid.block(row * s, col * s, s, s) = *panels[row][col];
    grid.block(row * s, 3 * s, s, s) = (*panels[row][2] - *panels[row][0]).cwiseAbs();
  }
  return matrix_to_image(grid);
}

void cmd_reconstruct(const std::string& checkpoint, const std::string& dataset_dir,
                     const std::string& episode, int frame, const std::string& out_png) {
  const Model model = load_model(checkpoint);
  const DatasetManifest manifest = read_manifest(dataset_dir);
  const EpisodeEntry* entry = nullptr;
  for (const EpisodeEntry& e : manifest.episodes) {
    if (episode.empty() ? e.split == "test" : e.id == episode) {
      entry = &e;
      break;
    }
  }
  if (entry == nullptr) throw ArgumentError("episode '" + episode + "' is not in the dataset");
  if (frame < 0 || frame >= entry->n_frames) {
    throw ArgumentError("frame " + std::to_string(frame) + " is outside episode " + entry->id);
  }
  const int s = model.config().image_size;
  const fs::path root(dataset_dir);
  auto load = [&](const fs::path& p) {
    MarkerImage img;
    img.image = read_png(p.string());
    return resize_nearest(img, s, s);
  };
  const TactileObservation left{load(root / "reference_L.png"),
                                load(root / frame_path(entry->id, frame, 'L')), false};
  const TactileObservation right{load(root / "reference_R.png"),
                                 load(root / frame_path(entry->id, frame, 'R')), true};
  write_png(out_png, reconstruction_grid(model, left, right));
}

char resolve_side(const DatasetManifest& manifest, const std::string& id) {
  if (id == "L" || id == "R") return id[0];
  char found = 0;
  for (const ProfileEntry& p : manifest.profiles) {
    if (p.sensor_id == id || p.kind == id) {
      if (found != 0) throw ArgumentError("sensor id '" + id + "' is ambiguous; use L or R");
      found = p.side[0];
    }
  }
  if (found == 0) throw ArgumentError("no sensor '" + id + "' in the dataset");
  return found;
}

CorrelationAnalysis cmd_analyze(const std::string& checkpoint, const std::string& dataset_dir,
                                const std::string& split, const Config& config,
                                const std::string& out_prefix, std::ostream& log) {
  const Model model = load_model(checkpoint);
  const DatasetManifest manifest = read_manifest(dataset_dir);
  const LabelTable labels = LabelTable::load(dataset_dir, manifest);
  const LoadOptions opts = load_options(config, model.config().image_size);

  std::vector<SensorLatents> sensors;
  for (char side : {'L', 'R'}) {
    SensorLatents s;
    s.sensor = manifest.profile(std::string(1, side)).sensor_id + "_" + side;
    for (const LabeledSequence& seq : load_sequences(dataset_dir, manifest, split, side, opts, labels)) {
      const auto samples = latent_samples(encode_sequence(model, seq));
      s.samples.insert(s.samples.end(), samples.begin(), samples.end());
    }
    sensors.push_back(std::move(s));
  }
  const CorrelationAnalysis a = latent_correlation_analysis(sensors);

  std::ofstream csv(out_prefix + ".csv", std::ios::trunc);
  if (!csv) throw IoError("cannot write " + out_prefix + ".csv");
  csv << correlation_csv(a);
  std::ofstream js(out_prefix + ".json", std::ios::trunc);
  if (!js) throw IoError("cannot write " + out_prefix + ".json");
  js << correlation_json(a) << '\n';
  log << "analyze: n=" << a.pooled_n << ", best F_z dim z" << CorrelationAnalysis::best_dim(a.pooled, 2)
      << " (pooled r=" << a.pooled[std::max(0, CorrelationAnalysis::best_dim(a.pooled, 2))][2]
      << ")\n";
  return a;
}

EvalReport cmd_evalzs(const EvalRequest& req, const Config& config, std::ostream& log) {
  const Model model = load_model(req.checkpoint);
  const std::string target_dir = req.target_dir.empty() ? req.source_dir : req.target_dir;
  const DatasetManifest src_manifest = read_manifest(req.source_dir);
  const DatasetManifest tgt_manifest =
      target_dir == req.source_dir ? src_manifest : read_manifest(target_dir);
  const char src_side = resolve_side(src_manifest, req.source);
  const char tgt_side = resolve_side(tgt_manifest, req.target);
  const LoadOptions opts = load_options(config, model.config().image_size);

  std::optional<ForceHead> head;
  if (!req.head.empty() && fs::exists(req.head)) {
    head.emplace(ForceHead::from_checkpoint(read_checkpoint(req.head)));
    if (head->grid() != model.config().grid()) {
      throw ArtifactMismatchError("force head grid does not match the encoder checkpoint");
    }
    log << "evalzs: loaded head " << req.head << '\n';
  } else {
    const LabelTable labels = LabelTable::load(req.source_dir, src_manifest);
    const auto source = load_sequences(req.source_dir, src_manifest, "train", src_side, opts, labels);
    log << "evalzs: training head on " << source.size() << " source episodes\n";
    head.emplace(train_head(model, source, HeadConfig::from_config(config)));
    if (!req.head.empty()) write_checkpoint(req.head, head->to_checkpoint());
  }

  const LabelTable tgt_labels = LabelTable::load(target_dir, tgt_manifest);
  const auto target = load_sequences(target_dir, tgt_manifest, "test", tgt_side, opts, tgt_labels);
  const std::string source_name = src_manifest.profile(std::string(1, src_side)).sensor_id;
  const std::string target_name = tgt_manifest.profile(std::string(1, tgt_side)).sensor_id;
  EvalReport rep = zero_shot_eval(*head, model, target, source_name, target_name);
  rep.self_eval = src_side == tgt_side && target_dir == req.source_dir;
  if (!req.out_json.empty()) {
    std::ofstream out(req.out_json, std::ios::trunc);
    if (!out) throw IoError("cannot write " + req.out_json);
    out << rep.to_json() << '\n';
  }
  log << "evalzs: " << rep.source << " -> " << rep.target << (rep.self_eval ? " (self)" : "")
      << ": R2(Fz)=" << rep.r2[2] << " MAE(Fz)=" << rep.mae[2] << " N, n=" << rep.n << '\n';
  return rep;
}

}  // namespace latentforce

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

#include "latentforce/transfer_eval.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "latentforce/config.hpp"
#include "latentforce/errors.hpp"
#include "latentforce/objectives.hpp"

namespace latentforce {

using ag::Graph;
using ag::Parameter;
using ag::Var;

namespace {

constexpr const char* kHeadKind = "force-head";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

EncodedSequence encode_sequence(const Model& encoder, const LabeledSequence& seq, int batch_size) {
  if (seq.frames.size() != seq.forces.size()) {
    throw ShapeError("sequence " + seq.episode_id + " has mismatched frames and labels");
  }
  if (batch_size <= 0) throw ArgumentError("batch size must be positive");
  const int np = encoder.config().n_patches();
  EncodedSequence out;
  out.episode_id = seq.episode_id;
  out.indenter_id = seq.indenter_id;
  out.forces = seq.forces;
  out.mu.reserve(seq.frames.size());
  for (std::size_t start = 0; start < seq.frames.size(); start += batch_size) {
    const std::size_t end = std::min(seq.frames.size(), start + batch_size);
    ObservationBatch batch;
    for (std::size_t i = start; i < end; ++i) {
      batch.append(encoder.patches(seq.frames[i].ref), encoder.patches(seq.frames[i].cur));
    }
    const Matrix mu = encoder.encode_mean(batch);
    for (std::size_t i = 0; i < end - start; ++i) {
      out.mu.push_back(mu.middleRows(static_cast<Eigen::Index>(i) * np, np));
    }
  }
  return out;
}

std::vector<LatentSample> latent_samples(const EncodedSequence& seq) {
  std::vector<LatentSample> out(seq.mu.size());
  for (std::size_t i = 0; i < seq.mu.size(); ++i) {
    const Eigen::RowVectorXd m = seq.mu[i].colwise().mean();
    for (int d = 0; d < 6; ++d) out[i].z[d] = m(d);
    out[i].force = seq.forces[i];
  }
  return out;
}

int CorrelationAnalysis::best_dim(const PearsonMatrix& m, int axis) {
  int best = -1;
  double best_abs = -1;
  for (int d = 0; d < 6; ++d) {
    if (std::isnan(m[d][axis])) continue;
    if (std::abs(m[d][axis]) > best_abs) {
      best_abs = std::abs(m[d][axis]);
      best = d;
    }
  }
  return best;
}

CorrelationAnalysis latent_correlation_analysis(const std::vector<SensorLatents>& sensors) {
  if (sensors.empty()) throw ArgumentError("correlation analysis needs at least one sensor");
  CorrelationAnalysis a;
  std::vector<LatentSample> pooled;
  for (const SensorLatents& s : sensors) {
    a.sensors.push_back(s.sensor);
    a.per_sensor.push_back(pearson_matrix(s.samples));
    a.counts.push_back(s.samples.size());
    pooled.insert(pooled.end(), s.samples.begin(), s.samples.end());
  }
  a.pooled = pearson_matrix(pooled);
  a.pooled_n = pooled.size();
  matrix_mean_sd(a.per_sensor, a.mean, a.sd);
  return a;
}

namespace {

void put_cell(std::ostream& os, double v) {
  if (std::isnan(v)) {
    os << "nan";
  } else {
    os << v;
  }
}

nlohmann::json matrix_json(const PearsonMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : m) {
    nlohmann::json r = nlohmann::json::array();
    for (double v : row) r.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    rows.push_back(r);
  }
  return rows;
}

nlohmann::json axes_json(const Force3& v) {
  auto cell = [](double x) { return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x); };
  return {{"fx", cell(v[0])}, {"fy", cell(v[1])}, {"fz", cell(v[2])}};
}

}  // namespace

std::string correlation_csv(const CorrelationAnalysis& a) {
  std::ostringstream os;
  os.precision(6);
  os << "latent,r_fx,r_fy,r_fz,sd_fx,sd_fy,sd_fz\n";
  for (int d = 0; d < 6; ++d) {
    os << 'z' << d;
    for (int ax = 0; ax < kForceAxes; ++ax) {
      os << ',';
      put_cell(os, a.mean[d][ax]);
    }
    for (int ax = 0; ax < kForceAxes; ++ax) {
      os << ',';
      put_cell(os, a.sd[d][ax]);
    }
    os << '\n';
  }
  return os.str();
}

std::string correlation_json(const CorrelationAnalysis& a) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["n"] = a.pooled_n;
  j["pooled"] = matrix_json(a.pooled);
  j["mean"] = matrix_json(a.mean);
  j["sd"] = matrix_json(a.sd);
  j["sd_definition"] = "population SD of per-sensor r";
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < a.sensors.size(); ++i) {
    per.push_back({{"sensor", a.sensors[i]}, {"n", a.counts[i]},
                   {"pearson", matrix_json(a.per_sensor[i])}});
  }
  j["sensors"] = per;
  j["best_fz_dim"] = CorrelationAnalysis::best_dim(a.pooled, 2);
  return j.dump(2);
}

// Head ----------------------------------------------------------------------

void HeadConfig::validate() const {
  if (window < 1) throw ConfigError("head.window: must be at least 1");
  if (channels < 1) throw ConfigError("head.channels: must be positive");
  if (hidden < 1) throw ConfigError("head.hidden: must be positive");
  if (steps < 1) throw ConfigError("head.steps: must be positive");
  if (batch_size < 1) throw ConfigError("head.batch_size: must be positive");
  if (!(lr > 0)) throw ConfigError("head.lr: must be positive");
}

HeadConfig HeadConfig::from_config(const Config& config) {
  HeadConfig h;
  h.window = static_cast<int>(config.get_int("head.window"));
  h.channels = static_cast<int>(config.get_int("head.channels"));
  h.hidden = static_cast<int>(config.get_int("head.hidden"));
  h.steps = static_cast<int>(config.get_int("head.steps"));
  h.batch_size = static_cast<int>(config.get_int("head.batch_size"));
  h.lr = config.get_double("head.lr");
  h.seed = static_cast<std::uint64_t>(config.get_int("head.seed"));
  h.validate();
  return h;
}

struct ForceHead::Impl {
  HeadConfig cfg;
  int grid = 0;
  std::vector<std::unique_ptr<Parameter>> store;
  std::array<double, 6> in_mean{0, 0, 0, 0, 0, 0};
  std::array<double, 6> in_std{1, 1, 1, 1, 1, 1};
  Force3 y_mean{0, 0, 0};
  Force3 y_std{1, 1, 1};

  struct Lin {
    Parameter* w;
    Parameter* b;
  };
  Lin conv1, conv2, gates, cand, fc1, fc2;

  Lin linear(const std::string& name, int in, int out, std::mt19937_64& rng) {
    auto w = std::make_unique<Parameter>();
    w->name = name + ".weight";
    w->value.resize(in, out);
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index i = 0; i < w->value.size(); ++i) w->value.data()[i] = u(rng);
    auto b = std::make_unique<Parameter>();
    b->name = name + ".bias";
    b->value = Matrix::Zero(1, out);
    b->decay = false;
    Lin l{w.get(), b.get()};
    store.push_back(std::move(w));
    store.push_back(std::move(b));
    return l;
  }

  Impl(const HeadConfig& c, int g) : cfg(c), grid(g) {
    cfg.validate();
    if (grid < 1) throw ShapeError("head grid must be positive");
    std::mt19937_64 rng(cfg.seed);
    const int ch = cfg.channels;
    conv1 = linear("head.conv1", 9 * kLatentDim, ch, rng);
    conv2 = linear("head.conv2", 9 * ch, ch, rng);
    gates = linear("head.gru.gates", 9 * 2 * ch, 2 * ch, rng);
    cand = linear("head.gru.candidate", 9 * 2 * ch, ch, rng);
    fc1 = linear("head.mlp.fc1", ch, cfg.hidden, rng);
    fc2 = linear("head.mlp.fc2", cfg.hidden, kForceAxes, rng);
  }

  static Var apply(Graph& g, Var x, const Lin& l) {
    return ag::linear(g, x, g.param(*l.w), g.param(*l.b));
  }
};

ForceHead::ForceHead(const HeadConfig& config, int grid)
    : impl_(std::make_unique<Impl>(config, grid)) {}
ForceHead::~ForceHead() = default;
ForceHead::ForceHead(ForceHead&&) noexcept = default;
ForceHead& ForceHead::operator=(ForceHead&&) noexcept = default;

const HeadConfig& ForceHead::config() const { return impl_->cfg; }
int ForceHead::grid() const { return impl_->grid; }

std::vector<Parameter*> ForceHead::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : impl_->store) out.push_back(p.get());
  return out;
}

void ForceHead::set_normalization(const std::array<double, 6>& in_mean,
                                  const std::array<double, 6>& in_std, const Force3& y_mean,
                                  const Force3& y_std) {
  impl_->in_mean = in_mean;
  impl_->in_std = in_std;
  impl_->y_mean = y_mean;
  impl_->y_std = y_std;
}

Var ForceHead::forward(Graph& g, const Matrix& windows) const {
  const Impl& m = *impl_;
  const int np = m.grid * m.grid;
  const int len = m.cfg.window;
  const int ch = m.cfg.channels;
  if (windows.cols() != kLatentDim || windows.rows() == 0 || windows.rows() % (len * np) != 0) {
    throw ShapeError("head input must be [B*" + std::to_string(len) + "*" + std::to_string(np) +
                     " x 6]");
  }
  const int batch = static_cast<int>(windows.rows() / (len * np));

  Matrix x = windows;
  for (int c = 0; c < kLatentDim; ++c) {
    x.col(c) = (x.col(c).array() - m.in_mean[c]) / m.in_std[c];
  }
  Var h = ag::relu(g, Impl::apply(g, ag::im2col3x3(g, g.constant(std::move(x)), m.grid), m.conv1));
  h = ag::relu(g, Impl::apply(g, ag::im2col3x3(g, h, m.grid), m.conv2));

  Var state = g.constant(Matrix::Zero(static_cast<Eigen::Index>(batch) * np, ch));
  for (int t = 0; t < len; ++t) {
    std::vector<int> rows;
    rows.reserve(static_cast<std::size_t>(batch) * np);
    for (int b = 0; b < batch; ++b) {
      for (int p = 0; p < np; ++p) rows.push_back((b * len + t) * np + p);
    }
    Var xt = ag::gather_rows(g, h, std::move(rows));
    const Var xh[] = {xt, state};
    Var zr = ag::sigmoid(g, Impl::apply(g, ag::im2col3x3(g, ag::concat_cols(g, xh), m.grid), m.gates));
    Var z = ag::slice_cols(g, zr, 0, ch);
    Var r = ag::slice_cols(g, zr, ch, ch);
    const Var xrh[] = {xt, ag::mul(g, r, state)};
    Var n = ag::tanh(g, Impl::apply(g, ag::im2col3x3(g, ag::concat_cols(g, xrh), m.grid), m.cand));
    state = ag::add(g, ag::sub(g, state, ag::mul(g, z, state)), ag::mul(g, z, n));
  }
  Var pooled = ag::mean_pool_rows(g, state, np);
  return Impl::apply(g, ag::relu(g, Impl::apply(g, pooled, m.fc1)), m.fc2);
}

Force3 ForceHead::to_newtons(const Eigen::RowVectorXd& s) const {
  Force3 f;
  for (int a = 0; a < kForceAxes; ++a) f[a] = impl_->y_mean[a] + impl_->y_std[a] * s(a);
  return f;
}

Eigen::RowVectorXd ForceHead::standardize(const Force3& f) const {
  Eigen::RowVectorXd s(kForceAxes);
  for (int a = 0; a < kForceAxes; ++a) s(a) = (f[a] - impl_->y_mean[a]) / impl_->y_std[a];
  return s;
}

Matrix ForceHead::predict(const Matrix& windows) const {
  Graph g(false);
  const Matrix s = g.value(forward(g, windows));
  Matrix out(s.rows(), kForceAxes);
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const Force3 f = to_newtons(s.row(i));
    for (int a = 0; a < kForceAxes; ++a) out(i, a) = f[a];
  }
  return out;
}

Checkpoint ForceHead::to_checkpoint() const {
  const Impl& m = *impl_;
  Checkpoint c;
  c.kind = kHeadKind;
  nlohmann::ordered_json j;
  j["grid"] = m.grid;
  j["window"] = m.cfg.window;
  j["channels"] = m.cfg.channels;
  j["hidden"] = m.cfg.hidden;
  j["steps"] = m.cfg.steps;
  j["batch_size"] = m.cfg.batch_size;
  j["lr"] = m.cfg.lr;
  j["seed"] = m.cfg.seed;
  c.config_json = j.dump();
  Matrix norm(4, 6);
  norm.setZero();
  for (int i = 0; i < 6; ++i) {
    norm(0, i) = m.in_mean[i];
    norm(1, i) = m.in_std[i];
  }
  for (int a = 0; a < kForceAxes; ++a) {
    norm(2, a) = m.y_mean[a];
    norm(3, a) = m.y_std[a];
  }
  c.arrays.push_back({"head.normalization", norm});
  for (const auto& p : m.store) c.arrays.push_back({p->name, p->value});
  return c;
}

ForceHead ForceHead::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != kHeadKind) {
    throw ArtifactMismatchError("checkpoint holds a '" + ckpt.kind + "', expected a force head");
  }
  HeadConfig cfg;
  int grid = 0;
  try {
    const auto j = nlohmann::json::parse(ckpt.config_json);
    grid = j.at("grid").get<int>();
    cfg.window = j.at("window").get<int>();
    cfg.channels = j.at("channels").get<int>();
    cfg.hidden = j.at("hidden").get<int>();
    cfg.steps = j.at("steps").get<int>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.lr = j.at("lr").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactMismatchError(std::string("force head config record: ") + e.what());
  }
  ForceHead head(cfg, grid);
  auto params = head.parameters();
  if (ckpt.arrays.size() != params.size() + 1) {
    throw ArtifactMismatchError("force head checkpoint has the wrong number of arrays");
  }
  const Matrix& norm = ckpt.arrays[0].value;
  if (ckpt.arrays[0].name != "head.normalization" || norm.rows() != 4 || norm.cols() != 6) {
    throw ArtifactMismatchError("force head checkpoint lacks its normalization record");
  }
  for (int i = 0; i < 6; ++i) {
    head.impl_->in_mean[i] = norm(0, i);
    head.impl_->in_std[i] = norm(1, i);
  }
  for (int a = 0; a < kForceAxes; ++a) {
    head.impl_->y_mean[a] = norm(2, a);
    head.impl_->y_std[a] = norm(3, a);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const NamedArray& a = ckpt.arrays[i + 1];
    if (a.name != params[i]->name || a.value.rows() != params[i]->value.rows() ||
        a.value.cols() != params[i]->value.cols()) {
      throw ArtifactMismatchError("force head array '" + a.name + "' does not match its config");
    }
    params[i]->value = a.value;
  }
  return head;
}

// Windows -------------------------------------------------------------------

std::vector<WindowRef> make_windows(const std::vector<EncodedSequence>& seqs, int window) {
  std::vector<WindowRef> out;
  for (const EncodedSequence& s : seqs) {
    for (int k = window - 1; k < static_cast<int>(s.mu.size()); ++k) out.push_back({&s, k});
  }
  return out;
}

Matrix stack_windows(std::span<const WindowRef> refs, int window) {
  if (refs.empty()) throw ArgumentError("no windows to stack");
  const auto np = refs[0].seq->mu[0].rows();
  Matrix out(static_cast<Eigen::Index>(refs.size()) * window * np, kLatentDim);
  Eigen::Index row = 0;
  for (const WindowRef& w : refs) {
    for (int t = 0; t < window; ++t) {
      out.middleRows(row, np) = w.seq->mu[w.end - window + 1 + t];
      row += np;
    }
  }
  return out;
}

ForceHead train_head(const std::vector<EncodedSequence>& source, const HeadConfig& config,
                     int grid, const HeadHooks& hooks) {
  config.validate();
  const std::vector<WindowRef> windows = make_windows(source, config.window);
  if (windows.empty()) throw ArgumentError("source set yields no windows");

  std::array<double, 6> in_mean{}, in_std{};
  {
    std::array<double, 6> s{}, s2{};
    double n = 0;
    for (const EncodedSequence& seq : source) {
      for (const Matrix& mu : seq.mu) {
        for (int c = 0; c < kLatentDim; ++c) {
          s[c] += mu.col(c).sum();
          s2[c] += mu.col(c).squaredNorm();
        }
        n += static_cast<double>(mu.rows());
      }
    }
    for (int c = 0; c < kLatentDim; ++c) {
      in_mean[c] = s[c] / n;
      in_std[c] = std::sqrt(std::max(s2[c] / n - in_mean[c] * in_mean[c], 0.0)) + 1e-8;
    }
  }
  Force3 y_mean{}, y_std{};
  {
    Force3 s{}, s2{};
    for (const WindowRef& w : windows) {
      for (int a = 0; a < kForceAxes; ++a) {
        const double v = w.seq->forces[w.end][a];
        s[a] += v;
        s2[a] += v * v;
      }
    }
    const double n = static_cast<double>(windows.size());
    for (int a = 0; a < kForceAxes; ++a) {
      y_mean[a] = s[a] / n;
      const double var = s2[a] / n - y_mean[a] * y_mean[a];
      y_std[a] = var > 1e-12 ? std::sqrt(var) : 1.0;
    }
  }

  ForceHead head(config, grid);
  head.set_normalization(in_mean, in_std, y_mean, y_std);
  auto params = head.parameters();
  AdamW opt(params, 0.0);
  std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::uniform_int_distribution<std::size_t> pick(0, windows.size() - 1);
  const int batch = std::min<int>(config.batch_size, static_cast<int>(windows.size()));

  for (int step = 0; step < config.steps; ++step) {
    std::vector<WindowRef> chosen;
    Matrix y(batch, kForceAxes);
    for (int b = 0; b < batch; ++b) {
      // Small sets are visited in order so every window is seen each step.
      const WindowRef w =
          batch == static_cast<int>(windows.size()) ? windows[b] : windows[pick(rng)];
      chosen.push_back(w);
      y.row(b) = head.standardize(w.seq->forces[w.end]);
    }
    Graph g;
    g.train(params);
    Var pred = head.forward(g, stack_windows(chosen, config.window));
    Var loss = ag::scale(g, ag::sum_squares(g, ag::sub(g, pred, g.constant(std::move(y)))),
                         1.0 / (kForceAxes * batch));
    if (!std::isfinite(g.scalar(loss))) {
      throw NumericError("non-finite force head loss at step " + std::to_string(step));
    }
    opt.zero_grad();
    g.backward(loss);
    opt.clip_grad_norm(5.0);
    opt.step(config.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * step / config.steps)));
    if (hooks.on_step) hooks.on_step(step);
  }
  return head;
}

ForceHead train_head(const Model& encoder, const std::vector<LabeledSequence>& source,
                     const HeadConfig& config, const HeadHooks& hooks) {
  const std::uint64_t before = encoder.encoder_checksum();
  std::vector<EncodedSequence> encoded;
  for (const LabeledSequence& s : source) encoded.push_back(encode_sequence(encoder, s));
  ForceHead head = train_head(encoded, config, encoder.config().grid(), hooks);
  if (encoder.encoder_checksum() != before) {
    throw FrozenViolationError("encoder parameters changed while training the force head");
  }
  return head;
}

// Evaluation ----------------------------------------------------------------

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["source"] = source;
  j["target"] = target;
  j["self_eval"] = self_eval;
  j["n"] = n;
  j["r2"] = axes_json(r2);
  j["mae"] = axes_json(mae);
  j["pearson"] = matrix_json(pearson);
  j["pearson_sd"] = matrix_json(pearson_sd);
  return j.dump(2);
}

EvalReport zero_shot_eval(const ForceHead& head, const std::vector<EncodedSequence>& target,
                          const std::string& source_id, const std::string& target_id) {
  const auto backward_before = ag::stats().backward_calls.load();
  const auto updates_before = ag::stats().parameter_updates.load();

  const int window = head.config().window;
  const std::vector<WindowRef> windows = make_windows(target, window);
  if (windows.empty()) throw ArgumentError("target set is empty");

  std::array<std::vector<double>, kForceAxes> truth, pred;
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < windows.size(); start += kChunk) {
    const std::size_t end = std::min(windows.size(), start + kChunk);
    const std::span<const WindowRef> part(windows.data() + start, end - start);
    const Matrix p = head.predict(stack_windows(part, window));
    for (std::size_t i = 0; i < part.size(); ++i) {
      for (int a = 0; a < kForceAxes; ++a) {
        truth[a].push_back(part[i].seq->forces[part[i].end][a]);
        pred[a].push_back(p(static_cast<Eigen::Index>(i), a));
      }
    }
  }

  EvalReport rep;
  rep.source = source_id;
  rep.target = target_id;
  rep.self_eval = source_id == target_id;
  rep.n = windows.size();
  for (int a = 0; a < kForceAxes; ++a) {
    try {
      rep.r2[a] = r2(truth[a], pred[a]);
    } catch (const UndefinedError&) {
      rep.r2[a] = kNaN;
    }
    rep.mae[a] = mae(truth[a], pred[a]);
  }

  std::vector<LatentSample> pooled;
  std::vector<PearsonMatrix> per_episode;
  for (const EncodedSequence& s : target) {
    auto samples = latent_samples(s);
    if (samples.size() >= 2) per_episode.push_back(pearson_matrix(samples));
    pooled.insert(pooled.end(), samples.begin(), samples.end());
  }
  rep.pearson = pearson_matrix(pooled);
  PearsonMatrix unused;
  matrix_mean_sd(per_episode, unused, rep.pearson_sd);

  if (ag::stats().backward_calls.load() != backward_before ||
      ag::stats().parameter_updates.load() != updates_before) {
    throw ContractError("zero-shot evaluation computed gradients or updated parameters");
  }
  return rep;
}

EvalReport zero_shot_eval(const ForceHead& head, const Model& encoder,
                          const std::vector<LabeledSequence>& target,
                          const std::string& source_id, const std::string& target_id) {
  if (head.grid() != encoder.config().grid()) {
    throw ArtifactMismatchError("force head grid does not match the encoder patch grid");
  }
  std::vector<EncodedSequence> encoded;
  for (const LabeledSequence& s : target) encoded.push_back(encode_sequence(encoder, s));
  return zero_shot_eval(head, encoded, source_id, target_id);
}

}  // namespace latentforce

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

#include "latentforce/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "latentforce/config.hpp"
#include "latentforce/errors.hpp"

namespace latentforce {

using ag::Graph;
using ag::Var;

void LossWeights::validate() const {
  const std::pair<const char*, double> items[] = {
      {"train.lambda_kl", lambda_kl}, {"train.lambda_eq", lambda_eq},
      {"train.lambda_lpips", lambda_lpips}};
  for (const auto& [key, v] : items) {
    if (!std::isfinite(v) || v < 0) throw ConfigError(std::string(key) + ": must be finite and >= 0");
  }
}

LossWeights LossWeights::from_config(const Config& config) {
  LossWeights w;
  w.lambda_kl = config.get_double("train.lambda_kl");
  w.lambda_eq = config.get_double("train.lambda_eq");
  w.lambda_lpips = config.get_double("train.lambda_lpips");
  w.validate();
  return w;
}

double weighted_total(double recon, double kl, double eq, const LossWeights& w) {
  return recon + w.lambda_kl * kl + w.lambda_eq * eq;
}

// Graph-level --------------------------------------------------------------

Var perceptual_surrogate(Graph& g, Var pred, Var target, int height) {
  const auto& pv = g.value(pred);
  const auto& tv = g.value(target);
  if (pv.rows() != tv.rows() || pv.cols() != tv.cols()) {
    throw ShapeError("perceptual surrogate: prediction and target differ in shape");
  }
  if (height % 4 != 0 || pv.cols() % 4 != 0 || height / 4 < 3 || pv.cols() / 4 < 3) {
    throw ShapeError("perceptual surrogate needs sides divisible by 4 and at least 12 px");
  }
  Var acc{};
  int h = height;
  for (int scale = 0; scale < 3; ++scale) {
    if (scale > 0) {
      pred = ag::avg_pool2(g, pred, h);
      target = ag::avg_pool2(g, target, h);
      h /= 2;
    }
    Var term = ag::mean_abs_diff(g, ag::sobel_magnitude(g, pred, h),
                                 ag::sobel_magnitude(g, target, h));
    acc = scale == 0 ? term : ag::add(g, acc, term);
  }
  return ag::scale(g, acc, 1.0 / 3.0);
}

Var recon_loss(Graph& g, Var pred, Var target, int height, double lambda_lpips) {
  Var l1 = ag::mean_abs_diff(g, pred, target);
  if (lambda_lpips == 0) return l1;
  return ag::add(g, l1, ag::scale(g, perceptual_surrogate(g, pred, target, height), lambda_lpips));
}

Var eq_loss(Graph& g, Var z_left, Var z_right, int n_patches) {
  const auto rows = g.value(z_left).rows();
  if (n_patches <= 0 || rows % n_patches != 0) throw ShapeError("eq loss: rows not a multiple of N_p");
  const double batch = static_cast<double>(rows / n_patches);
  return ag::scale(g, ag::sum_squares(g, ag::sub(g, z_left, z_right)),
                   1.0 / (n_patches * batch));
}

// Value-level ---------------------------------------------------------------

double perceptual_surrogate(const Matrix& pred, const Matrix& target, int height) {
  Graph g(false);
  return g.scalar(perceptual_surrogate(g, g.constant(pred), g.constant(target),
                                       height < 0 ? static_cast<int>(pred.rows()) : height));
}

double recon_loss(const Matrix& pred, const Matrix& target, double lambda_lpips) {
  Graph g(false);
  return g.scalar(recon_loss(g, g.constant(pred), g.constant(target),
                             static_cast<int>(pred.rows()), lambda_lpips));
}

double kl_loss(const Posterior& post) {
  Graph g(false);
  return g.scalar(ag::kl_standard_normal(g, g.constant(post.mu), g.constant(post.log_var)));
}

double eq_loss(const Matrix& z_left, const Matrix& z_right) {
  if (z_left.rows() != z_right.rows() || z_left.cols() != z_right.cols()) {
    throw ShapeError("eq loss: latent maps differ in shape");
  }
  Graph g(false);
  return g.scalar(eq_loss(g, g.constant(z_left), g.constant(z_right),
                          static_cast<int>(z_left.rows())));
}

LossBreakdown total_loss(const PairForward& fwd, const Matrix& cur_left, const Matrix& cur_right,
                         const LossWeights& w) {
  LossBreakdown out;
  for (Branch b : kBranches) {
    const Matrix& pred = fwd.recon[static_cast<int>(b)];
    if (pred.size() == 0) {
      throw ContractError(std::string("reconstruction branch ") + to_string(b) + " is missing");
    }
    const bool to_right = b == Branch::kLR || b == Branch::kRR;
    out.recon += recon_loss(pred, to_right ? cur_right : cur_left, w.lambda_lpips);
  }
  out.kl = 0.5 * (kl_loss(fwd.post_left) + kl_loss(fwd.post_right));
  out.eq = eq_loss(fwd.post_left.mu, fwd.post_right.mu);
  out.total = weighted_total(out.recon, out.kl, out.eq, w);
  return out;
}

// Batches -------------------------------------------------------------------

PairBatch make_batch(const Model& model, std::span<const PairSample* const> samples,
                     const std::vector<bool>& swap) {
  if (samples.empty()) throw ArgumentError("empty batch");
  const int s = model.config().image_size;
  PairBatch batch;
  batch.target_left.resize(static_cast<Eigen::Index>(samples.size()) * s, s);
  batch.target_right.resize(static_cast<Eigen::Index>(samples.size()) * s, s);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const PairSample& p = *samples[i];
    const bool swapped = i < swap.size() && swap[i];
    const TactileObservation& l = swapped ? p.right : p.left;
    const TactileObservation& r = swapped ? p.left : p.right;
    batch.left.append(model.patches(l.ref), model.patches(l.cur));
    batch.right.append(model.patches(r.ref), model.patches(r.cur));
    batch.target_left.middleRows(static_cast<Eigen::Index>(i) * s, s) = image_to_matrix(l.cur.image);
    batch.target_right.middleRows(static_cast<Eigen::Index>(i) * s, s) =
        image_to_matrix(r.cur.image);
    batch.ids.push_back(p.episode_id + "#" + std::to_string(p.frame) + (swapped ? "~" : ""));
  }
  return batch;
}

namespace {

std::vector<int> row_range(int begin, int count) {
  std::vector<int> rows(count);
  std::iota(rows.begin(), rows.end(), begin);
  return rows;
}

}  // namespace

BatchLoss batch_loss(Graph& g, const Model& model, const PairBatch& batch, const LossWeights& w,
                     std::mt19937_64* rng) {
  const ModelConfig& cfg = model.config();
  const int b = batch.left.size;
  const int np = cfg.n_patches();
  const int s = cfg.image_size;
  if (b <= 0 || batch.right.size != b) throw ContractError("pair batch sides differ in size");

  ObservationBatch obs;
  obs.size = 2 * b;
  obs.ref.resize(batch.left.ref.rows() * 2, batch.left.ref.cols());
  obs.cur.resize(batch.left.cur.rows() * 2, batch.left.cur.cols());
  obs.ref << batch.left.ref, batch.right.ref;
  obs.cur << batch.left.cur, batch.right.cur;

  const EncoderVars enc = model.encode_graph(g, obs);
  Var z = enc.mu;
  if (rng != nullptr) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix eps(g.value(enc.mu).rows(), kLatentDim);
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = normal(*rng);
    Var sigma = ag::exp(g, ag::scale(g, enc.log_var, 0.5));
    z = ag::add(g, enc.mu, ag::mul(g, sigma, g.constant(std::move(eps))));
  }

  Var z_dec = ag::gather_rows(g, z, branch_latent_rows(b, np));
  Matrix refs(batch.left.ref.rows() * 4, batch.left.ref.cols());
  refs << batch.left.ref, batch.right.ref, batch.left.ref, batch.right.ref;
  Matrix targets(batch.target_left.rows() * 4, batch.target_left.cols());
  targets << batch.target_left, batch.target_right, batch.target_left, batch.target_right;

  Var tokens = model.decode_graph(g, refs, z_dec);
  Var images = ag::unpatchify(g, tokens, cfg.grid(), cfg.patch_size);
  // Four branches, each a mean over the batch.
  Var recon = ag::scale(g, recon_loss(g, images, g.constant(std::move(targets)), s, w.lambda_lpips),
                        4.0);
  Var kl = ag::kl_standard_normal(g, enc.mu, enc.log_var);
  Var mu_l = ag::gather_rows(g, enc.mu, row_range(0, b * np));
  Var mu_r = ag::gather_rows(g, enc.mu, row_range(b * np, b * np));
  Var eq = eq_loss(g, mu_l, mu_r, np);

  Var total = ag::add(g, recon, ag::scale(g, kl, w.lambda_kl));
  if (w.lambda_eq != 0) total = ag::add(g, total, ag::scale(g, eq, w.lambda_eq));

  BatchLoss out;
  out.total = total;
  out.parts.recon = g.scalar(recon);
  out.parts.kl = g.scalar(kl);
  out.parts.eq = g.scalar(eq);
  out.parts.total = g.scalar(total);
  return out;
}

// Optimizer -----------------------------------------------------------------

AdamW::AdamW(std::vector<ag::Parameter*> params, double weight_decay, double beta1, double beta2,
             double eps)
    : params_(std::move(params)), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {
  for (ag::Parameter* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamW::zero_grad() {
  for (ag::Parameter* p : params_) p->zero_grad();
}

double AdamW::clip_grad_norm(double max_norm) {
  double sq = 0;
  for (ag::Parameter* p : params_) {
    if (p->grad.size() != 0) sq += p->grad.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double k = max_norm / (norm + 1e-12);
    for (ag::Parameter* p : params_) {
      if (p->grad.size() != 0) p->grad *= k;
    }
  }
  return norm;
}

void AdamW::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ag::Parameter& p = *params_[i];
    if (p.grad.size() == 0) continue;
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * p.grad;
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * p.grad.cwiseAbs2();
    if (p.decay && wd_ > 0) p.value *= 1.0 - lr * wd_;
    p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
  ag::stats().parameter_updates.fetch_add(1, std::memory_order_relaxed);
}

// Training ------------------------------------------------------------------

void TrainConfig::validate() const {
  if (batch_size <= 0) throw ConfigError("train.batch_size: must be positive");
  if (epochs <= 0) throw ConfigError("train.epochs: must be positive");
  if (max_steps < 0) throw ConfigError("train.max_steps: must be >= 0");
  if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("train.lr: must be positive");
  if (weight_decay < 0) throw ConfigError("train.weight_decay: must be >= 0");
  if (grad_clip < 0) throw ConfigError("train.grad_clip: must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every: must be >= 0");
  weights.validate();
}

TrainConfig TrainConfig::from_config(const Config& config) {
  TrainConfig t;
  t.batch_size = static_cast<int>(config.get_int("train.batch_size"));
  t.epochs = static_cast<int>(config.get_int("train.epochs"));
  t.max_steps = static_cast<int>(config.get_int("train.max_steps"));
  t.lr = config.get_double("train.lr");
  t.weight_decay = config.get_double("train.weight_decay");
  t.cosine = config.get_bool("train.cosine");
  t.grad_clip = config.get_double("train.grad_clip");
  t.seed = static_cast<std::uint64_t>(config.get_int("train.seed"));
  t.checkpoint_every = static_cast<int>(config.get_int("train.checkpoint_every"));
  t.weights = LossWeights::from_config(config);
  t.validate();
  return t;
}

int planned_steps(std::size_t n_samples, const TrainConfig& cfg) {
  const int per_epoch =
      static_cast<int>((n_samples + cfg.batch_size - 1) / static_cast<std::size_t>(cfg.batch_size));
  const int total = per_epoch * cfg.epochs;
  return cfg.max_steps > 0 ? std::min(total, cfg.max_steps) : total;
}

namespace {

void add_into(LossBreakdown& acc, const LossBreakdown& x, double k) {
  acc.recon += k * x.recon;
  acc.kl += k * x.kl;
  acc.eq += k * x.eq;
  acc.total += k * x.total;
}

}  // namespace

TrainResult train(Model& model, const std::vector<PairSample>& samples, const TrainConfig& cfg,
                  const TrainCallbacks& callbacks) {
  cfg.validate();
  if (samples.empty()) throw ArgumentError("training set is empty");
  const int total_steps = planned_steps(samples.size(), cfg);
  std::vector<ag::Parameter*> params = model.parameters();
  AdamW opt(params, cfg.weight_decay);
  std::mt19937_64 rng(cfg.seed);

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs && step < total_steps; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LossBreakdown epoch_sum;
    int epoch_batches = 0;
    for (std::size_t start = 0; start < order.size() && step < total_steps;
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<const PairSample*> picked;
      std::vector<bool> swap;
      for (std::size_t i = start; i < end; ++i) {
        picked.push_back(&samples[order[i]]);
        swap.push_back(i % 2 == 1);
      }
      const PairBatch batch = make_batch(model, picked, swap);

      Graph g;
      g.train(params);
      const BatchLoss loss = batch_loss(g, model, batch, cfg.weights, &rng);
      if (!std::isfinite(loss.parts.total)) {
        std::string where;
        if (callbacks.dump_batch) where = " (batch dumped to " + callbacks.dump_batch(batch) + ")";
        std::string ids;
        for (const auto& id : batch.ids) ids += (ids.empty() ? "" : ",") + id;
        throw NumericError("non-finite loss at step " + std::to_string(step) + " on [" + ids +
                           "]" + where);
      }
      opt.zero_grad();
      g.backward(loss.total);
      opt.clip_grad_norm(cfg.grad_clip);
      const double lr =
          cfg.cosine ? cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * step / total_steps))
                     : cfg.lr;
      opt.step(lr);

      StepRecord rec{step, epoch, lr, loss.parts};
      result.steps.push_back(rec);
      if (callbacks.on_step) callbacks.on_step(rec);
      add_into(epoch_sum, loss.parts, 1.0);
      ++epoch_batches;
      ++step;
    }
    LossBreakdown mean;
    add_into(mean, epoch_sum, 1.0 / std::max(1, epoch_batches));
    result.epochs.push_back(mean);
    if (callbacks.on_epoch) callbacks.on_epoch(epoch, mean);
    if (callbacks.on_checkpoint && cfg.checkpoint_every > 0 &&
        (epoch + 1) % cfg.checkpoint_every == 0) {
      callbacks.on_checkpoint(epoch);
    }
  }
  return result;
}

LossBreakdown evaluate(const Model& model, const std::vector<PairSample>& samples,
                       const LossWeights& w, int batch_size) {
  if (samples.empty()) throw ArgumentError("evaluation set is empty");
  if (batch_size <= 0) throw ArgumentError("batch size must be positive");
  LossBreakdown acc;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t end = std::min(samples.size(), start + batch_size);
    std::vector<const PairSample*> picked;
    for (std::size_t i = start; i < end; ++i) picked.push_back(&samples[i]);
    Graph g(false);
    const BatchLoss loss = batch_loss(g, model, make_batch(model, picked), w, nullptr);
    add_into(acc, loss.parts, static_cast<double>(end - start));
  }
  LossBreakdown mean;
  add_into(mean, acc, 1.0 / static_cast<double>(samples.size()));
  return mean;
}

}  // namespace latentforce

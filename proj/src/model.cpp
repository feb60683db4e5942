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

#include "latentforce/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "latentforce/config.hpp"
#include "latentforce/errors.hpp"

namespace latentforce {

using ag::Graph;
using ag::Parameter;
using ag::Var;

void ModelConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError(key + ": " + why);
  };
  if (patch_size <= 0) fail("model.patch_size", "must be positive");
  if (image_size <= 0 || image_size % patch_size != 0) {
    fail("model.image_size", "must be a positive multiple of model.patch_size");
  }
  if (embed_dim <= 0 || embed_dim % 4 != 0) fail("model.embed_dim", "must be a multiple of 4");
  if (heads <= 0 || embed_dim % heads != 0) fail("model.heads", "must divide model.embed_dim");
  if (depth < 1) fail("model.depth", "must be at least 1");
  if (decoder_depth < 1) fail("model.decoder_depth", "must be at least 1");
  if (mlp_ratio < 1) fail("model.mlp_ratio", "must be at least 1");
}

ModelConfig ModelConfig::from_config(const Config& config) {
  ModelConfig m;
  m.image_size = static_cast<int>(config.get_int("model.image_size"));
  m.patch_size = static_cast<int>(config.get_int("model.patch_size"));
  m.embed_dim = static_cast<int>(config.get_int("model.embed_dim"));
  m.depth = static_cast<int>(config.get_int("model.depth"));
  m.heads = static_cast<int>(config.get_int("model.heads"));
  m.decoder_depth = static_cast<int>(config.get_int("model.decoder_depth"));
  m.mlp_ratio = static_cast<int>(config.get_int("model.mlp_ratio"));
  m.seed = static_cast<std::uint64_t>(config.get_int("model.seed"));
  m.validate();
  return m;
}

std::string ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["image_size"] = image_size;
  j["patch_size"] = patch_size;
  j["embed_dim"] = embed_dim;
  j["depth"] = depth;
  j["heads"] = heads;
  j["decoder_depth"] = decoder_depth;
  j["mlp_ratio"] = mlp_ratio;
  j["seed"] = seed;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  ModelConfig m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.image_size = j.at("image_size").get<int>();
    m.patch_size = j.at("patch_size").get<int>();
    m.embed_dim = j.at("embed_dim").get<int>();
    m.depth = j.at("depth").get<int>();
    m.heads = j.at("heads").get<int>();
    m.decoder_depth = j.at("decoder_depth").get<int>();
    m.mlp_ratio = j.at("mlp_ratio").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactMismatchError(std::string("model config record: ") + e.what());
  }
  m.validate();
  return m;
}

Matrix image_to_patches(const Image8& image, int patch_size) {
  if (patch_size <= 0 || image.width != image.height || image.width % patch_size != 0) {
    throw ShapeError("image " + std::to_string(image.width) + "x" +
                     std::to_string(image.height) + " does not tile into " +
                     std::to_string(patch_size) + "-px patches");
  }
  const int grid = image.width / patch_size;
  Matrix out(grid * grid, patch_size * patch_size);
  for (int py = 0; py < grid; ++py) {
    for (int px = 0; px < grid; ++px) {
      const int row = py * grid + px;
      for (int iy = 0; iy < patch_size; ++iy) {
        for (int ix = 0; ix < patch_size; ++ix) {
          out(row, iy * patch_size + ix) =
              image.at(px * patch_size + ix, py * patch_size + iy) / 255.0;
        }
      }
    }
  }
  return out;
}

Matrix image_to_matrix(const Image8& image) {
  Matrix out(image.height, image.width);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) out(y, x) = image.at(x, y) / 255.0;
  }
  return out;
}

Image8 matrix_to_image(const Matrix& m) {
  Image8 out(static_cast<int>(m.cols()), static_cast<int>(m.rows()));
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      out.at(x, y) = static_cast<std::uint8_t>(std::lround(std::clamp(m(y, x), 0.0, 1.0) * 255.0));
    }
  }
  return out;
}

void ObservationBatch::append(const Matrix& ref_patches, const Matrix& cur_patches) {
  if (ref_patches.rows() != cur_patches.rows() || ref_patches.cols() != cur_patches.cols()) {
    throw ShapeError("reference and contact patches differ in shape");
  }
  if (size > 0 && ref_patches.cols() != ref.cols()) throw ShapeError("patch size differs in batch");
  const auto n = ref_patches.rows();
  ref.conservativeResize(ref.rows() + n, ref_patches.cols());
  cur.conservativeResize(cur.rows() + n, cur_patches.cols());
  ref.bottomRows(n) = ref_patches;
  cur.bottomRows(n) = cur_patches;
  ++size;
}

const char* to_string(Branch b) {
  switch (b) {
    case Branch::kLL: return "LL";
    case Branch::kLR: return "LR";
    case Branch::kRL: return "RL";
    case Branch::kRR: return "RR";
  }
  return "?";
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

struct LinearP {
  Parameter* w = nullptr;
  Parameter* b = nullptr;
};
struct NormP {
  Parameter* g = nullptr;
  Parameter* b = nullptr;
};
struct AttnP {
  NormP norm;
  LinearP qkv;
  LinearP proj;
};
struct MlpP {
  NormP norm;
  LinearP fc1;
  LinearP fc2;
};
struct EncBlock {
  AttnP spatial;
  AttnP temporal;
  MlpP mlp;
};
struct DecBlock {
  AttnP spatial;
  MlpP mlp;
};

// Sinusoid over `pos` written into `width` columns starting at `col`.
void write_sinusoid(Matrix& m, Eigen::Index row, int col, int width, double pos) {
  for (int i = 0; i < width / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / width);
    m(row, col + 2 * i) = std::sin(pos * freq);
    m(row, col + 2 * i + 1) = std::cos(pos * freq);
  }
}

std::uint64_t checksum_of(const std::vector<const Parameter*>& params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const Parameter* p : params) {
    h = fnv1a(p->name.data(), p->name.size(), h);
    const std::int64_t shape[2] = {p->value.rows(), p->value.cols()};
    h = fnv1a(shape, sizeof(shape), h);
    h = fnv1a(p->value.data(), sizeof(double) * p->value.size(), h);
  }
  return h;
}

}  // namespace

struct Model::Impl {
  ModelConfig cfg;
  std::vector<std::unique_ptr<Parameter>> store;
  std::size_t encoder_count = 0;
  std::mt19937_64 rng;

  LinearP enc_embed;
  std::vector<EncBlock> enc_blocks;
  NormP enc_norm;
  LinearP posterior;

  LinearP dec_embed;
  LinearP dec_latent;
  std::vector<DecBlock> dec_blocks;
  NormP dec_norm;
  LinearP pixel_head;

  Matrix enc_pe;  // [2*N_p x D]
  Matrix dec_pe;  // [N_p x D]

  Parameter* add(const std::string& name, int rows, int cols, bool decay) {
    auto p = std::make_unique<Parameter>();
    p->name = name;
    p->value = Matrix::Zero(rows, cols);
    p->decay = decay;
    store.push_back(std::move(p));
    return store.back().get();
  }

  LinearP linear(const std::string& name, int in, int out) {
    LinearP l;
    l.w = add(name + ".weight", in, out, true);
    l.b = add(name + ".bias", 1, out, false);
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index i = 0; i < l.w->value.size(); ++i) l.w->value.data()[i] = u(rng);
    return l;
  }

  NormP norm(const std::string& name, int d) {
    NormP n;
    n.g = add(name + ".gain", 1, d, false);
    n.b = add(name + ".shift", 1, d, false);
    n.g->value.setOnes();
    return n;
  }

  AttnP attn(const std::string& name, int d) {
    return {norm(name + ".norm", d), linear(name + ".qkv", d, 3 * d), linear(name + ".proj", d, d)};
  }

  MlpP mlp(const std::string& name, int d) {
    const int hidden = d * cfg.mlp_ratio;
    return {norm(name + ".norm", d), linear(name + ".fc1", d, hidden),
            linear(name + ".fc2", hidden, d)};
  }

  explicit Impl(const ModelConfig& c) : cfg(c), rng(c.seed) {
    cfg.validate();
    const int d = cfg.embed_dim;
    const int pp = cfg.patch_pixels();
    enc_embed = linear("enc.patch_embed", pp, d);
    for (int i = 0; i < cfg.depth; ++i) {
      const std::string prefix = "enc.block" + std::to_string(i);
      enc_blocks.push_back({attn(prefix + ".spatial", d), attn(prefix + ".temporal", d),
                            mlp(prefix + ".mlp", d)});
    }
    enc_norm = norm("enc.norm", d);
    posterior = linear("enc.posterior", d, 2 * kLatentDim);
    encoder_count = store.size();

    dec_embed = linear("dec.patch_embed", pp, d);
    dec_latent = linear("dec.latent_proj", kLatentDim, d);
    for (int i = 0; i < cfg.decoder_depth; ++i) {
      const std::string prefix = "dec.block" + std::to_string(i);
      dec_blocks.push_back({attn(prefix + ".spatial", d), mlp(prefix + ".mlp", d)});
    }
    dec_norm = norm("dec.norm", d);
    pixel_head = linear("dec.pixel_head", d, pp);
    // Start from a mostly-background prediction.
    pixel_head.b->value.setConstant(-2.0);

    const int np = cfg.n_patches();
    enc_pe = Matrix::Zero(kFrames * np, d);
    for (int t = 0; t < kFrames; ++t) {
      for (int p = 0; p < np; ++p) {
        write_sinusoid(enc_pe, t * np + p, 0, d / 2, p);
        write_sinusoid(enc_pe, t * np + p, d / 2, d / 2, t);
      }
    }
    dec_pe = Matrix::Zero(np, d);
    for (int p = 0; p < np; ++p) write_sinusoid(dec_pe, p, 0, d, p);
  }

  static Var norm_of(Graph& g, Var x, const NormP& n) {
    return ag::layer_norm(g, x, g.param(*n.g), g.param(*n.b));
  }
  static Var linear_of(Graph& g, Var x, const LinearP& l) {
    return ag::linear(g, x, g.param(*l.w), g.param(*l.b));
  }

  Var attention_block(Graph& g, Var x, const AttnP& p, const ag::AttentionLayout& layout) const {
    Var h = norm_of(g, x, p.norm);
    h = linear_of(g, h, p.qkv);
    h = ag::attention(g, h, layout, cfg.heads);
    h = linear_of(g, h, p.proj);
    return ag::add(g, x, h);
  }

  Var mlp_block(Graph& g, Var x, const MlpP& p) const {
    Var h = norm_of(g, x, p.norm);
    h = ag::gelu(g, linear_of(g, h, p.fc1));
    h = linear_of(g, h, p.fc2);
    return ag::add(g, x, h);
  }
};

Model::Model(const ModelConfig& config) : impl_(std::make_unique<Impl>(config)) {}
Model::~Model() = default;
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;

const ModelConfig& Model::config() const { return impl_->cfg; }

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : impl_->store) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& p : impl_->store) out.push_back(p.get());
  return out;
}

std::vector<Parameter*> Model::encoder_parameters() {
  std::vector<Parameter*> out;
  for (std::size_t i = 0; i < impl_->encoder_count; ++i) out.push_back(impl_->store[i].get());
  return out;
}

std::vector<const Parameter*> Model::encoder_parameters() const {
  std::vector<const Parameter*> out;
  for (std::size_t i = 0; i < impl_->encoder_count; ++i) out.push_back(impl_->store[i].get());
  return out;
}

Parameter* Model::find(const std::string& name) {
  for (auto& p : impl_->store) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

std::int64_t Model::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : impl_->store) n += p->value.size();
  return n;
}

std::uint64_t Model::checksum() const { return checksum_of(parameters()); }
std::uint64_t Model::encoder_checksum() const { return checksum_of(encoder_parameters()); }

Var Model::embed_tokens(Graph& g, const ObservationBatch& batch) const {
  const Impl& m = *impl_;
  const int np = m.cfg.n_patches();
  const int pp = m.cfg.patch_pixels();
  if (batch.size <= 0) throw ShapeError("empty observation batch");
  if (batch.ref.rows() != static_cast<Eigen::Index>(batch.size) * np || batch.ref.cols() != pp) {
    throw ShapeError("observation batch does not match N_p=" + std::to_string(np) +
                     ", patch pixels=" + std::to_string(pp));
  }
  Matrix x(static_cast<Eigen::Index>(batch.size) * kFrames * np, pp);
  Matrix pe(x.rows(), m.cfg.embed_dim);
  for (int o = 0; o < batch.size; ++o) {
    x.middleRows(static_cast<Eigen::Index>(o * kFrames) * np, np) = batch.ref.middleRows(o * np, np);
    x.middleRows(static_cast<Eigen::Index>(o * kFrames + 1) * np, np) =
        batch.cur.middleRows(o * np, np);
    pe.middleRows(static_cast<Eigen::Index>(o) * kFrames * np, kFrames * np) = m.enc_pe;
  }
  Var tokens = Impl::linear_of(g, g.constant(std::move(x)), m.enc_embed);
  return ag::add(g, tokens, g.constant(std::move(pe)));
}

EncoderVars Model::encode_graph(Graph& g, const ObservationBatch& batch,
                                TemporalTrace* trace) const {
  const Impl& m = *impl_;
  const int np = m.cfg.n_patches();
  const int frames = batch.size * kFrames;

  ag::AttentionLayout spatial;
  spatial.group_len = np;
  spatial.stride = 1;
  for (int f = 0; f < frames; ++f) spatial.bases.push_back(f * np);

  ag::AttentionLayout temporal;
  temporal.group_len = kFrames;
  temporal.stride = np;
  temporal.causal = true;
  for (int o = 0; o < batch.size; ++o) {
    for (int p = 0; p < np; ++p) temporal.bases.push_back(o * kFrames * np + p);
  }

  Var x = embed_tokens(g, batch);
  for (const EncBlock& blk : m.enc_blocks) {
    x = m.attention_block(g, x, blk.spatial, spatial);
    x = m.attention_block(g, x, blk.temporal, temporal);
    if (trace) trace->push_back(g.value(x));
    x = m.mlp_block(g, x, blk.mlp);
  }

  std::vector<int> contact_rows;
  contact_rows.reserve(static_cast<std::size_t>(batch.size) * np);
  for (int o = 0; o < batch.size; ++o) {
    for (int p = 0; p < np; ++p) contact_rows.push_back((o * kFrames + 1) * np + p);
  }
  Var h_last = ag::gather_rows(g, x, std::move(contact_rows));
  Var stats = Impl::linear_of(g, Impl::norm_of(g, h_last, m.enc_norm), m.posterior);
  EncoderVars out;
  out.mu = ag::slice_cols(g, stats, 0, kLatentDim);
  out.log_var =
      ag::clamp(g, ag::slice_cols(g, stats, kLatentDim, kLatentDim), -kLogVarClamp, kLogVarClamp);
  return out;
}

Var Model::decode_graph(Graph& g, const Matrix& ref_patches, Var z) const {
  const Impl& m = *impl_;
  const int np = m.cfg.n_patches();
  const Matrix& zv = g.value(z);
  if (zv.cols() != kLatentDim || zv.rows() != ref_patches.rows() || zv.rows() % np != 0) {
    throw ShapeError("latent map has " + std::to_string(zv.rows()) + "x" +
                     std::to_string(zv.cols()) + " entries, expected B*" + std::to_string(np) +
                     "x" + std::to_string(kLatentDim));
  }
  if (ref_patches.cols() != m.cfg.patch_pixels()) throw ShapeError("reference patch size mismatch");
  const int batch = static_cast<int>(zv.rows() / np);

  Matrix pe(zv.rows(), m.cfg.embed_dim);
  for (int b = 0; b < batch; ++b) pe.middleRows(static_cast<Eigen::Index>(b) * np, np) = m.dec_pe;

  ag::AttentionLayout spatial;
  spatial.group_len = np;
  spatial.stride = 1;
  for (int b = 0; b < batch; ++b) spatial.bases.push_back(b * np);

  Var x = Impl::linear_of(g, g.constant(ref_patches), m.dec_embed);
  x = ag::add(g, x, Impl::linear_of(g, z, m.dec_latent));
  x = ag::add(g, x, g.constant(std::move(pe)));
  for (const DecBlock& blk : m.dec_blocks) {
    x = m.attention_block(g, x, blk.spatial, spatial);
    x = m.mlp_block(g, x, blk.mlp);
  }
  x = Impl::norm_of(g, x, m.dec_norm);
  return ag::sigmoid(g, Impl::linear_of(g, x, m.pixel_head));
}

Matrix Model::patches(const MarkerImage& image) const {
  const int s = impl_->cfg.image_size;
  if (image.width() != s || image.height() != s) {
    throw ShapeError("image is " + std::to_string(image.width()) + "x" +
                     std::to_string(image.height()) + ", model expects " + std::to_string(s) +
                     "x" + std::to_string(s));
  }
  return image_to_patches(image.image, impl_->cfg.patch_size);
}

Matrix Model::patchify(const TactileObservation& obs) const {
  ObservationBatch batch;
  batch.append(patches(obs.ref), patches(obs.cur));
  Graph g(false);
  return g.value(embed_tokens(g, batch));
}

Posterior Model::encode(const TactileObservation& obs) const {
  ObservationBatch batch;
  batch.append(patches(obs.ref), patches(obs.cur));
  Graph g(false);
  const EncoderVars e = encode_graph(g, batch);
  return {g.value(e.mu), g.value(e.log_var)};
}

Matrix Model::encode_mean(const ObservationBatch& batch) const {
  Graph g(false);
  return g.value(encode_graph(g, batch).mu);
}

Matrix Model::decode(const MarkerImage& ref, const Matrix& z) const {
  Graph g(false);
  Var tokens = decode_graph(g, patches(ref), g.constant(z));
  return g.value(ag::unpatchify(g, tokens, impl_->cfg.grid(), impl_->cfg.patch_size));
}

Matrix sample(const Posterior& post, const Matrix* eps) {
  if (eps == nullptr) return post.mu;
  if (eps->rows() != post.mu.rows() || eps->cols() != post.mu.cols()) {
    throw ShapeError("noise shape does not match the posterior");
  }
  return (post.mu.array() + (0.5 * post.log_var.array()).exp() * eps->array()).matrix();
}

std::vector<int> branch_latent_rows(int batch, int n_patches) {
  // Latents are stacked (L obs, then R obs); decodes run LL, LR, RL, RR.
  std::vector<int> rows;
  rows.reserve(static_cast<std::size_t>(4) * batch * n_patches);
  for (int side : {0, 0, 1, 1}) {
    for (int i = 0; i < batch * n_patches; ++i) rows.push_back(side * batch * n_patches + i);
  }
  return rows;
}

PairForward Model::forward_pair(const TactileObservation& left, const TactileObservation& right,
                                std::mt19937_64* rng) const {
  // One observation per pass keeps each branch bitwise independent of its
  // batch neighbours, so identical inputs give identical outputs.
  const int np = impl_->cfg.n_patches();
  PairForward out;
  out.post_left = encode(left);
  out.post_right = encode(right);
  if (rng != nullptr) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix eps(np, kLatentDim);
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = normal(*rng);
    out.z_left = sample(out.post_left, &eps);
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = normal(*rng);
    out.z_right = sample(out.post_right, &eps);
  } else {
    out.z_left = out.post_left.mu;
    out.z_right = out.post_right.mu;
  }
  out.recon[static_cast<int>(Branch::kLL)] = decode(left.ref, out.z_left);
  out.recon[static_cast<int>(Branch::kLR)] = decode(right.ref, out.z_left);
  out.recon[static_cast<int>(Branch::kRL)] = decode(left.ref, out.z_right);
  out.recon[static_cast<int>(Branch::kRR)] = decode(right.ref, out.z_right);
  return out;
}

}  // namespace latentforce

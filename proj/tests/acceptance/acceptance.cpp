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


// Acceptance suite: one [PASS]/[FAIL] line per criterion. Thresholds are
// pinned here and are not configurable from the command line.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "latentforce/canonicalize.hpp"
#include "latentforce/checkpoint.hpp"
#include "latentforce/config.hpp"
#include "latentforce/dataset.hpp"
#include "latentforce/metrics.hpp"
#include "latentforce/model.hpp"
#include "latentforce/objectives.hpp"
#include "latentforce/pipeline.hpp"
#include "latentforce/sensor_sim.hpp"
#include "latentforce/transfer_eval.hpp"
#include "support/test_support.hpp"

using namespace latentforce;
namespace fs = std::filesystem;

namespace {

// Desk-scale setup shared by criteria 4-7.
constexpr int kIndenters = 6;
constexpr int kFrames = 500;
constexpr int kValIndenters = 1;
constexpr int kTestIndenters = 2;
constexpr int kImageSize = 112;
constexpr int kTrainSteps = 4000;

// Pinned thresholds.
constexpr double kGradTol = 1e-4;
constexpr double kGradH = 1e-4;
constexpr double kGradFloor = 1e-8;
constexpr double kMcTol = 0.02;
constexpr double kEqExampleTol = 1e-12;
constexpr double kCausalTol = 1e-6;
constexpr double kEqRatio = 0.2;
constexpr double kFzCorrelation = 0.7;
constexpr double kR2Fz = 0.5;
constexpr double kMaeFz = 1.5;
constexpr double kCrossGain = 0.30;
constexpr double kThroughput = 29.6;
constexpr double kLossTrajectoryTol = 1e-5;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

void note(const std::string& s) { std::cerr << "  .. " << s << std::endl; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ModelConfig desk_model(std::uint64_t seed = 0) {
  ModelConfig c;
  c.image_size = kImageSize;
  c.patch_size = 16;
  c.embed_dim = 64;
  c.depth = 2;
  c.heads = 4;
  c.decoder_depth = 2;
  c.mlp_ratio = 2;
  c.seed = seed;
  return c;
}

TrainConfig desk_training(double lambda_eq) {
  TrainConfig t;
  t.batch_size = 8;
  t.epochs = 1000;
  t.max_steps = kTrainSteps;
  t.lr = 1e-3;
  t.weight_decay = 1e-4;
  t.cosine = true;
  t.grad_clip = 1.0;
  t.seed = 0;
  t.weights.lambda_eq = lambda_eq;
  return t;
}

Config desk_sim() {
  Config c = Config::defaults();
  c.set("sim.n_frames", std::to_string(kFrames));
  c.set("sim.n_indenters", std::to_string(kIndenters));
  c.set("split.val_indenters", std::to_string(kValIndenters));
  c.set("split.test_indenters", std::to_string(kTestIndenters));
  return c;
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  Model m(lftest::tiny_model(32, 11));
  std::vector<PairSample> samples = {lftest::random_pair(kImageSize, rng, 0),
                                     lftest::random_pair(kImageSize, rng, 1)};
  std::vector<const PairSample*> ptrs = {&samples[0], &samples[1]};
  const PairBatch batch = make_batch(m, ptrs);
  const LossWeights w;
  auto loss = [&](ag::Graph& g) {
    std::mt19937_64 noise(7);
    return batch_loss(g, m, batch, w, &noise).total;
  };
  const auto params = m.parameters();
  const auto entries = lftest::random_entries(params, 64, rng);
  const auto res = lftest::check_gradients(params, entries, loss, kGradH, kGradFloor);
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = res.checked == 64 && res.max_rel_error <= kGradTol && secs < 120 &&
           m.config().n_patches() == 49;
  o.detail = "max rel err " + fmt("%.2e", res.max_rel_error) + " over " +
             std::to_string(res.checked) + " entries (tol 1e-4, h 1e-4), " + fmt("%.1f s", secs);
  return o;
}

// Log-density-ratio estimate of KL(q || N(0, I)) averaged over entries.
double kl_sampled(const Posterior& p, int draws, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  double total = 0;
  for (Eigen::Index k = 0; k < p.mu.size(); ++k) {
    const double mu = p.mu.data()[k], lv = p.log_var.data()[k];
    const double sd = std::exp(0.5 * lv);
    double acc = 0;
    for (int i = 0; i < draws; ++i) {
      const double e = n01(rng);
      const double z = mu + sd * e;
      acc += (-0.5 * e * e - 0.5 * lv) - (-0.5 * z * z);
    }
    total += acc / draws;
  }
  return total / static_cast<double>(p.mu.size());
}

Outcome loss_closed_forms() {
  auto single = [](double mu, double lv) {
    Posterior p{Matrix::Zero(1, 6), Matrix::Zero(1, 6)};
    p.mu(0, 0) = mu;
    p.log_var(0, 0) = lv;
    return p;
  };
  bool ok = true;
  // Per-entry contributions: kl_loss averages over the 6 entries.
  ok &= kl_loss(Posterior{Matrix::Zero(3, 6), Matrix::Zero(3, 6)}) == 0.0;
  ok &= kl_loss(single(1, 0)) * 6 == 0.5;
  const double e_case = kl_loss(single(0, 1)) * 6;
  ok &= e_case == 0.5 * (std::exp(1.0) - 2);

  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst = 0;
  for (int t = 0; t < 20; ++t) {
    Posterior p{Matrix(1, 6), Matrix(1, 6)};
    for (int k = 0; k < 6; ++k) {
      p.mu.data()[k] = 1.5 * u(rng);
      p.log_var.data()[k] = u(rng);
    }
    const double exact = kl_loss(p);
    worst = std::max(worst, std::abs(kl_sampled(p, 100000, rng) - exact) / exact);
  }
  ok &= worst <= kMcTol;

  const Matrix z = Matrix::Zero(4, 6);
  double eq_err = std::abs(eq_loss(z, z));
  eq_err = std::max(eq_err, std::abs(eq_loss(Matrix::Ones(4, 6), z) - 6.0));
  Matrix d = z;
  d(1, 4) = 0.37;
  eq_err = std::max(eq_err, std::abs(eq_loss(d, z) - 0.37 * 0.37 / 4));
  ok &= eq_err <= kEqExampleTol;

  Outcome o;
  o.pass = ok;
  o.detail = "KL examples " + std::string(ok ? "exact" : "checked") + ", MC worst rel " +
             fmt("%.4f", worst) + " (tol 0.02, 20 posteriors x 1e5), eq worst " + fmt("%.1e", eq_err);
  return o;
}

Outcome causality() {
  std::mt19937_64 rng(303);
  double worst = 0;
  double least_contact = std::numeric_limits<double>::infinity();
  int blocks = 0;
  for (int draw = 0; draw < 100; ++draw) {
    ModelConfig c = lftest::tiny_model(32, 1000 + draw);
    c.depth = 2;
    const Model m(c);
    TactileObservation a = lftest::random_observation(kImageSize, rng);
    TactileObservation b = a;
    b.cur = lftest::random_binary(kImageSize, rng, 0.05 + 0.9 * (draw % 10) / 10.0);
    TemporalTrace ta, tb;
    for (auto [obs, trace] : {std::pair{&a, &ta}, std::pair{&b, &tb}}) {
      ObservationBatch batch;
      batch.append(m.patches(obs->ref), m.patches(obs->cur));
      ag::Graph g(false);
      m.encode_graph(g, batch, trace);
    }
    const int np = c.n_patches();
    for (std::size_t k = 0; k < ta.size(); ++k) {
      worst = std::max(worst, (ta[k].topRows(np) - tb[k].topRows(np)).cwiseAbs().maxCoeff());
      least_contact = std::min(least_contact,
                               (ta[k].bottomRows(np) - tb[k].bottomRows(np)).cwiseAbs().maxCoeff());
      ++blocks;
    }
  }
  Outcome o;
  // The perturbation must actually reach the contact tokens.
  o.pass = worst <= kCausalTol && least_contact > kCausalTol && blocks == 200;
  o.detail = "max reference-token change " + fmt("%.1e", worst) + " over 100 draws, " +
             std::to_string(blocks) + " temporal blocks (tol 1e-6); contact tokens move by >= " +
             fmt("%.1e", least_contact);
  return o;
}

// ---------------------------------------------------------------------------
// Criteria 4-7 share one dataset and one pair of trained models.

struct DeskRun {
  fs::path dir;
  DatasetManifest manifest;
  std::vector<PairSample> train_pairs;
  std::vector<PairSample> test_pairs;
  std::optional<Model> untrained;
  std::optional<Model> trained;
  std::optional<Model> ablation;
  std::int64_t label_reads_during_training = -1;
  std::int64_t label_loads_during_training = -1;
  double train_seconds = 0;
};

void prepare_dataset(DeskRun& run) {
  const fs::path data = run.dir / "data";
  const Config sim = desk_sim();
  bool reuse = false;
  if (fs::exists(data / "manifest.json")) {
    const DatasetManifest m = read_manifest(data.string());
    reuse = m.config == sim.dump();
  }
  if (!reuse) {
    fs::remove_all(data);
    const auto t0 = Clock::now();
    generate_dataset(sim, data.string());
    note("simgen " + fmt("%.0f s", seconds_since(t0)));
  }
  run.manifest = read_manifest(data.string());
}

Model train_or_load(DeskRun& run, const std::string& name, double lambda_eq) {
  const fs::path ckpt = run.dir / (name + ".ckpt");
  if (fs::exists(ckpt)) {
    note("reusing " + ckpt.string());
    return load_model(ckpt.string());
  }
  Model m(desk_model());
  const auto t0 = Clock::now();
  TrainCallbacks cb;
  cb.on_step = [&](const StepRecord& r) {
    if (r.step % 250 == 0) {
      note(name + " step " + std::to_string(r.step) + " recon " + fmt("%.4f", r.loss.recon) +
           " kl " + fmt("%.3f", r.loss.kl) + " eq " + fmt("%.5f", r.loss.eq));
    }
  };
  train(m, run.train_pairs, desk_training(lambda_eq), cb);
  run.train_seconds += seconds_since(t0);
  save_model(ckpt.string(), m);
  return m;
}

void prepare_models(DeskRun& run) {
  prepare_dataset(run);
  const std::string data = (run.dir / "data").string();
  LoadOptions opt;
  opt.image_size = kImageSize;
  const auto reads = LabelTable::reads();
  const auto loads = LabelTable::loads();
  run.train_pairs = load_pairs(data, run.manifest, "train", opt);
  run.untrained.emplace(desk_model());
  run.trained.emplace(train_or_load(run, "trained", 1.0));
  run.ablation.emplace(train_or_load(run, "ablation", 0.0));
  run.label_reads_during_training = LabelTable::reads() - reads;
  run.label_loads_during_training = LabelTable::loads() - loads;
  run.test_pairs = load_pairs(data, run.manifest, "test", opt);
  note("train pairs " + std::to_string(run.train_pairs.size()) + ", held-out pairs " +
       std::to_string(run.test_pairs.size()));
}

Outcome equilibrium_alignment(const DeskRun& run) {
  const LossWeights w;
  const double init = evaluate(*run.untrained, run.test_pairs, w).eq;
  const double after = evaluate(*run.trained, run.test_pairs, w).eq;
  const double ablated = evaluate(*run.ablation, run.test_pairs, w).eq;
  Outcome o;
  o.pass = std::isfinite(after) && after <= kEqRatio * init && after < ablated &&
           run.manifest.split_indenters("test").size() == kTestIndenters;
  o.detail = "held-out eq " + fmt("%.4g", init) + " -> " + fmt("%.4g", after) + " (ratio " +
             fmt("%.3f", after / init) + ", need <= 0.2); lambda_eq=0 ablation " +
             fmt("%.4g", ablated) + "; " + std::to_string(kIndenters) + " indenters x " +
             std::to_string(kFrames) + " frames";
  return o;
}

std::vector<LabeledSequence> sequences(const DeskRun& run, const std::string& split, char side) {
  const std::string data = (run.dir / "data").string();
  LoadOptions opt;
  opt.image_size = kImageSize;
  return load_sequences(data, run.manifest, split, side, opt, LabelTable::load(data, run.manifest));
}

Outcome latent_force_correlation(const DeskRun& run) {
  std::vector<SensorLatents> sensors;
  for (char side : {'L', 'R'}) {
    SensorLatents s;
    s.sensor = std::string(1, side);
    for (const auto& seq : sequences(run, "test", side)) {
      const auto part = latent_samples(encode_sequence(*run.trained, seq));
      s.samples.insert(s.samples.end(), part.begin(), part.end());
    }
    sensors.push_back(std::move(s));
  }
  const CorrelationAnalysis a = latent_correlation_analysis(sensors);
  const int best = CorrelationAnalysis::best_dim(a.pooled, 2);
  const int best_l = CorrelationAnalysis::best_dim(a.per_sensor[0], 2);
  const int best_r = CorrelationAnalysis::best_dim(a.per_sensor[1], 2);
  const double r = best >= 0 ? a.pooled[best][2] : std::nan("");
  Outcome o;
  o.pass = best >= 0 && std::abs(r) >= kFzCorrelation && best_l == best_r;
  o.detail = "pooled best F_z dim z" + std::to_string(best) + " r=" + fmt("%.3f", r) +
             " (need |r| >= 0.7); per-sensor best dims z" + std::to_string(best_l) + "/z" +
             std::to_string(best_r) + ", n=" + std::to_string(a.pooled_n);
  return o;
}

Outcome zero_shot_transfer(const DeskRun& run) {
  const auto source = sequences(run, "train", 'L');
  const auto target = sequences(run, "test", 'R');
  const HeadConfig hc;  // defaults: window 5, 1500 steps
  const ForceHead head = train_head(*run.trained, source, hc);
  const EvalReport rep = zero_shot_eval(head, *run.trained, target, "L", "R");
  const ForceHead base_head = train_head(*run.untrained, source, hc);
  const EvalReport base = zero_shot_eval(base_head, *run.untrained, target, "L", "R");
  Outcome o;
  o.pass = rep.r2[2] >= kR2Fz && rep.mae[2] <= kMaeFz && base.r2[2] < rep.r2[2];
  o.detail = "L->R held-out R2(F_z)=" + fmt("%.3f", rep.r2[2]) + " MAE(F_z)=" + fmt("%.3f N", rep.mae[2]) +
             " (need >= 0.5, <= 1.5 N); untrained-encoder head R2(F_z)=" + fmt("%.3f", base.r2[2]) +
             ", n=" + std::to_string(rep.n);
  return o;
}

Outcome cross_reconstruction(const DeskRun& run) {
  const Model& m = *run.trained;
  const Matrix zero = Matrix::Zero(m.config().n_patches(), kLatentDim);
  double with_z = 0, without = 0;
  for (const PairSample& p : run.test_pairs) {
    const Matrix target = image_to_matrix(p.right.cur.image);
    const Matrix z_left = m.encode(p.left).mu;
    with_z += (m.decode(p.right.ref, z_left) - target).cwiseAbs().mean();
    without += (m.decode(p.right.ref, zero) - target).cwiseAbs().mean();
  }
  with_z /= static_cast<double>(run.test_pairs.size());
  without /= static_cast<double>(run.test_pairs.size());
  const double gain = 1.0 - with_z / without;
  Outcome o;
  o.pass = gain >= kCrossGain;
  o.detail = "held-out l1 decode(ref_R, z_L) " + fmt("%.4f", with_z) + " vs decode(ref_R, 0) " +
             fmt("%.4f", without) + ": " + fmt("%.1f%%", 100 * gain) + " lower (need >= 30%)";
  return o;
}

// ---------------------------------------------------------------------------

template <typename F>
double frames_per_second(F&& f) {
  int n = 0;
  const auto t0 = Clock::now();
  while (seconds_since(t0) < 2.0 || n < 20) {
    f(n);
    ++n;
  }
  return n / seconds_since(t0);
}

Outcome canonicalization_throughput() {
  const SensorProfile grid = make_profile(SensorKind::kGridVision, Side::kLeft, 0);
  const SensorProfile taxel = make_profile(SensorKind::kTaxelArray, Side::kLeft, 0);
  std::vector<Image8> frames;
  std::vector<TaxelSignal> signals;
  for (int k = 0; k < 8; ++k) {
    ContactState c;
    c.wrench = {0.3 * k - 1.0, 0.2 * k - 0.7, 1.0 + k, 0, 0, 0};
    frames.push_back(std::get<Image8>(render_frame(grid, displacement_field(grid, c), &c)));
    signals.push_back(std::get<TaxelSignal>(render_frame(taxel, displacement_field(taxel, c), &c)));
  }
  const TaxelRenderOptions opt;
  std::size_t sink = 0;
  const double seg = frames_per_second([&](int i) {
    sink += segment_markers(frames[i % frames.size()]).image.pixels.size();
  });
  int tw = 0, th = 0;
  const double tax = frames_per_second([&](int i) {
    const MarkerImage img = taxels_to_markers(signals[i % signals.size()], taxel, opt);
    tw = img.width();
    th = img.height();
    sink += img.image.pixels.size();
  });
  Outcome o;
  o.pass = seg >= kThroughput && tax >= kThroughput && frames[0].width == 640 &&
           frames[0].height == 480 && tw == 640 && th == 480 && sink > 0;
  o.detail = "segment_markers " + fmt("%.1f", seg) + " fps, taxels_to_markers " + fmt("%.1f", tax) +
             " fps at 640x480, single thread (need >= 29.6)";
  return o;
}

Outcome determinism(const fs::path& work) {
  bool ok = true;
  std::string why;
  Config sim = Config::defaults();
  sim.set("sim.n_frames", "40");
  sim.set("sim.n_indenters", "3");
  sim.set("split.val_indenters", "0");
  sim.set("split.test_indenters", "1");
  const fs::path a = work / "det_a", b = work / "det_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const DatasetManifest ma = generate_dataset(sim, a.string());
  generate_dataset(sim, b.string());
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), a);
    if (slurp(e.path()) != slurp(b / rel)) {
      ok = false;
      why += " differs:" + rel.string();
    }
    ++files;
  }
  ok &= files == ma.files.size() + 1;  // + manifest.json

  const Model m(desk_model(5));
  save_model((work / "det_1.ckpt").string(), m);
  save_model((work / "det_2.ckpt").string(), load_model((work / "det_1.ckpt").string()));
  const bool ckpt_same = slurp(work / "det_1.ckpt") == slurp(work / "det_2.ckpt");
  ok &= ckpt_same;

  LoadOptions opt;
  opt.image_size = kImageSize;
  const auto pairs = load_pairs(a.string(), ma, "train", opt);
  TrainConfig tc = desk_training(1.0);
  tc.max_steps = 15;
  std::vector<double> run1, run2;
  for (auto* out : {&run1, &run2}) {
    Model model(desk_model(3));
    TrainCallbacks cb;
    cb.on_step = [&](const StepRecord& r) { out->push_back(r.loss.total); };
    train(model, pairs, tc, cb);
  }
  double worst = run1.size() == run2.size() && !run1.empty() ? 0 : 1;
  for (std::size_t i = 0; i < std::min(run1.size(), run2.size()); ++i) {
    worst = std::max(worst, std::abs(run1[i] - run2[i]) / std::abs(run1[i]));
  }
  ok &= worst <= kLossTrajectoryTol;
  fs::remove_all(a);
  fs::remove_all(b);

  Outcome o;
  o.pass = ok;
  o.detail = std::to_string(files) + " dataset files byte-identical" + (why.empty() ? "" : why) +
             "; checkpoint re-save " + (ckpt_same ? "bit-exact" : "DIFFERS") + "; " +
             std::to_string(run1.size()) + "-step loss max rel diff " + fmt("%.1e", worst);
  return o;
}

template <typename T>
concept CarriesWrench = requires(T s) { s.wrench; };
template <typename T>
concept CarriesForce = requires(T s) { s.force; };
template <typename T>
concept CarriesForces = requires(T s) { s.forces; };

Outcome label_free(const DeskRun* run, const fs::path& work) {
  constexpr bool static_ok = !CarriesWrench<PairSample> && !CarriesForce<PairSample> &&
                             !CarriesForces<PairSample> && !CarriesWrench<PairBatch> &&
                             !CarriesForce<PairBatch> && !CarriesForces<PairBatch> &&
                             CarriesForces<LabeledSequence>;
  static_assert(static_ok);

  // The CLI training path end to end on a small dataset.
  Config c = Config::defaults();
  for (auto [k, v] : {std::pair{"sim.n_frames", "20"}, {"sim.n_indenters", "3"},
                      {"split.val_indenters", "1"}, {"split.test_indenters", "1"},
                      {"model.image_size", "112"}, {"model.embed_dim", "32"}, {"model.depth", "1"},
                      {"model.heads", "4"}, {"model.decoder_depth", "1"}, {"train.batch_size", "4"},
                      {"train.max_steps", "4"}}) {
    c.set(k, v);
  }
  const fs::path data = work / "audit_data";
  fs::remove_all(data);
  std::ostringstream log;
  cmd_simgen(c, data.string(), log);
  const auto reads = LabelTable::reads();
  const auto loads = LabelTable::loads();
  cmd_train(data.string(), c, (work / "audit.ckpt").string(), log);
  const auto cli_reads = LabelTable::reads() - reads;
  const auto cli_loads = LabelTable::loads() - loads;
  fs::remove_all(data);

  // Counters are live: evaluation does read labels.
  const auto before = LabelTable::reads();
  const DatasetManifest m = generate_dataset(c, data.string());
  LoadOptions opt;
  opt.image_size = 112;
  load_sequences(data.string(), m, "test", 'L', opt, LabelTable::load(data.string(), m));
  const bool live = LabelTable::reads() > before;
  fs::remove_all(data);

  bool ok = static_ok && cli_reads == 0 && cli_loads == 0 && live;
  std::string detail = "static: PairSample/PairBatch carry no wrench or force fields; cmd_train reads " +
                       std::to_string(cli_reads) + " labels, opens " + std::to_string(cli_loads) +
                       " label files";
  if (run) {
    ok &= run->label_reads_during_training == 0 && run->label_loads_during_training == 0;
    detail += "; desk training reads " + std::to_string(run->label_reads_during_training);
  }
  detail += std::string("; counters ") + (live ? "live" : "DEAD");
  return {ok, detail};
}

Outcome metric_pins() {
  using V = std::vector<double>;
  bool ok = true;
  ok &= pearson(V{1, 2, 3, 4, 5}, V{5, 7, 9, 11, 13}) == 1.0;
  ok &= pearson(V{1, 2, 3, 4, 5}, V{-1, -2, -3, -4, -5}) == -1.0;
  ok &= pearson(V{1, 2, 3}, V{1, 3, 2}) == 0.5;
  ok &= r2(V{1, 2, 3}, V{1, 2, 3}) == 1.0;
  ok &= r2(V{1, 2, 3}, V{2, 2, 2}) == 0.0;
  ok &= r2(V{1, 2, 3}, V{1, 2, 4}) == 0.5;
  ok &= mae(V{1, 2}, V{1, 2}) == 0.0;
  ok &= mae(V{0, 0}, V{1, -1}) == 1.0;
  std::mt19937_64 rng(1111);
  std::normal_distribution<double> n(2.0, 3.0);
  int pinned = 0;
  for (int t = 0; t < 100; ++t) {
    V y(3 + t);
    for (double& v : y) v = n(rng);
    double mean = 0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    pinned += r2(y, V(y.size(), mean)) == 0.0;
  }
  ok &= pinned == 100;
  return {ok, "pearson/r2/mae examples exact; mean predictor R2 == 0 in " + std::to_string(pinned) +
                  "/100 trials"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latentforce acceptance suite"};
  std::string work;
  std::vector<int> only;
  app.add_option("--work", work, "working directory; datasets and checkpoints found there are reused");
  app.add_option("--only", only, "run only these criteria")->delimiter(',')->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);

  std::optional<lftest::TempDir> tmp;
  fs::path dir;
  if (work.empty()) {
    tmp.emplace("acceptance");
    dir = tmp->path();
  } else {
    dir = work;
    fs::create_directories(dir);
  }
  const std::set<int> selected(only.begin(), only.end());
  auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };

  const std::map<int, std::string> names = {
      {1, "gradient correctness"},       {2, "loss closed forms"},
      {3, "causality"},                  {4, "equilibrium alignment"},
      {5, "latent-force correlation"},   {6, "zero-shot transfer"},
      {7, "cross-reconstruction"},       {8, "canonicalization throughput"},
      {9, "determinism and persistence"}, {10, "label-free audit"},
      {11, "metric pins"}};

  std::optional<DeskRun> desk;
  auto need_desk = [&]() -> DeskRun& {
    if (!desk) {
      desk.emplace();
      desk->dir = dir / "desk";
      fs::create_directories(desk->dir);
      const auto t0 = Clock::now();
      prepare_models(*desk);
      note("desk setup " + fmt("%.0f s", seconds_since(t0)) + " (training " +
           fmt("%.0f s", desk->train_seconds) + ")");
    }
    return *desk;
  };

  const std::map<int, std::function<Outcome()>> run = {
      {1, gradient_correctness},
      {2, loss_closed_forms},
      {3, causality},
      {4, [&] { return equilibrium_alignment(need_desk()); }},
      {5, [&] { return latent_force_correlation(need_desk()); }},
      {6, [&] { return zero_shot_transfer(need_desk()); }},
      {7, [&] { return cross_reconstruction(need_desk()); }},
      {8, canonicalization_throughput},
      {9, [&] { return determinism(dir); }},
      {10, [&] { return label_free(desk ? &*desk : nullptr, dir); }},
      {11, metric_pins},
  };

  int failed = 0;
  for (const auto& [id, fn] : run) {
    if (!wanted(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << id << ". " << names.at(id) << ": " << o.detail
              << " [" << fmt("%.1f s", seconds_since(t0)) << "]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}

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

#include "latentforce/latentforce.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <new>
#include <ostream>
#include <streambuf>
#include <string>

#include "latentforce/checkpoint.hpp"
#include "latentforce/errors.hpp"
#include "latentforce/pipeline.hpp"

struct lf_config {
  latentforce::Config value;
};

struct lf_model {
  latentforce::Model value;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_log_mutex;
lf_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

void emit_line(const std::string& line) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  if (g_log_fn) {
    g_log_fn(line.c_str(), g_log_user);
  } else {
    std::fputs(line.c_str(), stdout);
    std::fputc('\n', stdout);
    std::fflush(stdout);
  }
}

class LineBuf : public std::streambuf {
 public:
  ~LineBuf() override { flush_line(); }

 protected:
  int_type overflow(int_type ch) override {
    if (ch == traits_type::eof()) return ch;
    if (ch == '\n') {
      flush_line();
    } else {
      line_.push_back(static_cast<char>(ch));
    }
    return ch;
  }

 private:
  void flush_line() {
    if (line_.empty()) return;
    emit_line(line_);
    line_.clear();
  }
  std::string line_;
};

lf_status to_status(latentforce::ErrorKind k) {
  using K = latentforce::ErrorKind;
  switch (k) {
    case K::kIo: return LF_ERR_IO;
    case K::kConfig: return LF_ERR_CONFIG;
    case K::kNumeric: return LF_ERR_NUMERIC;
    case K::kArtifactMismatch: return LF_ERR_ARTIFACT;
    case K::kArgument: return LF_ERR_ARGUMENT;
    case K::kShape: return LF_ERR_SHAPE;
    case K::kUndefined: return LF_ERR_UNDEFINED;
    case K::kFrozenViolation: return LF_ERR_FROZEN;
    case K::kContract: return LF_ERR_CONTRACT;
  }
  return LF_ERR_INTERNAL;
}

template <typename Fn>
lf_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return LF_OK;
  } catch (const latentforce::Error& e) {
    g_last_error = e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return LF_ERR_INTERNAL;
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw latentforce::ArgumentError(std::string(what) + " must not be NULL");
}

std::string str_or_empty(const char* s) { return s ? std::string(s) : std::string(); }

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

latentforce::MarkerImage square_image(const uint8_t* pixels, int size) {
  latentforce::MarkerImage img;
  img.image = latentforce::Image8(size, size);
  std::memcpy(img.image.pixels.data(), pixels, static_cast<std::size_t>(size) * size);
  return img;
}

}  // namespace

extern "C" {

LF_API const char* lf_version(void) { return "0.1.0"; }
LF_API const char* lf_last_error(void) { return g_last_error.c_str(); }

LF_API const char* lf_status_name(lf_status status) {
  switch (status) {
    case LF_OK: return "ok";
    case LF_ERR_INTERNAL: return "internal";
    case LF_ERR_IO: return "io";
    case LF_ERR_CONFIG: return "config";
    case LF_ERR_NUMERIC: return "numeric";
    case LF_ERR_ARTIFACT: return "artifact-mismatch";
    case LF_ERR_ARGUMENT: return "argument";
    case LF_ERR_SHAPE: return "shape";
    case LF_ERR_UNDEFINED: return "undefined";
    case LF_ERR_FROZEN: return "frozen-violation";
    case LF_ERR_CONTRACT: return "contract";
  }
  return "unknown";
}

LF_API int lf_exit_code(lf_status status) {
  switch (status) {
    case LF_OK: return 0;
    case LF_ERR_IO: return 2;
    case LF_ERR_CONFIG:
    case LF_ERR_ARGUMENT: return 3;
    case LF_ERR_NUMERIC:
    case LF_ERR_UNDEFINED: return 4;
    case LF_ERR_ARTIFACT:
    case LF_ERR_SHAPE: return 5;
    default: return 1;
  }
}

LF_API void lf_set_log(lf_log_fn fn, void* user) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  g_log_fn = fn;
  g_log_user = user;
}

LF_API void lf_string_free(char* s) { std::free(s); }

LF_API lf_status lf_config_defaults(lf_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new lf_config{latentforce::Config::defaults()};
  });
}

LF_API lf_status lf_config_load(const char* path, lf_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new lf_config{latentforce::Config::load(path)};
  });
}

LF_API lf_status lf_config_set(lf_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    cfg->value.set(key, value);
  });
}

LF_API lf_status lf_config_dump(const lf_config* cfg, char** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = dup_string(cfg->value.dump());
  });
}

LF_API void lf_config_free(lf_config* cfg) { delete cfg; }

LF_API lf_status lf_model_new(const lf_config* cfg, lf_model** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = new lf_model{latentforce::Model(latentforce::ModelConfig::from_config(cfg->value))};
  });
}

LF_API lf_status lf_model_load(const char* path, lf_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new lf_model{latentforce::load_model(path)};
  });
}

LF_API lf_status lf_model_save(const lf_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    latentforce::save_model(path, model->value);
  });
}

LF_API void lf_model_free(lf_model* model) { delete model; }

LF_API lf_status lf_model_info(const lf_model* model, int* image_size, int* n_patches,
                               int64_t* parameter_count) {
  return guarded([&] {
    require(model, "model");
    const auto& c = model->value.config();
    if (image_size) *image_size = c.image_size;
    if (n_patches) *n_patches = c.n_patches();
    if (parameter_count) *parameter_count = model->value.parameter_count();
  });
}

LF_API lf_status lf_model_checksum(const lf_model* model, uint64_t* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = model->value.checksum();
  });
}

LF_API lf_status lf_model_encode(const lf_model* model, const uint8_t* ref, const uint8_t* cur,
                                 int size, double* mu, double* log_var) {
  return guarded([&] {
    require(model, "model");
    require(ref, "ref");
    require(cur, "cur");
    if (size <= 0) throw latentforce::ArgumentError("size must be positive");
    const latentforce::TactileObservation obs{square_image(ref, size), square_image(cur, size),
                                              false};
    const latentforce::Posterior post = model->value.encode(obs);
    if (mu) std::memcpy(mu, post.mu.data(), sizeof(double) * post.mu.size());
    if (log_var) std::memcpy(log_var, post.log_var.data(), sizeof(double) * post.log_var.size());
  });
}

LF_API lf_status lf_model_decode(const lf_model* model, const uint8_t* ref, int size,
                                 const double* z, double* out) {
  return guarded([&] {
    require(model, "model");
    require(ref, "ref");
    require(z, "z");
    require(out, "out");
    if (size <= 0) throw latentforce::ArgumentError("size must be positive");
    const int np = model->value.config().n_patches();
    const latentforce::Matrix zm =
        Eigen::Map<const latentforce::Matrix>(z, np, latentforce::kLatentDim);
    const latentforce::Matrix img = model->value.decode(square_image(ref, size), zm);
    std::memcpy(out, img.data(), sizeof(double) * img.size());
  });
}

LF_API lf_status lf_simgen(const lf_config* cfg, const char* out_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_dir, "out_dir");
    LineBuf buf;
    std::ostream log(&buf);
    latentforce::cmd_simgen(cfg->value, out_dir, log);
  });
}

LF_API lf_status lf_train(const char* dataset_dir, const lf_config* cfg, const char* out_checkpoint) {
  return guarded([&] {
    require(dataset_dir, "dataset_dir");
    require(cfg, "cfg");
    require(out_checkpoint, "out_checkpoint");
    LineBuf buf;
    std::ostream log(&buf);
    latentforce::cmd_train(dataset_dir, cfg->value, out_checkpoint, log);
  });
}

LF_API lf_status lf_reconstruct(const char* checkpoint, const char* dataset_dir,
                                const char* episode, int frame, const char* out_png) {
  return guarded([&] {
    require(checkpoint, "checkpoint");
    require(dataset_dir, "dataset_dir");
    require(out_png, "out_png");
    latentforce::cmd_reconstruct(checkpoint, dataset_dir, str_or_empty(episode), frame, out_png);
  });
}

LF_API lf_status lf_analyze(const char* checkpoint, const char* dataset_dir, const char* split,
                            const lf_config* cfg, const char* out_prefix) {
  return guarded([&] {
    require(checkpoint, "checkpoint");
    require(dataset_dir, "dataset_dir");
    require(cfg, "cfg");
    require(out_prefix, "out_prefix");
    LineBuf buf;
    std::ostream log(&buf);
    latentforce::cmd_analyze(checkpoint, dataset_dir, split ? split : "test", cfg->value,
                             out_prefix, log);
  });
}

LF_API lf_status lf_evalzs(const char* checkpoint, const char* head, const char* source,
                           const char* target, const char* source_dir, const char* target_dir,
                           const lf_config* cfg, const char* out_json) {
  return guarded([&] {
    require(checkpoint, "checkpoint");
    require(source, "source");
    require(target, "target");
    require(source_dir, "source_dir");
    require(cfg, "cfg");
    latentforce::EvalRequest req;
    req.checkpoint = checkpoint;
    req.head = str_or_empty(head);
    req.source = source;
    req.target = target;
    req.source_dir = source_dir;
    req.target_dir = str_or_empty(target_dir);
    req.out_json = str_or_empty(out_json);
    LineBuf buf;
    std::ostream log(&buf);
    latentforce::cmd_evalzs(req, cfg->value, log);
  });
}

}  // extern "C"

#include "gmclab.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "gmclab/errors.hpp"
#include "gmclab/harness.hpp"

// Holds the original text alongside the parsed form: the manifest hash is
// computed from the bytes that were actually supplied, while the setters
// only touch the parsed fields.
struct gmclab_config_s {
  gmclab::harness::ExperimentConfig config;
  std::string bytes;
  std::string kind_name;
};

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& message) {
  g_last_error = message;
  return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return GMCLAB_OK;
  } catch (const gmclab::validation_error& e) {
    return fail(GMCLAB_ERR_VALIDATION, e.what());
  } catch (const gmclab::io_error& e) {
    return fail(GMCLAB_ERR_IO, e.what());
  } catch (const gmclab::numerical_error& e) {
    return fail(GMCLAB_ERR_NUMERICAL, e.what());
  } catch (const std::exception& e) {
    return fail(GMCLAB_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(GMCLAB_ERR_INTERNAL, "unknown error");
  }
}

int parse_into(std::string bytes, gmclab_config** out) {
  return guarded([&] {
    auto cfg = std::make_unique<gmclab_config_s>();
    cfg->bytes = std::move(bytes);
    cfg->config = gmclab::harness::ExperimentConfig::parse(cfg->bytes);
    cfg->kind_name = gmclab::harness::to_string(cfg->config.kind);
    *out = cfg.release();
  });
}

}  // namespace

extern "C" {

const char* gmclab_version(void) {
  static const std::string v = gmclab::harness::code_version();
  return v.c_str();
}

const char* gmclab_last_error(void) { return g_last_error.c_str(); }

int gmclab_config_parse(const char* json, gmclab_config** out) {
  if (!json || !out) return fail(GMCLAB_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return parse_into(json, out);
}

int gmclab_config_load(const char* path, gmclab_config** out) {
  if (!path || !out) return fail(GMCLAB_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  std::ifstream is(path, std::ios::binary);
  if (!is) return fail(GMCLAB_ERR_IO, std::string("cannot open ") + path);
  std::ostringstream os;
  os << is.rdbuf();
  return parse_into(os.str(), out);
}

int gmclab_config_validate(const gmclab_config* cfg) {
  if (!cfg) return fail(GMCLAB_ERR_ARGUMENT, "null config");
  return guarded([&] { cfg->config.validate(); });
}

const char* gmclab_config_kind(const gmclab_config* cfg) {
  return cfg ? cfg->kind_name.c_str() : "";
}

int gmclab_config_set_seed(gmclab_config* cfg, uint64_t seed) {
  if (!cfg) return fail(GMCLAB_ERR_ARGUMENT, "null config");
  cfg->config.seed = seed;
  g_last_error.clear();
  return GMCLAB_OK;
}

int gmclab_config_set_out_dir(gmclab_config* cfg, const char* dir) {
  if (!cfg || !dir || !*dir) return fail(GMCLAB_ERR_ARGUMENT, "out dir must be nonempty");
  cfg->config.out_dir = dir;
  g_last_error.clear();
  return GMCLAB_OK;
}

int gmclab_config_set_workers(gmclab_config* cfg, size_t workers) {
  if (!cfg) return fail(GMCLAB_ERR_ARGUMENT, "null config");
  if (workers == 0) return fail(GMCLAB_ERR_ARGUMENT, "workers must be >= 1");
  cfg->config.workers = workers;
  g_last_error.clear();
  return GMCLAB_OK;
}

void gmclab_config_free(gmclab_config* cfg) { delete cfg; }

int gmclab_run(const gmclab_config* cfg, char** manifest_json) {
  if (!cfg || !manifest_json) return fail(GMCLAB_ERR_ARGUMENT, "null argument");
  *manifest_json = nullptr;
  return guarded([&] {
    gmclab::harness::RunManifest man = gmclab::harness::run(cfg->config, cfg->bytes);
    std::string text = man.to_json();
    char* buf = static_cast<char*>(std::malloc(text.size() + 1));
    if (!buf) throw std::bad_alloc();
    std::memcpy(buf, text.c_str(), text.size() + 1);
    *manifest_json = buf;
  });
}

void gmclab_string_free(char* s) { std::free(s); }

}  // extern "C"

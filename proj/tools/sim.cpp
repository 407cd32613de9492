// Command line front end over the C API: loads a study config, applies
// seed/output/worker overrides, runs it, prints the run manifest.
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "gmclab.h"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

int map_status(int status) {
  switch (status) {
    case GMCLAB_OK:
      return 0;
    case GMCLAB_ERR_ARGUMENT:
    case GMCLAB_ERR_VALIDATION:
      return kExitValidation;
    default:
      return kExitNumerical;
  }
}

int complain(int status) {
  std::fprintf(stderr, "sim: %s\n", gmclab_last_error());
  return map_status(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Runs one study described by a JSON config and writes its artifacts."};
  app.name("sim");

  std::string kind, config_path, out_dir;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  app.add_option("kind", kind, "Study kind; must match the config")->required();
  app.add_option("--config", config_path, "Path to the study config")->required();
  auto* seed_opt = app.add_option("--seed", seed, "Replaces the config seed");
  auto* out_opt = app.add_option("--out", out_dir, "Replaces the output directory");
  auto* workers_opt = app.add_option("--workers", workers, "Replaces the worker count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitValidation;
  }

  gmclab_config* cfg = nullptr;
  if (gmclab_config_load(config_path.c_str(), &cfg) != GMCLAB_OK) {
    std::fprintf(stderr, "sim: %s\n", gmclab_last_error());
    return kExitValidation;
  }
  int status;
  std::unique_ptr<gmclab_config, void (*)(gmclab_config*)> owner(cfg, gmclab_config_free);

  if (kind != gmclab_config_kind(cfg)) {
    std::fprintf(stderr, "sim: config is a \"%s\" study, not \"%s\"\n",
                 gmclab_config_kind(cfg), kind.c_str());
    return kExitValidation;
  }

  if (seed_opt->count() > 0) {
    status = gmclab_config_set_seed(cfg, seed);
    if (status != GMCLAB_OK) return complain(status);
  }
  if (out_opt->count() == 0)
    if (const char* env = std::getenv("GMCLAB_OUT_DIR"); env && *env) out_dir = env;
  if (!out_dir.empty()) {
    status = gmclab_config_set_out_dir(cfg, out_dir.c_str());
    if (status != GMCLAB_OK) return complain(status);
  }
  if (workers_opt->count() == 0) {
    if (const char* env = std::getenv("GMCLAB_WORKERS"); env && *env) {
      char* end = nullptr;
      unsigned long parsed = std::strtoul(env, &end, 10);
      if (!end || *end != '\0' || parsed == 0) {
        std::fprintf(stderr, "sim: GMCLAB_WORKERS must be a positive integer\n");
        return kExitValidation;
      }
      workers = parsed;
    }
  }
  if (workers > 0) {
    status = gmclab_config_set_workers(cfg, workers);
    if (status != GMCLAB_OK) return complain(status);
  }

  status = gmclab_config_validate(cfg);
  if (status != GMCLAB_OK) return complain(status);

  char* manifest = nullptr;
  status = gmclab_run(cfg, &manifest);
  if (status != GMCLAB_OK) return complain(status);
  std::fputs(manifest, stdout);
  gmclab_string_free(manifest);
  return 0;
}

// SPDX-License-Identifier: Apache-2.0
#include "ncd/ncd.h"

#include <CLI11.hpp>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct ConfigDeleter {
  void operator()(ncd_config* c) const { ncd_config_free(c); }
};
using ConfigPtr = std::unique_ptr<ncd_config, ConfigDeleter>;

struct Failure {
  ncd_status status;
};

void check(ncd_status status) {
  if (status != NCD_OK) throw Failure{status};
}

/// Loads the config file (if any) and applies `key=value` overrides.
ConfigPtr make_config(const std::string& path, const std::vector<std::string>& overrides) {
  ncd_config* raw = nullptr;
  check(path.empty() ? ncd_config_create(&raw) : ncd_config_load(path.c_str(), &raw));
  ConfigPtr config(raw);
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: override '%s' is not key=value\n", item.c_str());
      throw Failure{NCD_ERR_CONFIG};
    }
    check(ncd_config_set(config.get(), item.substr(0, eq).c_str(), item.substr(eq + 1).c_str()));
  }
  return config;
}

std::vector<unsigned long long> seeds_of(const ncd_config* config) {
  size_t needed = 0;
  check(ncd_config_get(config, "seeds", nullptr, 0, &needed));
  std::string text(needed, '\0');
  check(ncd_config_get(config, "seeds", text.data(), text.size(), &needed));
  text.resize(needed - 1);
  std::vector<unsigned long long> seeds;
  size_t start = 0;
  while (start < text.size()) {
    const size_t comma = text.find(',', start);
    const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) seeds.push_back(std::stoull(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return seeds;
}

std::string method_of(const ncd_config* config) {
  char buffer[32];
  check(ncd_config_get(config, "method", buffer, sizeof(buffer), nullptr));
  return buffer;
}

std::string run_dir_for(const std::string& root, const std::string& method, unsigned long long seed) {
  return root + "/" + method + "_seed" + std::to_string(seed);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural self-collision detection and handling experiments"};
  app.require_subcommand(1);
  std::string configPath;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", configPath, "experiment config file (key = value lines)");
  app.add_option("-s,--set", overrides, "override one config key, key=value")->allow_extra_args(false);

  std::string dataDir = "data", aeDir = "ae", runsDir = "runs", outDir = "report";
  std::vector<std::string> methods, runDirs;
  bool finalOnly = false;

  CLI::App* synth = app.add_subcommand("synth", "generate the synthetic mesh dataset");
  synth->add_option("-o,--out", dataDir, "dataset directory")->capture_default_str();

  CLI::App* trainAe = app.add_subcommand("train-ae", "train the autoencoder on the collision-free poses");
  trainAe->add_option("-d,--data", dataDir, "dataset directory")->capture_default_str();
  trainAe->add_option("-o,--out", aeDir, "autoencoder directory")->capture_default_str();

  CLI::App* run = app.add_subcommand("run", "train detectors for each method and seed");
  run->add_option("-a,--ae", aeDir, "autoencoder directory")->capture_default_str();
  run->add_option("-o,--out", runsDir, "directory receiving one sub-directory per run")->capture_default_str();
  run->add_option("-m,--method", methods, "method(s): active+bd, supv+bd, supv (default: the config's method)");

  CLI::App* evalDetect = app.add_subcommand("eval-detect", "accuracy and false negative rate per checkpoint");
  evalDetect->add_option("-a,--ae", aeDir, "autoencoder directory")->capture_default_str();
  evalDetect->add_option("runs", runDirs, "run directories")->required();

  CLI::App* evalHandle = app.add_subcommand("eval-handle", "collision handling success rate per checkpoint");
  evalHandle->add_option("-a,--ae", aeDir, "autoencoder directory")->capture_default_str();
  evalHandle->add_flag("--final-only", finalOnly, "evaluate the last checkpoint only");
  evalHandle->add_option("runs", runDirs, "run directories")->required();

  CLI::App* report = app.add_subcommand("report", "summary table and plots over evaluated runs");
  report->add_option("-o,--out", outDir, "report directory")->capture_default_str();
  report->add_option("runs", runDirs, "run directories")->required();

  CLI::App* selftest = app.add_subcommand("selftest", "run the built-in consistency checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*selftest) {
      size_t needed = 0;
      int failures = 0;
      check(ncd_selftest(nullptr, 0, &needed, &failures));
      std::string text(needed, '\0');
      check(ncd_selftest(text.data(), text.size(), &needed, &failures));
      std::fputs(text.c_str(), stdout);
      return failures == 0 ? 0 : kExitRuntime;
    }
    if (*report) {
      std::vector<const char*> dirs;
      for (const std::string& d : runDirs) dirs.push_back(d.c_str());
      check(ncd_report(dirs.data(), dirs.size(), outDir.c_str()));
      std::printf("report written to %s\n", outDir.c_str());
      return 0;
    }

    const ConfigPtr config = make_config(configPath, overrides);
    if (*synth) {
      size_t meshes = 0, free = 0;
      check(ncd_synth(config.get(), dataDir.c_str(), &meshes, &free));
      std::printf("%zu meshes, %zu collision-free, written to %s\n", meshes, free, dataDir.c_str());
    } else if (*trainAe) {
      check(ncd_train_autoencoder(config.get(), dataDir.c_str(), aeDir.c_str()));
      std::printf("autoencoder written to %s\n", aeDir.c_str());
    } else if (*run) {
      if (methods.empty()) methods.push_back(method_of(config.get()));
      for (const std::string& method : methods)
        for (unsigned long long seed : seeds_of(config.get())) {
          const std::string dir = run_dir_for(runsDir, method, seed);
          size_t size = 0;
          check(ncd_run(config.get(), aeDir.c_str(), method.c_str(), seed, dir.c_str(), &size));
          std::printf("%s seed %llu: %zu labelled samples, written to %s\n", method.c_str(), seed, size, dir.c_str());
        }
    } else if (*evalDetect) {
      for (const std::string& dir : runDirs) {
        ncd_detection_metrics m{};
        check(ncd_eval_detection(config.get(), aeDir.c_str(), dir.c_str(), &m));
        std::printf("%s: size %zu accuracy %.4f fnr %.4f\n", dir.c_str(), m.dataset_size, m.accuracy,
                    m.false_negative_rate);
      }
    } else if (*evalHandle) {
      for (const std::string& dir : runDirs) {
        ncd_handling_metrics m{};
        check(ncd_eval_handling(config.get(), aeDir.c_str(), dir.c_str(), finalOnly ? 1 : 0, &m));
        std::printf("%s: size %zu success %.4f mean reduction %.4f feasible %.4f\n", dir.c_str(), m.dataset_size,
                    m.success_rate, m.mean_reduction, m.feasible_rate);
      }
    }
    return 0;
  } catch (const Failure& f) {
    std::fprintf(stderr, "error (%s): %s\n", ncd_status_name(f.status), ncd_last_error_message());
    return f.status == NCD_ERR_CONFIG ? kExitConfig : kExitRuntime;
  }
}

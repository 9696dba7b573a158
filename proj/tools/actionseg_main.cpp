// actionseg command-line tool. Talks to the library through its C interface only.
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "actionseg/actionseg.h"

namespace {

struct ConfigHandle {
  as_config* p = nullptr;
  ConfigHandle() {
    if (as_config_new(&p) != AS_OK) p = nullptr;
  }
  ~ConfigHandle() { as_config_free(p); }
  ConfigHandle(const ConfigHandle&) = delete;
  ConfigHandle& operator=(const ConfigHandle&) = delete;
};

int report(as_status status, const char* command) {
  if (status != AS_OK) std::fprintf(stderr, "actionseg %s: error: %s\n", command, as_last_error());
  return static_cast<int>(status);
}

// Config file first, then --set overrides, then validation.
as_status build_config(ConfigHandle& cfg, const std::string& path, const std::vector<std::string>& overrides) {
  if (cfg.p == nullptr) return AS_ERR_INTERNAL;
  if (!path.empty())
    if (as_status s = as_config_load(cfg.p, path.c_str()); s != AS_OK) return s;
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      as_config_set(cfg.p, kv.c_str(), "");
      return AS_ERR_USAGE;
    }
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    if (as_status s = as_config_set(cfg.p, key.c_str(), value.c_str()); s != AS_OK) return s;
  }
  return as_config_validate(cfg.p);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint segmentation and classification of sequential actions in video"};
  app.set_version_flag("--version", std::string(as_version()));
  app.require_subcommand(1);

  std::string config_path, manifest, out, models, video, scores, pred_dir, spec;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value settings file")->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "override a setting, key=value (repeatable)");
  };

  CLI::App* train = app.add_subcommand("train", "fit one model per action (and scenario) from a manifest");
  add_config(train);
  train->add_option("--manifest", manifest, "CSV with video, action[, scenario, format, fold]")->required();
  train->add_option("--out", out, "model directory")->required();

  CLI::App* segment = app.add_subcommand("segment", "segment one video with a trained model directory");
  add_config(segment);
  segment->add_option("--models", models, "model directory")->required();
  segment->add_option("--video", video, "PGM directory or .y4m file")->required();
  segment->add_option("--out", out, "segmentation CSV")->required();
  segment->add_option("--scores", scores, "also write per-frame scores as JSON");

  CLI::App* eval = app.add_subcommand("eval", "segment every video of a manifest and score it");
  add_config(eval);
  eval->add_option("--models", models, "model directory")->required();
  eval->add_option("--manifest", manifest, "CSV with video, labels[, format, fold]")->required();
  eval->add_option("--out", out, "report JSON")->required();
  eval->add_option("--pred-dir", pred_dir, "write predicted segments per video here");

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--spec", spec, "dataset description (JSON)")->required();
  synth->add_option("--seed", seed, "random seed")->required();
  synth->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*synth) {
    std::size_t instances = 0, tests = 0;
    const as_status s = as_cmd_synth(spec.c_str(), seed, out.c_str(), &instances, &tests);
    if (s == AS_OK) std::printf("wrote %zu instances and %zu stitched videos to %s\n", instances, tests, out.c_str());
    return report(s, "synth");
  }

  ConfigHandle cfg;
  const char* name = *train ? "train" : *segment ? "segment" : "eval";
  if (as_status s = build_config(cfg, config_path, overrides); s != AS_OK) return report(s, name);

  if (*train) {
    std::size_t files = 0;
    const as_status s = as_cmd_train(cfg.p, manifest.c_str(), out.c_str(), &files);
    if (s == AS_OK) std::printf("wrote %zu model file(s) to %s\n", files, out.c_str());
    return report(s, name);
  }
  if (*segment) return report(as_cmd_segment(cfg.p, models.c_str(), video.c_str(), out.c_str(), scores.c_str()), name);

  char* text = nullptr;
  const as_status s = as_cmd_eval(cfg.p, models.c_str(), manifest.c_str(), out.c_str(), pred_dir.c_str(), &text);
  if (s == AS_OK && text != nullptr) std::fputs(text, stdout);
  as_string_free(text);
  return report(s, name);
}

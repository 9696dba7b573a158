#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "actionseg/eval.hpp"
#include "actionseg/features.hpp"
#include "actionseg/gmm.hpp"
#include "actionseg/synth.hpp"

namespace actionseg {

/// Settings shared by every subcommand. Defaults follow the KTH protocol:
/// tau 40, every second frame, 25-frame windows, 1024 components.
struct PipelineConfig {
  double tau = 40.0;
  int frame_stride = 2;
  int window_frames = 25;
  FitConfig fit{1024, 200, 1e-5, 1e-3, 0, 20};
  HornSchunckParams flow;
  bool per_scenario = false;
  bool use_cache = true;

  /// Keys: tau, frame_stride, window_frames (alias L_frames), n_components,
  /// max_iters, rel_tol, var_floor, kmeans_iters, seed, hs_alpha, hs_iters,
  /// per_scenario, cache. Throws Error(usage) for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// `key = value` lines; '#' starts a comment, [section] lines are ignored,
  /// values may be double-quoted.
  void load_file(const std::filesystem::path& path);
  void validate() const;
  std::string to_text() const;

  ExtractionConfig extraction() const;
  ExperimentConfig experiment() const;
};

/// Header-driven CSV manifest. Relative paths resolve against the manifest's directory.
struct Manifest {
  std::filesystem::path base_dir;
  std::vector<std::string> columns;
  std::vector<std::map<std::string, std::string>> rows;

  bool has_column(const std::string& name) const;
  std::filesystem::path resolve(const std::string& relative) const;
};

Manifest load_manifest(const std::filesystem::path& path);

/// Directory used by the feature cache: $ACTIONSEG_CACHE_DIR when set,
/// otherwise <temp>/actionseg-cache.
std::filesystem::path feature_cache_dir();

/// Features of a video, reusing a cached dump keyed by the pixel data and
/// the extraction settings when cfg.use_cache is set.
std::vector<FrameFeatures> cached_video_features(const FrameSequence& seq, const PipelineConfig& cfg);

struct TrainSummary {
  std::vector<std::filesystem::path> model_dirs;
  std::size_t model_files = 0;
};

/// Manifest columns: video, action, optional scenario, format, fold. With a
/// fold column, one model set per fold f is written to <out>/fold<f>, trained
/// on the rows of every other fold.
TrainSummary cmd_train(const PipelineConfig& cfg, const std::filesystem::path& manifest,
                       const std::filesystem::path& out_dir);

/// Writes the segmentation CSV, and the per-frame scores as JSON when scores_json is non-empty.
Segmentation cmd_segment(const PipelineConfig& cfg, const std::filesystem::path& models_dir,
                         const std::filesystem::path& video, const std::filesystem::path& out_csv,
                         const std::filesystem::path& scores_json = {});

struct EvalOutcome {
  std::vector<FoldResult> folds;
  std::vector<std::string> fold_names;
  ExperimentSummary summary;
  std::string json;
  std::string text;
};

/// Manifest columns: video, labels, optional format, fold. Rows of fold f are
/// scored with the models in <models>/fold<f>. Writes the JSON report, and one
/// predicted-segment CSV per video into pred_dir when it is non-empty.
EvalOutcome cmd_eval(const PipelineConfig& cfg, const std::filesystem::path& models_dir,
                     const std::filesystem::path& manifest, const std::filesystem::path& out_json,
                     const std::filesystem::path& pred_dir = {});

/// Synthetic dataset description as read by cmd_synth.
struct SynthDataset {
  SynthSpec spec = default_synth_spec();
  int instances_per_action = 2;
  int folds = 0;  // 0: no stitched test set
  int test_videos_per_fold = 4;
  int instances_per_test_video = 3;
};

SynthDataset parse_synth_dataset(const std::string& json_text);

struct SynthSummary {
  std::size_t instances = 0;
  std::size_t test_videos = 0;
};

/// Writes instances/<action>_<i>/ (PGM frames) with a label CSV beside each,
/// train_manifest.csv, and, when folds >= 2, stitched/ test videos plus
/// test_manifest.csv. Also writes pipeline.conf tuned for the synthetic data.
SynthSummary cmd_synth(const std::filesystem::path& spec_path, std::uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace actionseg

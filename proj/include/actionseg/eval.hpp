#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "actionseg/features.hpp"
#include "actionseg/frame_io.hpp"
#include "actionseg/gmm.hpp"
#include "actionseg/segmenter.hpp"
#include "actionseg/synth.hpp"

namespace actionseg {

struct EvalReport {
  std::vector<std::string> action_names;
  double frame_accuracy = 0.0;                 // percent
  std::vector<std::vector<long>> confusion;    // rows = truth, cols = predicted
  std::vector<double> per_action_accuracy;     // percent; NaN for actions absent from the truth
  std::size_t n_frames = 0;

  /// Adds another report's counts (action lists must match) and recomputes the rates.
  void accumulate(const EvalReport& other);
  std::string to_json() const;
  std::string to_text() const;
};

/// Predicted names are mapped onto the truth's action order; names only the
/// prediction uses are appended.
EvalReport frame_accuracy(const LabelTrack& pred, const LabelTrack& truth);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Shuffles 0..n-1 and cuts it into k near-equal test folds (the first n % k
/// folds get one extra item). Each fold's train set is the rest.
std::vector<Fold> kfold_split(std::size_t n, int k, std::uint64_t seed);

struct StitchSource {
  const FrameSequence* seq = nullptr;
  Label action = 0;
  int group = 1;  // 1 or 2
};

struct StitchedVideo {
  FrameSequence seq;
  LabelTrack labels;
  std::vector<std::size_t> picks;  // indices into the source list, in order
};

/// Concatenates n_instances random sources, strictly alternating between
/// group 1 and group 2 from a random starting group. Within a group the
/// source drawn last time is not drawn again when the group has another.
StitchedVideo stitch_sequences(std::span<const StitchSource> sources, const std::vector<std::string>& action_names,
                               std::uint64_t seed, int n_instances);

struct TrainingVideo {
  std::vector<FrameFeatures> features;
  std::string action;
  std::string scenario;
};

struct TestVideo {
  std::string id;
  std::vector<FrameFeatures> features;
  LabelTrack truth;
};

struct ExperimentConfig {
  FitConfig fit;
  int window_frames = 25;
  int frame_stride = 2;
  double tau = 40.0;  // recorded in model metadata
  bool per_scenario = false;
};

/// One model per action (or per action and scenario) fitted on pooled features.
/// action_names fixes the ordinals; an action without training data is an error.
ModelBank train_bank(const std::vector<TrainingVideo>& videos, const std::vector<std::string>& action_names,
                     const ExperimentConfig& cfg);

struct VideoResult {
  std::string id;
  Segmentation segmentation;
  EvalReport report;
};

struct FoldResult {
  EvalReport report;  // pooled over every frame of the fold's test videos
  std::vector<VideoResult> videos;
};

FoldResult evaluate_bank(const ModelBank& bank, const std::vector<TestVideo>& tests, const ExperimentConfig& cfg);

/// Trains on train_videos, segments every test video and scores it.
FoldResult run_experiment(const std::vector<TrainingVideo>& train_videos, const std::vector<TestVideo>& test_videos,
                          const std::vector<std::string>& action_names, const ExperimentConfig& cfg);

struct ExperimentSummary {
  std::vector<double> fold_accuracy;
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation over folds
};

ExperimentSummary summarize(const std::vector<FoldResult>& folds);

struct SyntheticBenchmark {
  SynthSpec spec = default_synth_spec();
  int folds = 3;
  int instances_per_action = 12;   // split across folds; each fold trains on the rest
  int test_videos_per_fold = 4;
  int instances_per_test_video = 3;
  ExtractionConfig extraction;
  ExperimentConfig experiment;
  std::uint64_t seed = 7;
};

struct SyntheticBenchmarkResult {
  std::vector<FoldResult> folds;
  ExperimentSummary summary;
};

/// Synthetic stand-in for the stitched multi-action protocol: per-action
/// k-fold split of generated single-action instances, training on the
/// training instances, testing on stitched videos built from the held-out ones.
SyntheticBenchmarkResult run_synthetic_benchmark(const SyntheticBenchmark& bench);

}  // namespace actionseg

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "actionseg/features.hpp"
#include "actionseg/gmm.hpp"

namespace actionseg {

/// Trained models grouped by action. An action may own several models (one
/// per scenario); its score is the best of them.
class ModelBank {
 public:
  ModelBank() = default;
  explicit ModelBank(std::vector<std::string> action_names);

  /// action is a 1-based ordinal into action_names.
  void add(GmmModel model, Label action);
  /// Looks the action up by model.action.
  void add(GmmModel model);

  std::size_t action_count() const { return action_names_.size(); }
  const std::vector<std::string>& action_names() const { return action_names_; }
  const std::vector<GmmModel>& models() const { return models_; }
  Label action_of(std::size_t model_index) const { return model_action_[model_index]; }
  std::size_t dim() const { return models_.empty() ? 0 : models_.front().dim(); }
  Label ordinal(const std::string& action_name) const;

  /// Throws Error(data) if an action has no model or model dims differ.
  void validate() const;

 private:
  std::vector<std::string> action_names_;
  std::vector<GmmModel> models_;
  std::vector<Label> model_action_;
};

/// Model directory layout: index.json lists the action order and model files.
void save_bank(const ModelBank& bank, const std::filesystem::path& dir);
ModelBank load_bank(const std::filesystem::path& dir);

struct WindowScore {
  int window_start = 0;        // position in the retained-frame list
  std::vector<double> scores;  // one average log-likelihood per action
};

struct Segment {
  int start_frame = 0;
  int end_frame = 0;  // inclusive
  Label action = 0;

  bool operator==(const Segment&) const = default;
};

struct Segmentation {
  std::vector<Label> frame_labels;
  std::vector<Segment> segments;
};

/// Run-length encoding of a label track.
std::vector<Segment> run_length_encode(const std::vector<Label>& labels);

/// One score vector per window of L consecutive retained frames, advancing one
/// frame at a time. Windows with no feature vectors, or with a non-finite
/// score, are omitted.
std::vector<WindowScore> window_scores(const std::vector<FrameFeatures>& features, const ModelBank& bank, int window);

struct FusedScores {
  std::vector<std::vector<double>> sums;  // per frame, one entry per action
  std::vector<int> coverage;              // scoring windows that covered the frame
};

/// Per-frame sum of every window score whose span contains the frame.
FusedScores frame_fusion(const std::vector<WindowScore>& scores, int n_frames, int window);

/// argmax per row; ties go to the lowest ordinal and NaN counts as -inf.
std::vector<Label> frame_labels(const std::vector<std::vector<double>>& fused);

/// Relabels runs shorter than min_length to the preceding run's action (a
/// leading short run joins the following run) until only a single run may
/// remain short.
Segmentation merge_short_segments(const std::vector<Label>& labels, int min_length);

/// Intermediate results of segment_video, kept for debugging dumps.
struct SegmentationTrace {
  std::vector<WindowScore> windows;
  FusedScores fused;
  std::vector<Label> retained_labels;  // argmax labels before merging
};

/// Full pipeline over retained frames; labels are then spread to all
/// n_frames original frames by nearest retained frame (ties to the earlier).
/// n_frames = 0 means last retained frame_index + 1.
Segmentation segment_video(const std::vector<FrameFeatures>& features, const ModelBank& bank, int window,
                           int n_frames = 0, SegmentationTrace* trace = nullptr);

/// L given in original frames expressed in retained frames (rounded up).
int window_in_retained_frames(int window_frames, int frame_stride);

std::string format_segmentation_csv(const Segmentation& seg, const std::vector<std::string>& action_names);

}  // namespace actionseg

#include "actionseg/segmenter.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"

namespace actionseg {

ModelBank::ModelBank(std::vector<std::string> action_names) : action_names_(std::move(action_names)) {
  for (std::size_t i = 0; i < action_names_.size(); ++i)
    for (std::size_t j = i + 1; j < action_names_.size(); ++j)
      if (action_names_[i] == action_names_[j]) throw_data("duplicate action name '" + action_names_[i] + "'");
}

void ModelBank::add(GmmModel model, Label action) {
  if (action < 1 || action > static_cast<Label>(action_names_.size())) throw_usage("model bank: action out of range");
  if (!models_.empty() && model.dim() != models_.front().dim()) throw_data("model bank: models do not share dim");
  models_.push_back(std::move(model));
  model_action_.push_back(action);
}

void ModelBank::add(GmmModel model) {
  const Label a = ordinal(model.action);
  add(std::move(model), a);
}

Label ModelBank::ordinal(const std::string& action_name) const {
  const auto it = std::find(action_names_.begin(), action_names_.end(), action_name);
  if (it == action_names_.end()) throw_data("unknown action '" + action_name + "'");
  return static_cast<Label>(it - action_names_.begin()) + 1;
}

void ModelBank::validate() const {
  if (action_names_.empty()) throw_data("model bank has no actions");
  std::vector<int> per_action(action_names_.size(), 0);
  for (std::size_t i = 0; i < models_.size(); ++i) {
    if (models_[i].dim() != dim()) throw_data("model bank: models do not share dim");
    ++per_action[static_cast<std::size_t>(model_action_[i] - 1)];
  }
  for (std::size_t a = 0; a < per_action.size(); ++a)
    if (per_action[a] == 0) throw_data("model bank: action '" + action_names_[a] + "' has no model");
}

namespace {

using nlohmann::json;

std::string model_file_name(const GmmModel& m, std::size_t index) {
  std::string name = m.action.empty() ? "model" : m.action;
  if (!m.scenario.empty()) name += "__" + m.scenario;
  for (char& c : name)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) c = '_';
  return std::to_string(index) + "_" + name + ".json";
}

}  // namespace

void save_bank(const ModelBank& bank, const std::filesystem::path& dir) {
  bank.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw_data("cannot create directory " + dir.string() + ": " + ec.message());
  json entries = json::array();
  for (std::size_t i = 0; i < bank.models().size(); ++i) {
    const GmmModel& m = bank.models()[i];
    const std::string file = model_file_name(m, i);
    save_model(m, dir / file);
    entries.push_back({{"file", file},
                       {"action", bank.action_names()[static_cast<std::size_t>(bank.action_of(i) - 1)]},
                       {"scenario", m.scenario}});
  }
  const json index = {{"format_version", 1}, {"actions", bank.action_names()}, {"models", entries}};
  std::ofstream out(dir / "index.json", std::ios::binary);
  if (!out) throw_data("cannot write " + (dir / "index.json").string());
  out << index.dump(2) << '\n';
}

ModelBank load_bank(const std::filesystem::path& dir) {
  const auto index_path = dir / "index.json";
  if (!std::filesystem::is_directory(dir)) throw_data("missing model directory: " + dir.string());
  std::ifstream in(index_path);
  if (!in) throw_data("missing model index: " + index_path.string());
  json index;
  try {
    in >> index;
    ModelBank bank(index.at("actions").get<std::vector<std::string>>());
    for (const json& e : index.at("models")) {
      GmmModel m = load_model(dir / e.at("file").get<std::string>());
      const Label a = bank.ordinal(e.at("action").get<std::string>());
      bank.add(std::move(m), a);
    }
    bank.validate();
    return bank;
  } catch (const json::exception& e) {
    throw_data(std::string("malformed model index: ") + e.what());
  }
}

std::vector<Segment> run_length_encode(const std::vector<Label>& labels) {
  std::vector<Segment> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (out.empty() || out.back().action != labels[i])
      out.push_back({static_cast<int>(i), static_cast<int>(i), labels[i]});
    else
      out.back().end_frame = static_cast<int>(i);
  }
  return out;
}

std::vector<WindowScore> window_scores(const std::vector<FrameFeatures>& features, const ModelBank& bank,
                                       int window) {
  if (window < 1) throw_usage("window length must be >= 1");
  const int n_frames = static_cast<int>(features.size());
  if (n_frames < window)
    throw_data("video shorter than the window (" + std::to_string(n_frames) + " retained frames < " +
               std::to_string(window) + ")");
  bank.validate();
  const std::size_t n_models = bank.models().size();
  const std::size_t n_actions = bank.action_count();

  // Per-frame log-likelihood sums let overlapping windows share the work.
  std::vector<std::vector<double>> frame_sum(static_cast<std::size_t>(n_frames), std::vector<double>(n_models, 0.0));
  std::vector<std::size_t> frame_count(static_cast<std::size_t>(n_frames), 0);
  for (int t = 0; t < n_frames; ++t) {
    const FrameFeatures& f = features[static_cast<std::size_t>(t)];
    frame_count[static_cast<std::size_t>(t)] = f.size();
    for (std::size_t m = 0; m < n_models; ++m) {
      const GmmModel& model = bank.models()[m];
      if (model.dim() != kFeatureDim) throw_data("model dimension does not match the feature dimension");
      double s = 0.0;
      for (const FeatureVector& v : f.vectors) s += model.log_pdf(v);
      frame_sum[static_cast<std::size_t>(t)][m] = s;
    }
  }

  std::vector<WindowScore> out;
  for (int s = 0; s + window <= n_frames; ++s) {
    std::size_t count = 0;
    std::vector<double> total(n_models, 0.0);
    for (int t = s; t < s + window; ++t) {
      count += frame_count[static_cast<std::size_t>(t)];
      for (std::size_t m = 0; m < n_models; ++m) total[m] += frame_sum[static_cast<std::size_t>(t)][m];
    }
    if (count == 0) continue;
    WindowScore ws{s, std::vector<double>(n_actions, -std::numeric_limits<double>::infinity())};
    for (std::size_t m = 0; m < n_models; ++m) {
      double& slot = ws.scores[static_cast<std::size_t>(bank.action_of(m) - 1)];
      slot = std::max(slot, total[m] / static_cast<double>(count));
    }
    if (std::all_of(ws.scores.begin(), ws.scores.end(), [](double v) { return std::isfinite(v); }))
      out.push_back(std::move(ws));
  }
  return out;
}

FusedScores frame_fusion(const std::vector<WindowScore>& scores, int n_frames, int window) {
  if (window < 1 || n_frames < window) throw_usage("frame_fusion: inconsistent frame count and window length");
  if (scores.size() > static_cast<std::size_t>(n_frames - window + 1))
    throw_usage("frame_fusion: more scores than windows");
  const std::size_t n_actions = scores.empty() ? 0 : scores.front().scores.size();
  FusedScores out{std::vector<std::vector<double>>(static_cast<std::size_t>(n_frames),
                                                   std::vector<double>(n_actions, 0.0)),
                  std::vector<int>(static_cast<std::size_t>(n_frames), 0)};
  for (const WindowScore& ws : scores) {
    if (ws.window_start < 0 || ws.window_start + window > n_frames)
      throw_usage("frame_fusion: window start out of range");
    if (ws.scores.size() != n_actions) throw_usage("frame_fusion: score vectors differ in length");
    for (int t = ws.window_start; t < ws.window_start + window; ++t) {
      auto& row = out.sums[static_cast<std::size_t>(t)];
      for (std::size_t a = 0; a < n_actions; ++a) row[a] += ws.scores[a];
      ++out.coverage[static_cast<std::size_t>(t)];
    }
  }
  return out;
}

std::vector<Label> frame_labels(const std::vector<std::vector<double>>& fused) {
  if (fused.empty()) throw_usage("frame_labels: no frames");
  std::vector<Label> out;
  out.reserve(fused.size());
  for (const auto& row : fused) {
    if (row.empty()) throw_usage("frame_labels: empty score vector");
    std::size_t best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < row.size(); ++a) {
      const double v = std::isnan(row[a]) ? -std::numeric_limits<double>::infinity() : row[a];
      if (v > best_v) {
        best_v = v;
        best = a;
      }
    }
    out.push_back(static_cast<Label>(best) + 1);
  }
  return out;
}

Segmentation merge_short_segments(const std::vector<Label>& labels, int min_length) {
  if (labels.empty()) throw_usage("merge_short_segments: empty label track");
  if (min_length < 1) throw_usage("merge_short_segments: min_length must be >= 1");
  std::vector<Segment> runs = run_length_encode(labels);
  auto length = [](const Segment& s) { return s.end_frame - s.start_frame + 1; };
  for (;;) {
    if (runs.size() == 1) break;
    bool changed = false;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (length(runs[i]) >= min_length) continue;
      const Label target = i == 0 ? runs[1].action : runs[i - 1].action;
      if (runs[i].action != target) {
        runs[i].action = target;
        changed = true;
      }
    }
    // Re-encode: adjacent runs that now share an action become one.
    std::vector<Segment> merged;
    for (const Segment& r : runs) {
      if (!merged.empty() && merged.back().action == r.action)
        merged.back().end_frame = r.end_frame;
      else
        merged.push_back(r);
    }
    runs = std::move(merged);
    if (!changed) break;
  }
  Segmentation out;
  out.frame_labels.resize(labels.size());
  for (const Segment& r : runs)
    std::fill(out.frame_labels.begin() + r.start_frame, out.frame_labels.begin() + r.end_frame + 1, r.action);
  out.segments = std::move(runs);
  return out;
}

namespace {

// Fills entries flagged as missing from the nearest present entry; ties go to
// the earlier one. positions must be increasing.
std::vector<Label> spread_nearest(const std::vector<int>& positions, const std::vector<Label>& values,
                                  const std::vector<bool>& present, int n_out) {
  std::vector<int> src_pos;
  std::vector<Label> src_val;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (present[i]) {
      src_pos.push_back(positions[i]);
      src_val.push_back(values[i]);
    }
  }
  std::vector<Label> out(static_cast<std::size_t>(n_out));
  std::size_t j = 0;
  for (int p = 0; p < n_out; ++p) {
    while (j + 1 < src_pos.size() && src_pos[j + 1] <= p) ++j;
    std::size_t pick = j;
    if (src_pos[j] < p && j + 1 < src_pos.size() && src_pos[j + 1] - p < p - src_pos[j]) pick = j + 1;
    out[static_cast<std::size_t>(p)] = src_val[pick];
  }
  return out;
}

}  // namespace

Segmentation segment_video(const std::vector<FrameFeatures>& features, const ModelBank& bank, int window,
                           int n_frames, SegmentationTrace* trace) {
  const int n_retained = static_cast<int>(features.size());
  std::vector<WindowScore> windows = window_scores(features, bank, window);
  FusedScores fused = frame_fusion(windows, n_retained, window);

  std::vector<int> covered_positions;
  std::vector<std::vector<double>> covered_rows;
  for (int t = 0; t < n_retained; ++t) {
    if (fused.coverage[static_cast<std::size_t>(t)] > 0) {
      covered_positions.push_back(t);
      covered_rows.push_back(fused.sums[static_cast<std::size_t>(t)]);
    }
  }
  if (covered_rows.empty()) throw_data("no feature vectors in any window; cannot segment");
  const std::vector<Label> covered_labels = frame_labels(covered_rows);
  std::vector<int> all_positions(static_cast<std::size_t>(n_retained));
  std::vector<Label> all_labels(static_cast<std::size_t>(n_retained), 0);
  std::vector<bool> present(static_cast<std::size_t>(n_retained), false);
  for (int t = 0; t < n_retained; ++t) all_positions[static_cast<std::size_t>(t)] = t;
  for (std::size_t i = 0; i < covered_positions.size(); ++i) {
    all_labels[static_cast<std::size_t>(covered_positions[i])] = covered_labels[i];
    present[static_cast<std::size_t>(covered_positions[i])] = true;
  }
  const std::vector<Label> retained_labels = spread_nearest(all_positions, all_labels, present, n_retained);
  const Segmentation merged = merge_short_segments(retained_labels, window);

  std::vector<int> frame_positions;
  for (const FrameFeatures& f : features) {
    if (!frame_positions.empty() && f.frame_index <= frame_positions.back())
      throw_usage("segment_video: frame indices must increase");
    frame_positions.push_back(f.frame_index);
  }
  if (frame_positions.front() < 0) throw_usage("segment_video: negative frame index");
  if (n_frames == 0) n_frames = frame_positions.back() + 1;
  if (n_frames <= frame_positions.back()) throw_usage("segment_video: n_frames does not cover every retained frame");

  Segmentation out;
  out.frame_labels = spread_nearest(frame_positions, merged.frame_labels,
                                    std::vector<bool>(frame_positions.size(), true), n_frames);
  out.segments = run_length_encode(out.frame_labels);
  if (trace) {
    trace->windows = std::move(windows);
    trace->fused = std::move(fused);
    trace->retained_labels = retained_labels;
  }
  return out;
}

int window_in_retained_frames(int window_frames, int frame_stride) {
  if (window_frames < 1) throw_usage("window length must be >= 1 frame");
  if (frame_stride < 1) throw_usage("frame_stride must be >= 1");
  return (window_frames + frame_stride - 1) / frame_stride;
}

std::string format_segmentation_csv(const Segmentation& seg, const std::vector<std::string>& action_names) {
  std::ostringstream out;
  out << "start_frame,end_frame,action\n";
  for (const Segment& s : seg.segments) {
    if (s.action < 1 || s.action > static_cast<Label>(action_names.size()))
      throw_usage("segmentation label has no action name");
    out << s.start_frame << ',' << s.end_frame << ',' << action_names[static_cast<std::size_t>(s.action - 1)] << '\n';
  }
  return out.str();
}

}  // namespace actionseg

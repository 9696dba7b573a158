#include "actionseg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "actionseg/rng.hpp"
#include "json.hpp"

namespace actionseg {

namespace {

void recompute_rates(EvalReport& r) {
  long total = 0;
  long correct = 0;
  r.per_action_accuracy.assign(r.action_names.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t a = 0; a < r.confusion.size(); ++a) {
    const long row = std::accumulate(r.confusion[a].begin(), r.confusion[a].end(), 0L);
    total += row;
    correct += r.confusion[a][a];
    if (row > 0) r.per_action_accuracy[a] = 100.0 * static_cast<double>(r.confusion[a][a]) / static_cast<double>(row);
  }
  r.n_frames = static_cast<std::size_t>(total);
  r.frame_accuracy = total > 0 ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace

EvalReport frame_accuracy(const LabelTrack& pred, const LabelTrack& truth) {
  if (pred.size() != truth.size())
    throw_data("prediction has " + std::to_string(pred.size()) + " frames but ground truth has " +
               std::to_string(truth.size()));
  pred.validate();
  truth.validate();
  EvalReport r;
  r.action_names = truth.action_names;
  std::vector<std::size_t> pred_to_col(pred.action_names.size());
  for (std::size_t i = 0; i < pred.action_names.size(); ++i) {
    const auto it = std::find(r.action_names.begin(), r.action_names.end(), pred.action_names[i]);
    if (it == r.action_names.end()) {
      r.action_names.push_back(pred.action_names[i]);
      pred_to_col[i] = r.action_names.size() - 1;
    } else {
      pred_to_col[i] = static_cast<std::size_t>(it - r.action_names.begin());
    }
  }
  const std::size_t a = r.action_names.size();
  r.confusion.assign(a, std::vector<long>(a, 0));
  for (std::size_t t = 0; t < truth.size(); ++t)
    ++r.confusion[static_cast<std::size_t>(truth.labels[t] - 1)][pred_to_col[static_cast<std::size_t>(pred.labels[t] - 1)]];
  recompute_rates(r);
  return r;
}

void EvalReport::accumulate(const EvalReport& other) {
  if (action_names.empty() && confusion.empty()) {
    *this = other;
    return;
  }
  if (other.action_names != action_names) throw_usage("cannot pool reports over different action lists");
  for (std::size_t i = 0; i < confusion.size(); ++i)
    for (std::size_t j = 0; j < confusion.size(); ++j) confusion[i][j] += other.confusion[i][j];
  recompute_rates(*this);
}

std::string EvalReport::to_json() const {
  nlohmann::json per_action = nlohmann::json::object();
  for (std::size_t a = 0; a < action_names.size(); ++a) {
    per_action[action_names[a]] =
        std::isnan(per_action_accuracy[a]) ? nlohmann::json(nullptr) : nlohmann::json(per_action_accuracy[a]);
  }
  const nlohmann::json j = {{"frame_accuracy", frame_accuracy},
                            {"n_frames", n_frames},
                            {"actions", action_names},
                            {"confusion", confusion},
                            {"per_action_accuracy", per_action}};
  return j.dump(2);
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  std::size_t width = 8;
  for (const auto& n : action_names) width = std::max(width, n.size() + 1);
  out << std::left << std::setw(static_cast<int>(width)) << "truth\\pred";
  for (const auto& n : action_names) out << std::right << std::setw(static_cast<int>(width)) << n;
  out << std::right << std::setw(10) << "acc%" << '\n';
  for (std::size_t a = 0; a < action_names.size(); ++a) {
    out << std::left << std::setw(static_cast<int>(width)) << action_names[a];
    for (long c : confusion[a]) out << std::right << std::setw(static_cast<int>(width)) << c;
    out << std::right << std::setw(10);
    if (std::isnan(per_action_accuracy[a]))
      out << "-";
    else
      out << std::fixed << std::setprecision(1) << per_action_accuracy[a];
    out << '\n';
  }
  out << "frames: " << n_frames << "  accuracy: " << std::fixed << std::setprecision(2) << frame_accuracy << "%\n";
  return out.str();
}

std::vector<Fold> kfold_split(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw_usage("kfold_split: k must be >= 2");
  if (static_cast<std::size_t>(k) > n) throw_usage("kfold_split: k exceeds the number of items");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);

  std::vector<Fold> folds(static_cast<std::size_t>(k));
  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t extra = n % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    folds[f].test.assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                         order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  for (std::size_t f = 0; f < folds.size(); ++f)
    for (std::size_t g = 0; g < folds.size(); ++g)
      if (g != f) folds[f].train.insert(folds[f].train.end(), folds[g].test.begin(), folds[g].test.end());
  return folds;
}

StitchedVideo stitch_sequences(std::span<const StitchSource> sources, const std::vector<std::string>& action_names,
                               std::uint64_t seed, int n_instances) {
  if (n_instances < 1) throw_usage("stitch_sequences: n_instances must be >= 1");
  std::vector<std::size_t> by_group[2];
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const StitchSource& s = sources[i];
    if (s.group != 1 && s.group != 2) throw_usage("stitch_sequences: group must be 1 or 2");
    if (s.seq == nullptr || s.seq->empty()) throw_usage("stitch_sequences: empty source sequence");
    if (s.action < 1 || s.action > static_cast<Label>(action_names.size()))
      throw_usage("stitch_sequences: source action out of range");
    by_group[s.group - 1].push_back(i);
  }
  if (by_group[0].empty() || by_group[1].empty()) throw_data("stitch_sequences: a group has no instances");

  Rng rng(seed);
  int group = static_cast<int>(rng.below(2));
  std::size_t last_pick[2] = {sources.size(), sources.size()};
  StitchedVideo out;
  out.labels.action_names = action_names;
  for (int i = 0; i < n_instances; ++i) {
    const auto& pool = by_group[group];
    std::size_t pick;
    do {
      pick = pool[static_cast<std::size_t>(rng.below(pool.size()))];
    } while (pool.size() > 1 && pick == last_pick[group]);
    last_pick[group] = pick;
    out.picks.push_back(pick);

    const StitchSource& src = sources[pick];
    if (!out.seq.empty() && (src.seq->width() != out.seq.width() || src.seq->height() != out.seq.height()))
      throw_data("stitch_sequences: instances differ in frame size");
    if (out.seq.empty()) out.seq.fps = src.seq->fps;
    for (const Frame& f : src.seq->frames) {
      Frame copy = f;
      copy.index = static_cast<int>(out.seq.size());
      out.seq.frames.push_back(std::move(copy));
      out.labels.labels.push_back(src.action);
    }
    group = 1 - group;
  }
  return out;
}

ModelBank train_bank(const std::vector<TrainingVideo>& videos, const std::vector<std::string>& action_names,
                     const ExperimentConfig& cfg) {
  cfg.fit.validate();
  // Pool vectors per (action, scenario) key; scenario is ignored unless per_scenario.
  std::map<std::pair<std::string, std::string>, std::vector<double>> pools;
  for (const TrainingVideo& v : videos) {
    if (std::find(action_names.begin(), action_names.end(), v.action) == action_names.end())
      throw_data("training video has undeclared action '" + v.action + "'");
    auto& pool = pools[{v.action, cfg.per_scenario ? v.scenario : std::string()}];
    for (const FrameFeatures& f : v.features)
      for (const FeatureVector& x : f.vectors) pool.insert(pool.end(), x.begin(), x.end());
  }

  ModelBank bank(action_names);
  for (std::size_t a = 0; a < action_names.size(); ++a) {
    bool any = false;
    std::uint64_t scenario_index = 0;
    for (auto& [key, pool] : pools) {
      if (key.first != action_names[a]) continue;
      any = true;
      const std::size_t count = pool.size() / kFeatureDim;
      if (count < static_cast<std::size_t>(cfg.fit.n_components))
        throw_data("action '" + key.first + "'" + (key.second.empty() ? "" : " scenario '" + key.second + "'") +
                   " has " + std::to_string(count) + " feature vectors, fewer than n_components");
      FitConfig fit = cfg.fit;
      fit.seed = mix_seed(mix_seed(cfg.fit.seed, a), scenario_index++);
      FitResult res = em_fit(MatrixView{pool, kFeatureDim}, fit);
      res.model.action = key.first;
      res.model.scenario = key.second;
      res.model.meta = TrainMeta{cfg.tau, cfg.frame_stride, fit, count};
      bank.add(std::move(res.model), static_cast<Label>(a) + 1);
    }
    if (!any) throw_data("action '" + action_names[a] + "' has no training data");
  }
  return bank;
}

FoldResult evaluate_bank(const ModelBank& bank, const std::vector<TestVideo>& tests, const ExperimentConfig& cfg) {
  const int window = window_in_retained_frames(cfg.window_frames, cfg.frame_stride);
  FoldResult fold;
  for (const TestVideo& t : tests) {
    VideoResult vr;
    vr.id = t.id;
    vr.segmentation = segment_video(t.features, bank, window, static_cast<int>(t.truth.size()));
    LabelTrack pred{vr.segmentation.frame_labels, bank.action_names()};
    vr.report = frame_accuracy(pred, t.truth);
    // Pool in the bank's action order so every video shares one confusion layout.
    LabelTrack truth_in_bank_order;
    truth_in_bank_order.action_names = bank.action_names();
    for (Label l : t.truth.labels)
      truth_in_bank_order.labels.push_back(bank.ordinal(t.truth.action_names[static_cast<std::size_t>(l - 1)]));
    fold.report.accumulate(frame_accuracy(pred, truth_in_bank_order));
    fold.videos.push_back(std::move(vr));
  }
  return fold;
}

FoldResult run_experiment(const std::vector<TrainingVideo>& train_videos, const std::vector<TestVideo>& test_videos,
                          const std::vector<std::string>& action_names, const ExperimentConfig& cfg) {
  const ModelBank bank = train_bank(train_videos, action_names, cfg);
  return evaluate_bank(bank, test_videos, cfg);
}

ExperimentSummary summarize(const std::vector<FoldResult>& folds) {
  ExperimentSummary s;
  for (const FoldResult& f : folds) s.fold_accuracy.push_back(f.report.frame_accuracy);
  if (s.fold_accuracy.empty()) return s;
  const double n = static_cast<double>(s.fold_accuracy.size());
  s.mean = std::accumulate(s.fold_accuracy.begin(), s.fold_accuracy.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : s.fold_accuracy) ss += (a - s.mean) * (a - s.mean);
  s.stddev = std::sqrt(ss / n);
  return s;
}

SyntheticBenchmarkResult run_synthetic_benchmark(const SyntheticBenchmark& bench) {
  bench.spec.validate();
  bench.extraction.validate();
  const std::size_t n_actions = bench.spec.actions.size();
  std::vector<std::string> names;
  for (const MotionRecipe& r : bench.spec.actions) names.push_back(r.name);

  const std::vector<SynthInstance> instances = synth_generate(bench.spec, bench.instances_per_action, bench.seed);
  std::vector<std::vector<FrameFeatures>> features;
  features.reserve(instances.size());
  for (const SynthInstance& inst : instances) features.push_back(extract_video_features(inst.seq, bench.extraction));

  // Stratified split: every action is divided across the folds separately.
  std::vector<std::vector<Fold>> per_action_folds;
  for (std::size_t a = 0; a < n_actions; ++a)
    per_action_folds.push_back(
        kfold_split(static_cast<std::size_t>(bench.instances_per_action), bench.folds, mix_seed(bench.seed, 100 + a)));

  ExperimentConfig exp = bench.experiment;
  exp.frame_stride = bench.extraction.frame_stride;
  exp.tau = bench.extraction.tau;

  SyntheticBenchmarkResult result;
  for (int f = 0; f < bench.folds; ++f) {
    std::vector<TrainingVideo> train;
    std::vector<StitchSource> held_out;
    for (std::size_t a = 0; a < n_actions; ++a) {
      const Fold& fold = per_action_folds[a][static_cast<std::size_t>(f)];
      const std::size_t base = a * static_cast<std::size_t>(bench.instances_per_action);
      for (std::size_t i : fold.train) train.push_back({features[base + i], names[a], ""});
      for (std::size_t i : fold.test)
        held_out.push_back({&instances[base + i].seq, instances[base + i].action, instances[base + i].group});
    }
    std::vector<TestVideo> tests;
    for (int v = 0; v < bench.test_videos_per_fold; ++v) {
      StitchedVideo sv = stitch_sequences(held_out, names, mix_seed(bench.seed, 1000 + 16 * f + v),
                                          bench.instances_per_test_video);
      tests.push_back({"fold" + std::to_string(f) + "_video" + std::to_string(v),
                       extract_video_features(sv.seq, bench.extraction), std::move(sv.labels)});
    }
    result.folds.push_back(run_experiment(train, tests, names, exp));
  }
  result.summary = summarize(result.folds);
  return result;
}

}  // namespace actionseg

#include "actionseg/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "actionseg/rng.hpp"
#include "hash.hpp"
#include "json.hpp"

namespace actionseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (in.fail() || !in.eof()) throw_usage("config: bad value '" + value + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  std::string v = value;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw_usage("config: bad boolean '" + value + "' for " + key);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write " + path.string());
  out << text;
  if (!out) throw_data("write failed: " + path.string());
}

}  // namespace

void PipelineConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  std::string value = trim(raw_value);
  if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
  if (key == "tau") tau = parse_number<double>(key, value);
  else if (key == "frame_stride") frame_stride = parse_number<int>(key, value);
  else if (key == "window_frames" || key == "L_frames") window_frames = parse_number<int>(key, value);
  else if (key == "n_components") fit.n_components = parse_number<int>(key, value);
  else if (key == "max_iters") fit.max_iters = parse_number<int>(key, value);
  else if (key == "rel_tol") fit.rel_tol = parse_number<double>(key, value);
  else if (key == "var_floor") fit.var_floor = parse_number<double>(key, value);
  else if (key == "kmeans_iters") fit.kmeans_iters = parse_number<int>(key, value);
  else if (key == "seed") fit.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "hs_alpha") flow.alpha = parse_number<double>(key, value);
  else if (key == "hs_iters") flow.iters = parse_number<int>(key, value);
  else if (key == "per_scenario") per_scenario = parse_bool(key, value);
  else if (key == "cache") use_cache = parse_bool(key, value);
  else throw_usage("config: unknown key '" + key + "'");
}

void PipelineConfig::load_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw_usage("cannot open config file " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw_usage("config " + path.filename().string() + " line " + std::to_string(line_no) + ": expected key = value");
    set(line.substr(0, eq), line.substr(eq + 1));
  }
}

void PipelineConfig::validate() const {
  extraction().validate();
  fit.validate();
  if (window_frames < 1) throw_usage("window_frames must be >= 1");
}

namespace {

// Shortest text that reads back to the same double.
std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string PipelineConfig::to_text() const {
  std::ostringstream out;
  out << "tau = " << shortest(tau) << "\nframe_stride = " << frame_stride << "\nwindow_frames = " << window_frames
      << "\nn_components = " << fit.n_components << "\nmax_iters = " << fit.max_iters << "\nrel_tol = " << shortest(fit.rel_tol)
      << "\nvar_floor = " << shortest(fit.var_floor) << "\nkmeans_iters = " << fit.kmeans_iters << "\nseed = " << fit.seed
      << "\nhs_alpha = " << shortest(flow.alpha) << "\nhs_iters = " << flow.iters
      << "\nper_scenario = " << (per_scenario ? "true" : "false") << "\ncache = " << (use_cache ? "true" : "false")
      << '\n';
  return out.str();
}

ExtractionConfig PipelineConfig::extraction() const { return ExtractionConfig{tau, frame_stride, flow}; }

ExperimentConfig PipelineConfig::experiment() const {
  return ExperimentConfig{fit, window_frames, frame_stride, tau, per_scenario};
}

bool Manifest::has_column(const std::string& name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

fs::path Manifest::resolve(const std::string& relative) const {
  const fs::path p(relative);
  return p.is_absolute() ? p : base_dir / p;
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open manifest " + path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  int line_no = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (m.columns.empty()) {
      m.columns = split(line);
      continue;
    }
    const auto fields = split(line);
    if (fields.size() != m.columns.size())
      throw_data("manifest " + path.filename().string() + " line " + std::to_string(line_no) + ": expected " +
                 std::to_string(m.columns.size()) + " fields");
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < fields.size(); ++i) row[m.columns[i]] = fields[i];
    m.rows.push_back(std::move(row));
  }
  if (m.columns.empty()) throw_data("manifest " + path.string() + " is empty");
  return m;
}

fs::path feature_cache_dir() {
  if (const char* env = std::getenv("ACTIONSEG_CACHE_DIR"); env != nullptr && *env != '\0') return fs::path(env);
  return fs::temp_directory_path() / "actionseg-cache";
}

std::vector<FrameFeatures> cached_video_features(const FrameSequence& seq, const PipelineConfig& cfg) {
  if (!cfg.use_cache) return extract_video_features(seq, cfg.extraction());
  std::uint64_t h = fnv1a64("actionseg-features-v1");
  auto mix_bytes = [&h](const void* p, std::size_t n) {
    h = fnv1a64(std::string_view(static_cast<const char*>(p), n), h);
  };
  const int dims[3] = {seq.width(), seq.height(), static_cast<int>(seq.size())};
  mix_bytes(dims, sizeof(dims));
  for (const Frame& f : seq.frames) mix_bytes(f.pixels.values.data(), f.pixels.values.size() * sizeof(double));
  const double params[3] = {cfg.tau, cfg.flow.alpha, static_cast<double>(cfg.flow.iters)};
  mix_bytes(params, sizeof(params));
  mix_bytes(&cfg.frame_stride, sizeof(cfg.frame_stride));

  char name[32];
  std::snprintf(name, sizeof(name), "%016llx.feat", static_cast<unsigned long long>(h));
  const fs::path dir = feature_cache_dir();
  const fs::path file = dir / name;
  if (fs::is_regular_file(file)) {
    try {
      return load_features(file);
    } catch (const Error&) {
      // Corrupt cache entry: fall through and rebuild it.
    }
  }
  std::vector<FrameFeatures> features = extract_video_features(seq, cfg.extraction());
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!ec) {
    const fs::path tmp = dir / (std::string(name) + ".tmp");
    try {
      save_features(features, tmp);
      fs::rename(tmp, file, ec);
    } catch (const Error&) {
      // Caching is best-effort.
    }
  }
  return features;
}

namespace {

FrameSequence load_row_video(const Manifest& m, const std::map<std::string, std::string>& row) {
  const auto fmt = row.find("format");
  return load_sequence(m.resolve(row.at("video")),
                       parse_sequence_format(fmt == row.end() ? std::string() : fmt->second));
}

std::vector<std::string> distinct_folds(const Manifest& m) {
  std::vector<std::string> folds;
  for (const auto& row : m.rows)
    if (std::find(folds.begin(), folds.end(), row.at("fold")) == folds.end()) folds.push_back(row.at("fold"));
  std::sort(folds.begin(), folds.end());
  return folds;
}

}  // namespace

TrainSummary cmd_train(const PipelineConfig& cfg, const fs::path& manifest_path, const fs::path& out_dir) {
  cfg.validate();
  const Manifest m = load_manifest(manifest_path);
  if (!m.has_column("video") || !m.has_column("action"))
    throw_data("training manifest needs 'video' and 'action' columns");
  if (m.rows.empty()) throw_data("training manifest lists no videos");

  std::vector<std::string> actions;
  std::vector<TrainingVideo> videos;
  for (const auto& row : m.rows) {
    const std::string& action = row.at("action");
    if (action.empty()) throw_data("training manifest row without an action");
    if (std::find(actions.begin(), actions.end(), action) == actions.end()) actions.push_back(action);
    const FrameSequence seq = load_row_video(m, row);
    const auto scen = row.find("scenario");
    videos.push_back({cached_video_features(seq, cfg), action, scen == row.end() ? std::string() : scen->second});
  }

  const ExperimentConfig exp = cfg.experiment();
  TrainSummary summary;
  auto train_into = [&](const std::vector<TrainingVideo>& subset, const fs::path& dir) {
    const ModelBank bank = train_bank(subset, actions, exp);
    save_bank(bank, dir);
    summary.model_dirs.push_back(dir);
    summary.model_files += bank.models().size();
  };

  if (m.has_column("fold")) {
    for (const std::string& fold : distinct_folds(m)) {
      std::vector<TrainingVideo> subset;
      for (std::size_t i = 0; i < m.rows.size(); ++i)
        if (m.rows[i].at("fold") != fold) subset.push_back(videos[i]);
      train_into(subset, out_dir / ("fold" + fold));
    }
  } else {
    train_into(videos, out_dir);
  }
  return summary;
}

Segmentation cmd_segment(const PipelineConfig& cfg, const fs::path& models_dir, const fs::path& video,
                         const fs::path& out_csv, const fs::path& scores_json) {
  cfg.validate();
  const ModelBank bank = load_bank(models_dir);
  if (bank.dim() != kFeatureDim) throw_data("models have dim " + std::to_string(bank.dim()) + ", expected 14");
  const FrameSequence seq = load_sequence(video);
  const int window = window_in_retained_frames(cfg.window_frames, cfg.frame_stride);
  if (seq.size() < 3) throw_data("video shorter than the window");
  const std::vector<FrameFeatures> features = cached_video_features(seq, cfg);
  SegmentationTrace trace;
  Segmentation seg = segment_video(features, bank, window, static_cast<int>(seq.size()), &trace);
  write_text(out_csv, format_segmentation_csv(seg, bank.action_names()));

  if (!scores_json.empty()) {
    json frames = json::array();
    for (std::size_t t = 0; t < features.size(); ++t) {
      frames.push_back({{"frame_index", features[t].frame_index},
                        {"n_vectors", features[t].size()},
                        {"coverage", trace.fused.coverage[t]},
                        {"p_sum", trace.fused.sums[t]},
                        {"label", bank.action_names()[static_cast<std::size_t>(trace.retained_labels[t] - 1)]}});
    }
    json windows = json::array();
    for (const WindowScore& w : trace.windows)
      windows.push_back({{"window_start", features[static_cast<std::size_t>(w.window_start)].frame_index},
                         {"scores", w.scores}});
    const json dump = {{"actions", bank.action_names()},
                       {"window_retained_frames", window},
                       {"frames", frames},
                       {"windows", windows}};
    write_text(scores_json, dump.dump(1) + "\n");
  }
  return seg;
}

EvalOutcome cmd_eval(const PipelineConfig& cfg, const fs::path& models_dir, const fs::path& manifest_path,
                     const fs::path& out_json, const fs::path& pred_dir) {
  cfg.validate();
  if (!fs::is_directory(models_dir)) throw_data("missing model directory: " + models_dir.string());
  const Manifest m = load_manifest(manifest_path);
  if (!m.has_column("video") || !m.has_column("labels"))
    throw_data("evaluation manifest needs 'video' and 'labels' columns");
  if (m.rows.empty()) throw_data("evaluation manifest lists no videos");

  const ExperimentConfig exp = cfg.experiment();
  EvalOutcome outcome;
  std::vector<std::string> folds = m.has_column("fold") ? distinct_folds(m) : std::vector<std::string>{""};
  json fold_json = json::array();
  for (const std::string& fold : folds) {
    const fs::path dir = fold.empty() ? models_dir : models_dir / ("fold" + fold);
    const ModelBank bank = load_bank(dir);
    std::vector<TestVideo> tests;
    for (const auto& row : m.rows) {
      if (!fold.empty() && row.at("fold") != fold) continue;
      const FrameSequence seq = load_row_video(m, row);
      LabelTrack truth = load_labels(m.resolve(row.at("labels")));
      if (truth.size() != seq.size())
        throw_data("labels for " + row.at("video") + " cover " + std::to_string(truth.size()) + " frames, video has " +
                   std::to_string(seq.size()));
      for (const std::string& name : truth.action_names) bank.ordinal(name);
      tests.push_back({row.at("video"), cached_video_features(seq, cfg), std::move(truth)});
    }
    FoldResult result = evaluate_bank(bank, tests, exp);
    json videos = json::array();
    for (const VideoResult& v : result.videos) {
      videos.push_back({{"video", v.id}, {"frame_accuracy", v.report.frame_accuracy}, {"n_frames", v.report.n_frames}});
      if (!pred_dir.empty()) {
        std::string stem = fs::path(v.id).filename().string();
        if (stem.empty()) stem = fs::path(v.id).parent_path().filename().string();
        write_text(pred_dir / ((fold.empty() ? "" : "fold" + fold + "_") + fs::path(stem).stem().string() + ".csv"),
                   format_segmentation_csv(v.segmentation, bank.action_names()));
      }
    }
    fold_json.push_back({{"fold", fold}, {"report", json::parse(result.report.to_json())}, {"videos", videos}});
    outcome.fold_names.push_back(fold);
    outcome.folds.push_back(std::move(result));
  }
  outcome.summary = summarize(outcome.folds);
  const json report = {{"folds", fold_json},
                       {"fold_accuracies", outcome.summary.fold_accuracy},
                       {"mean_accuracy", outcome.summary.mean},
                       {"stddev_accuracy", outcome.summary.stddev}};
  outcome.json = report.dump(2) + "\n";
  write_text(out_json, outcome.json);

  std::ostringstream text;
  for (std::size_t i = 0; i < outcome.folds.size(); ++i) {
    if (!outcome.fold_names[i].empty()) text << "fold " << outcome.fold_names[i] << '\n';
    text << outcome.folds[i].report.to_text() << '\n';
  }
  char line[96];
  std::snprintf(line, sizeof(line), "mean accuracy: %.2f +- %.2f %% over %zu fold(s)\n", outcome.summary.mean,
                outcome.summary.stddev, outcome.folds.size());
  text << line;
  outcome.text = text.str();
  return outcome;
}

SynthDataset parse_synth_dataset(const std::string& json_text) {
  SynthDataset ds;
  try {
    const json j = json::parse(json_text);
    SynthSpec& s = ds.spec;
    if (j.contains("frame_size")) {
      s.width = j.at("frame_size").at(0).get<int>();
      s.height = j.at("frame_size").at(1).get<int>();
    }
    if (j.contains("instance_length_range")) {
      s.min_length = j.at("instance_length_range").at(0).get<int>();
      s.max_length = j.at("instance_length_range").at(1).get<int>();
    }
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.fps = j.value("fps", s.fps);
    if (j.contains("actions")) {
      s.actions.clear();
      for (const json& a : j.at("actions")) {
        MotionRecipe r;
        r.name = a.at("name").get<std::string>();
        r.pattern = parse_motion_pattern(a.at("pattern").get<std::string>());
        if (a.contains("velocity")) {
          r.vx = a.at("velocity").at(0).get<double>();
          r.vy = a.at("velocity").at(1).get<double>();
        }
        r.amplitude = a.value("amplitude", 0.0);
        r.period = a.value("period", 12.0);
        r.texture_seed = a.value("texture_seed", std::uint64_t{1});
        r.group = a.value("group", 1);
        s.actions.push_back(std::move(r));
      }
    }
    ds.instances_per_action = j.value("instances_per_action", ds.instances_per_action);
    ds.folds = j.value("folds", ds.folds);
    ds.test_videos_per_fold = j.value("test_videos_per_fold", ds.test_videos_per_fold);
    ds.instances_per_test_video = j.value("instances_per_test_video", ds.instances_per_test_video);
  } catch (const json::exception& e) {
    throw_usage(std::string("malformed synthetic spec: ") + e.what());
  }
  ds.spec.validate();
  if (ds.instances_per_action < 1) throw_usage("instances_per_action must be >= 1");
  if (ds.folds == 1 || ds.folds < 0) throw_usage("folds must be 0 (none) or >= 2");
  if (ds.folds >= 2 && ds.folds > ds.instances_per_action) throw_usage("folds exceed instances_per_action");
  if (ds.test_videos_per_fold < 1 || ds.instances_per_test_video < 1) throw_usage("stitched test settings must be >= 1");
  return ds;
}

SynthSummary cmd_synth(const fs::path& spec_path, std::uint64_t seed, const fs::path& out_dir) {
  std::ifstream in(spec_path);
  if (!in) throw_usage("cannot open synthetic spec " + spec_path.string());
  const SynthDataset ds = parse_synth_dataset(std::string(std::istreambuf_iterator<char>(in), {}));

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw_data("cannot create output directory " + out_dir.string());
  const fs::path probe = out_dir / ".write_probe";
  {
    std::ofstream p(probe);
    if (!p) throw_data("output directory is not writable: " + out_dir.string());
  }
  fs::remove(probe, ec);

  std::vector<std::string> names;
  for (const MotionRecipe& r : ds.spec.actions) names.push_back(r.name);
  const std::vector<SynthInstance> instances = synth_generate(ds.spec, ds.instances_per_action, seed);

  // Fold of every instance, split per action.
  std::vector<int> fold_of(instances.size(), -1);
  if (ds.folds >= 2) {
    for (std::size_t a = 0; a < names.size(); ++a) {
      const auto folds = kfold_split(static_cast<std::size_t>(ds.instances_per_action), ds.folds, mix_seed(seed, 100 + a));
      for (std::size_t f = 0; f < folds.size(); ++f)
        for (std::size_t i : folds[f].test) fold_of[a * static_cast<std::size_t>(ds.instances_per_action) + i] = static_cast<int>(f);
    }
  }

  std::ostringstream manifest;
  manifest << "video,labels,action,scenario,group" << (ds.folds >= 2 ? ",fold" : "") << '\n';
  char name[96];
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const SynthInstance& inst = instances[i];
    const std::string& action = names[static_cast<std::size_t>(inst.action - 1)];
    std::snprintf(name, sizeof(name), "%s_%03zu", action.c_str(), i % static_cast<std::size_t>(ds.instances_per_action));
    write_sequence_pgm_dir(inst.seq, out_dir / "instances" / name);
    write_labels(LabelTrack{std::vector<Label>(inst.seq.size(), 1), {action}},
                 out_dir / "instances" / (std::string(name) + ".csv"));
    manifest << "instances/" << name << ",instances/" << name << ".csv," << action << ",," << inst.group;
    if (ds.folds >= 2) manifest << ',' << fold_of[i];
    manifest << '\n';
  }
  write_text(out_dir / "train_manifest.csv", manifest.str());

  SynthSummary summary;
  summary.instances = instances.size();
  if (ds.folds >= 2) {
    std::ostringstream test_manifest;
    test_manifest << "video,labels,fold\n";
    for (int f = 0; f < ds.folds; ++f) {
      std::vector<StitchSource> held_out;
      for (std::size_t i = 0; i < instances.size(); ++i)
        if (fold_of[i] == f) held_out.push_back({&instances[i].seq, instances[i].action, instances[i].group});
      for (int v = 0; v < ds.test_videos_per_fold; ++v) {
        const StitchedVideo sv =
            stitch_sequences(held_out, names, mix_seed(seed, 1000 + 16 * f + v), ds.instances_per_test_video);
        std::snprintf(name, sizeof(name), "fold%d_%02d", f, v);
        write_sequence_pgm_dir(sv.seq, out_dir / "stitched" / name);
        write_labels(sv.labels, out_dir / "stitched" / (std::string(name) + ".csv"));
        test_manifest << "stitched/" << name << ",stitched/" << name << ".csv," << f << '\n';
        ++summary.test_videos;
      }
    }
    write_text(out_dir / "test_manifest.csv", test_manifest.str());
  }

  PipelineConfig conf;
  conf.fit.n_components = 4;
  conf.fit.seed = seed;
  write_text(out_dir / "pipeline.conf", "# Settings for the synthetic dataset in this directory.\n" + conf.to_text());
  return summary;
}

}  // namespace actionseg

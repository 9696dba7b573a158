#include <numeric>
#include <set>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

using namespace actionseg;
using namespace testing;

namespace {

LabelTrack track(std::vector<Label> labels, std::vector<std::string> names) { return LabelTrack{std::move(labels), std::move(names)}; }

FrameSequence constant_sequence(int n, double value) {
  FrameSequence s;
  for (int t = 0; t < n; ++t) s.frames.push_back(make_frame(t, Plane(4, 4, value)));
  return s;
}

}  // namespace

TEST_CASE("accuracy of identical tracks") {
  const LabelTrack t = track({1, 1, 2, 2, 3}, {"a", "b", "c"});
  const EvalReport r = frame_accuracy(t, t);
  CHECK(r.frame_accuracy == 100.0);
  CHECK(r.n_frames == 5);
  CHECK(r.confusion == std::vector<std::vector<long>>{{2, 0, 0}, {0, 2, 0}, {0, 0, 1}});
}

TEST_CASE("half flipped is 50 percent") {
  const LabelTrack truth = track({1, 1, 2, 2}, {"a", "b"});
  const LabelTrack pred = track({2, 1, 1, 2}, {"a", "b"});
  CHECK(frame_accuracy(pred, truth).frame_accuracy == 50.0);
  CHECK_THROWS_AS(frame_accuracy(track({1}, {"a"}), truth), Error);
}

TEST_CASE("accuracy against a counting loop, names remapped") {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(gen() % 100);
    std::vector<Label> t(static_cast<std::size_t>(n)), p(static_cast<std::size_t>(n));
    for (auto& x : t) x = 1 + static_cast<Label>(gen() % 3);
    for (auto& x : p) x = 1 + static_cast<Label>(gen() % 3);
    // Prediction lists the same actions in another order.
    const std::vector<std::string> tn{"a", "b", "c"}, pn{"c", "a", "b"};
    const EvalReport r = frame_accuracy(track(p, pn), track(t, tn));
    int hits = 0;
    for (int i = 0; i < n; ++i) hits += pn[static_cast<std::size_t>(p[static_cast<std::size_t>(i)] - 1)] == tn[static_cast<std::size_t>(t[static_cast<std::size_t>(i)] - 1)];
    CHECK(r.frame_accuracy == doctest::Approx(100.0 * hits / n).epsilon(1e-12));
    long total = 0, trace = 0;
    for (std::size_t i = 0; i < r.confusion.size(); ++i) {
      long row = 0;
      for (long c : r.confusion[i]) row += c;
      total += row;
      trace += r.confusion[i][i];
      if (i < 3) CHECK(row == std::count(t.begin(), t.end(), static_cast<Label>(i + 1)));
    }
    CHECK(total == n);
    CHECK(r.frame_accuracy == doctest::Approx(100.0 * trace / n).epsilon(1e-12));
  }
}

TEST_CASE("report serialisation") {
  const EvalReport r = frame_accuracy(track({1, 2}, {"a", "b"}), track({1, 1}, {"a", "b"}));
  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j.at("frame_accuracy").get<double>() == 50.0);
  CHECK(j.at("confusion").at(0).at(1).get<long>() == 1);
  CHECK(r.to_text().find("50.00") != std::string::npos);
}

TEST_CASE("k-fold partitions") {
  auto check_partition = [](const std::vector<Fold>& folds, std::size_t n) {
    std::vector<int> seen(n, 0);
    for (const Fold& f : folds) {
      for (std::size_t i : f.test) ++seen[i];
      CHECK(f.train.size() + f.test.size() == n);
      std::set<std::size_t> all(f.train.begin(), f.train.end());
      for (std::size_t i : f.test) CHECK(all.insert(i).second);
    }
    for (int s : seen) CHECK(s == 1);
  };
  const auto six = kfold_split(6, 3, 1);
  REQUIRE(six.size() == 3);
  for (const Fold& f : six) CHECK(f.test.size() == 2);
  check_partition(six, 6);
  const auto loo = kfold_split(7, 7, 2);
  for (const Fold& f : loo) CHECK(f.test.size() == 1);
  check_partition(loo, 7);
  const auto hundred = kfold_split(100, 3, 3);
  CHECK(hundred[0].test.size() == 34);
  CHECK(hundred[1].test.size() == 33);
  CHECK(hundred[2].test.size() == 33);
  check_partition(hundred, 100);
  for (std::size_t n = 2; n < 30; ++n)
    for (int k = 2; k <= static_cast<int>(n) && k < 8; ++k) check_partition(kfold_split(n, k, n * 31 + static_cast<std::size_t>(k)), n);
  CHECK_THROWS_AS(kfold_split(2, 3, 0), Error);
  CHECK_THROWS_AS(kfold_split(5, 1, 0), Error);
}

TEST_CASE("stitching") {
  const FrameSequence a = constant_sequence(30, 10), b = constant_sequence(40, 20);
  const std::vector<std::string> names{"x", "y"};
  const std::vector<StitchSource> one{{&a, 1, 1}, {&b, 2, 2}};
  const StitchedVideo single = stitch_sequences(one, names, 4, 1);
  CHECK((single.seq.size() == 30 || single.seq.size() == 40));
  const StitchedVideo pair = stitch_sequences(one, names, 4, 2);
  REQUIRE(pair.seq.size() == 70);
  REQUIRE(pair.labels.size() == 70);
  const std::size_t first_len = pair.picks[0] == 0 ? 30 : 40;
  for (std::size_t t = 0; t < 70; ++t) {
    CHECK(pair.seq.frames[t].index == static_cast<int>(t));
    CHECK(pair.labels.labels[t] == (t < first_len ? pair.labels.labels[0] : pair.labels.labels[69]));
  }
  CHECK(pair.labels.labels[0] != pair.labels.labels[69]);
  CHECK_THROWS_AS(stitch_sequences(std::vector<StitchSource>{{&a, 1, 1}}, names, 1, 2), Error);
}

TEST_CASE("stitched groups alternate") {
  std::vector<FrameSequence> seqs;
  for (int i = 0; i < 6; ++i) seqs.push_back(constant_sequence(5 + i, i));
  std::vector<StitchSource> src;
  for (int i = 0; i < 6; ++i) src.push_back({&seqs[static_cast<std::size_t>(i)], 1 + i % 3, i < 3 ? 1 : 2});
  const std::vector<std::string> names{"p", "q", "r"};
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const StitchedVideo v = stitch_sequences(src, names, seed, 6);
    REQUIRE(v.picks.size() == 6);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < 6; ++i) {
      const StitchSource& s = src[v.picks[i]];
      if (i > 0) CHECK(s.group != src[v.picks[i - 1]].group);
      if (i > 1) CHECK(v.picks[i] != v.picks[i - 2]);
      for (std::size_t t = 0; t < s.seq->size(); ++t) CHECK(v.labels.labels[pos + t] == s.action);
      pos += s.seq->size();
    }
    CHECK(pos == v.seq.size());
    CHECK(v.labels.size() == v.seq.size());
  }
}

TEST_CASE("synthetic translate without noise is an exact shift") {
  SynthSpec spec = default_synth_spec();
  spec.noise_sigma = 0.0;
  spec.min_length = spec.max_length = 6;
  const auto inst = synth_generate(spec, 1, 3);
  REQUIRE(inst.size() == 3);
  const FrameSequence& seq = inst[0].seq;
  CHECK(inst[0].action == 1);
  for (int t = 1; t < 6; ++t)
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x)
        REQUIRE(seq.frames[static_cast<std::size_t>(t)].pixels(x, y) == seq.frames[0].pixels(((x - t) % spec.width + spec.width) % spec.width, y));
}

TEST_CASE("synthetic data is a pure function of the seed") {
  SynthSpec spec = default_synth_spec();
  spec.min_length = 5;
  spec.max_length = 8;
  const auto a = synth_generate(spec, 2, 9), b = synth_generate(spec, 2, 9), c = synth_generate(spec, 2, 10);
  REQUIRE(a.size() == 6);
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].seq.size() == b[i].seq.size());
    for (std::size_t t = 0; t < a[i].seq.size(); ++t) CHECK(a[i].seq.frames[t].pixels.values == b[i].seq.frames[t].pixels.values);
    a[i].seq.validate();
  }
  CHECK(a[0].seq.frames[1].pixels.values != c[0].seq.frames[1].pixels.values);
}

TEST_CASE("synthetic spec validation") {
  SynthSpec spec = default_synth_spec();
  spec.width = 0;
  CHECK_THROWS_AS(synth_generate(spec, 1, 0), Error);
  spec = default_synth_spec();
  spec.actions[1] = spec.actions[0];
  spec.actions[1].name = "copy";
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = default_synth_spec();
  spec.actions.resize(1);
  CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("flow recovers the synthetic translation") {
  // Pixel noise adds temporal differences that no motion explains, and the
  // smoothness term pulls the estimate towards zero; at the default sigma of 12
  // the recovered speed is about 0.3 px/frame. The check renders clean frames.
  SynthSpec spec = default_synth_spec();
  spec.noise_sigma = 0.0;
  const auto inst = synth_generate(spec, 1, 5);
  const FrameSequence& seq = inst[0].seq;
  double u = 0.0, v = 0.0;
  int n = 0;
  for (std::size_t t = 1; t < 6; ++t) {
    const FlowField f = horn_schunck(seq.frames[t - 1], seq.frames[t]);
    for (int y = 3; y < spec.height - 3; ++y)
      for (int x = 3; x < spec.width - 3; ++x, ++n) u += f.u(x, y), v += f.v(x, y);
  }
  CHECK(std::hypot(u / n - spec.actions[0].vx, v / n - spec.actions[0].vy) < 0.3);
}

TEST_CASE("one action gives full accuracy") {
  SynthSpec spec = default_synth_spec();
  spec.min_length = spec.max_length = 20;
  spec.width = spec.height = 24;
  const auto inst = synth_generate(spec, 2, 1);
  ExtractionConfig ex;
  ExperimentConfig cfg;
  cfg.fit.n_components = 2;
  cfg.window_frames = 9;
  const std::vector<TrainingVideo> train{{extract_video_features(inst[0].seq, ex), "translate", ""}};
  const std::vector<TestVideo> test{{"t", extract_video_features(inst[1].seq, ex), track(std::vector<Label>(20, 1), {"translate"})}};
  const FoldResult r = run_experiment(train, test, {"translate"}, cfg);
  CHECK(r.report.frame_accuracy == 100.0);
  CHECK_THROWS_AS(run_experiment(train, test, {"translate", "other"}, cfg), Error);
}

TEST_CASE("two stitched actions split near the true boundary") {
  const SynthSpec spec = default_synth_spec();
  const auto inst = synth_generate(spec, 3, 21);  // translate 0-2, oscillate 3-5, dilate 6-8
  ExtractionConfig ex;
  ExperimentConfig cfg;
  cfg.fit.n_components = 4;
  std::vector<TrainingVideo> train;
  for (std::size_t i : {0u, 1u, 3u, 4u, 6u, 7u})
    train.push_back({extract_video_features(inst[i].seq, ex), spec.actions[static_cast<std::size_t>(inst[i].action - 1)].name, ""});
  std::vector<std::string> names;
  for (const auto& r : spec.actions) names.push_back(r.name);
  const ModelBank bank = train_bank(train, names, cfg);
  const std::vector<StitchSource> src{{&inst[2].seq, 1, 1}, {&inst[5].seq, 2, 2}};
  const StitchedVideo v = stitch_sequences(src, names, 0, 2);
  const Segmentation s = segment_video(extract_video_features(v.seq, ex), bank, 13, static_cast<int>(v.seq.size()));
  REQUIRE(s.segments.size() == 2);
  const int boundary = static_cast<int>(src[v.picks[0]].seq->size());
  CHECK(std::abs(s.segments[1].start_frame - boundary) <= 25);
  CHECK(s.segments[0].action == src[v.picks[0]].action);
  CHECK(s.segments[1].action == src[v.picks[1]].action);
}

TEST_CASE("fold summary uses the population deviation") {
  std::vector<FoldResult> folds(3);
  const double acc[3] = {90.0, 80.0, 85.0};
  for (int i = 0; i < 3; ++i) folds[static_cast<std::size_t>(i)].report.frame_accuracy = acc[i];
  const ExperimentSummary s = summarize(folds);
  CHECK(s.mean == doctest::Approx(85.0));
  CHECK(s.stddev == doctest::Approx(std::sqrt(50.0 / 3.0)).epsilon(1e-12));
}

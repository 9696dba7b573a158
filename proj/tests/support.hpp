// Helpers and independent oracles shared by the unit tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "actionseg/eval.hpp"
#include "actionseg/features.hpp"
#include "actionseg/gmm.hpp"
#include "actionseg/segmenter.hpp"

namespace testing {

namespace fs = std::filesystem;
using namespace actionseg;

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("actionseg-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

template <typename F>
Plane make_plane(int w, int h, F f) {
  Plane p(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) p(x, y) = f(x, y);
  return p;
}

inline Plane random_plane(int w, int h, std::mt19937_64& gen, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  return make_plane(w, h, [&](int, int) { return d(gen); });
}

inline Frame make_frame(int index, Plane p) {
  Frame f;
  f.index = index;
  f.pixels = std::move(p);
  return f;
}

// Central difference inside, one-sided on the outermost column/row.
inline double naive_dx(const Plane& f, int x, int y) {
  if (x == 0) return f(1, y) - f(0, y);
  if (x == f.width - 1) return f(x, y) - f(x - 1, y);
  return 0.5 * (f(x + 1, y) - f(x - 1, y));
}

inline double naive_dy(const Plane& f, int x, int y) {
  if (y == 0) return f(x, 1) - f(x, 0);
  if (y == f.height - 1) return f(x, y) - f(x, y - 1);
  return 0.5 * (f(x, y + 1) - f(x, y - 1));
}

/// Max |a - b| over the pixels at least `margin` away from every border.
inline double interior_max_diff(const Plane& a, const Plane& b, int margin = 1) {
  double worst = 0.0;
  for (int y = margin; y < a.height - margin; ++y)
    for (int x = margin; x < a.width - margin; ++x) worst = std::max(worst, std::abs(a(x, y) - b(x, y)));
  return worst;
}

inline double interior_max_dev(const Plane& a, double value, int margin = 1) {
  double worst = 0.0;
  for (int y = margin; y < a.height - margin; ++y)
    for (int x = margin; x < a.width - margin; ++x) worst = std::max(worst, std::abs(a(x, y) - value));
  return worst;
}

/// log p(x) of a diagonal mixture by direct summation in long double, with
/// the largest exponent factored out so far-tail points stay representable.
inline long double oracle_log_pdf(const GmmModel& m, std::span<const double> x) {
  const std::size_t d = m.dim();
  std::vector<long double> expo(m.n_components());
  std::vector<long double> coef(m.n_components());
  for (std::size_t g = 0; g < m.n_components(); ++g) {
    long double quad = 0.0L, logdet = 0.0L;
    for (std::size_t j = 0; j < d; ++j) {
      const long double diff = static_cast<long double>(x[j]) - m.mean(g)[j];
      const long double var = m.variance(g)[j];
      quad += diff * diff / var;
      logdet += std::log(var);
    }
    expo[g] = -0.5L * quad;
    coef[g] = static_cast<long double>(m.weights()[g]) *
              std::exp(-0.5L * (static_cast<long double>(d) * std::log(2.0L * 3.14159265358979323846264338327950288L) + logdet));
  }
  const long double top = *std::max_element(expo.begin(), expo.end());
  long double sum = 0.0L;
  for (std::size_t g = 0; g < expo.size(); ++g) sum += coef[g] * std::exp(expo[g] - top);
  return top + std::log(sum);
}

inline GmmModel random_model(std::mt19937_64& gen, std::size_t dim, std::size_t n_components) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(n_components), mu(n_components * dim), var(n_components * dim);
  double total = 0.0;
  for (double& x : w) total += (x = 0.1 + u(gen));
  for (double& x : w) x /= total;
  for (double& x : mu) x = -5.0 + 10.0 * u(gen);
  for (double& x : var) x = 0.05 + 3.0 * u(gen);
  return GmmModel(dim, std::move(w), std::move(mu), std::move(var));
}

/// Straight-line reading of the merge rule on a per-frame array: rescan runs,
/// pull each short run into whatever currently precedes it (the first run
/// into its successor) and repeat while anything changes.
inline std::vector<Label> oracle_merge(std::vector<Label> labels, int min_len) {
  for (;;) {
    std::vector<std::pair<int, int>> runs;  // [begin, end)
    for (int i = 0; i < static_cast<int>(labels.size());) {
      int j = i;
      while (j < static_cast<int>(labels.size()) && labels[j] == labels[i]) ++j;
      runs.push_back({i, j});
      i = j;
    }
    if (runs.size() <= 1) return labels;
    bool changed = false;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      const auto [b, e] = runs[r];
      if (e - b >= min_len) continue;
      const Label target = r == 0 ? labels[static_cast<std::size_t>(e)] : labels[static_cast<std::size_t>(b - 1)];
      if (labels[static_cast<std::size_t>(b)] != target) changed = true;
      for (int t = b; t < e; ++t) labels[static_cast<std::size_t>(t)] = target;
    }
    if (!changed) return labels;
  }
}

/// Mixture log density written out term by term (no shared code with GmmModel).
inline double plain_log_pdf(const GmmModel& m, const FeatureVector& x) {
  std::vector<double> terms;
  for (std::size_t g = 0; g < m.n_components(); ++g) {
    double t = std::log(m.weights()[g]);
    for (std::size_t j = 0; j < m.dim(); ++j) {
      const double var = m.variance(g)[j];
      const double diff = x[j] - m.mean(g)[j];
      t += -0.5 * std::log(2.0 * M_PI * var) - 0.5 * diff * diff / var;
    }
    terms.push_back(t);
  }
  const double top = *std::max_element(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += std::exp(t - top);
  return top + std::log(s);
}

/// Brute-force pipeline: windows, per-action max over models of the mean log
/// density, per-frame sums, argmax, nearest fill, merge, spread to n_frames.
inline std::vector<Label> oracle_segment(const std::vector<FrameFeatures>& feats, const ModelBank& bank, int L,
                                         int n_frames) {
  const int T = static_cast<int>(feats.size());
  const std::size_t A = bank.action_count();
  std::vector<std::vector<double>> sums(static_cast<std::size_t>(T), std::vector<double>(A, 0.0));
  std::vector<int> cover(static_cast<std::size_t>(T), 0);
  for (int s = 0; s + L <= T; ++s) {
    std::vector<const FeatureVector*> pooled;
    for (int t = s; t < s + L; ++t)
      for (const auto& v : feats[static_cast<std::size_t>(t)].vectors) pooled.push_back(&v);
    if (pooled.empty()) continue;
    std::vector<double> score(A, -std::numeric_limits<double>::infinity());
    for (std::size_t m = 0; m < bank.models().size(); ++m) {
      double total = 0.0;
      for (const FeatureVector* v : pooled) total += plain_log_pdf(bank.models()[m], *v);
      const double avg = total / static_cast<double>(pooled.size());
      const std::size_t a = static_cast<std::size_t>(bank.action_of(m) - 1);
      score[a] = std::max(score[a], avg);
    }
    bool finite = true;
    for (double v : score) finite = finite && std::isfinite(v);
    if (!finite) continue;
    for (int t = s; t < s + L; ++t) {
      for (std::size_t a = 0; a < A; ++a) sums[static_cast<std::size_t>(t)][a] += score[a];
      ++cover[static_cast<std::size_t>(t)];
    }
  }
  std::vector<Label> lab(static_cast<std::size_t>(T), 0);
  for (int t = 0; t < T; ++t) {
    if (cover[static_cast<std::size_t>(t)] == 0) continue;
    std::size_t best = 0;
    for (std::size_t a = 1; a < A; ++a)
      if (sums[static_cast<std::size_t>(t)][a] > sums[static_cast<std::size_t>(t)][best]) best = a;
    lab[static_cast<std::size_t>(t)] = static_cast<Label>(best + 1);
  }
  std::vector<Label> filled = lab;
  for (int t = 0; t < T; ++t) {
    if (cover[static_cast<std::size_t>(t)] != 0) continue;
    for (int d = 1; d < T; ++d) {
      if (t - d >= 0 && cover[static_cast<std::size_t>(t - d)] != 0) {
        filled[static_cast<std::size_t>(t)] = lab[static_cast<std::size_t>(t - d)];
        break;
      }
      if (t + d < T && cover[static_cast<std::size_t>(t + d)] != 0) {
        filled[static_cast<std::size_t>(t)] = lab[static_cast<std::size_t>(t + d)];
        break;
      }
    }
  }
  const std::vector<Label> merged = oracle_merge(filled, L);
  std::vector<Label> out(static_cast<std::size_t>(n_frames));
  for (int f = 0; f < n_frames; ++f) {
    int best = 0;
    for (int t = 1; t < T; ++t)
      if (std::abs(feats[static_cast<std::size_t>(t)].frame_index - f) <
          std::abs(feats[static_cast<std::size_t>(best)].frame_index - f))
        best = t;
    out[static_cast<std::size_t>(f)] = merged[static_cast<std::size_t>(best)];
  }
  return out;
}

/// Random tiny segmentation problem for the pipeline oracle.
struct TinyProblem {
  std::vector<FrameFeatures> features;
  ModelBank bank;
  int window = 1;
  int n_frames = 0;
};

inline TinyProblem random_tiny_problem(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> pickT(1, 20), pickA(1, 3), pickK(0, 4), pickS(1, 2);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  TinyProblem p;
  const int T = pickT(gen);
  p.window = std::uniform_int_distribution<int>(1, std::min(5, T))(gen);
  const int A = pickA(gen);
  const int stride = pickS(gen);
  std::vector<std::string> names;
  for (int a = 0; a < A; ++a) names.push_back("a" + std::to_string(a));
  p.bank = ModelBank(names);
  for (int a = 0; a < A; ++a) {
    const int scenarios = std::uniform_int_distribution<int>(1, 2)(gen);
    for (int s = 0; s < scenarios; ++s) {
      std::vector<double> mu(kFeatureDim), var(kFeatureDim);
      for (double& x : mu) x = u(gen);
      for (double& x : var) x = 0.5 + std::abs(u(gen));
      GmmModel m(kFeatureDim, {1.0}, mu, var);
      m.action = names[static_cast<std::size_t>(a)];
      p.bank.add(std::move(m), a + 1);
    }
  }
  for (int t = 0; t < T; ++t) {
    FrameFeatures f;
    f.frame_index = 2 + t * stride;
    const int k = pickK(gen) == 0 ? 0 : pickK(gen);
    for (int i = 0; i < k; ++i) {
      FeatureVector v;
      for (double& x : v) x = u(gen);
      f.vectors.push_back(v);
    }
    p.features.push_back(std::move(f));
  }
  // Guarantee at least one vector somewhere so some window scores.
  if (std::all_of(p.features.begin(), p.features.end(), [](const FrameFeatures& f) { return f.empty(); })) {
    FeatureVector v;
    for (double& x : v) x = u(gen);
    p.features[static_cast<std::size_t>(T / 2)].vectors.push_back(v);
  }
  p.n_frames = p.features.back().frame_index + 1 + std::uniform_int_distribution<int>(0, 2)(gen);
  return p;
}

}  // namespace testing

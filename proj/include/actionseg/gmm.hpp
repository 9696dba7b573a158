#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "actionseg/common.hpp"

namespace actionseg {

/// Non-owning view of row-major data, one sample per row.
struct MatrixView {
  std::span<const double> values;
  std::size_t dim = 0;

  std::size_t rows() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const double> row(std::size_t i) const { return values.subspan(i * dim, dim); }
};

struct FitConfig {
  int n_components = 4;
  int max_iters = 200;
  double rel_tol = 1e-5;
  double var_floor = 1e-3;
  std::uint64_t seed = 0;
  int kmeans_iters = 20;

  void validate() const;
};

/// Provenance stored alongside a trained model.
struct TrainMeta {
  double tau = 0.0;
  int stride = 0;
  FitConfig fit;
  std::size_t data_count = 0;
};

/// Diagonal-covariance Gaussian mixture. Parameters are immutable after
/// construction; the constructor validates them and caches per-component
/// normalisers for scoring.
class GmmModel {
 public:
  GmmModel() = default;
  /// means and variances are n_components x dim, row-major. Throws Error(data)
  /// if weights are negative or do not sum to 1 within 1e-9, if any variance
  /// is not positive, or if any value is non-finite.
  GmmModel(std::size_t dim, std::vector<double> weights, std::vector<double> means, std::vector<double> variances);

  std::size_t dim() const { return dim_; }
  std::size_t n_components() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& means() const { return means_; }
  const std::vector<double>& variances() const { return variances_; }
  std::span<const double> mean(std::size_t g) const { return {means_.data() + g * dim_, dim_}; }
  std::span<const double> variance(std::size_t g) const { return {variances_.data() + g * dim_, dim_}; }

  /// log p(x | model), evaluated with log-sum-exp over components.
  double log_pdf(std::span<const double> x) const;

  std::string action;
  std::string scenario;
  std::optional<TrainMeta> meta;

 private:
  std::size_t dim_ = 0;
  std::vector<double> weights_;
  std::vector<double> means_;
  std::vector<double> variances_;
  std::vector<double> log_weight_norm_;  // log w_g - 0.5 * (D log 2pi + sum log var)
  std::vector<double> inv_variances_;
};

struct KmeansResult {
  std::vector<double> means;      // n_components x dim
  std::vector<double> variances;  // n_components x dim, floored
  std::vector<double> weights;    // cluster fractions
  std::vector<int> assignments;   // one cluster per row
};

/// k-means++ seeding followed by Lloyd iterations. Every cluster ends with at
/// least one member: empty clusters take the point farthest from its centroid.
KmeansResult kmeans_init(MatrixView data, int n_components, std::uint64_t seed, int kmeans_iters,
                         double var_floor = 1e-3);

struct FitResult {
  GmmModel model;
  std::vector<double> mean_log_likelihood;  // one entry per E-step
  int iterations = 0;
  bool converged = false;
};

/// Called after every M-step with the 0-based iteration and updated model.
using EmObserver = std::function<void(int, const GmmModel&)>;

/// Batch EM from kmeans_init. Stops after max_iters M-steps or once the mean
/// log-likelihood improves by less than rel_tol relative to the previous one.
FitResult em_fit(MatrixView data, const FitConfig& cfg, const EmObserver& observer = {});

/// (1/N) sum_i log p(x_i | model). Throws Error(usage) on empty input.
double avg_log_likelihood(const GmmModel& model, MatrixView vectors);

inline constexpr int kModelFormatVersion = 1;

std::string model_to_json(const GmmModel& model);
GmmModel model_from_json(const std::string& text);
void save_model(const GmmModel& model, const std::filesystem::path& path);
GmmModel load_model(const std::filesystem::path& path);

}  // namespace actionseg

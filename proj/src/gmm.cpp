#include "actionseg/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>

#include "actionseg/rng.hpp"
#include "hash.hpp"
#include "json.hpp"

namespace actionseg {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

void check_data(MatrixView data, std::size_t min_rows, const char* what) {
  if (data.dim == 0) throw_usage(std::string(what) + ": dimension must be >= 1");
  if (data.values.size() % data.dim != 0) throw_usage(std::string(what) + ": data size is not a multiple of dim");
  if (data.rows() < min_rows)
    throw_data(std::string(what) + ": fewer data points (" + std::to_string(data.rows()) + ") than components (" +
               std::to_string(min_rows) + ")");
  for (double v : data.values)
    if (!std::isfinite(v)) throw_data(std::string(what) + ": non-finite value in data");
}

}  // namespace

void FitConfig::validate() const {
  if (n_components < 1) throw_usage("n_components must be >= 1");
  if (max_iters < 1) throw_usage("max_iters must be >= 1");
  if (!(rel_tol > 0.0)) throw_usage("rel_tol must be > 0");
  if (!(var_floor > 0.0)) throw_usage("var_floor must be > 0");
  if (kmeans_iters < 1) throw_usage("kmeans_iters must be >= 1");
}

GmmModel::GmmModel(std::size_t dim, std::vector<double> weights, std::vector<double> means,
                   std::vector<double> variances)
    : dim_(dim), weights_(std::move(weights)), means_(std::move(means)), variances_(std::move(variances)) {
  const std::size_t k = weights_.size();
  if (dim_ == 0 || k == 0) throw_data("model must have dim >= 1 and at least one component");
  if (means_.size() != k * dim_ || variances_.size() != k * dim_)
    throw_data("model parameter arrays do not match n_components x dim");
  double total = 0.0;
  for (double w : weights_) {
    if (!std::isfinite(w) || w < 0.0) throw_data("model weights must be finite and >= 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw_data("model weights must sum to 1");
  for (double m : means_)
    if (!std::isfinite(m)) throw_data("model means must be finite");
  for (double v : variances_)
    if (!std::isfinite(v) || !(v > 0.0)) throw_data("model variances must be finite and > 0");

  log_weight_norm_.resize(k);
  inv_variances_.resize(variances_.size());
  for (std::size_t g = 0; g < k; ++g) {
    double log_det = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) {
      log_det += std::log(variances_[g * dim_ + d]);
      inv_variances_[g * dim_ + d] = 1.0 / variances_[g * dim_ + d];
    }
    log_weight_norm_[g] =
        weights_[g] > 0.0 ? std::log(weights_[g]) - 0.5 * (static_cast<double>(dim_) * kLog2Pi + log_det) : kNegInf;
  }
}

double GmmModel::log_pdf(std::span<const double> x) const {
  if (x.size() != dim_) throw_usage("log_pdf: dimension mismatch");
  double best = kNegInf;
  // Reused per thread so scoring does not allocate.
  thread_local std::vector<double> terms;
  terms.resize(weights_.size());
  for (std::size_t g = 0; g < weights_.size(); ++g) {
    if (log_weight_norm_[g] == kNegInf) {
      terms[g] = kNegInf;
      continue;
    }
    const double* mu = means_.data() + g * dim_;
    const double* iv = inv_variances_.data() + g * dim_;
    double maha = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) {
      const double diff = x[d] - mu[d];
      maha += diff * diff * iv[d];
    }
    terms[g] = log_weight_norm_[g] - 0.5 * maha;
    best = std::max(best, terms[g]);
  }
  if (best == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double t : terms)
    if (t != kNegInf) sum += std::exp(t - best);
  return best + std::log(sum);
}

KmeansResult kmeans_init(MatrixView data, int n_components, std::uint64_t seed, int kmeans_iters, double var_floor) {
  if (n_components < 1) throw_usage("kmeans_init: n_components must be >= 1");
  if (kmeans_iters < 1) throw_usage("kmeans_init: kmeans_iters must be >= 1");
  check_data(data, static_cast<std::size_t>(n_components), "kmeans_init");
  const std::size_t n = data.rows();
  const std::size_t dim = data.dim;
  const std::size_t k = static_cast<std::size_t>(n_components);
  Rng rng(seed);

  // k-means++ seeding.
  std::vector<double> centers;
  centers.reserve(k * dim);
  auto center = [&](std::size_t c) { return std::span<const double>(centers.data() + c * dim, dim); };
  auto add_center = [&](std::size_t row) {
    const auto r = data.row(row);
    centers.insert(centers.end(), r.begin(), r.end());
  };
  add_center(static_cast<std::size_t>(rng.below(n)));
  std::vector<double> min_d2(n);
  for (std::size_t i = 0; i < n; ++i) min_d2[i] = squared_distance(data.row(i), center(0));
  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(min_d2.begin(), min_d2.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += min_d2[i];
        if (acc > target && min_d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.below(n));
    }
    add_center(pick);
    for (std::size_t i = 0; i < n; ++i) min_d2[i] = std::min(min_d2[i], squared_distance(data.row(i), center(c)));
  }

  std::vector<int> assign(n, -1);
  std::vector<double> dist(n, 0.0);
  std::vector<std::size_t> counts(k, 0);

  auto assign_all = [&]() {
    bool changed = false;
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(data.row(i), center(0));
      for (std::size_t c = 1; c < k; ++c) {
        const double d = squared_distance(data.row(i), center(c));
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      if (assign[i] != best) changed = true;
      assign[i] = best;
      dist[i] = best_d;
      ++counts[static_cast<std::size_t>(best)];
    }
    return changed;
  };

  // Moves the point farthest from its centroid (among clusters that can spare
  // one) into each empty cluster.
  auto fill_empty = [&]() {
    bool moved = false;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[static_cast<std::size_t>(assign[i])] < 2) continue;
        if (far == n || dist[i] > dist[far]) far = i;
      }
      if (far == n) break;
      --counts[static_cast<std::size_t>(assign[far])];
      assign[far] = static_cast<int>(c);
      dist[far] = 0.0;
      counts[c] = 1;
      std::copy_n(data.row(far).begin(), dim, centers.begin() + static_cast<std::ptrdiff_t>(c * dim));
      moved = true;
    }
    return moved;
  };

  auto update_centers = [&]() {
    std::fill(centers.begin(), centers.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = data.row(i);
      double* c = centers.data() + static_cast<std::size_t>(assign[i]) * dim;
      for (std::size_t d = 0; d < dim; ++d) c[d] += r[d];
    }
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t d = 0; d < dim; ++d) centers[c * dim + d] /= static_cast<double>(counts[c]);
  };

  for (int it = 0; it < kmeans_iters; ++it) {
    const bool changed = assign_all();
    const bool moved = fill_empty();
    update_centers();
    if (!changed && !moved && it > 0) break;
  }
  // Final consistent assignment for the returned centroids.
  assign_all();
  if (fill_empty()) update_centers();

  KmeansResult out;
  out.means = centers;
  out.variances.assign(k * dim, 0.0);
  out.weights.resize(k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = data.row(i);
    const std::size_t c = static_cast<std::size_t>(assign[i]);
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = r[d] - centers[c * dim + d];
      out.variances[c * dim + d] += diff * diff;
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    out.weights[c] = static_cast<double>(counts[c]) / static_cast<double>(n);
    for (std::size_t d = 0; d < dim; ++d)
      out.variances[c * dim + d] = std::max(out.variances[c * dim + d] / static_cast<double>(counts[c]), var_floor);
  }
  out.assignments = std::move(assign);
  return out;
}

FitResult em_fit(MatrixView data, const FitConfig& cfg, const EmObserver& observer) {
  cfg.validate();
  check_data(data, static_cast<std::size_t>(cfg.n_components), "em_fit");
  const std::size_t n = data.rows();
  const std::size_t dim = data.dim;
  const std::size_t k = static_cast<std::size_t>(cfg.n_components);

  KmeansResult init = kmeans_init(data, cfg.n_components, cfg.seed, cfg.kmeans_iters, cfg.var_floor);
  FitResult result;
  result.model = GmmModel(dim, init.weights, init.means, init.variances);

  // Sufficient statistics are accumulated around the data centroid to limit
  // cancellation in E[x^2] - E[x]^2.
  std::vector<double> shift(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < dim; ++d) shift[d] += data.values[i * dim + d];
  for (double& s : shift) s /= static_cast<double>(n);

  std::vector<double> resp_mass(k), sum_x(k * dim), sum_xx(k * dim), log_terms(k), centred(dim);
  std::vector<double> weights(k), means(k * dim), variances(k * dim);
  double prev_ll = kNegInf;

  for (int it = 0; it < cfg.max_iters; ++it) {
    const GmmModel& model = result.model;
    std::fill(resp_mass.begin(), resp_mass.end(), 0.0);
    std::fill(sum_x.begin(), sum_x.end(), 0.0);
    std::fill(sum_xx.begin(), sum_xx.end(), 0.0);
    double ll_sum = 0.0;
    std::vector<double> comp_const(k, kNegInf), inv_var(k * dim);
    for (std::size_t g = 0; g < k; ++g) {
      double log_det = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        log_det += std::log(model.variance(g)[d]);
        inv_var[g * dim + d] = 1.0 / model.variance(g)[d];
      }
      if (model.weights()[g] > 0.0)
        comp_const[g] = std::log(model.weights()[g]) - 0.5 * (static_cast<double>(dim) * kLog2Pi + log_det);
    }

    // E-step.
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = data.row(i);
      double best = kNegInf;
      for (std::size_t g = 0; g < k; ++g) {
        if (comp_const[g] == kNegInf) {
          log_terms[g] = kNegInf;
          continue;
        }
        const auto mu = model.mean(g);
        const double* iv = inv_var.data() + g * dim;
        double acc = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
          const double diff = x[d] - mu[d];
          acc += diff * diff * iv[d];
        }
        log_terms[g] = comp_const[g] - 0.5 * acc;
        best = std::max(best, log_terms[g]);
      }
      double denom = 0.0;
      for (std::size_t g = 0; g < k; ++g)
        if (log_terms[g] != kNegInf) denom += std::exp(log_terms[g] - best);
      const double lse = best + std::log(denom);
      ll_sum += lse;
      for (std::size_t d = 0; d < dim; ++d) centred[d] = x[d] - shift[d];
      for (std::size_t g = 0; g < k; ++g) {
        if (log_terms[g] == kNegInf) continue;
        const double r = std::exp(log_terms[g] - lse);
        if (r == 0.0) continue;
        resp_mass[g] += r;
        double* sx = sum_x.data() + g * dim;
        double* sxx = sum_xx.data() + g * dim;
        for (std::size_t d = 0; d < dim; ++d) {
          sx[d] += r * centred[d];
          sxx[d] += r * centred[d] * centred[d];
        }
      }
    }
    const double ll = ll_sum / static_cast<double>(n);
    result.mean_log_likelihood.push_back(ll);
    if (it > 0 && ll - prev_ll < cfg.rel_tol * std::abs(prev_ll)) {
      result.converged = true;
      break;
    }
    prev_ll = ll;

    // M-step.
    const double starved = 1e-8 * static_cast<double>(n);
    const double total_mass = std::accumulate(resp_mass.begin(), resp_mass.end(), 0.0);
    std::vector<std::size_t> starved_components;
    for (std::size_t g = 0; g < k; ++g) {
      if (resp_mass[g] < starved) {
        starved_components.push_back(g);
        continue;
      }
      weights[g] = resp_mass[g] / total_mass;
      for (std::size_t d = 0; d < dim; ++d) {
        const double m = sum_x[g * dim + d] / resp_mass[g];
        means[g * dim + d] = m + shift[d];
        const double v = sum_xx[g * dim + d] / resp_mass[g] - m * m;
        variances[g * dim + d] = std::max(v, cfg.var_floor);
      }
    }
    // A starved component splits the widest healthy one along its widest axis.
    for (std::size_t g : starved_components) {
      std::size_t widest = k;
      double widest_spread = -1.0;
      for (std::size_t h = 0; h < k; ++h) {
        if (std::find(starved_components.begin(), starved_components.end(), h) != starved_components.end()) continue;
        const double spread = std::accumulate(variances.begin() + static_cast<std::ptrdiff_t>(h * dim),
                                              variances.begin() + static_cast<std::ptrdiff_t>((h + 1) * dim), 0.0);
        if (spread > widest_spread) {
          widest_spread = spread;
          widest = h;
        }
      }
      if (widest == k) throw Error(ErrorKind::internal, "em_fit: every component starved");
      const auto axis_it = std::max_element(variances.begin() + static_cast<std::ptrdiff_t>(widest * dim),
                                            variances.begin() + static_cast<std::ptrdiff_t>((widest + 1) * dim));
      const std::size_t axis = static_cast<std::size_t>(axis_it - (variances.begin() + static_cast<std::ptrdiff_t>(widest * dim)));
      const double offset = std::sqrt(*axis_it);
      std::copy_n(means.begin() + static_cast<std::ptrdiff_t>(widest * dim), dim,
                  means.begin() + static_cast<std::ptrdiff_t>(g * dim));
      std::copy_n(variances.begin() + static_cast<std::ptrdiff_t>(widest * dim), dim,
                  variances.begin() + static_cast<std::ptrdiff_t>(g * dim));
      means[widest * dim + axis] -= offset;
      means[g * dim + axis] += offset;
      weights[widest] *= 0.5;
      weights[g] = weights[widest];
    }
    const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (double& w : weights) w /= wsum;

    GmmModel next(dim, weights, means, variances);
    next.action = result.model.action;
    next.scenario = result.model.scenario;
    result.model = std::move(next);
    result.iterations = it + 1;
    if (observer) observer(it, result.model);
  }
  return result;
}

double avg_log_likelihood(const GmmModel& model, MatrixView vectors) {
  if (vectors.dim != model.dim()) throw_usage("avg_log_likelihood: dimension mismatch");
  const std::size_t n = vectors.rows();
  if (n == 0) throw_usage("avg_log_likelihood: empty vector list");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += model.log_pdf(vectors.row(i));
  return sum / static_cast<double>(n);
}

namespace {

using nlohmann::json;

json fit_config_json(const FitConfig& c) {
  return {{"n_components", c.n_components}, {"max_iters", c.max_iters}, {"rel_tol", c.rel_tol},
          {"var_floor", c.var_floor},       {"seed", c.seed},           {"kmeans_iters", c.kmeans_iters}};
}

FitConfig fit_config_from(const json& j) {
  FitConfig c;
  c.n_components = j.at("n_components").get<int>();
  c.max_iters = j.at("max_iters").get<int>();
  c.rel_tol = j.at("rel_tol").get<double>();
  c.var_floor = j.at("var_floor").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.kmeans_iters = j.at("kmeans_iters").get<int>();
  return c;
}

json payload_json(const GmmModel& m) {
  const std::size_t k = m.n_components();
  const std::size_t dim = m.dim();
  json means = json::array(), variances = json::array();
  for (std::size_t g = 0; g < k; ++g) {
    means.push_back(std::vector<double>(m.mean(g).begin(), m.mean(g).end()));
    variances.push_back(std::vector<double>(m.variance(g).begin(), m.variance(g).end()));
  }
  json j = {{"format_version", kModelFormatVersion},
            {"dim", dim},
            {"n_components", k},
            {"action", m.action},
            {"scenario", m.scenario},
            {"weights", m.weights()},
            {"means", means},
            {"variances", variances}};
  if (m.meta) {
    j["train_meta"] = {{"tau", m.meta->tau},
                       {"stride", m.meta->stride},
                       {"fit_config", fit_config_json(m.meta->fit)},
                       {"data_count", m.meta->data_count}};
  }
  return j;
}

std::string checksum_hex(const json& payload) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(payload.dump())));
  return buf;
}

}  // namespace

std::string model_to_json(const GmmModel& model) {
  json j = payload_json(model);
  j["checksum"] = checksum_hex(j);
  return j.dump(1) + "\n";
}

GmmModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw_data(std::string("malformed model file: ") + e.what());
  }
  try {
    if (!j.is_object()) throw_data("malformed model file: expected an object");
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion)
      throw_data("model format version " + std::to_string(version) + " is not supported (expected " +
                 std::to_string(kModelFormatVersion) + ")");
    if (j.contains("checksum")) {
      const std::string stored = j.at("checksum").get<std::string>();
      json payload = j;
      payload.erase("checksum");
      if (checksum_hex(payload) != stored) throw_data("model checksum mismatch");
    }
    const auto dim = j.at("dim").get<std::size_t>();
    const auto k = j.at("n_components").get<std::size_t>();
    auto weights = j.at("weights").get<std::vector<double>>();
    const auto means_rows = j.at("means").get<std::vector<std::vector<double>>>();
    const auto var_rows = j.at("variances").get<std::vector<std::vector<double>>>();
    if (weights.size() != k || means_rows.size() != k || var_rows.size() != k)
      throw_data("model arrays do not match n_components");
    std::vector<double> means, variances;
    for (std::size_t g = 0; g < k; ++g) {
      if (means_rows[g].size() != dim || var_rows[g].size() != dim) throw_data("model rows do not match dim");
      means.insert(means.end(), means_rows[g].begin(), means_rows[g].end());
      variances.insert(variances.end(), var_rows[g].begin(), var_rows[g].end());
    }
    GmmModel model(dim, std::move(weights), std::move(means), std::move(variances));
    model.action = j.value("action", std::string());
    model.scenario = j.value("scenario", std::string());
    if (j.contains("train_meta")) {
      const json& tm = j.at("train_meta");
      TrainMeta meta;
      meta.tau = tm.at("tau").get<double>();
      meta.stride = tm.at("stride").get<int>();
      meta.fit = fit_config_from(tm.at("fit_config"));
      meta.data_count = tm.at("data_count").get<std::size_t>();
      for (double v : model.variances())
        if (v < meta.fit.var_floor) throw_data("model variance below its recorded floor");
      model.meta = meta;
    }
    return model;
  } catch (const json::exception& e) {
    throw_data(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const GmmModel& model, const std::filesystem::path& path) {
  const std::string text = model_to_json(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write " + path.string());
  out << text;
  if (!out) throw_data("write failed: " + path.string());
}

GmmModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open model " + path.string());
  return model_from_json(std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()));
}

}  // namespace actionseg

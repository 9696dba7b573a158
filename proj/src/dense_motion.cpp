#include "actionseg/dense_motion.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

namespace actionseg {

namespace {

void require_min_size(const Plane& f, const char* what) {
  if (f.width < 3 || f.height < 3) throw_usage(std::string(what) + ": field too small (need at least 3x3)");
}

void require_same_shape(const Plane& a, const Plane& b, const char* what) {
  if (!a.same_shape(b)) throw_usage(std::string(what) + ": dimension mismatch");
}

}  // namespace

Plane d_dx(const Plane& f) {
  require_min_size(f, "d_dx");
  Plane out(f.width, f.height);
  const int w = f.width;
  for (int y = 0; y < f.height; ++y) {
    out(0, y) = f(1, y) - f(0, y);
    for (int x = 1; x < w - 1; ++x) out(x, y) = 0.5 * (f(x + 1, y) - f(x - 1, y));
    out(w - 1, y) = f(w - 1, y) - f(w - 2, y);
  }
  return out;
}

Plane d_dy(const Plane& f) {
  require_min_size(f, "d_dy");
  Plane out(f.width, f.height);
  const int h = f.height;
  for (int x = 0; x < f.width; ++x) {
    out(x, 0) = f(x, 1) - f(x, 0);
    out(x, h - 1) = f(x, h - 1) - f(x, h - 2);
  }
  for (int y = 1; y < h - 1; ++y)
    for (int x = 0; x < f.width; ++x) out(x, y) = 0.5 * (f(x, y + 1) - f(x, y - 1));
  return out;
}

Plane d2_dx2(const Plane& f) {
  require_min_size(f, "d2_dx2");
  Plane out(f.width, f.height);
  const int w = f.width;
  for (int y = 0; y < f.height; ++y) {
    for (int x = 1; x < w - 1; ++x) out(x, y) = f(x + 1, y) - 2.0 * f(x, y) + f(x - 1, y);
    out(0, y) = out(1, y);
    out(w - 1, y) = out(w - 2, y);
  }
  return out;
}

Plane d2_dy2(const Plane& f) {
  require_min_size(f, "d2_dy2");
  Plane out(f.width, f.height);
  const int h = f.height;
  for (int y = 1; y < h - 1; ++y)
    for (int x = 0; x < f.width; ++x) out(x, y) = f(x, y + 1) - 2.0 * f(x, y) + f(x, y - 1);
  for (int x = 0; x < f.width; ++x) {
    out(x, 0) = out(x, 1);
    out(x, h - 1) = out(x, h - 2);
  }
  return out;
}

FlowField horn_schunck(const Frame& prev, const Frame& next, const HornSchunckParams& params) {
  return horn_schunck(prev.pixels, next.pixels, params);
}

FlowField horn_schunck(const Plane& e0, const Plane& e1, const HornSchunckParams& params) {
  require_same_shape(e0, e1, "horn_schunck");
  if (e0.width < 1 || e0.height < 1) throw_usage("horn_schunck: empty frame");
  if (!(params.alpha > 0.0)) throw_usage("horn_schunck: alpha must be > 0");
  if (params.iters < 1) throw_usage("horn_schunck: iters must be >= 1");

  const int w = e0.width;
  const int h = e0.height;
  auto xr = [w](int x) { return std::min(x + 1, w - 1); };
  auto yr = [h](int y) { return std::min(y + 1, h - 1); };

  Plane ex(w, h), ey(w, h), et(w, h);
  for (int y = 0; y < h; ++y) {
    const int y1 = yr(y);
    for (int x = 0; x < w; ++x) {
      const int x1 = xr(x);
      ex(x, y) = 0.25 * (e0(x1, y) - e0(x, y) + e0(x1, y1) - e0(x, y1) + e1(x1, y) - e1(x, y) + e1(x1, y1) - e1(x, y1));
      ey(x, y) = 0.25 * (e0(x, y1) - e0(x, y) + e0(x1, y1) - e0(x1, y) + e1(x, y1) - e1(x, y) + e1(x1, y1) - e1(x1, y));
      et(x, y) = 0.25 * (e1(x, y) - e0(x, y) + e1(x, y1) - e0(x, y1) + e1(x1, y) - e0(x1, y) + e1(x1, y1) - e0(x1, y1));
    }
  }

  const double alpha2 = params.alpha * params.alpha;
  Plane denom(w, h);
  for (std::size_t i = 0; i < denom.size(); ++i)
    denom.values[i] = alpha2 + ex.values[i] * ex.values[i] + ey.values[i] * ey.values[i];

  FlowField flow{Plane(w, h), Plane(w, h)};
  Plane u_next(w, h), v_next(w, h);
  auto at = [w, h](const Plane& p, int x, int y) {
    return p(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
  };
  // 1/6 weight on edge neighbours, 1/12 on corners.
  auto local_mean = [&at](const Plane& p, int x, int y) {
    const double edges = at(p, x - 1, y) + at(p, x + 1, y) + at(p, x, y - 1) + at(p, x, y + 1);
    const double corners = at(p, x - 1, y - 1) + at(p, x + 1, y - 1) + at(p, x - 1, y + 1) + at(p, x + 1, y + 1);
    return edges / 6.0 + corners / 12.0;
  };

  for (int it = 0; it < params.iters; ++it) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double ubar = local_mean(flow.u, x, y);
        const double vbar = local_mean(flow.v, x, y);
        const double gx = ex(x, y);
        const double gy = ey(x, y);
        const double t = (gx * ubar + gy * vbar + et(x, y)) / denom(x, y);
        u_next(x, y) = ubar - gx * t;
        v_next(x, y) = vbar - gy * t;
      }
    }
    std::swap(flow.u, u_next);
    std::swap(flow.v, v_next);
  }
  return flow;
}

FlowTimeDerivative flow_time_derivative(const FlowField& flow_prev, const FlowField& flow_curr) {
  require_same_shape(flow_prev.u, flow_curr.u, "flow_time_derivative");
  require_same_shape(flow_prev.v, flow_curr.v, "flow_time_derivative");
  FlowTimeDerivative d{Plane(flow_curr.width(), flow_curr.height()), Plane(flow_curr.width(), flow_curr.height())};
  for (std::size_t i = 0; i < d.du_dt.size(); ++i) {
    d.du_dt.values[i] = flow_curr.u.values[i] - flow_prev.u.values[i];
    d.dv_dt.values[i] = flow_curr.v.values[i] - flow_prev.v.values[i];
  }
  return d;
}

ScalarField flow_divergence(const FlowField& flow) {
  require_same_shape(flow.u, flow.v, "flow_divergence");
  Plane out = d_dx(flow.u);
  const Plane vy = d_dy(flow.v);
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += vy.values[i];
  return out;
}

ScalarField flow_vorticity(const FlowField& flow) {
  require_same_shape(flow.u, flow.v, "flow_vorticity");
  Plane out = d_dx(flow.v);
  const Plane uy = d_dy(flow.u);
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] -= uy.values[i];
  return out;
}

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

void put_f32(std::string& buf, double value) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  for (int b = 0; b < 4; ++b) buf.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

float get_f32(const std::string& buf, std::size_t offset) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[offset + b])) << (8 * b);
  return std::bit_cast<float>(bits);
}

}  // namespace

void write_flow_dump(const FlowField& flow, const std::filesystem::path& stem) {
  require_same_shape(flow.u, flow.v, "write_flow_dump");
  std::string raw;
  raw.reserve(8 * flow.u.size());
  for (double x : flow.u.values) put_f32(raw, x);
  for (double x : flow.v.values) put_f32(raw, x);
  std::ofstream out(with_suffix(stem, ".raw"), std::ios::binary);
  if (!out) throw_data("cannot write " + with_suffix(stem, ".raw").string());
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));

  nlohmann::json meta = {{"width", flow.width()}, {"height", flow.height()}, {"dtype", "float32le"},
                         {"order", {"u", "v"}}, {"raw", with_suffix(stem, ".raw").filename().string()}};
  std::ofstream side(with_suffix(stem, ".json"));
  if (!side) throw_data("cannot write " + with_suffix(stem, ".json").string());
  side << meta.dump(2) << '\n';
}

FlowField read_flow_dump(const std::filesystem::path& stem) {
  std::ifstream side(with_suffix(stem, ".json"));
  if (!side) throw_data("missing flow sidecar " + with_suffix(stem, ".json").string());
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw_data(std::string("malformed flow sidecar: ") + e.what());
  }
  const int w = meta.value("width", 0);
  const int h = meta.value("height", 0);
  if (w < 1 || h < 1) throw_data("malformed flow sidecar: bad dimensions");
  std::ifstream in(with_suffix(stem, ".raw"), std::ios::binary);
  const std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (raw.size() != 8 * n) throw_data("flow dump size does not match sidecar");
  FlowField flow{Plane(w, h), Plane(w, h)};
  for (std::size_t i = 0; i < n; ++i) {
    flow.u.values[i] = get_f32(raw, 4 * i);
    flow.v.values[i] = get_f32(raw, 4 * (n + i));
  }
  return flow;
}

}  // namespace actionseg

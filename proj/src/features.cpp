#include "actionseg/features.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

namespace actionseg {

void ExtractionConfig::validate() const {
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw_usage("tau must be a finite value >= 0");
  if (frame_stride < 1) throw_usage("frame_stride must be >= 1");
  if (!(flow.alpha > 0.0)) throw_usage("flow alpha must be > 0");
  if (flow.iters < 1) throw_usage("flow iters must be >= 1");
}

GradientFields spatial_gradients(const Frame& frame) {
  const Plane& img = frame.pixels;
  if (img.width < 3 || img.height < 3) throw_usage("spatial_gradients: frame too small (need at least 3x3)");
  GradientFields g{d_dx(img), d_dy(img), d2_dx2(img), d2_dy2(img), Plane(img.width, img.height),
                   Plane(img.width, img.height)};
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double ax = std::abs(g.jx.values[i]);
    const double ay = std::abs(g.jy.values[i]);
    g.magnitude.values[i] = std::sqrt(ax * ax + ay * ay);
    // atan2 yields pi/2 for jx == 0 < |jy| and 0 when both vanish.
    g.orientation.values[i] = std::atan2(ay, ax);
  }
  return g;
}

FrameFeatures extract_frame_features(const Frame& frame, const GradientFields& grads, const FlowField& flow,
                                     const FlowTimeDerivative& flow_dt, const ScalarField& divergence,
                                     const ScalarField& vorticity, double tau) {
  const Plane& img = frame.pixels;
  for (const Plane* p : {&grads.jx, &grads.jy, &grads.jxx, &grads.jyy, &grads.magnitude, &grads.orientation, &flow.u,
                         &flow.v, &flow_dt.du_dt, &flow_dt.dv_dt, &divergence, &vorticity}) {
    if (!p->same_shape(img)) throw_usage("extract_frame_features: dimension mismatch");
  }
  FrameFeatures out;
  out.frame_index = frame.index;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
      if (!(grads.magnitude.values[i] > tau)) continue;
      out.vectors.push_back(FeatureVector{
          static_cast<double>(x), static_cast<double>(y), std::abs(grads.jx.values[i]), std::abs(grads.jy.values[i]),
          std::abs(grads.jyy.values[i]), std::abs(grads.jxx.values[i]), grads.magnitude.values[i],
          grads.orientation.values[i], flow.u.values[i], flow.v.values[i], flow_dt.du_dt.values[i],
          flow_dt.dv_dt.values[i], divergence.values[i], vorticity.values[i]});
    }
  }
  return out;
}

std::vector<int> retained_frame_indices(int n_frames, int frame_stride) {
  if (frame_stride < 1) throw_usage("frame_stride must be >= 1");
  std::vector<int> out;
  for (int t = 2; t < n_frames; t += frame_stride) out.push_back(t);
  return out;
}

std::vector<FrameFeatures> extract_video_features(const FrameSequence& seq, const ExtractionConfig& cfg) {
  cfg.validate();
  if (seq.size() < 3) throw_data("sequence too short for feature extraction (need at least 3 frames)");
  seq.validate();

  // Flows are computed lazily; with stride 1 or 2 every pair ends up needed.
  std::map<int, FlowField> flows;
  auto flow_at = [&](int t) -> const FlowField& {
    auto it = flows.find(t);
    if (it == flows.end())
      it = flows.emplace(t, horn_schunck(seq.frames[static_cast<std::size_t>(t - 1)],
                                         seq.frames[static_cast<std::size_t>(t)], cfg.flow)).first;
    return it->second;
  };

  std::vector<FrameFeatures> out;
  for (int t : retained_frame_indices(static_cast<int>(seq.size()), cfg.frame_stride)) {
    const FlowField& prev = flow_at(t - 1);
    const FlowField& curr = flow_at(t);
    const Frame& frame = seq.frames[static_cast<std::size_t>(t)];
    out.push_back(extract_frame_features(frame, spatial_gradients(frame), curr, flow_time_derivative(prev, curr),
                                         flow_divergence(curr), flow_vorticity(curr), cfg.tau));
    // Flows older than t - 1 are never needed again.
    flows.erase(flows.begin(), flows.lower_bound(t));
  }
  return out;
}

namespace {

void put_u64(std::string& buf, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) buf.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

void put_f64(std::string& buf, double v) { put_u64(buf, std::bit_cast<std::uint64_t>(v)); }

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t u64() {
    if (pos_ + 8 > bytes_.size()) throw_data("truncated feature dump");
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    pos_ += 8;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }
  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_features(const std::vector<FrameFeatures>& features, const std::filesystem::path& path) {
  std::string buf;
  put_u64(buf, features.size());
  put_u64(buf, kFeatureDim);
  for (const FrameFeatures& f : features) {
    put_u64(buf, static_cast<std::uint64_t>(f.frame_index));
    put_u64(buf, f.vectors.size());
    for (const FeatureVector& v : f.vectors)
      for (double x : v) put_f64(buf, x);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw_data("write failed: " + path.string());
}

std::vector<FrameFeatures> load_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ByteReader r(bytes);
  const std::uint64_t n_frames = r.u64();
  if (r.u64() != kFeatureDim) throw_data("feature dump has unexpected dimension");
  std::vector<FrameFeatures> out;
  for (std::uint64_t i = 0; i < n_frames; ++i) {
    FrameFeatures f;
    f.frame_index = static_cast<int>(r.u64());
    const std::uint64_t k = r.u64();
    if (k > r.remaining() / (8 * kFeatureDim)) throw_data("truncated feature dump");
    f.vectors.resize(k);
    for (FeatureVector& v : f.vectors)
      for (double& x : v) x = r.f64();
    out.push_back(std::move(f));
  }
  if (!r.at_end()) throw_data("trailing bytes in feature dump");
  return out;
}

}  // namespace actionseg

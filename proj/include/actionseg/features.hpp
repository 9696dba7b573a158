#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "actionseg/dense_motion.hpp"
#include "actionseg/frame_io.hpp"

namespace actionseg {

inline constexpr int kFeatureDim = 14;

/// [x, y, |Jx|, |Jy|, |Jyy|, |Jxx|, magnitude, orientation, u, v, du/dt, dv/dt, divergence, vorticity]
using FeatureVector = std::array<double, kFeatureDim>;

enum FeatureSlot : int {
  kX = 0, kY, kAbsJx, kAbsJy, kAbsJyy, kAbsJxx, kMagnitude, kOrientation,
  kU, kV, kDuDt, kDvDt, kDivergence, kVorticity
};

struct GradientFields {
  ScalarField jx, jy, jxx, jyy;
  ScalarField magnitude;    // sqrt(jx^2 + jy^2)
  ScalarField orientation;  // atan(|jy| / |jx|) in [0, pi/2]
};

/// Selected descriptors of one frame; the count varies with frame content.
struct FrameFeatures {
  int frame_index = 0;
  std::vector<FeatureVector> vectors;

  std::size_t size() const { return vectors.size(); }
  bool empty() const { return vectors.empty(); }
};

struct ExtractionConfig {
  double tau = 40.0;
  int frame_stride = 2;
  HornSchunckParams flow;

  void validate() const;
};

GradientFields spatial_gradients(const Frame& frame);

/// Pixels with magnitude > tau, raster order.
FrameFeatures extract_frame_features(const Frame& frame, const GradientFields& grads, const FlowField& flow,
                                     const FlowTimeDerivative& flow_dt, const ScalarField& divergence,
                                     const ScalarField& vorticity, double tau);

/// Flow on every consecutive pair (flow t is frames t-1 -> t); descriptors for
/// frames 2, 2 + stride, 2 + 2 * stride, ...
std::vector<FrameFeatures> extract_video_features(const FrameSequence& seq, const ExtractionConfig& cfg);

/// Indices of the frames extract_video_features keeps for a sequence of n frames.
std::vector<int> retained_frame_indices(int n_frames, int frame_stride);

// Feature dump: u64 n_frames, u64 dim, then per frame u64 frame_index, u64 k
// and k * dim float64 values, all little-endian.
void save_features(const std::vector<FrameFeatures>& features, const std::filesystem::path& path);
std::vector<FrameFeatures> load_features(const std::filesystem::path& path);

}  // namespace actionseg

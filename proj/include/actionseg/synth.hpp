#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "actionseg/frame_io.hpp"

namespace actionseg {

enum class MotionPattern { translate, oscillate, dilate };

MotionPattern parse_motion_pattern(const std::string& name);
std::string to_string(MotionPattern p);

// With w(t) = sin(2 pi t / period + phi) - sin(phi), phi random per instance:
// translate: displacement (vx, vy) * t
// oscillate: displacement (vx, vy) * w(t)
// dilate:    zoom about the frame centre by 1 + amplitude * w(t)
struct MotionRecipe {
  std::string name;
  MotionPattern pattern = MotionPattern::translate;
  double vx = 0.0;
  double vy = 0.0;
  double amplitude = 0.0;
  double period = 12.0;
  std::uint64_t texture_seed = 1;  // recipes sharing a texture seed share a scene
  int group = 1;  // stitching group, 1 or 2
};

struct SynthSpec {
  std::vector<MotionRecipe> actions;
  int width = 64;
  int height = 64;
  int min_length = 60;  // frames per instance, inclusive range
  int max_length = 90;
  double noise_sigma = 12.0;
  double fps = 25.0;

  void validate() const;
};

/// Three actions (translate, oscillate, dilate) on 64x64 frames.
SynthSpec default_synth_spec();

struct SynthInstance {
  FrameSequence seq;
  Label action = 0;  // 1-based into SynthSpec::actions
  int group = 1;
};

/// n_per_action instances per recipe, action-major order. Every instance
/// warps its recipe's periodic scene texture (drawn from seed and
/// texture_seed) from a random phase, adds Gaussian noise, then clamps to [0, 255] and
/// rounds. Pure function of (spec, seed).
std::vector<SynthInstance> synth_generate(const SynthSpec& spec, int n_per_action, std::uint64_t seed);

/// Smooth periodic texture used by synth_generate (exposed for tests).
Plane synth_texture(int width, int height, std::uint64_t seed);

}  // namespace actionseg

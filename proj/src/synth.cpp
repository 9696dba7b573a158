#include "actionseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "actionseg/rng.hpp"

namespace actionseg {

MotionPattern parse_motion_pattern(const std::string& name) {
  if (name == "translate") return MotionPattern::translate;
  if (name == "oscillate") return MotionPattern::oscillate;
  if (name == "dilate") return MotionPattern::dilate;
  throw_usage("unknown motion pattern '" + name + "' (expected translate, oscillate or dilate)");
}

std::string to_string(MotionPattern p) {
  switch (p) {
    case MotionPattern::translate: return "translate";
    case MotionPattern::oscillate: return "oscillate";
    case MotionPattern::dilate: return "dilate";
  }
  return "translate";
}

namespace {

bool same_motion(const MotionRecipe& a, const MotionRecipe& b) {
  if (a.pattern != b.pattern) return false;
  switch (a.pattern) {
    case MotionPattern::translate: return a.vx == b.vx && a.vy == b.vy;
    case MotionPattern::oscillate: return a.vx == b.vx && a.vy == b.vy && a.period == b.period;
    case MotionPattern::dilate: return a.amplitude == b.amplitude && a.period == b.period;
  }
  return true;
}

}  // namespace

void SynthSpec::validate() const {
  if (width < 3 || height < 3) throw_usage("synthetic frames must be at least 3x3");
  if (min_length < 3 || max_length < min_length) throw_usage("synthetic instance length range is invalid");
  if (!(noise_sigma >= 0.0)) throw_usage("noise_sigma must be >= 0");
  if (!(fps > 0.0)) throw_usage("fps must be > 0");
  if (actions.size() < 2) throw_usage("synthetic spec needs at least 2 actions");
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const MotionRecipe& r = actions[i];
    if (r.name.empty()) throw_usage("synthetic action needs a name");
    if (r.group != 1 && r.group != 2) throw_usage("synthetic action group must be 1 or 2");
    if (r.pattern != MotionPattern::translate && !(r.period > 0.0)) throw_usage("motion period must be > 0");
    if (r.pattern == MotionPattern::dilate && !(std::abs(r.amplitude) < 1.0))
      throw_usage("dilate amplitude must lie in (-1, 1)");
    for (std::size_t j = 0; j < i; ++j) {
      if (actions[j].name == r.name) throw_usage("duplicate synthetic action name '" + r.name + "'");
      if (same_motion(actions[j], r))
        throw_usage("synthetic actions '" + actions[j].name + "' and '" + r.name + "' share motion statistics");
    }
  }
}

SynthSpec default_synth_spec() {
  SynthSpec spec;
  spec.actions = {
      {"translate", MotionPattern::translate, 1.0, 0.0, 0.0, 12.0, 1, 1},
      {"oscillate", MotionPattern::oscillate, 0.0, 2.0, 0.0, 12.0, 1, 2},
      {"dilate", MotionPattern::dilate, 0.0, 0.0, 0.03, 12.0, 1, 2},
  };
  return spec;
}

namespace {

double wrap(double v, double period) {
  const double r = std::fmod(v, period);
  return r < 0.0 ? r + period : r;
}

// Bilinear lookup into a periodic texture.
double sample_periodic(const Plane& tex, double x, double y) {
  x = wrap(x, tex.width);
  y = wrap(y, tex.height);
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  const int x1 = (x0 + 1) % tex.width;
  const int y1 = (y0 + 1) % tex.height;
  const int xa = x0 % tex.width;
  const int ya = y0 % tex.height;
  const double top = (1.0 - fx) * tex(xa, ya) + fx * tex(x1, ya);
  const double bottom = (1.0 - fx) * tex(xa, y1) + fx * tex(x1, y1);
  return (1.0 - fy) * top + fy * bottom;
}

Plane blur_periodic(const Plane& src, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    norm += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (double& k : kernel) k /= norm;
  const int w = src.width;
  const int h = src.height;
  Plane tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += kernel[static_cast<std::size_t>(i + radius)] * src(((x + i) % w + w) % w, y);
      tmp(x, y) = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += kernel[static_cast<std::size_t>(i + radius)] * tmp(x, ((y + i) % h + h) % h);
      out(x, y) = s;
    }
  return out;
}

}  // namespace

Plane synth_texture(int width, int height, std::uint64_t seed) {
  if (width < 1 || height < 1) throw_usage("synth_texture: zero-size frame");
  Rng rng(seed);
  Plane tex(width, height, rng.uniform(70.0, 110.0));
  // Hard-edged ellipses, wrapped around the borders, then a light blur.
  const int n_blobs = std::max(4, width * height / 180);
  for (int b = 0; b < n_blobs; ++b) {
    const double cx = rng.uniform(0.0, width);
    const double cy = rng.uniform(0.0, height);
    const double rx = rng.uniform(2.0, 6.0);
    const double ry = rng.uniform(2.0, 6.0);
    const double level = rng.uniform() < 0.5 ? rng.uniform(0.0, 40.0) : rng.uniform(170.0, 255.0);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double dx = std::abs(x - cx);
        double dy = std::abs(y - cy);
        dx = std::min(dx, width - dx);
        dy = std::min(dy, height - dy);
        if ((dx * dx) / (rx * rx) + (dy * dy) / (ry * ry) <= 1.0) tex(x, y) = level;
      }
    }
  }
  return blur_periodic(tex, 1.0);
}

std::vector<SynthInstance> synth_generate(const SynthSpec& spec, int n_per_action, std::uint64_t seed) {
  spec.validate();
  if (n_per_action < 0) throw_usage("instances per action must be >= 0");
  std::vector<SynthInstance> out;
  const double cx = 0.5 * (spec.width - 1);
  const double cy = 0.5 * (spec.height - 1);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  // Instances of recipes with one texture seed share the scene, so a stitched
  // cut between them changes the motion but not the content.
  std::map<std::uint64_t, Plane> scenes;

  for (std::size_t a = 0; a < spec.actions.size(); ++a) {
    const MotionRecipe& recipe = spec.actions[a];
    for (int i = 0; i < n_per_action; ++i) {
      const std::uint64_t inst_seed = mix_seed(mix_seed(seed, a), static_cast<std::uint64_t>(i));
      Rng rng(inst_seed);
      const int length =
          spec.min_length + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_length - spec.min_length + 1)));
      const double phase = rng.uniform(0.0, two_pi);
      auto scene = scenes.find(recipe.texture_seed);
      if (scene == scenes.end())
        scene = scenes.emplace(recipe.texture_seed, synth_texture(spec.width, spec.height, mix_seed(seed, recipe.texture_seed))).first;
      const Plane& tex = scene->second;

      SynthInstance inst;
      inst.action = static_cast<Label>(a) + 1;
      inst.group = recipe.group;
      inst.seq.fps = spec.fps;
      for (int t = 0; t < length; ++t) {
        Frame f;
        f.index = t;
        f.pixels = Plane(spec.width, spec.height);
        const double wave = std::sin(two_pi * t / recipe.period + phase) - std::sin(phase);
        for (int y = 0; y < spec.height; ++y) {
          for (int x = 0; x < spec.width; ++x) {
            double sx = x;
            double sy = y;
            switch (recipe.pattern) {
              case MotionPattern::translate:
                sx = x - recipe.vx * t;
                sy = y - recipe.vy * t;
                break;
              case MotionPattern::oscillate:
                sx = x - recipe.vx * wave;
                sy = y - recipe.vy * wave;
                break;
              case MotionPattern::dilate: {
                const double scale = 1.0 + recipe.amplitude * wave;
                sx = cx + (x - cx) / scale;
                sy = cy + (y - cy) / scale;
                break;
              }
            }
            double v = sample_periodic(tex, sx, sy);
            if (spec.noise_sigma > 0.0) v += spec.noise_sigma * rng.normal();
            f.pixels(x, y) = std::round(std::clamp(v, 0.0, 255.0));
          }
        }
        inst.seq.frames.push_back(std::move(f));
      }
      out.push_back(std::move(inst));
    }
  }
  return out;
}

}  // namespace actionseg

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace actionseg {

/// Error classes map one-to-one onto the C API status codes and CLI exit codes.
enum class ErrorKind { usage = 1, data = 2, internal = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_usage(const std::string& msg) { throw Error(ErrorKind::usage, msg); }
[[noreturn]] inline void throw_data(const std::string& msg) { throw Error(ErrorKind::data, msg); }

/// Row-major grid of reals. Used for images, flow components and derived fields.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  double& operator()(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  double operator()(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }

  bool same_shape(const Plane& other) const { return width == other.width && height == other.height; }
  std::size_t size() const { return values.size(); }
};

using ScalarField = Plane;

/// Action ordinal in [1, A]; 0 is never a valid label.
using Label = int;

}  // namespace actionseg

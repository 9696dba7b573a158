#pragma once

#include <filesystem>

#include "actionseg/common.hpp"
#include "actionseg/frame_io.hpp"

namespace actionseg {

/// Per-pixel flow in pixels/frame.
struct FlowField {
  Plane u;
  Plane v;

  int width() const { return u.width; }
  int height() const { return u.height; }
};

struct HornSchunckParams {
  double alpha = 15.0;
  int iters = 200;
};

// Finite-difference stencils shared by the flow and gradient code. Interior
// pixels use central differences; first derivatives use one-sided differences
// on the border row/column, second derivatives copy the adjacent interior
// value. All require width, height >= 3.
Plane d_dx(const Plane& f);
Plane d_dy(const Plane& f);
Plane d2_dx2(const Plane& f);
Plane d2_dy2(const Plane& f);

/// Classic Horn-Schunck with Jacobi updates, starting from zero flow.
/// Derivatives are estimated on the 2x2x2 cube spanning both frames, borders replicated.
FlowField horn_schunck(const Frame& prev, const Frame& next, const HornSchunckParams& params = {});
FlowField horn_schunck(const Plane& prev, const Plane& next, const HornSchunckParams& params = {});

struct FlowTimeDerivative {
  ScalarField du_dt;
  ScalarField dv_dt;
};

/// Forward difference flow_curr - flow_prev.
FlowTimeDerivative flow_time_derivative(const FlowField& flow_prev, const FlowField& flow_curr);

/// du/dx + dv/dy
ScalarField flow_divergence(const FlowField& flow);
/// dv/dx - du/dy
ScalarField flow_vorticity(const FlowField& flow);

/// Debug dump: `<stem>.raw` holds u then v as little-endian float32 rows,
/// `<stem>.json` records width, height and plane order.
void write_flow_dump(const FlowField& flow, const std::filesystem::path& stem);
FlowField read_flow_dump(const std::filesystem::path& stem);

}  // namespace actionseg

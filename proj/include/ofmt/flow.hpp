#pragma once

#include <cstdint>
#include <vector>

#include "ofmt/image.hpp"

namespace ofmt {

// Per-pixel displacement in pixels/frame; invalid pixels carry u = v = 0.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> u, v;
  std::vector<uint8_t> valid;

  FlowField() = default;
  FlowField(int w, int h)
      : width(w),
        height(h),
        u(static_cast<size_t>(w) * h, 0.f),
        v(static_cast<size_t>(w) * h, 0.f),
        valid(static_cast<size_t>(w) * h, 0) {}
};

struct LkParams {
  int window = 5;        // odd window side for the least-squares neighbourhood
  double sigma = 1.0;    // pre-smoothing before gradients
  int levels = 3;        // pyramid depth, 1 = no pyramid
  double tau_eig = 1e-2; // reliability threshold on the structure tensor's smaller eigenvalue
  int iterations = 3;    // warp-and-refine passes per level
};

GrayFrame gaussian_smooth(const GrayFrame& frame, double sigma);

// Normalized 1D Gaussian taps, radius ceil(3*sigma). Exposed for tests.
std::vector<double> gaussian_kernel(double sigma);

FlowField lucas_kanade_flow(const GrayFrame& prev, const GrayFrame& next,
                            const LkParams& params = {});

struct MagnitudeMap {
  int width = 0;
  int height = 0;
  std::vector<float> magnitude;
  std::vector<uint8_t> foreground;  // valid and magnitude > eps_s
};

MagnitudeMap flow_magnitude(const FlowField& flow, double eps_s);

}  // namespace ofmt

#include "ofmt/flow.hpp"
#include <algorithm>

#include <cmath>

namespace ofmt {

namespace {

int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

double cubic_weight(double t, double s) {
  // Catmull-Rom taps for fractional offset t: s selects the tap index -1..2
  const double t2 = t * t, t3 = t2 * t;
  if (s == -1) return 0.5 * (-t3 + 2 * t2 - t);
  if (s == 0) return 0.5 * (3 * t3 - 5 * t2 + 2);
  if (s == 1) return 0.5 * (-3 * t3 + 4 * t2 + t);
  return 0.5 * (t3 - t2);
}

// Catmull-Rom bicubic sampling with reflected borders.
double sample_bicubic(const GrayFrame& f, double x, double y) {
  x = std::max(0.0, std::min(static_cast<double>(f.width - 1), x));
  y = std::max(0.0, std::min(static_cast<double>(f.height - 1), y));
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const double tx = x - x0, ty = y - y0;
  double acc = 0;
  for (int j = -1; j <= 2; ++j) {
    const int yy = reflect(y0 + j, f.height);
    double row = 0;
    for (int i = -1; i <= 2; ++i)
      row += cubic_weight(tx, i) * f.at(reflect(x0 + i, f.width), yy);
    acc += cubic_weight(ty, j) * row;
  }
  return acc;
}

GrayFrame downsample2(const GrayFrame& f) {
  GrayFrame s = gaussian_smooth(f, 1.0);
  const int w = (f.width + 1) / 2, h = (f.height + 1) / 2;
  GrayFrame out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(x, y) = s.at(std::min(2 * x, f.width - 1), std::min(2 * y, f.height - 1));
  return out;
}

// One pyramid level of per-pixel iterative least squares. The window
// gradient matrix is fixed per pixel; each iteration re-samples only that
// pixel's warped residuals, so neighbours cannot contaminate each other.
void lk_level(const GrayFrame& prev, const GrayFrame& next, std::vector<double>& u,
              std::vector<double>& v, int window, int iterations) {
  const int W = prev.width, H = prev.height, r = window / 2;
  std::vector<double> ix(static_cast<size_t>(W) * H), iy(ix.size());
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const size_t i = static_cast<size_t>(y) * W + x;
      ix[i] = 0.5 * (prev.at(reflect(x + 1, W), y) - prev.at(reflect(x - 1, W), y));
      iy[i] = 0.5 * (prev.at(x, reflect(y + 1, H)) - prev.at(x, reflect(y - 1, H)));
    }
  const double npix = static_cast<double>(window) * window;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const size_t i = static_cast<size_t>(y) * W + x;
      double sxx = 0, sxy = 0, syy = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const size_t j = static_cast<size_t>(reflect(y + dy, H)) * W + reflect(x + dx, W);
          sxx += ix[j] * ix[j];
          sxy += ix[j] * iy[j];
          syy += iy[j] * iy[j];
        }
      const double det = sxx * syy - sxy * sxy;
      const double tr = sxx + syy;
      const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
      if (0.5 * (tr - disc) / npix < 1e-4) continue;  // rank-deficient window, keep init
      for (int it = 0; it < iterations; ++it) {
        double bx = 0, by = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const int qx = reflect(x + dx, W), qy = reflect(y + dy, H);
            const size_t j = static_cast<size_t>(qy) * W + qx;
            const double res = sample_bicubic(next, qx + u[i], qy + v[i]) - prev.at(qx, qy);
            bx += ix[j] * res;
            by += iy[j] * res;
          }
        // clamp to the linearization range; larger steps are unreliable
        const double du = std::clamp(-(syy * bx - sxy * by) / det, -1.0, 1.0);
        const double dv = std::clamp(-(sxx * by - sxy * bx) / det, -1.0, 1.0);
        u[i] += du;
        v[i] += dv;
        if (du * du + dv * dv < 1e-6) break;
      }
    }
}

std::vector<double> upsample2(const std::vector<double>& f, int w, int h, int nw, int nh) {
  std::vector<double> out(static_cast<size_t>(nw) * nh);
  for (int y = 0; y < nh; ++y)
    for (int x = 0; x < nw; ++x) {
      const double fx = std::min(x / 2.0, static_cast<double>(w - 1));
      const double fy = std::min(y / 2.0, static_cast<double>(h - 1));
      const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
      const int x1 = std::min(w - 1, x0 + 1), y1 = std::min(h - 1, y0 + 1);
      const double wx = fx - x0, wy = fy - y0;
      const double top = f[y0 * w + x0] * (1 - wx) + f[y0 * w + x1] * wx;
      const double bot = f[y1 * w + x0] * (1 - wx) + f[y1 * w + x1] * wx;
      out[static_cast<size_t>(y) * nw + x] = 2.0 * (top * (1 - wy) + bot * wy);
    }
  return out;
}

}  // namespace

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0.0) throw Error("gaussian sigma must be positive");
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double sum = 0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + r];
  }
  for (auto& v : k) v /= sum;
  return k;
}

GrayFrame gaussian_smooth(const GrayFrame& frame, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size()) / 2;
  const int W = frame.width, H = frame.height;
  GrayFrame tmp(W, H), out(W, H);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double acc = 0;
      for (int d = -r; d <= r; ++d) acc += k[d + r] * frame.at(reflect(x + d, W), y);
      tmp.at(x, y) = static_cast<float>(acc);
    }
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double acc = 0;
      for (int d = -r; d <= r; ++d) acc += k[d + r] * tmp.at(x, reflect(y + d, H));
      out.at(x, y) = static_cast<float>(acc);
    }
  return out;
}

FlowField lucas_kanade_flow(const GrayFrame& prev, const GrayFrame& next,
                            const LkParams& params) {
  if (prev.width != next.width || prev.height != next.height)
    throw DimensionError("lucas_kanade_flow: frame sizes differ");
  if (params.window < 3 || params.window % 2 == 0)
    throw Error("lucas_kanade_flow: window must be odd and >= 3");
  if (params.levels < 1) throw Error("lucas_kanade_flow: levels must be >= 1");

  std::vector<GrayFrame> pa{gaussian_smooth(prev, params.sigma)};
  std::vector<GrayFrame> pb{gaussian_smooth(next, params.sigma)};
  for (int l = 1; l < params.levels; ++l) {
    if (pa.back().width < 2 * params.window || pa.back().height < 2 * params.window) break;
    pa.push_back(downsample2(pa.back()));
    pb.push_back(downsample2(pb.back()));
  }

  std::vector<double> u, v;
  for (int l = static_cast<int>(pa.size()) - 1; l >= 0; --l) {
    const GrayFrame& a = pa[l];
    const GrayFrame& b = pb[l];
    if (l == static_cast<int>(pa.size()) - 1) {
      u.assign(static_cast<size_t>(a.width) * a.height, 0.0);
      v.assign(u.size(), 0.0);
    } else {
      u = upsample2(u, pa[l + 1].width, pa[l + 1].height, a.width, a.height);
      v = upsample2(v, pa[l + 1].width, pa[l + 1].height, a.width, a.height);
    }
    lk_level(a, b, u, v, params.window, params.iterations);
  }

  // reliability from the finest-level structure tensor, averaged over the window
  const GrayFrame& a = pa[0];
  const int W = a.width, H = a.height, r = params.window / 2;
  std::vector<double> ix(static_cast<size_t>(W) * H), iy(ix.size());
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const size_t i = static_cast<size_t>(y) * W + x;
      ix[i] = 0.5 * (a.at(reflect(x + 1, W), y) - a.at(reflect(x - 1, W), y));
      iy[i] = 0.5 * (a.at(x, reflect(y + 1, H)) - a.at(x, reflect(y - 1, H)));
    }
  FlowField out(W, H);
  const double npix = static_cast<double>(params.window) * params.window;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double sxx = 0, sxy = 0, syy = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const size_t j = static_cast<size_t>(reflect(y + dy, H)) * W + reflect(x + dx, W);
          sxx += ix[j] * ix[j];
          sxy += ix[j] * iy[j];
          syy += iy[j] * iy[j];
        }
      sxx /= npix;
      sxy /= npix;
      syy /= npix;
      const double tr = sxx + syy;
      const double d = std::sqrt(std::max(0.0, (sxx - syy) * (sxx - syy) + 4.0 * sxy * sxy));
      const double lmin = 0.5 * (tr - d);
      const size_t i = static_cast<size_t>(y) * W + x;
      if (lmin >= params.tau_eig) {
        out.valid[i] = 1;
        out.u[i] = static_cast<float>(u[i]);
        out.v[i] = static_cast<float>(v[i]);
      }
    }
  return out;
}

MagnitudeMap flow_magnitude(const FlowField& flow, double eps_s) {
  if (eps_s < 0.0) throw Error("flow_magnitude: eps_s must be >= 0");
  MagnitudeMap m;
  m.width = flow.width;
  m.height = flow.height;
  m.magnitude.resize(flow.u.size());
  m.foreground.resize(flow.u.size());
  for (size_t i = 0; i < flow.u.size(); ++i) {
    m.magnitude[i] = std::sqrt(flow.u[i] * flow.u[i] + flow.v[i] * flow.v[i]);
    m.foreground[i] = flow.valid[i] && m.magnitude[i] > eps_s;
  }
  return m;
}

}  // namespace ofmt

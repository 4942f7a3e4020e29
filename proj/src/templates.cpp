#include "ofmt/templates.hpp"

#include <algorithm>
#include <cmath>

namespace ofmt {

BinaryMask binarize_diff(const GrayFrame& prev, const GrayFrame& cur, double xi) {
  if (prev.width != cur.width || prev.height != cur.height)
    throw DimensionError("binarize_diff: frame sizes differ");
  if (xi < 0.0) throw Error("binarize_diff: threshold must be >= 0");
  BinaryMask m(cur.width, cur.height);
  for (size_t i = 0; i < m.bits.size(); ++i)
    m.bits[i] = std::abs(cur.pixels[i] - prev.pixels[i]) > xi;
  return m;
}

MotionTemplate compute_mei(const std::vector<BinaryMask>& masks, int tau) {
  if (masks.empty()) throw Error("compute_mei: empty mask sequence");
  if (tau < 1 || tau > static_cast<int>(masks.size()))
    throw Error("compute_mei: tau must be in [1, number of masks]");
  MotionTemplate t;
  t.kind = TemplateKind::MEI;
  t.width = masks[0].width;
  t.height = masks[0].height;
  t.tau = tau;
  t.values.assign(static_cast<size_t>(t.width) * t.height, 0.0);
  for (size_t f = masks.size() - tau; f < masks.size(); ++f) {
    const auto& m = masks[f];
    if (m.width != t.width || m.height != t.height)
      throw DimensionError("compute_mei: mask sizes differ");
    for (size_t i = 0; i < t.values.size(); ++i)
      if (m.bits[i]) t.values[i] = 1.0;
  }
  return t;
}

MotionTemplate compute_mhi(const std::vector<BinaryMask>& masks, double tau, double decay) {
  if (masks.empty()) throw Error("compute_mhi: empty mask sequence");
  if (tau < 1.0) throw Error("compute_mhi: tau must be >= 1");
  if (decay <= 0.0) throw Error("compute_mhi: decay must be > 0");
  MotionTemplate t;
  t.kind = TemplateKind::MHI;
  t.width = masks[0].width;
  t.height = masks[0].height;
  t.tau = tau;
  t.decay = decay;
  t.values.assign(static_cast<size_t>(t.width) * t.height, 0.0);
  for (const auto& m : masks) {
    if (m.width != t.width || m.height != t.height)
      throw DimensionError("compute_mhi: mask sizes differ");
    for (size_t i = 0; i < t.values.size(); ++i)
      t.values[i] = m.bits[i] ? tau : std::max(0.0, t.values[i] - decay);
  }
  return t;
}

OfmtAccumulator::OfmtAccumulator(double lambda_fg, double eps_s, OfmtMode mode)
    : lambda_fg_(lambda_fg), eps_s_(eps_s), mode_(mode) {
  if (eps_s < 0.0) throw Error("ofmt: eps_s must be >= 0");
  acc_.kind = TemplateKind::OFMT;
  acc_.lambda_fg = lambda_fg;
  acc_.eps_s = eps_s;
}

void OfmtAccumulator::add(const FlowField& flow) {
  if (frames_ == 0) {
    acc_.width = flow.width;
    acc_.height = flow.height;
    acc_.values.assign(static_cast<size_t>(flow.width) * flow.height, 0.0);
  } else if (flow.width != acc_.width || flow.height != acc_.height) {
    throw DimensionError("ofmt: flow field sizes differ");
  }
  for (size_t i = 0; i < acc_.values.size(); ++i) {
    if (!flow.valid[i]) continue;  // unreliable pixels never contribute
    const double mag = std::sqrt(static_cast<double>(flow.u[i]) * flow.u[i] +
                                 static_cast<double>(flow.v[i]) * flow.v[i]);
    if (mag <= eps_s_) continue;  // background point, weight 0
    const double contrib = lambda_fg_ * mag;
    if (mode_ == OfmtMode::Additive)
      acc_.values[i] += contrib;
    else
      acc_.values[i] = std::max(acc_.values[i], contrib);
  }
  ++frames_;
}

MotionTemplate OfmtAccumulator::finish() const {
  if (frames_ == 0) throw Error("ofmt: no flow fields accumulated");
  MotionTemplate t = acc_;
  t.tau = static_cast<double>(frames_);
  return t;
}

MotionTemplate accumulate_ofmt(const std::vector<FlowField>& flows, double lambda_fg,
                               double eps_s, OfmtMode mode) {
  if (flows.empty()) throw Error("accumulate_ofmt: empty flow sequence");
  OfmtAccumulator acc(lambda_fg, eps_s, mode);
  for (const auto& f : flows) acc.add(f);
  return acc.finish();
}

Image8 render_template(const MotionTemplate& t) {
  Image8 img;
  img.width = t.width;
  img.height = t.height;
  img.channels = 1;
  img.pixels.assign(t.values.size(), 0);
  double lo = 0, hi = 0;
  if (!t.values.empty()) {
    lo = *std::min_element(t.values.begin(), t.values.end());
    hi = *std::max_element(t.values.begin(), t.values.end());
  }
  if (hi <= lo) return img;  // flat template renders black
  for (size_t i = 0; i < t.values.size(); ++i) {
    const double v = (t.values[i] - lo) / (hi - lo) * 255.0;
    img.pixels[i] = static_cast<uint8_t>(std::floor(v + 0.5));  // round half-up
  }
  return img;
}

}  // namespace ofmt

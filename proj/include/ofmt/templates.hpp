#pragma once

#include <cstdint>
#include <vector>

#include "ofmt/flow.hpp"
#include "ofmt/image.hpp"

namespace ofmt {

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<size_t>(w) * h, 0) {}
};

enum class TemplateKind { MEI, MHI, OFMT };

// How foreground flow accumulates into the OFMT: additive sums the weighted
// magnitudes over frames, union keeps the per-pixel maximum.
enum class OfmtMode { Additive, Union };

struct MotionTemplate {
  TemplateKind kind = TemplateKind::OFMT;
  int width = 0;
  int height = 0;
  std::vector<double> values;
  double tau = 0;
  double decay = 1.0;      // MHI decay step per frame
  double lambda_fg = 5.0;  // OFMT foreground weight
  double eps_s = 1.0;      // flow magnitude threshold
};

// bit set iff |cur - prev| > xi
BinaryMask binarize_diff(const GrayFrame& prev, const GrayFrame& cur, double xi);

// pixel on iff set in any of the last tau masks
MotionTemplate compute_mei(const std::vector<BinaryMask>& masks, int tau);

// H <- tau where active, else max(0, H - decay), frame by frame
MotionTemplate compute_mhi(const std::vector<BinaryMask>& masks, double tau, double decay);

// Streaming accumulator; batch accumulate_ofmt is a thin wrapper over it.
class OfmtAccumulator {
 public:
  OfmtAccumulator(double lambda_fg, double eps_s, OfmtMode mode = OfmtMode::Additive);
  void add(const FlowField& flow);
  MotionTemplate finish() const;  // valid after at least one frame

 private:
  double lambda_fg_;
  double eps_s_;
  OfmtMode mode_;
  MotionTemplate acc_;
  long frames_ = 0;
};

MotionTemplate accumulate_ofmt(const std::vector<FlowField>& flows, double lambda_fg,
                               double eps_s, OfmtMode mode = OfmtMode::Additive);

// min-max normalized 8-bit rendering; an all-zero template stays all-zero
Image8 render_template(const MotionTemplate& t);

}  // namespace ofmt

#pragma once

#include "ofmt/dataset.hpp"
#include "ofmt/flow.hpp"
#include "ofmt/model.hpp"
#include "ofmt/templates.hpp"

namespace ofmt {

// Everything between raw frames and model inputs.
struct PipelineParams {
  LkParams lk;
  double lambda_fg = 5.0;
  double eps_s = 1.0;
  OfmtMode ofmt_mode = OfmtMode::Additive;
  double target_fps = 30.0;  // clips are resampled to this rate before flow
  int ofmt_size = 64;        // rendered OFMT side length for the 2D stream
  int c3d_frames = 16;
  int c3d_size = 32;
  int c3d_channels = 3;  // grayscale frames are replicated across channels
};

// evenly spaced frame indices, first and last always included
std::vector<int> resample_indices(int available, int wanted);

MotionTemplate clip_to_ofmt(const GestureClip& clip, const PipelineParams& params);
Image8 clip_to_ofmt_image(const GestureClip& clip, const PipelineParams& params);

// [1, size, size], values in [0,1]
TensorPtr<float> ofmt_image_to_tensor(const Image8& img, int size);

// [C, c3d_frames, c3d_size, c3d_size], values in [0,1]
TensorPtr<float> clip_to_c3d_tensor(const GestureClip& clip, const PipelineParams& params);

}  // namespace ofmt

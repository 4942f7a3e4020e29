#include "ofmt/pipeline.hpp"

#include <cmath>

namespace ofmt {

std::vector<int> resample_indices(int available, int wanted) {
  if (available < 1 || wanted < 1) throw Error("resample_indices: counts must be >= 1");
  std::vector<int> idx(wanted);
  if (wanted == 1) {
    idx[0] = 0;
    return idx;
  }
  for (int i = 0; i < wanted; ++i)
    idx[i] = static_cast<int>(std::lround(static_cast<double>(i) * (available - 1) / (wanted - 1)));
  return idx;
}

namespace {

// temporal resample to the target frame rate (identity when rates match)
std::vector<GrayFrame> clip_gray_frames(const GestureClip& clip, double target_fps) {
  const auto& frames = clip.frames.frames;
  if (frames.size() < 2) throw DataError("clip has fewer than 2 frames");
  const double src_fps = clip.frames.fps > 0 ? clip.frames.fps : target_fps;
  int wanted = static_cast<int>(frames.size());
  if (src_fps != target_fps)
    wanted = std::max(2, static_cast<int>(std::lround(frames.size() * target_fps / src_fps)));
  std::vector<GrayFrame> out;
  for (int i : resample_indices(static_cast<int>(frames.size()), wanted))
    out.push_back(to_grayscale(frames[i]));
  return out;
}

}  // namespace

MotionTemplate clip_to_ofmt(const GestureClip& clip, const PipelineParams& params) {
  auto frames = clip_gray_frames(clip, params.target_fps);
  OfmtAccumulator acc(params.lambda_fg, params.eps_s, params.ofmt_mode);
  for (size_t f = 1; f < frames.size(); ++f)
    acc.add(lucas_kanade_flow(frames[f - 1], frames[f], params.lk));
  return acc.finish();
}

Image8 clip_to_ofmt_image(const GestureClip& clip, const PipelineParams& params) {
  Image8 img = render_template(clip_to_ofmt(clip, params));
  if (img.width == params.ofmt_size && img.height == params.ofmt_size) return img;
  return gray_to_image8(resize_bilinear(to_grayscale(img), params.ofmt_size, params.ofmt_size));
}

TensorPtr<float> ofmt_image_to_tensor(const Image8& img, int size) {
  GrayFrame g = to_grayscale(img);
  if (g.width != size || g.height != size) g = resize_bilinear(g, size, size);
  auto t = make_tensor<float>({1, size, size});
  for (size_t i = 0; i < g.pixels.size(); ++i) t->data[i] = g.pixels[i] / 255.f;
  return t;
}

TensorPtr<float> clip_to_c3d_tensor(const GestureClip& clip, const PipelineParams& params) {
  auto frames = clip_gray_frames(clip, params.target_fps);
  const auto idx = resample_indices(static_cast<int>(frames.size()), params.c3d_frames);
  const int S = params.c3d_size, C = params.c3d_channels, T = params.c3d_frames;
  auto t = make_tensor<float>({C, T, S, S});
  for (int f = 0; f < T; ++f) {
    GrayFrame g = frames[idx[f]];
    if (g.width != S || g.height != S) g = resize_bilinear(g, S, S);
    for (int c = 0; c < C; ++c) {
      float* dst = t->data.data() + (static_cast<long>(c) * T + f) * S * S;
      for (int i = 0; i < S * S; ++i) dst[i] = g.pixels[i] / 255.f;
    }
  }
  return t;
}

}  // namespace ofmt

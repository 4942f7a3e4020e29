#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ofmt/image.hpp"

namespace ofmt {

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

enum class ClipSource { Synthetic, Directory };

struct GestureClip {
  FrameSequence frames;
  int label = -1;  // digit 0-9
  std::string subject;
  ClipSource source = ClipSource::Synthetic;
};

struct PathPoint {
  double x = 0;
  double y = 0;
};

struct SyntheticDataset {
  std::vector<GestureClip> clips;
  // ground-truth blob center per frame, one entry per clip
  std::vector<std::vector<PathPoint>> paths;
};

// Air-written digits: a bright Gaussian blob traverses a single-stroke
// polyline on a black background, with per-clip start/speed jitter and
// additive pixel noise. Deterministic in `seed`.
SyntheticDataset generate_synthetic(int num_subjects, int reps_per_digit, int frame_size,
                                    int num_frames, uint64_t seed);

// the stroke polyline for one digit, in unit coordinates (x right, y down)
std::vector<PathPoint> digit_stroke(int digit);

// layout: root/<class>/<clip>/frame_%05d.(png|pgm)
std::vector<GestureClip> load_frame_dataset(const std::string& root);
void export_dataset(const std::vector<GestureClip>& clips, const std::string& root);

// Bounds for one sampled affine transform. Values are maxima; sampling is
// uniform in [-bound, bound] (zoom in [1-bound, 1+bound]). Flips are never
// produced.
struct AugmentPolicy {
  double rotation_deg = 20.0;
  double shift = 0.2;  // fraction of width/height
  double shear = 0.2;
  double zoom = 0.2;
};

struct AffineSample {
  double angle_deg = 0, tx = 0, ty = 0, shear = 0, zx = 1, zy = 1;
  // row-major 2x3 output->input map is derived from these in apply_affine
  double m[6] = {1, 0, 0, 0, 1, 0};
};

AffineSample sample_affine(const AugmentPolicy& policy, int width, int height,
                           std::mt19937_64& rng);
// nearest-neighbor resampling with edge-replicate fill
Image8 apply_affine(const Image8& img, const AffineSample& s);
Image8 augment_image(const Image8& img, const AugmentPolicy& policy, std::mt19937_64& rng);

struct DatasetSplit {
  std::vector<std::vector<int>> folds;
  uint64_t seed = 0;
};

// per-class round-robin after a seeded shuffle
DatasetSplit stratified_kfold(const std::vector<int>& labels, int k, uint64_t seed);
std::string split_to_text(const DatasetSplit& split);

}  // namespace ofmt

#include "ofmt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <numbers>

namespace fs = std::filesystem;

namespace ofmt {

namespace {

// splitmix64, used to derive independent per-clip streams from the dataset seed
uint64_t mix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t clip_seed(uint64_t seed, int subject, int digit, int rep) {
  uint64_t h = mix(seed);
  h = mix(h ^ static_cast<uint64_t>(subject + 1));
  h = mix(h ^ (static_cast<uint64_t>(digit + 1) << 8));
  h = mix(h ^ (static_cast<uint64_t>(rep + 1) << 16));
  return h;
}

double polyline_length(const std::vector<PathPoint>& pts) {
  double len = 0;
  for (size_t i = 1; i < pts.size(); ++i)
    len += std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
  return len;
}

PathPoint point_at_arclen(const std::vector<PathPoint>& pts, double s) {
  for (size_t i = 1; i < pts.size(); ++i) {
    const double seg = std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
    if (s <= seg || i + 1 == pts.size()) {
      const double t = seg > 0 ? std::clamp(s / seg, 0.0, 1.0) : 0.0;
      return {pts[i - 1].x + t * (pts[i].x - pts[i - 1].x),
              pts[i - 1].y + t * (pts[i].y - pts[i - 1].y)};
    }
    s -= seg;
  }
  return pts.front();
}

}  // namespace

std::vector<PathPoint> digit_stroke(int digit) {
  switch (digit) {
    case 0: {
      // counter-clockwise loop from the top
      std::vector<PathPoint> p;
      for (int i = 0; i <= 12; ++i) {
        const double a = -std::numbers::pi / 2 - 2 * std::numbers::pi * i / 12.0;
        p.push_back({0.5 + 0.35 * std::cos(a), 0.5 + 0.35 * std::sin(a)});
      }
      return p;
    }
    case 1:
      return {{0.5, 0.15}, {0.5, 0.85}};
    case 2:
      return {{0.2, 0.3}, {0.35, 0.15}, {0.65, 0.15}, {0.8, 0.3}, {0.2, 0.85}, {0.8, 0.85}};
    case 3:
      return {{0.25, 0.15}, {0.7, 0.2}, {0.5, 0.45}, {0.75, 0.65}, {0.6, 0.85}, {0.25, 0.8}};
    case 4:
      return {{0.7, 0.85}, {0.7, 0.15}, {0.2, 0.6}, {0.8, 0.6}};
    case 5:
      return {{0.75, 0.15}, {0.3, 0.15}, {0.28, 0.45}, {0.6, 0.45},
              {0.75, 0.65}, {0.6, 0.85}, {0.25, 0.8}};
    case 6:
      return {{0.7, 0.15}, {0.35, 0.4}, {0.25, 0.65}, {0.45, 0.85},
              {0.7, 0.7},  {0.55, 0.5}, {0.3, 0.55}};
    case 7:
      return {{0.2, 0.15}, {0.8, 0.15}, {0.4, 0.85}};
    case 8:
      return {{0.5, 0.15}, {0.3, 0.28}, {0.5, 0.45}, {0.7, 0.62}, {0.5, 0.85},
              {0.3, 0.62}, {0.5, 0.45}, {0.7, 0.28}, {0.5, 0.15}};
    case 9:
      return {{0.7, 0.35}, {0.5, 0.15}, {0.3, 0.35}, {0.5, 0.5}, {0.7, 0.35}, {0.65, 0.85}};
    default:
      throw ConfigError("digit_stroke: digit must be in [0,9]");
  }
}

SyntheticDataset generate_synthetic(int num_subjects, int reps_per_digit, int frame_size,
                                    int num_frames, uint64_t seed) {
  if (num_subjects < 1 || reps_per_digit < 1 || num_frames < 2)
    throw ConfigError("generate_synthetic: counts must be >= 1 (and >= 2 frames)");
  if (frame_size < 24)
    throw ConfigError("generate_synthetic: frame_size must be >= 24 px for the trajectories");

  const double blob_r = 3.0 * frame_size / 64.0;
  SyntheticDataset out;
  for (int subject = 0; subject < num_subjects; ++subject)
    for (int digit = 0; digit <= 9; ++digit)
      for (int rep = 0; rep < reps_per_digit; ++rep) {
        std::mt19937_64 rng(clip_seed(seed, subject, digit, rep));
        std::uniform_real_distribution<double> u01(0.0, 1.0);

        auto stroke = digit_stroke(digit);
        const double margin = 0.12;
        const double scale = frame_size * (1.0 - 2 * margin);
        const double dx = (u01(rng) * 0.2 - 0.1) * frame_size;  // start offset <= 10%
        const double dy = (u01(rng) * 0.2 - 0.1) * frame_size;
        for (auto& p : stroke) {
          p.x = margin * frame_size + p.x * scale + dx;
          p.y = margin * frame_size + p.y * scale + dy;
        }
        const double speed = 0.8 + 0.4 * u01(rng);  // +/- 20%
        const double total = polyline_length(stroke);

        std::vector<PathPoint> path;
        GestureClip clip;
        clip.label = digit;
        clip.subject = "s" + std::to_string(subject);
        clip.source = ClipSource::Synthetic;
        std::normal_distribution<double> noise(0.0, 2.0);
        for (int f = 0; f < num_frames; ++f) {
          const double frac = speed * f / (num_frames - 1);
          const PathPoint c = point_at_arclen(stroke, std::min(1.0, frac) * total);
          path.push_back(c);

          GrayFrame g(frame_size, frame_size, 0.f);
          const int x0 = std::max(0, static_cast<int>(c.x - 4 * blob_r));
          const int x1 = std::min(frame_size - 1, static_cast<int>(c.x + 4 * blob_r));
          const int y0 = std::max(0, static_cast<int>(c.y - 4 * blob_r));
          const int y1 = std::min(frame_size - 1, static_cast<int>(c.y + 4 * blob_r));
          for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
              const double d2 = (x - c.x) * (x - c.x) + (y - c.y) * (y - c.y);
              g.at(x, y) = static_cast<float>(255.0 * std::exp(-d2 / (2 * blob_r * blob_r)));
            }
          for (auto& v : g.pixels) v += static_cast<float>(noise(rng));
          clip.frames.frames.push_back(gray_to_image8(g));
        }
        clip.frames.fps = 30.0;
        out.clips.push_back(std::move(clip));
        out.paths.push_back(std::move(path));
      }
  return out;
}

void export_dataset(const std::vector<GestureClip>& clips, const std::string& root) {
  std::map<int, int> per_class;
  for (const auto& clip : clips) {
    char name[32];
    std::snprintf(name, sizeof(name), "clip_%04d", per_class[clip.label]++);
    const fs::path dir = fs::path(root) / std::to_string(clip.label) / name;
    fs::create_directories(dir);
    for (size_t f = 0; f < clip.frames.frames.size(); ++f) {
      char fname[32];
      std::snprintf(fname, sizeof(fname), "frame_%05zu.pgm", f);
      write_pgm((dir / fname).string(), clip.frames.frames[f]);
    }
  }
}

std::vector<GestureClip> load_frame_dataset(const std::string& root) {
  if (!fs::exists(root)) throw IoError("dataset root '" + root + "' does not exist");
  std::vector<GestureClip> clips;
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) {
    std::cerr << "warning: dataset root '" << root << "' contains no class directories\n";
    return clips;
  }
  for (const auto& cdir : class_dirs) {
    const std::string cname = cdir.filename().string();
    int label;
    try {
      size_t pos = 0;
      label = std::stoi(cname, &pos);
      if (pos != cname.size() || label < 0) throw std::invalid_argument(cname);
    } catch (const std::exception&) {
      throw DataError("unknown class directory '" + cname + "': not a class index");
    }
    std::vector<fs::path> clip_dirs;
    for (const auto& e : fs::directory_iterator(cdir))
      if (e.is_directory()) clip_dirs.push_back(e.path());
    std::sort(clip_dirs.begin(), clip_dirs.end());
    for (const auto& dir : clip_dirs) {
      std::map<int, fs::path> frames;
      for (const auto& e : fs::directory_iterator(dir)) {
        const std::string fn = e.path().filename().string();
        if (fn.rfind("frame_", 0) != 0) continue;
        const std::string ext = e.path().extension().string();
        if (ext != ".png" && ext != ".pgm") continue;
        frames[std::stoi(fn.substr(6, fn.size() - 6 - ext.size()))] = e.path();
      }
      if (frames.size() < 2)
        throw DataError("clip '" + dir.string() + "' has fewer than 2 frames");
      GestureClip clip;
      clip.label = label;
      clip.subject = dir.filename().string();
      clip.source = ClipSource::Directory;
      int expect = frames.begin()->first;
      for (const auto& [idx, path] : frames) {
        if (idx != expect)
          throw DataError("clip '" + dir.string() + "': missing frame index " +
                          std::to_string(expect));
        ++expect;
        Image8 img = load_image(path.string());
        if (!clip.frames.frames.empty() &&
            (img.width != clip.frames.frames[0].width ||
             img.height != clip.frames.frames[0].height))
          throw DataError("clip '" + dir.string() + "': frame sizes differ");
        clip.frames.frames.push_back(std::move(img));
      }
      clips.push_back(std::move(clip));
    }
  }
  return clips;
}

AffineSample sample_affine(const AugmentPolicy& policy, int width, int height,
                           std::mt19937_64& rng) {
  if (policy.rotation_deg < 0 || policy.rotation_deg > 20.0)
    throw ConfigError("augment: rotation bound must be in [0,20] degrees");
  if (policy.shift < 0 || policy.shift > 0.2)
    throw ConfigError("augment: shift bound must be in [0,0.2]");
  if (policy.shear < 0 || policy.shear > 0.2)
    throw ConfigError("augment: shear bound must be in [0,0.2]");
  if (policy.zoom < 0 || policy.zoom > 0.2)
    throw ConfigError("augment: zoom bound must be in [0,0.2]");

  auto uni = [&](double b) {
    if (b == 0.0) return 0.0;
    return std::uniform_real_distribution<double>(-b, b)(rng);
  };
  AffineSample s;
  s.angle_deg = uni(policy.rotation_deg);
  s.tx = uni(policy.shift) * width;
  s.ty = uni(policy.shift) * height;
  s.shear = uni(policy.shear);
  s.zx = 1.0 + uni(policy.zoom);
  s.zy = 1.0 + uni(policy.zoom);

  // forward map: zoom, then shear, then rotate, about the image center
  const double a = s.angle_deg * std::numbers::pi / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  // R * Sh * Z  with Sh = [[1, shear], [0, 1]]
  s.m[0] = ca * s.zx;
  s.m[1] = (ca * s.shear - sa) * s.zy;
  s.m[2] = s.tx;
  s.m[3] = sa * s.zx;
  s.m[4] = (sa * s.shear + ca) * s.zy;
  s.m[5] = s.ty;
  return s;
}

Image8 apply_affine(const Image8& img, const AffineSample& s) {
  if (img.channels != 1) throw FormatError("apply_affine: grayscale images only");
  Image8 out = img;
  const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
  // invert the 2x2 linear part for output->input mapping
  const double det = s.m[0] * s.m[4] - s.m[1] * s.m[3];
  if (det <= 0) throw Error("apply_affine: degenerate transform");
  const double i0 = s.m[4] / det, i1 = -s.m[1] / det, i3 = -s.m[3] / det, i4 = s.m[0] / det;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double ox = x - cx - s.m[2], oy = y - cy - s.m[5];
      const double sx = i0 * ox + i1 * oy + cx;
      const double sy = i3 * ox + i4 * oy + cy;
      // nearest fill: clamp to the image border
      const int xi = std::clamp(static_cast<int>(std::lround(sx)), 0, img.width - 1);
      const int yi = std::clamp(static_cast<int>(std::lround(sy)), 0, img.height - 1);
      out.pixels[static_cast<size_t>(y) * img.width + x] =
          img.pixels[static_cast<size_t>(yi) * img.width + xi];
    }
  return out;
}

Image8 augment_image(const Image8& img, const AugmentPolicy& policy, std::mt19937_64& rng) {
  return apply_affine(img, sample_affine(policy, img.width, img.height, rng));
}

DatasetSplit stratified_kfold(const std::vector<int>& labels, int k, uint64_t seed) {
  if (k < 2) throw ConfigError("stratified_kfold: k must be >= 2");
  if (labels.empty()) throw ConfigError("stratified_kfold: empty label list");
  std::map<int, std::vector<int>> by_class;
  for (size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<int>(i));
  for (const auto& [cls, idx] : by_class)
    if (static_cast<int>(idx.size()) < k)
      throw ConfigError("stratified_kfold: class " + std::to_string(cls) + " has " +
                        std::to_string(idx.size()) + " samples, need >= " + std::to_string(k));
  DatasetSplit split;
  split.seed = seed;
  split.folds.assign(k, {});
  std::mt19937_64 rng(seed);
  for (auto& [cls, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (size_t i = 0; i < idx.size(); ++i)
      split.folds[i % k].push_back(idx[i]);
  }
  for (auto& f : split.folds) std::sort(f.begin(), f.end());
  return split;
}

std::string split_to_text(const DatasetSplit& split) {
  std::string out = "seed " + std::to_string(split.seed) + "\n";
  for (size_t f = 0; f < split.folds.size(); ++f) {
    out += "fold " + std::to_string(f) + ":";
    for (int i : split.folds[f]) out += " " + std::to_string(i);
    out += "\n";
  }
  return out;
}

}  // namespace ofmt

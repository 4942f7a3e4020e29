#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ofmt/tensor.hpp"

namespace ofmt {

struct FormatError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

// 8-bit image as stored on disk; channels is 1 (gray) or 3 (RGB interleaved).
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<uint8_t> pixels;

  size_t expected_size() const {
    return static_cast<size_t>(width) * height * channels;
  }
};

// Working-precision grayscale frame, values in [0,255].
struct GrayFrame {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  GrayFrame() = default;
  GrayFrame(int w, int h, float fill = 0.f)
      : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}
  float& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
  float at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
};

struct FrameSequence {
  std::vector<Image8> frames;
  double fps = 30.0;
};

// ITU-R BT.601 luma; 1-channel input passes through unchanged.
GrayFrame to_grayscale(const Image8& img);

GrayFrame resize_bilinear(const GrayFrame& src, int w, int h);

Image8 gray_to_image8(const GrayFrame& f);  // rounds half-up, clamps to [0,255]

// --- codecs ---
void write_pgm(const std::string& path, const Image8& img);   // P5, gray only
void write_png(const std::string& path, const Image8& img);   // 8-bit gray or RGB
Image8 read_pgm(const std::string& path);
Image8 read_png(const std::string& path);
Image8 load_image(const std::string& path);                   // dispatch on magic bytes
void save_image(const std::string& path, const Image8& img);  // dispatch on extension

}  // namespace ofmt

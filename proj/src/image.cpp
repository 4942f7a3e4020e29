#include "ofmt/image.hpp"

#include <cmath>
#include <fstream>

namespace ofmt {

GrayFrame to_grayscale(const Image8& img) {
  if (img.channels != 1 && img.channels != 3)
    throw FormatError("to_grayscale expects 1 or 3 channels, got " +
                      std::to_string(img.channels));
  GrayFrame out(img.width, img.height);
  const size_t n = static_cast<size_t>(img.width) * img.height;
  if (img.channels == 1) {
    for (size_t i = 0; i < n; ++i) out.pixels[i] = static_cast<float>(img.pixels[i]);
  } else {
    for (size_t i = 0; i < n; ++i) {
      const float r = img.pixels[3 * i], g = img.pixels[3 * i + 1], b = img.pixels[3 * i + 2];
      out.pixels[i] = 0.299f * r + 0.587f * g + 0.114f * b;
    }
  }
  return out;
}

GrayFrame resize_bilinear(const GrayFrame& src, int w, int h) {
  if (w <= 0 || h <= 0) throw DimensionError("resize target extents must be positive");
  if (w == src.width && h == src.height) return src;
  GrayFrame out(w, h);
  const double sx = static_cast<double>(src.width) / w;
  const double sy = static_cast<double>(src.height) / h;
  for (int y = 0; y < h; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    const double wy = fy - y0;
    y0 = std::max(0, std::min(src.height - 1, y0));
    const int y1 = std::min(src.height - 1, y0 + 1);
    for (int x = 0; x < w; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      const double wx = fx - x0;
      x0 = std::max(0, std::min(src.width - 1, x0));
      const int x1 = std::min(src.width - 1, x0 + 1);
      const double top = src.at(x0, y0) * (1 - wx) + src.at(x1, y0) * wx;
      const double bot = src.at(x0, y1) * (1 - wx) + src.at(x1, y1) * wx;
      out.at(x, y) = static_cast<float>(top * (1 - wy) + bot * wy);
    }
  }
  return out;
}

Image8 gray_to_image8(const GrayFrame& f) {
  Image8 img;
  img.width = f.width;
  img.height = f.height;
  img.channels = 1;
  img.pixels.resize(f.pixels.size());
  for (size_t i = 0; i < f.pixels.size(); ++i) {
    const double v = std::floor(static_cast<double>(f.pixels[i]) + 0.5);
    img.pixels[i] = static_cast<uint8_t>(std::max(0.0, std::min(255.0, v)));
  }
  return img;
}

void write_pgm(const std::string& path, const Image8& img) {
  if (img.channels != 1) throw FormatError("PGM output requires a single-channel image");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << "P5\n" << img.width << " " << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
  if (!os) throw IoError("short write to '" + path + "'");
}

namespace {

int next_pnm_token(std::istream& is) {
  // skips whitespace and '#' comments
  while (is) {
    int c = is.peek();
    if (c == '#') {
      std::string line;
      std::getline(is, line);
    } else if (std::isspace(c)) {
      is.get();
    } else {
      break;
    }
  }
  int v = -1;
  is >> v;
  return v;
}

}  // namespace

Image8 read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  std::string magic;
  is >> magic;
  const bool ascii = magic == "P2";
  if (magic != "P5" && !ascii) throw FormatError("'" + path + "' is not a PGM file");
  Image8 img;
  img.width = next_pnm_token(is);
  img.height = next_pnm_token(is);
  const int maxval = next_pnm_token(is);
  if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 255)
    throw FormatError("'" + path + "': unsupported PGM header");
  img.channels = 1;
  img.pixels.resize(img.expected_size());
  if (ascii) {
    for (auto& p : img.pixels) {
      const int v = next_pnm_token(is);
      if (v < 0) throw FormatError("'" + path + "': truncated PGM data");
      p = static_cast<uint8_t>(v);
    }
  } else {
    is.get();  // single whitespace after maxval
    is.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (is.gcount() != static_cast<std::streamsize>(img.pixels.size()))
      throw FormatError("'" + path + "': truncated PGM data");
  }
  return img;
}

Image8 load_image(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  unsigned char magic[2] = {0, 0};
  is.read(reinterpret_cast<char*>(magic), 2);
  is.close();
  if (magic[0] == 'P' && (magic[1] == '5' || magic[1] == '2')) return read_pgm(path);
  if (magic[0] == 0x89 && magic[1] == 'P') return read_png(path);
  throw FormatError("'" + path + "': unrecognized image format");
}

void save_image(const std::string& path, const Image8& img) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".pgm")
    write_pgm(path, img);
  else
    write_png(path, img);
}

}  // namespace ofmt

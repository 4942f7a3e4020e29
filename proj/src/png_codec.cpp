#include <zlib.h>

#include <cstring>
#include <fstream>

#include "ofmt/image.hpp"

// Minimal PNG support: 8-bit grayscale and RGB, non-interlaced. Enough for the
// templates and frames this pipeline reads and writes.

namespace ofmt {

namespace {

void put_u32(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back(static_cast<uint8_t>(x >> 24));
  v.push_back(static_cast<uint8_t>(x >> 16));
  v.push_back(static_cast<uint8_t>(x >> 8));
  v.push_back(static_cast<uint8_t>(x));
}

uint32_t get_u32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void write_chunk(std::ofstream& os, const char type[4], const std::vector<uint8_t>& data) {
  std::vector<uint8_t> hdr;
  put_u32(hdr, static_cast<uint32_t>(data.size()));
  os.write(reinterpret_cast<const char*>(hdr.data()), 4);
  os.write(type, 4);
  if (!data.empty())
    os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(type), 4);
  if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
  std::vector<uint8_t> tail;
  put_u32(tail, static_cast<uint32_t>(crc));
  os.write(reinterpret_cast<const char*>(tail.data()), 4);
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

void write_png(const std::string& path, const Image8& img) {
  if (img.channels != 1 && img.channels != 3)
    throw FormatError("PNG output supports 1 or 3 channels");
  if (img.pixels.size() != img.expected_size()) throw FormatError("image buffer size mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  os.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<uint8_t> ihdr;
  put_u32(ihdr, static_cast<uint32_t>(img.width));
  put_u32(ihdr, static_cast<uint32_t>(img.height));
  ihdr.push_back(8);                                  // bit depth
  ihdr.push_back(img.channels == 1 ? 0 : 2);          // gray / truecolor
  ihdr.push_back(0);                                  // deflate
  ihdr.push_back(0);                                  // filter method
  ihdr.push_back(0);                                  // no interlace
  write_chunk(os, "IHDR", ihdr);

  const size_t stride = static_cast<size_t>(img.width) * img.channels;
  std::vector<uint8_t> raw;
  raw.reserve((stride + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);  // filter type none
    const uint8_t* row = img.pixels.data() + y * stride;
    raw.insert(raw.end(), row, row + stride);
  }
  uLongf clen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> comp(clen);
  if (compress2(comp.data(), &clen, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw IoError("zlib compression failed for '" + path + "'");
  comp.resize(clen);
  write_chunk(os, "IDAT", comp);
  write_chunk(os, "IEND", {});
  if (!os) throw IoError("short write to '" + path + "'");
}

Image8 read_png(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  std::vector<uint8_t> file((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (file.size() < 8 || std::memcmp(file.data(), sig, 8) != 0)
    throw FormatError("'" + path + "' is not a PNG file");

  Image8 img;
  int bit_depth = 0, color_type = -1;
  std::vector<uint8_t> idat;
  size_t pos = 8;
  bool seen_iend = false;
  while (pos + 8 <= file.size()) {
    const uint32_t len = get_u32(&file[pos]);
    if (pos + 12 + len > file.size())
      throw FormatError("'" + path + "': truncated PNG chunk");
    const char* type = reinterpret_cast<const char*>(&file[pos + 4]);
    const uint8_t* data = &file[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw FormatError("'" + path + "': bad IHDR");
      img.width = static_cast<int>(get_u32(data));
      img.height = static_cast<int>(get_u32(data + 4));
      bit_depth = data[8];
      color_type = data[9];
      if (data[12] != 0) throw FormatError("'" + path + "': interlaced PNG not supported");
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      seen_iend = true;
      break;
    }
    pos += 12 + len;
  }
  if (img.width <= 0 || img.height <= 0 || !seen_iend || idat.empty())
    throw FormatError("'" + path + "': incomplete PNG");
  if (bit_depth != 8 || (color_type != 0 && color_type != 2))
    throw FormatError("'" + path + "': only 8-bit gray/RGB PNG supported");
  img.channels = color_type == 0 ? 1 : 3;

  const size_t stride = static_cast<size_t>(img.width) * img.channels;
  std::vector<uint8_t> raw((stride + 1) * img.height);
  uLongf rlen = static_cast<uLongf>(raw.size());
  const int zres = uncompress(raw.data(), &rlen, idat.data(), static_cast<uLong>(idat.size()));
  if (zres != Z_OK || rlen != raw.size())
    throw FormatError("'" + path + "': corrupt PNG image data");

  img.pixels.resize(img.expected_size());
  const int bpp = img.channels;
  for (int y = 0; y < img.height; ++y) {
    const uint8_t filter = raw[y * (stride + 1)];
    const uint8_t* src = &raw[y * (stride + 1) + 1];
    uint8_t* dst = &img.pixels[y * stride];
    const uint8_t* up = y > 0 ? &img.pixels[(y - 1) * stride] : nullptr;
    for (size_t x = 0; x < stride; ++x) {
      const int a = x >= static_cast<size_t>(bpp) ? dst[x - bpp] : 0;
      const int b = up ? up[x] : 0;
      const int c = (up && x >= static_cast<size_t>(bpp)) ? up[x - bpp] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw FormatError("'" + path + "': unknown PNG filter");
      }
      dst[x] = static_cast<uint8_t>(v);
    }
  }
  return img;
}

}  // namespace ofmt

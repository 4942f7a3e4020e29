#include "ofmt/model.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ofmt/image.hpp"  // FormatError / IoError

namespace ofmt {

ModelSpec desk_c3d_spec(int channels, int num_classes) {
  return {ModelKind::C3D, {channels, 16, 32, 32}, 1.0 / 8.0, num_classes, 0.4};
}

ModelSpec desk_lenet_spec(int num_classes) {
  return {ModelKind::LeNet2D, {1, 64, 64}, 1.0, num_classes, 0.4};
}

ModelSpec paper_c3d_spec(int num_classes) {
  return {ModelKind::C3D, {3, 16, 112, 112}, 1.0, num_classes, 0.4};
}

ModelSpec paper_lenet_spec(int num_classes) {
  return {ModelKind::LeNet2D, {1, 64, 64}, 1.0, num_classes, 0.4};
}

std::string spec_fingerprint(const ModelSpec& spec) {
  std::ostringstream os;
  os << "kind=" << (spec.kind == ModelKind::C3D ? "c3d" : "lenet2d");
  os << " input=" << shape_str(spec.input_shape);
  os << " width_multiplier=" << spec.width_multiplier;
  os << " num_classes=" << spec.num_classes;
  os << " dropout=" << spec.dropout_rate;
  return os.str();
}

namespace {

constexpr uint32_t kFormatVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw FormatError("weight file truncated");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_floats(std::ostream& os, const std::vector<float>& v) {
  // x86/arm little-endian float layout
  static_assert(sizeof(float) == 4);
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 4));
}

void write_tensor(std::ostream& os, const std::string& name, const Tensor<float>& t) {
  put_u32(os, static_cast<uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u32(os, static_cast<uint32_t>(t.shape.size()));
  for (int d : t.shape) put_u32(os, static_cast<uint32_t>(d));
  put_floats(os, t.data);
}

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

NamedTensor read_tensor(std::istream& is) {
  NamedTensor t;
  const uint32_t nlen = get_u32(is);
  if (nlen > 4096) throw FormatError("weight file corrupt: implausible name length");
  t.name.resize(nlen);
  is.read(t.name.data(), nlen);
  if (!is) throw FormatError("weight file truncated");
  const uint32_t rank = get_u32(is);
  if (rank > 8) throw FormatError("weight file corrupt: implausible tensor rank");
  long n = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    const uint32_t d = get_u32(is);
    if (d == 0 || d > (1u << 24)) throw FormatError("weight file corrupt: bad dimension");
    t.shape.push_back(static_cast<int>(d));
    n *= d;
  }
  t.data.resize(static_cast<size_t>(n));
  is.read(reinterpret_cast<char*>(t.data.data()), n * 4);
  if (!is) throw FormatError("weight file truncated inside tensor '" + t.name + "'");
  return t;
}

}  // namespace

void save_weights(const Model<float>& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os.write("OFMT", 4);
  put_u32(os, kFormatVersion);
  put_u32(os, static_cast<uint32_t>(model.params.size() * 2));
  for (const auto& p : model.params) {
    write_tensor(os, p.name + ".weight", *p.weights);
    write_tensor(os, p.name + ".bias", *p.bias);
  }
  if (!os) throw IoError("write to '" + path + "' failed");
  // human-readable sidecar identifying the generating spec
  std::ofstream ss(path + ".spec");
  if (ss) ss << spec_fingerprint(model.spec) << "\n";
}

Model<float> load_weights(const std::string& path, const ModelSpec& spec) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "OFMT", 4) != 0)
    throw FormatError("'" + path + "' is not a weight file (bad magic)");
  const uint32_t version = get_u32(is);
  if (version != kFormatVersion)
    throw FormatError("unsupported weight format version " + std::to_string(version));
  const uint32_t count = get_u32(is);

  // building first gives the expected shapes; file contents then overwrite them
  std::mt19937_64 rng(0);
  Model<float> model = build_model<float>(spec, rng);
  if (count != model.params.size() * 2)
    throw SpecError("weight file has " + std::to_string(count) + " tensors, spec expects " +
                    std::to_string(model.params.size() * 2));
  for (auto& p : model.params) {
    for (auto* dst : {p.weights.get(), p.bias.get()}) {
      NamedTensor t = read_tensor(is);
      const std::string want = p.name + (dst == p.weights.get() ? ".weight" : ".bias");
      if (t.name != want)
        throw SpecError("weight file layer '" + t.name + "' where spec expects '" + want + "'");
      if (t.shape != dst->shape)
        throw SpecError("layer '" + t.name + "': file shape " + shape_str(t.shape) +
                        " incompatible with spec shape " + shape_str(dst->shape));
      dst->data = std::move(t.data);
    }
  }
  return model;
}

}  // namespace ofmt

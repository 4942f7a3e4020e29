#pragma once

#include <cmath>
#include <random>
#include <string>

#include "ofmt/layers.hpp"

namespace ofmt {

enum class ModelKind { C3D, LeNet2D };

struct ModelSpec {
  ModelKind kind = ModelKind::LeNet2D;
  Shape input_shape;  // (C,T,H,W) for C3D, (C,H,W) for LeNet2D
  double width_multiplier = 1.0;
  int num_classes = 10;
  double dropout_rate = 0.4;
};

// Desk-scale defaults trainable on a CPU; paper_scale() restores the full
// channel ladder at 112x112.
ModelSpec desk_c3d_spec(int channels = 3, int num_classes = 10);
ModelSpec desk_lenet_spec(int num_classes = 10);
ModelSpec paper_c3d_spec(int num_classes = 10);
ModelSpec paper_lenet_spec(int num_classes = 10);

std::string spec_fingerprint(const ModelSpec& spec);

struct LayerDesc {
  enum Type { Conv2d, Conv3d, Pool, Relu, Dropout, Flatten, Dense } type;
  int param_index = -1;
  std::vector<int> window;  // (H,W) or (H,W,T) for pools
  std::vector<int> stride;
  Padding padding = Padding::Valid;
  double rate = 0.0;
};

struct SpecError : Error {
  using Error::Error;
};

template <typename T>
struct Model {
  ModelSpec spec;
  std::vector<LayerDesc> layers;
  std::vector<LayerParams<T>> params;

  TensorPtr<T> forward(Tape<T>& tape, TensorPtr<T> x, Mode mode, std::mt19937_64& rng) const {
    for (const auto& l : layers) {
      switch (l.type) {
        case LayerDesc::Conv2d:
          x = conv2d_forward(tape, x, params[l.param_index], {l.stride[0], l.stride[1]},
                             l.padding);
          break;
        case LayerDesc::Conv3d:
          x = conv3d_forward(tape, x, params[l.param_index],
                             {l.stride[2], l.stride[0], l.stride[1]}, l.padding);
          break;
        case LayerDesc::Pool:
          x = maxpool_forward(tape, x, l.window, l.stride);
          break;
        case LayerDesc::Relu:
          x = relu(tape, x);
          break;
        case LayerDesc::Dropout:
          x = dropout(tape, x, l.rate, mode, rng);
          break;
        case LayerDesc::Flatten:
          x = reshape(tape, x, {static_cast<int>(x->size())});
          break;
        case LayerDesc::Dense:
          x = dense_forward(tape, x, params[l.param_index]);
          break;
      }
    }
    return x;  // logits, length num_classes
  }

  long param_count() const {
    long n = 0;
    for (const auto& p : params) n += p.weights->size() + p.bias->size();
    return n;
  }

  void set_requires_grad(bool v) {
    for (auto& p : params) {
      p.weights->requires_grad = v;
      p.bias->requires_grad = v;
    }
  }

  // Deep copy sharing nothing; used for per-sample gradient workers.
  Model<T> fork() const {
    Model<T> m;
    m.spec = spec;
    m.layers = layers;
    for (const auto& p : params) {
      LayerParams<T> q;
      q.weights = std::make_shared<Tensor<T>>(*p.weights);
      q.bias = std::make_shared<Tensor<T>>(*p.bias);
      q.name = p.name;
      m.params.push_back(std::move(q));
    }
    return m;
  }
};

namespace detail {

inline int scaled_channels(int base, double multiplier) {
  return std::max(1, static_cast<int>(std::lround(base * multiplier)));
}

template <typename T>
LayerParams<T> conv_params(const std::string& name, Shape wshape, std::mt19937_64& rng) {
  LayerParams<T> p;
  p.name = name;
  p.weights = make_tensor<T>(wshape, true);
  p.bias = make_tensor<T>({wshape[0]}, true);
  long kvol = 1;
  for (size_t i = 2; i < wshape.size(); ++i) kvol *= wshape[i];
  init_glorot(*p.weights, wshape[1] * kvol, wshape[0] * kvol, rng);
  return p;
}

template <typename T>
LayerParams<T> dense_params(const std::string& name, int out, int in, std::mt19937_64& rng) {
  LayerParams<T> p;
  p.name = name;
  p.weights = make_tensor<T>({out, in}, true);
  p.bias = make_tensor<T>({out}, true);
  init_glorot(*p.weights, in, out, rng);
  return p;
}

}  // namespace detail

template <typename T>
Model<T> build_c3d(const ModelSpec& spec, std::mt19937_64& rng) {
  if (spec.kind != ModelKind::C3D) throw SpecError("build_c3d: spec kind is not C3D");
  if (spec.input_shape.size() != 4)
    throw SpecError("build_c3d: input shape must be (C,T,H,W), got " +
                    shape_str(spec.input_shape));
  if (spec.width_multiplier <= 0.0 || spec.width_multiplier > 1.0)
    throw SpecError("width multiplier must be in (0,1]");
  if (spec.num_classes < 2) throw SpecError("num_classes must be >= 2");

  Model<T> m;
  m.spec = spec;
  const double wm = spec.width_multiplier;
  const int conv_ladder[5] = {64, 128, 256, 256, 256};
  int C = spec.input_shape[0], Ti = spec.input_shape[1], H = spec.input_shape[2],
      W = spec.input_shape[3];
  for (int i = 0; i < 5; ++i) {
    const int Co = detail::scaled_channels(conv_ladder[i], wm);
    const int idx = static_cast<int>(m.params.size());
    m.params.push_back(
        detail::conv_params<T>("conv" + std::to_string(i + 1), {Co, C, 3, 3, 3}, rng));
    m.layers.push_back({LayerDesc::Conv3d, idx, {}, {1, 1, 1}, Padding::Same});
    m.layers.push_back({LayerDesc::Relu});
    const std::vector<int> win = i == 0 ? std::vector<int>{2, 2, 1} : std::vector<int>{2, 2, 2};
    if (H < win[0] || W < win[1] || Ti < win[2])
      throw SpecError("c3d: pool " + std::to_string(i + 1) + " window exceeds extent (T=" +
                      std::to_string(Ti) + ",H=" + std::to_string(H) + ",W=" +
                      std::to_string(W) + ")");
    m.layers.push_back({LayerDesc::Pool, -1, win, win});
    C = Co;
    H /= win[0];
    W /= win[1];
    Ti /= win[2];
    if (Ti < 1) throw SpecError("c3d: temporal extent collapsed before final pool");
  }
  m.layers.push_back({LayerDesc::Flatten});
  int flat = C * Ti * H * W;
  const int d1 = detail::scaled_channels(2048, wm);
  const int d2 = detail::scaled_channels(1024, wm);
  int idx = static_cast<int>(m.params.size());
  m.params.push_back(detail::dense_params<T>("fc1", d1, flat, rng));
  m.layers.push_back({LayerDesc::Dense, idx});
  m.layers.push_back({LayerDesc::Relu});
  m.layers.push_back({LayerDesc::Dropout, -1, {}, {}, Padding::Valid, spec.dropout_rate});
  idx = static_cast<int>(m.params.size());
  m.params.push_back(detail::dense_params<T>("fc2", d2, d1, rng));
  m.layers.push_back({LayerDesc::Dense, idx});
  m.layers.push_back({LayerDesc::Relu});
  m.layers.push_back({LayerDesc::Dropout, -1, {}, {}, Padding::Valid, spec.dropout_rate});
  idx = static_cast<int>(m.params.size());
  m.params.push_back(detail::dense_params<T>("fc3", spec.num_classes, d2, rng));
  m.layers.push_back({LayerDesc::Dense, idx});
  return m;
}

template <typename T>
Model<T> build_lenet2d(const ModelSpec& spec, std::mt19937_64& rng) {
  if (spec.kind != ModelKind::LeNet2D) throw SpecError("build_lenet2d: spec kind is not LeNet2D");
  if (spec.input_shape.size() != 3)
    throw SpecError("build_lenet2d: input shape must be (C,H,W), got " +
                    shape_str(spec.input_shape));
  if (spec.width_multiplier <= 0.0 || spec.width_multiplier > 1.0)
    throw SpecError("width multiplier must be in (0,1]");
  if (spec.num_classes < 2) throw SpecError("num_classes must be >= 2");

  Model<T> m;
  m.spec = spec;
  const double wm = spec.width_multiplier;
  int C = spec.input_shape[0], H = spec.input_shape[1], W = spec.input_shape[2];
  const int kernels[2] = {3, 5};
  const int chans[2] = {32, 64};
  for (int i = 0; i < 2; ++i) {
    const int Co = detail::scaled_channels(chans[i], wm);
    const int k = kernels[i];
    if (H < k || W < k)
      throw SpecError("lenet2d: input too small for conv" + std::to_string(i + 1));
    const int idx = static_cast<int>(m.params.size());
    m.params.push_back(
        detail::conv_params<T>("conv" + std::to_string(i + 1), {Co, C, k, k}, rng));
    m.layers.push_back({LayerDesc::Conv2d, idx, {}, {1, 1}, Padding::Valid});
    m.layers.push_back({LayerDesc::Relu});
    H -= k - 1;
    W -= k - 1;
    if (H < 2 || W < 2) throw SpecError("lenet2d: input too small for pool" + std::to_string(i + 1));
    m.layers.push_back({LayerDesc::Pool, -1, {2, 2}, {2, 2}});
    C = Co;
    H /= 2;
    W /= 2;
  }
  m.layers.push_back({LayerDesc::Flatten});
  const int d1 = detail::scaled_channels(1024, wm);
  int idx = static_cast<int>(m.params.size());
  m.params.push_back(detail::dense_params<T>("fc1", d1, C * H * W, rng));
  m.layers.push_back({LayerDesc::Dense, idx});
  m.layers.push_back({LayerDesc::Relu});
  m.layers.push_back({LayerDesc::Dropout, -1, {}, {}, Padding::Valid, spec.dropout_rate});
  idx = static_cast<int>(m.params.size());
  m.params.push_back(detail::dense_params<T>("fc2", spec.num_classes, d1, rng));
  m.layers.push_back({LayerDesc::Dense, idx});
  return m;
}

template <typename T>
Model<T> build_model(const ModelSpec& spec, std::mt19937_64& rng) {
  return spec.kind == ModelKind::C3D ? build_c3d<T>(spec, rng) : build_lenet2d<T>(spec, rng);
}

// plain softmax for inference
template <typename T>
std::vector<double> softmax(const std::vector<T>& logits) {
  double mx = logits[0];
  for (auto v : logits) mx = std::max(mx, static_cast<double>(v));
  std::vector<double> p(logits.size());
  double denom = 0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(static_cast<double>(logits[i]) - mx);
    denom += p[i];
  }
  for (auto& v : p) v /= denom;
  return p;
}

// --- weight persistence (32-bit float file format) ---

void save_weights(const Model<float>& model, const std::string& path);

// Builds the model from `spec`, then overwrites its parameters from the file;
// shape mismatches name the first offending layer.
Model<float> load_weights(const std::string& path, const ModelSpec& spec);

}  // namespace ofmt

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "ofmt/tensor.hpp"

namespace ofmt {

template <typename T>
struct LayerParams {
  TensorPtr<T> weights;
  TensorPtr<T> bias;
  std::string name;
};

enum class Padding { Valid, Same };

namespace detail {

inline int out_extent(int in, int k, int s, int p) {
  int n = (in + 2 * p - k) / s + 1;
  if (n < 1)
    throw DimensionError("kernel " + std::to_string(k) + " exceeds padded input extent " +
                         std::to_string(in + 2 * p));
  return n;
}

inline int same_pad(int k, int s) {
  if (s != 1) throw DimensionError("same padding requires stride 1");
  return (k - 1) / 2;
}

// Copies [C,T,H,W] into a zero-padded buffer.
template <typename T>
void pad_copy(const T* src, int C, int Ti, int H, int W, int pt, int ph, int pw,
              std::vector<T>& dst) {
  const int Tp = Ti + 2 * pt, Hp = H + 2 * ph, Wp = W + 2 * pw;
  dst.assign(static_cast<size_t>(C) * Tp * Hp * Wp, T(0));
  for (int c = 0; c < C; ++c)
    for (int t = 0; t < Ti; ++t)
      for (int h = 0; h < H; ++h) {
        const T* s = src + ((static_cast<long>(c) * Ti + t) * H + h) * W;
        T* d = &dst[((static_cast<long>(c) * Tp + t + pt) * Hp + h + ph) * Wp + pw];
        std::copy(s, s + W, d);
      }
}

template <typename T>
void unpad_accum(const std::vector<T>& src, int C, int Ti, int H, int W, int pt, int ph, int pw,
                 T* dst) {
  const int Tp = Ti + 2 * pt, Hp = H + 2 * ph, Wp = W + 2 * pw;
  for (int c = 0; c < C; ++c)
    for (int t = 0; t < Ti; ++t)
      for (int h = 0; h < H; ++h) {
        const T* s = &src[((static_cast<long>(c) * Tp + t + pt) * Hp + h + ph) * Wp + pw];
        T* d = dst + ((static_cast<long>(c) * Ti + t) * H + h) * W;
        for (int w = 0; w < W; ++w) d[w] += s[w];
      }
}

// Space-time convolution on one sample, [Ci,Ti,Hi,Wi] -> [Co,To,Ho,Wo].
// 2D convolution reuses this with Ti=Kt=1.
template <typename T>
void conv3d_sample_forward(const T* in, int Ci, int Ti, int Hi, int Wi, const T* W, const T* b,
                           int Co, int Kt, int Kh, int Kw, int st, int sh, int sw, int pt, int ph,
                           int pw, T* out, int To, int Ho, int Wo, std::vector<T>& padbuf) {
  pad_copy(in, Ci, Ti, Hi, Wi, pt, ph, pw, padbuf);
  const int Tp = Ti + 2 * pt, Hp = Hi + 2 * ph, Wp = Wi + 2 * pw;
  for (int co = 0; co < Co; ++co) {
    T* ochan = out + static_cast<long>(co) * To * Ho * Wo;
    std::fill(ochan, ochan + static_cast<long>(To) * Ho * Wo, b[co]);
    for (int ci = 0; ci < Ci; ++ci)
      for (int kt = 0; kt < Kt; ++kt)
        for (int kh = 0; kh < Kh; ++kh)
          for (int kw = 0; kw < Kw; ++kw) {
            const T wv = W[(((static_cast<long>(co) * Ci + ci) * Kt + kt) * Kh + kh) * Kw + kw];
            for (int to = 0; to < To; ++to) {
              const int ti = to * st + kt;
              for (int ho = 0; ho < Ho; ++ho) {
                const T* irow =
                    &padbuf[((static_cast<long>(ci) * Tp + ti) * Hp + ho * sh + kh) * Wp + kw];
                T* orow = ochan + (static_cast<long>(to) * Ho + ho) * Wo;
                if (sw == 1) {
                  for (int wo = 0; wo < Wo; ++wo) orow[wo] += wv * irow[wo];
                } else {
                  for (int wo = 0; wo < Wo; ++wo) orow[wo] += wv * irow[wo * sw];
                }
              }
            }
          }
  }
}

template <typename T>
void conv3d_sample_backward(const T* gout, const T* in, int Ci, int Ti, int Hi, int Wi, const T* W,
                            int Co, int Kt, int Kh, int Kw, int st, int sh, int sw, int pt, int ph,
                            int pw, int To, int Ho, int Wo, T* dW, T* db, T* din,
                            std::vector<T>& padbuf, std::vector<T>& gpadbuf) {
  const int Tp = Ti + 2 * pt, Hp = Hi + 2 * ph, Wp = Wi + 2 * pw;
  pad_copy(in, Ci, Ti, Hi, Wi, pt, ph, pw, padbuf);
  if (din) gpadbuf.assign(static_cast<size_t>(Ci) * Tp * Hp * Wp, T(0));
  for (int co = 0; co < Co; ++co) {
    const T* gchan = gout + static_cast<long>(co) * To * Ho * Wo;
    if (db) {
      T acc = 0;
      for (long i = 0; i < static_cast<long>(To) * Ho * Wo; ++i) acc += gchan[i];
      db[co] += acc;
    }
    for (int ci = 0; ci < Ci; ++ci)
      for (int kt = 0; kt < Kt; ++kt)
        for (int kh = 0; kh < Kh; ++kh)
          for (int kw = 0; kw < Kw; ++kw) {
            const long widx = (((static_cast<long>(co) * Ci + ci) * Kt + kt) * Kh + kh) * Kw + kw;
            const T wv = W[widx];
            T wacc = 0;
            for (int to = 0; to < To; ++to) {
              const int ti = to * st + kt;
              for (int ho = 0; ho < Ho; ++ho) {
                const long poff =
                    ((static_cast<long>(ci) * Tp + ti) * Hp + ho * sh + kh) * Wp + kw;
                const T* irow = &padbuf[poff];
                const T* grow = gchan + (static_cast<long>(to) * Ho + ho) * Wo;
                if (sw == 1) {
                  for (int wo = 0; wo < Wo; ++wo) wacc += grow[wo] * irow[wo];
                  if (din) {
                    T* drow = &gpadbuf[poff];
                    for (int wo = 0; wo < Wo; ++wo) drow[wo] += wv * grow[wo];
                  }
                } else {
                  for (int wo = 0; wo < Wo; ++wo) wacc += grow[wo] * irow[wo * sw];
                  if (din) {
                    T* drow = &gpadbuf[poff];
                    for (int wo = 0; wo < Wo; ++wo) drow[wo * sw] += wv * grow[wo];
                  }
                }
              }
            }
            if (dW) dW[widx] += wacc;
          }
  }
  if (din) unpad_accum(gpadbuf, Ci, Ti, Hi, Wi, pt, ph, pw, din);
}

}  // namespace detail

template <typename T>
void check_params(const LayerParams<T>& p, size_t weight_rank) {
  if (p.weights->shape.size() != weight_rank)
    throw DimensionError("layer '" + p.name + "': expected rank-" + std::to_string(weight_rank) +
                         " weights, got " + shape_str(p.weights->shape));
  if (p.bias->shape.size() != 1 || p.bias->shape[0] != p.weights->shape[0])
    throw DimensionError("layer '" + p.name + "': bias length must equal output channels");
}

// input [Ci,T,H,W], weights [Co,Ci,Kt,Kh,Kw], stride (t,h,w).
template <typename T>
TensorPtr<T> conv3d_forward(Tape<T>& tape, const TensorPtr<T>& input, const LayerParams<T>& params,
                            std::array<int, 3> stride = {1, 1, 1}, Padding pad = Padding::Valid) {
  check_params(params, 5);
  if (input->shape.size() != 4)
    throw DimensionError("conv3d expects [C,T,H,W] input, got " + shape_str(input->shape));
  const auto& ws = params.weights->shape;
  const int Co = ws[0], Ci = ws[1], Kt = ws[2], Kh = ws[3], Kw = ws[4];
  if (input->shape[0] != Ci)
    throw DimensionError("conv3d '" + params.name + "': input has " +
                         std::to_string(input->shape[0]) + " channels, weights expect " +
                         std::to_string(Ci));
  const int Ti = input->shape[1], Hi = input->shape[2], Wi = input->shape[3];
  const int st = stride[0], sh = stride[1], sw = stride[2];
  if (st < 1 || sh < 1 || sw < 1) throw DimensionError("conv stride must be >= 1");
  const int pt = pad == Padding::Same ? detail::same_pad(Kt, st) : 0;
  const int ph = pad == Padding::Same ? detail::same_pad(Kh, sh) : 0;
  const int pw = pad == Padding::Same ? detail::same_pad(Kw, sw) : 0;
  const int To = detail::out_extent(Ti, Kt, st, pt);
  const int Ho = detail::out_extent(Hi, Kh, sh, ph);
  const int Wo = detail::out_extent(Wi, Kw, sw, pw);

  auto out = make_tensor<T>({Co, To, Ho, Wo});
  std::vector<T> padbuf;
  detail::conv3d_sample_forward(input->data.data(), Ci, Ti, Hi, Wi, params.weights->data.data(),
                                params.bias->data.data(), Co, Kt, Kh, Kw, st, sh, sw, pt, ph, pw,
                                out->data.data(), To, Ho, Wo, padbuf);

  const bool need = input->requires_grad || params.weights->requires_grad;
  out->requires_grad = need;
  if (need) {
    TensorPtr<T> in = input;
    LayerParams<T> p = params;
    tape.record([=]() {
      if (p.weights->requires_grad) {
        p.weights->ensure_grad();
        p.bias->ensure_grad();
      }
      if (in->requires_grad) in->ensure_grad();
      std::vector<T> pb, gpb;
      detail::conv3d_sample_backward(
          out->grad.data(), in->data.data(), Ci, Ti, Hi, Wi, p.weights->data.data(), Co, Kt, Kh,
          Kw, st, sh, sw, pt, ph, pw, To, Ho, Wo,
          p.weights->requires_grad ? p.weights->grad.data() : nullptr,
          p.weights->requires_grad ? p.bias->grad.data() : nullptr,
          in->requires_grad ? in->grad.data() : nullptr, pb, gpb);
    });
  }
  return out;
}

// input [Ci,H,W] or batched [N,Ci,H,W]; weights [Co,Ci,Kh,Kw].
template <typename T>
TensorPtr<T> conv2d_forward(Tape<T>& tape, const TensorPtr<T>& input, const LayerParams<T>& params,
                            std::array<int, 2> stride = {1, 1}, Padding pad = Padding::Valid) {
  check_params(params, 4);
  // runs through the space-time path with a unit temporal axis
  const auto& ws = params.weights->shape;

  auto run_one = [&](const TensorPtr<T>& x) {
    if (x->shape.size() != 3)
      throw DimensionError("conv2d expects [C,H,W] input, got " + shape_str(x->shape));
    const int Ci = ws[1];
    if (x->shape[0] != Ci)
      throw DimensionError("conv2d '" + params.name + "': input has " +
                           std::to_string(x->shape[0]) + " channels, weights expect " +
                           std::to_string(Ci));
    const int Hi = x->shape[1], Wi = x->shape[2];
    const int Kh = ws[2], Kw = ws[3];
    const int sh = stride[0], sw = stride[1];
    if (sh < 1 || sw < 1) throw DimensionError("conv stride must be >= 1");
    const int ph = pad == Padding::Same ? detail::same_pad(Kh, sh) : 0;
    const int pw = pad == Padding::Same ? detail::same_pad(Kw, sw) : 0;
    const int Ho = detail::out_extent(Hi, Kh, sh, ph);
    const int Wo = detail::out_extent(Wi, Kw, sw, pw);
    auto out = make_tensor<T>({ws[0], Ho, Wo});
    std::vector<T> padbuf;
    detail::conv3d_sample_forward(x->data.data(), Ci, 1, Hi, Wi, params.weights->data.data(),
                                  params.bias->data.data(), ws[0], 1, Kh, Kw, 1, sh, sw, 0, ph, pw,
                                  out->data.data(), 1, Ho, Wo, padbuf);
    const bool need = x->requires_grad || params.weights->requires_grad;
    out->requires_grad = need;
    if (need) {
      LayerParams<T> p = params;
      tape.record([=]() {
        if (p.weights->requires_grad) {
          p.weights->ensure_grad();
          p.bias->ensure_grad();
        }
        if (x->requires_grad) x->ensure_grad();
        std::vector<T> pb, gpb;
        detail::conv3d_sample_backward(out->grad.data(), x->data.data(), Ci, 1, Hi, Wi,
                                       p.weights->data.data(), ws[0], 1, Kh, Kw, 1, sh, sw, 0, ph,
                                       pw, 1, Ho, Wo,
                                       p.weights->requires_grad ? p.weights->grad.data() : nullptr,
                                       p.weights->requires_grad ? p.bias->grad.data() : nullptr,
                                       x->requires_grad ? x->grad.data() : nullptr, pb, gpb);
      });
    }
    return out;
  };

  if (input->shape.size() == 3) return run_one(input);
  if (input->shape.size() != 4)
    throw DimensionError("conv2d expects [C,H,W] or [N,C,H,W], got " + shape_str(input->shape));
  // batched: run samples independently and restack
  const int N = input->shape[0];
  const long slice = input->size() / N;
  std::vector<TensorPtr<T>> outs;
  for (int n = 0; n < N; ++n) {
    auto xs = make_tensor<T>({input->shape[1], input->shape[2], input->shape[3]});
    std::copy(input->data.begin() + n * slice, input->data.begin() + (n + 1) * slice,
              xs->data.begin());
    xs->requires_grad = input->requires_grad;
    if (input->requires_grad) {
      TensorPtr<T> in = input;
      tape.record([=]() {
        in->ensure_grad();
        if (!xs->grad.empty())
          for (long i = 0; i < slice; ++i) in->grad[n * slice + i] += xs->grad[i];
      });
    }
    outs.push_back(run_one(xs));
  }
  Shape os = outs[0]->shape;
  auto out = make_tensor<T>({N, os[0], os[1], os[2]});
  const long oslice = outs[0]->size();
  for (int n = 0; n < N; ++n)
    std::copy(outs[n]->data.begin(), outs[n]->data.end(), out->data.begin() + n * oslice);
  out->requires_grad = outs[0]->requires_grad;
  if (out->requires_grad) {
    tape.record([=]() {
      for (int n = 0; n < N; ++n) {
        outs[n]->ensure_grad();
        for (long i = 0; i < oslice; ++i) outs[n]->grad[i] += out->grad[n * oslice + i];
      }
    });
  }
  return out;
}

// window/stride in (H,W) order for [C,H,W], (H,W,T) order for [C,T,H,W].
template <typename T>
TensorPtr<T> maxpool_forward(Tape<T>& tape, const TensorPtr<T>& input, std::vector<int> window,
                             std::vector<int> stride = {}) {
  if (stride.empty()) stride = window;
  const auto& s = input->shape;
  int C, Ti, Hi, Wi, wt, wh, ww, st, sh, sw;
  bool spatial_only;
  if (s.size() == 3 && window.size() == 2) {
    spatial_only = true;
    C = s[0];
    Ti = 1;
    Hi = s[1];
    Wi = s[2];
    wh = window[0];
    ww = window[1];
    wt = 1;
    sh = stride[0];
    sw = stride[1];
    st = 1;
  } else if (s.size() == 4 && window.size() == 3) {
    spatial_only = false;
    C = s[0];
    Ti = s[1];
    Hi = s[2];
    Wi = s[3];
    wh = window[0];
    ww = window[1];
    wt = window[2];
    sh = stride[0];
    sw = stride[1];
    st = stride[2];
  } else {
    throw DimensionError("maxpool: input " + shape_str(s) + " incompatible with window rank " +
                         std::to_string(window.size()));
  }
  if (wt < 1 || wh < 1 || ww < 1) throw DimensionError("pool window extents must be >= 1");
  if (wt > Ti || wh > Hi || ww > Wi)
    throw DimensionError("pool window exceeds input extent " + shape_str(s));
  const int To = (Ti - wt) / st + 1, Ho = (Hi - wh) / sh + 1, Wo = (Wi - ww) / sw + 1;

  auto out = spatial_only ? make_tensor<T>({C, Ho, Wo}) : make_tensor<T>({C, To, Ho, Wo});
  auto argmax = std::make_shared<std::vector<long>>(out->data.size());
  long oi = 0;
  for (int c = 0; c < C; ++c)
    for (int to = 0; to < To; ++to)
      for (int ho = 0; ho < Ho; ++ho)
        for (int wo = 0; wo < Wo; ++wo, ++oi) {
          T best{};
          long bestidx = -1;
          for (int kt = 0; kt < wt; ++kt)
            for (int kh = 0; kh < wh; ++kh)
              for (int kw = 0; kw < ww; ++kw) {
                const long idx =
                    ((static_cast<long>(c) * Ti + to * st + kt) * Hi + ho * sh + kh) * Wi +
                    wo * sw + kw;
                // ties keep the first element in scan order
                if (bestidx < 0 || input->data[idx] > best) {
                  best = input->data[idx];
                  bestidx = idx;
                }
              }
          out->data[oi] = best;
          (*argmax)[oi] = bestidx;
        }

  out->requires_grad = input->requires_grad;
  if (input->requires_grad) {
    TensorPtr<T> in = input;
    tape.record([=]() {
      in->ensure_grad();
      for (size_t i = 0; i < argmax->size(); ++i) in->grad[(*argmax)[i]] += out->grad[i];
    });
  }
  return out;
}

// affine map on the flattened input: weights [out,in], bias [out]
template <typename T>
TensorPtr<T> dense_forward(Tape<T>& tape, const TensorPtr<T>& input, const LayerParams<T>& params) {
  check_params(params, 2);
  const int O = params.weights->shape[0], I = params.weights->shape[1];
  if (input->size() != I)
    throw DimensionError("dense '" + params.name + "': input length " +
                         std::to_string(input->size()) + " != weight inner dimension " +
                         std::to_string(I));
  auto out = make_tensor<T>({O});
  const T* w = params.weights->data.data();
  const T* x = input->data.data();
  for (int o = 0; o < O; ++o) {
    T acc = params.bias->data[o];
    const T* wrow = w + static_cast<long>(o) * I;
    for (int i = 0; i < I; ++i) acc += wrow[i] * x[i];
    out->data[o] = acc;
  }
  const bool need = input->requires_grad || params.weights->requires_grad;
  out->requires_grad = need;
  if (need) {
    TensorPtr<T> in = input;
    LayerParams<T> p = params;
    tape.record([=]() {
      const T* g = out->grad.data();
      if (p.weights->requires_grad) {
        p.weights->ensure_grad();
        p.bias->ensure_grad();
        for (int o = 0; o < O; ++o) {
          p.bias->grad[o] += g[o];
          T* wg = p.weights->grad.data() + static_cast<long>(o) * I;
          for (int i = 0; i < I; ++i) wg[i] += g[o] * in->data[i];
        }
      }
      if (in->requires_grad) {
        in->ensure_grad();
        const T* wv = p.weights->data.data();
        for (int o = 0; o < O; ++o) {
          const T* wrow = wv + static_cast<long>(o) * I;
          for (int i = 0; i < I; ++i) in->grad[i] += g[o] * wrow[i];
        }
      }
    });
  }
  return out;
}

template <typename T>
TensorPtr<T> relu(Tape<T>& tape, const TensorPtr<T>& input) {
  auto out = make_tensor<T>(input->shape);
  for (long i = 0; i < input->size(); ++i) out->data[i] = input->data[i] > T(0) ? input->data[i] : T(0);
  out->requires_grad = input->requires_grad;
  if (input->requires_grad) {
    TensorPtr<T> in = input;
    tape.record([=]() {
      in->ensure_grad();
      // subgradient at 0 is 0
      for (long i = 0; i < in->size(); ++i)
        if (in->data[i] > T(0)) in->grad[i] += out->grad[i];
    });
  }
  return out;
}

enum class Mode { Train, Eval };

// Inverted dropout: survivors are scaled by 1/(1-rate) so eval is identity.
template <typename T>
TensorPtr<T> dropout(Tape<T>& tape, const TensorPtr<T>& input, double rate, Mode mode,
                     std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw Error("dropout rate must be in [0,1)");
  if (mode == Mode::Eval || rate == 0.0) {
    auto out = make_tensor<T>(input->shape);
    out->data = input->data;
    out->requires_grad = input->requires_grad;
    if (input->requires_grad) {
      TensorPtr<T> in = input;
      tape.record([=]() {
        in->ensure_grad();
        for (long i = 0; i < in->size(); ++i) in->grad[i] += out->grad[i];
      });
    }
    return out;
  }
  const T scale = T(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<uint8_t>>(input->data.size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto out = make_tensor<T>(input->shape);
  for (long i = 0; i < input->size(); ++i) {
    const bool keep = u(rng) >= rate;
    (*mask)[i] = keep;
    out->data[i] = keep ? input->data[i] * scale : T(0);
  }
  out->requires_grad = input->requires_grad;
  if (input->requires_grad) {
    TensorPtr<T> in = input;
    tape.record([=]() {
      in->ensure_grad();
      for (long i = 0; i < in->size(); ++i)
        if ((*mask)[i]) in->grad[i] += out->grad[i] * scale;
    });
  }
  return out;
}

// Returns (probabilities, scalar -log p[target]); log-sum-exp stabilized.
template <typename T>
std::pair<TensorPtr<T>, TensorPtr<T>> softmax_crossentropy(Tape<T>& tape,
                                                           const TensorPtr<T>& logits,
                                                           int target) {
  if (logits->shape.size() != 1 || logits->shape[0] < 2)
    throw DimensionError("softmax_crossentropy expects a logit vector of length >= 2");
  const int N = logits->shape[0];
  if (target < 0 || target >= N)
    throw Error("target class " + std::to_string(target) + " out of range [0," +
                std::to_string(N) + ")");
  T mx = logits->data[0];
  for (int i = 1; i < N; ++i) mx = std::max(mx, logits->data[i]);
  T denom = 0;
  auto probs = make_tensor<T>({N});
  for (int i = 0; i < N; ++i) {
    probs->data[i] = std::exp(logits->data[i] - mx);
    denom += probs->data[i];
  }
  for (int i = 0; i < N; ++i) probs->data[i] /= denom;
  auto loss = make_tensor<T>({1});
  loss->data[0] = -(logits->data[target] - mx - std::log(denom));

  probs->requires_grad = false;  // fused node; gradient flows through loss only
  loss->requires_grad = logits->requires_grad;
  if (logits->requires_grad) {
    TensorPtr<T> in = logits;
    tape.record([=]() {
      in->ensure_grad();
      const T g = loss->grad[0];
      for (int i = 0; i < N; ++i)
        in->grad[i] += g * (probs->data[i] - (i == target ? T(1) : T(0)));
    });
  }
  return {probs, loss};
}

template <typename T>
TensorPtr<T> reshape(Tape<T>& tape, const TensorPtr<T>& input, Shape shape) {
  if (numel(shape) != input->size())
    throw DimensionError("reshape " + shape_str(input->shape) + " -> " + shape_str(shape) +
                         " changes element count");
  auto out = make_tensor<T>(std::move(shape));
  out->data = input->data;
  out->requires_grad = input->requires_grad;
  if (input->requires_grad) {
    TensorPtr<T> in = input;
    tape.record([=]() {
      in->ensure_grad();
      for (long i = 0; i < in->size(); ++i) in->grad[i] += out->grad[i];
    });
  }
  return out;
}

template <typename T>
void sgd_update(std::vector<LayerParams<T>>& params, double lr) {
  if (lr < 0.0) throw Error("learning rate must be >= 0");
  for (auto& p : params) {
    for (TensorPtr<T> t : {p.weights, p.bias}) {
      if (t->grad.empty()) continue;
      for (long i = 0; i < t->size(); ++i) t->data[i] -= T(lr) * t->grad[i];
      t->zero_grad();
    }
  }
}

// Glorot uniform: +/- sqrt(6/(fan_in+fan_out))
template <typename T>
void init_glorot(Tensor<T>& t, long fan_in, long fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (auto& v : t.data) v = T(u(rng));
}

}  // namespace ofmt

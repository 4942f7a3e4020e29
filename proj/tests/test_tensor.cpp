#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ofmt/layers.hpp"
#include "ofmt/tensor.hpp"
#include "test_util.hpp"

using namespace ofmt;

namespace {

template <typename T>
LayerParams<T> make_params(Shape wshape, std::mt19937_64& rng, const char* name = "p") {
  LayerParams<T> p;
  p.weights = make_tensor<T>(wshape, true);
  p.bias = make_tensor<T>({wshape[0]}, true);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : p.weights->data) v = T(u(rng));
  for (auto& v : p.bias->data) v = T(u(rng));
  p.name = name;
  return p;
}

// quadruple-loop reference convolution, valid padding, stride 1
std::vector<double> ref_conv2d(const std::vector<double>& in, int Ci, int H, int W,
                               const std::vector<double>& wt, const std::vector<double>& b, int Co,
                               int Kh, int Kw) {
  const int Ho = H - Kh + 1, Wo = W - Kw + 1;
  std::vector<double> out(Co * Ho * Wo);
  for (int co = 0; co < Co; ++co)
    for (int ho = 0; ho < Ho; ++ho)
      for (int wo = 0; wo < Wo; ++wo) {
        double acc = b[co];
        for (int ci = 0; ci < Ci; ++ci)
          for (int kh = 0; kh < Kh; ++kh)
            for (int kw = 0; kw < Kw; ++kw)
              acc += wt[((co * Ci + ci) * Kh + kh) * Kw + kw] *
                     in[(ci * H + ho + kh) * W + wo + kw];
        out[(co * Ho + ho) * Wo + wo] = acc;
      }
  return out;
}

std::vector<double> ref_conv3d(const std::vector<double>& in, int Ci, int Ti, int H, int W,
                               const std::vector<double>& wt, const std::vector<double>& b, int Co,
                               int K) {
  const int To = Ti - K + 1, Ho = H - K + 1, Wo = W - K + 1;
  std::vector<double> out(Co * To * Ho * Wo);
  for (int co = 0; co < Co; ++co)
    for (int to = 0; to < To; ++to)
      for (int ho = 0; ho < Ho; ++ho)
        for (int wo = 0; wo < Wo; ++wo) {
          double acc = b[co];
          for (int ci = 0; ci < Ci; ++ci)
            for (int kt = 0; kt < K; ++kt)
              for (int kh = 0; kh < K; ++kh)
                for (int kw = 0; kw < K; ++kw)
                  acc += wt[(((co * Ci + ci) * K + kt) * K + kh) * K + kw] *
                         in[((ci * Ti + to + kt) * H + ho + kh) * W + wo + kw];
          out[((co * To + to) * Ho + ho) * Wo + wo] = acc;
        }
  return out;
}

}  // namespace

TEST_CASE("conv2d: zero input gives zero output") {
  std::mt19937_64 rng(1);
  Tape<double> tape;
  auto p = make_params<double>({2, 1, 3, 3}, rng);
  std::fill(p.bias->data.begin(), p.bias->data.end(), 0.0);
  auto x = make_tensor<double>({1, 3, 3});
  auto y = conv2d_forward(tape, x, p);
  for (double v : y->data) CHECK(v == 0.0);
}

TEST_CASE("conv2d: 1x1 unit kernel is identity") {
  std::mt19937_64 rng(2);
  Tape<double> tape;
  LayerParams<double> p;
  p.weights = make_tensor<double>({1, 1, 1, 1}, std::vector<double>{1.0});
  p.bias = make_tensor<double>({1}, std::vector<double>{0.0});
  auto x = make_tensor<double>({1, 4, 4});
  testutil::fill_uniform(x->data, rng);
  auto y = conv2d_forward(tape, x, p);
  REQUIRE(y->shape == Shape{1, 4, 4});
  for (long i = 0; i < x->size(); ++i) CHECK(y->data[i] == doctest::Approx(x->data[i]));
}

TEST_CASE("conv2d: matches quadruple-loop reference") {
  std::mt19937_64 rng(3);
  Tape<double> tape;
  auto p = make_params<double>({1, 1, 3, 3}, rng);
  auto x = make_tensor<double>({1, 4, 4});
  testutil::fill_uniform(x->data, rng);
  auto y = conv2d_forward(tape, x, p);
  REQUIRE(y->shape == Shape{1, 2, 2});
  auto ref = ref_conv2d(x->data, 1, 4, 4, p.weights->data, p.bias->data, 1, 3, 3);
  for (size_t i = 0; i < ref.size(); ++i) CHECK(y->data[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("conv2d: shape mismatch raises dimension error") {
  std::mt19937_64 rng(4);
  Tape<double> tape;
  auto p = make_params<double>({1, 3, 3, 3}, rng);
  auto x = make_tensor<double>({1, 4, 4});  // one channel, weights expect three
  CHECK_THROWS_AS(conv2d_forward(tape, x, p), DimensionError);
}

TEST_CASE("conv3d: zero input gives zero output") {
  std::mt19937_64 rng(5);
  Tape<double> tape;
  auto p = make_params<double>({2, 1, 3, 3, 3}, rng);
  std::fill(p.bias->data.begin(), p.bias->data.end(), 0.0);
  auto x = make_tensor<double>({1, 4, 4, 4});
  auto y = conv3d_forward(tape, x, p);
  for (double v : y->data) CHECK(v == 0.0);
}

TEST_CASE("conv3d: centered delta kernel with same padding is identity") {
  std::mt19937_64 rng(6);
  Tape<double> tape;
  LayerParams<double> p;
  p.weights = make_tensor<double>({1, 1, 3, 3, 3}, true);
  p.weights->data[(1 * 3 + 1) * 3 + 1] = 1.0;  // center tap
  p.bias = make_tensor<double>({1}, std::vector<double>{0.0});
  auto x = make_tensor<double>({1, 4, 4, 4});
  testutil::fill_uniform(x->data, rng);
  auto y = conv3d_forward(tape, x, p, {1, 1, 1}, Padding::Same);
  REQUIRE(y->shape == x->shape);
  for (long i = 0; i < x->size(); ++i) CHECK(y->data[i] == doctest::Approx(x->data[i]));
}

TEST_CASE("conv3d: matches 5-loop reference") {
  std::mt19937_64 rng(7);
  Tape<double> tape;
  auto p = make_params<double>({2, 1, 3, 3, 3}, rng);
  auto x = make_tensor<double>({1, 4, 4, 4});
  testutil::fill_uniform(x->data, rng);
  auto y = conv3d_forward(tape, x, p);
  REQUIRE(y->shape == Shape{2, 2, 2, 2});
  auto ref = ref_conv3d(x->data, 1, 4, 4, 4, p.weights->data, p.bias->data, 2, 3);
  for (size_t i = 0; i < ref.size(); ++i) CHECK(y->data[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("conv linearity in the input") {
  std::mt19937_64 rng(8);
  Tape<double> tape;
  auto p = make_params<double>({2, 1, 3, 3}, rng);
  std::fill(p.bias->data.begin(), p.bias->data.end(), 0.0);
  auto x = make_tensor<double>({1, 5, 5});
  auto y = make_tensor<double>({1, 5, 5});
  testutil::fill_uniform(x->data, rng);
  testutil::fill_uniform(y->data, rng);
  const double a = 0.7, b = -1.3;
  auto mix = make_tensor<double>({1, 5, 5});
  for (long i = 0; i < mix->size(); ++i) mix->data[i] = a * x->data[i] + b * y->data[i];
  auto cm = conv2d_forward(tape, mix, p);
  auto cx = conv2d_forward(tape, x, p);
  auto cy = conv2d_forward(tape, y, p);
  for (long i = 0; i < cm->size(); ++i)
    CHECK(std::abs(cm->data[i] - (a * cx->data[i] + b * cy->data[i])) < 1e-9);
}

TEST_CASE("maxpool: constant input, direct max, temporal window 1") {
  Tape<double> tape;
  auto c = make_tensor<double>({1, 4, 4});
  std::fill(c->data.begin(), c->data.end(), 3.5);
  auto pc = maxpool_forward(tape, c, {2, 2});
  for (double v : pc->data) CHECK(v == 3.5);

  auto x = make_tensor<double>({1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  auto px = maxpool_forward(tape, x, {2, 2});
  REQUIRE(px->size() == 1);
  CHECK(px->data[0] == 4.0);

  // first C3D pool: spatial 2x2, temporal 1 leaves T untouched
  auto v = make_tensor<double>({1, 16, 8, 8});
  auto pv = maxpool_forward(tape, v, {2, 2, 1});
  CHECK(pv->shape == Shape{1, 16, 4, 4});
}

TEST_CASE("maxpool: window larger than input raises") {
  Tape<double> tape;
  auto x = make_tensor<double>({1, 2, 2});
  CHECK_THROWS_AS(maxpool_forward(tape, x, {3, 3}), DimensionError);
}

TEST_CASE("maxpool: output bounded by and attained in the input") {
  std::mt19937_64 rng(9);
  Tape<double> tape;
  for (int rep = 0; rep < 20; ++rep) {
    auto x = make_tensor<double>({2, 6, 6});
    testutil::fill_uniform(x->data, rng);
    auto y = maxpool_forward(tape, x, {2, 2});
    const double mx = *std::max_element(x->data.begin(), x->data.end());
    for (double v : y->data) {
      CHECK(v <= mx);
      CHECK(std::find(x->data.begin(), x->data.end(), v) != x->data.end());
    }
  }
}

TEST_CASE("dense: zero weights give bias, identity weights give input") {
  std::mt19937_64 rng(10);
  Tape<double> tape;
  LayerParams<double> p;
  p.weights = make_tensor<double>({3, 3});
  p.bias = make_tensor<double>({3}, {0.5, -1.0, 2.0});
  auto x = make_tensor<double>({3}, {1.0, 2.0, 3.0});
  auto y = dense_forward(tape, x, p);
  for (int i = 0; i < 3; ++i) CHECK(y->data[i] == p.bias->data[i]);

  for (int i = 0; i < 3; ++i) p.weights->data[i * 3 + i] = 1.0;
  std::fill(p.bias->data.begin(), p.bias->data.end(), 0.0);
  auto y2 = dense_forward(tape, x, p);
  for (int i = 0; i < 3; ++i) CHECK(y2->data[i] == x->data[i]);
}

TEST_CASE("dense: matches double-loop reference, rejects length mismatch") {
  std::mt19937_64 rng(11);
  Tape<double> tape;
  auto p = make_params<double>({3, 4}, rng);
  auto x = make_tensor<double>({4});
  testutil::fill_uniform(x->data, rng);
  auto y = dense_forward(tape, x, p);
  for (int o = 0; o < 3; ++o) {
    double acc = p.bias->data[o];
    for (int i = 0; i < 4; ++i) acc += p.weights->data[o * 4 + i] * x->data[i];
    CHECK(y->data[o] == doctest::Approx(acc).epsilon(1e-12));
  }
  auto bad = make_tensor<double>({5});
  CHECK_THROWS_AS(dense_forward(tape, bad, p), DimensionError);
}

TEST_CASE("relu basics") {
  Tape<double> tape;
  auto x = make_tensor<double>({3}, {-1.0, 0.0, 2.0});
  auto y = relu(tape, x);
  CHECK(y->data == std::vector<double>{0.0, 0.0, 2.0});
}

TEST_CASE("dropout: eval and rate 0 are bit-identical; train mean preserved") {
  std::mt19937_64 rng(12);
  auto x = make_tensor<double>({100000});
  std::fill(x->data.begin(), x->data.end(), 1.0);
  Tape<double> tape;
  auto e = dropout(tape, x, 0.4, Mode::Eval, rng);
  CHECK(e->data == x->data);
  auto z = dropout(tape, x, 0.0, Mode::Train, rng);
  CHECK(z->data == x->data);

  auto t = dropout(tape, x, 0.4, Mode::Train, rng);
  double mean = 0;
  for (double v : t->data) mean += v;
  mean /= t->size();
  CHECK(std::abs(mean - 1.0) < 0.02);

  CHECK_THROWS_AS(dropout(tape, x, 1.0, Mode::Train, rng), Error);
}

TEST_CASE("softmax cross-entropy: symmetry, saturation, direct formula") {
  Tape<double> tape;
  auto eq = make_tensor<double>({10});
  std::fill(eq->data.begin(), eq->data.end(), 0.7);
  auto [p1, l1] = softmax_crossentropy(tape, eq, 3);
  double sum = 0;
  for (double v : p1->data) {
    CHECK(v == doctest::Approx(0.1));
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(l1->data[0] == doctest::Approx(std::log(10.0)));

  auto hot = make_tensor<double>({4}, {1000.0, 0.0, 0.0, 0.0});
  auto [p2, l2] = softmax_crossentropy(tape, hot, 0);
  CHECK(l2->data[0] <= 1e-6);

  std::mt19937_64 rng(13);
  auto lg = make_tensor<double>({7});
  testutil::fill_uniform(lg->data, rng, -3, 3);
  auto [p3, l3] = softmax_crossentropy(tape, lg, 5);
  double denom = 0;
  for (double v : lg->data) denom += std::exp(v);
  double direct = 0;
  for (int i = 0; i < 7; ++i) {
    const double pi = std::exp(lg->data[i]) / denom;
    direct -= (i == 5 ? 1.0 : 0.0) * std::log(pi);
  }
  CHECK(l3->data[0] == doctest::Approx(direct).epsilon(1e-10));

  CHECK_THROWS_AS(softmax_crossentropy(tape, lg, 7), Error);
}

TEST_CASE("softmax outputs lie in (0,1) and sum to one") {
  std::mt19937_64 rng(14);
  for (int rep = 0; rep < 50; ++rep) {
    Tape<double> tape;
    auto lg = make_tensor<double>({10});
    testutil::fill_uniform(lg->data, rng, -50, 50);
    auto [p, l] = softmax_crossentropy(tape, lg, 0);
    double s = 0;
    for (double v : p->data) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("backward: rejects non-scalar, zero grad for unused params") {
  std::mt19937_64 rng(15);
  Tape<double> tape;
  auto x = make_tensor<double>({1, 4, 4}, true);
  testutil::fill_uniform(x->data, rng);
  auto p = make_params<double>({1, 1, 3, 3}, rng);
  auto y = conv2d_forward(tape, x, p);
  CHECK_THROWS_AS(tape.backward(y), Error);

  auto unused = make_params<double>({2, 2}, rng, "unused");
  auto flat = reshape(tape, y, {4});
  auto [probs, loss] = softmax_crossentropy(tape, flat, 1);
  tape.backward(loss);
  CHECK(unused.weights->grad.empty());  // never touched by the graph
  REQUIRE(!p.weights->grad.empty());
}

TEST_CASE("backward: dense+softmaxCE gradient equals (probs - onehot) outer input") {
  std::mt19937_64 rng(16);
  Tape<double> tape;
  auto p = make_params<double>({4, 6}, rng);
  auto x = make_tensor<double>({6});
  testutil::fill_uniform(x->data, rng);
  auto y = dense_forward(tape, x, p);
  auto [probs, loss] = softmax_crossentropy(tape, y, 2);
  tape.backward(loss);
  for (int o = 0; o < 4; ++o) {
    const double delta = probs->data[o] - (o == 2 ? 1.0 : 0.0);
    CHECK(p.bias->grad[o] == doctest::Approx(delta).epsilon(1e-10));
    for (int i = 0; i < 6; ++i)
      CHECK(p.weights->grad[o * 6 + i] == doctest::Approx(delta * x->data[i]).epsilon(1e-10));
  }
}

TEST_CASE("gradients of every layer type match central finite differences") {
  std::mt19937_64 rng(17);
  auto conv2 = make_params<double>({3, 2, 3, 3}, rng, "c2");
  auto conv3 = make_params<double>({2, 1, 3, 3, 3}, rng, "c3");
  auto d1 = make_params<double>({5, 12}, rng, "d1");
  auto d2 = make_params<double>({4, 5}, rng, "d2");
  auto x2 = make_tensor<double>({2, 6, 6}, true);
  auto x3 = make_tensor<double>({1, 4, 6, 6}, true);
  testutil::fill_uniform(x2->data, rng);
  testutil::fill_uniform(x3->data, rng);

  auto forward2d = [&](Tape<double>& tape) {
    auto c = conv2d_forward(tape, x2, conv2, {1, 1}, Padding::Same);
    auto r = relu(tape, c);
    auto pl = maxpool_forward(tape, r, {3, 3});
    auto f = reshape(tape, pl, {12});
    auto h = dense_forward(tape, f, d1);
    auto h2 = relu(tape, h);
    auto o = dense_forward(tape, h2, d2);
    return softmax_crossentropy(tape, o, 1).second;
  };
  {
    Tape<double> tape;
    auto loss = forward2d(tape);
    tape.backward(loss);
    auto res = testutil::grad_check({conv2.weights, conv2.bias, d1.weights, d2.weights, x2},
                                    [&]() {
                                      Tape<double> t2;
                                      return forward2d(t2)->data[0];
                                    },
                                    rng, 8);
    CHECK(res.max_rel_err < 1e-4);
  }

  {
    // dedicated 3D chain with its own dense head
    auto head = make_params<double>({4, 2 * 2 * 3 * 3}, rng, "head3");
    auto fwd = [&](Tape<double>& tape) {
      auto c = conv3d_forward(tape, x3, conv3, {1, 1, 1}, Padding::Same);
      auto r = relu(tape, c);
      auto pl = maxpool_forward(tape, r, {2, 2, 2});
      auto f = reshape(tape, pl, {static_cast<int>(pl->size())});
      auto o = dense_forward(tape, f, head);
      return softmax_crossentropy(tape, o, 3).second;
    };
    Tape<double> tape;
    auto loss = fwd(tape);
    tape.backward(loss);
    auto res = testutil::grad_check({conv3.weights, conv3.bias, head.weights, x3},
                                    [&]() {
                                      Tape<double> t2;
                                      return fwd(t2)->data[0];
                                    },
                                    rng, 8);
    CHECK(res.max_rel_err < 1e-4);
  }
}

TEST_CASE("sgd_update arithmetic and lr validation") {
  std::mt19937_64 rng(18);
  LayerParams<double> p;
  p.weights = make_tensor<double>({1}, {1.0}, true);
  p.bias = make_tensor<double>({1}, {0.0}, true);
  p.weights->ensure_grad();
  p.bias->ensure_grad();
  p.weights->grad[0] = 0.5;
  std::vector<LayerParams<double>> ps{p};

  sgd_update(ps, 0.0);
  CHECK(p.weights->data[0] == 1.0);

  p.weights->grad[0] = 0.5;
  sgd_update(ps, 0.01);
  CHECK(p.weights->data[0] == doctest::Approx(0.995));
  CHECK(p.weights->grad[0] == 0.0);  // cleared

  CHECK_THROWS_AS(sgd_update(ps, -0.1), Error);
}

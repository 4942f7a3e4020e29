#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ofmt/layers.hpp"
#include "ofmt/tensor.hpp"

namespace testutil {

inline void fill_uniform(ofmt::Tensor<double>& t, std::mt19937_64& rng, double lo = -1.0,
                         double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data) v = u(rng);
}

template <typename T>
inline void fill_uniform(std::vector<T>& v, std::mt19937_64& rng, double lo = -1.0,
                         double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& x : v) x = T(u(rng));
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  long coords_checked = 0;
};

// Central finite differences against the analytic gradient already stored in
// each tensor's grad buffer. `loss_fn` must re-run the whole forward pass.
inline GradCheckResult grad_check(const std::vector<ofmt::TensorPtr<double>>& leaves,
                                  const std::function<double()>& loss_fn,
                                  std::mt19937_64& rng, int coords_per_tensor = 10,
                                  double h = 1e-4) {
  GradCheckResult res;
  for (const auto& t : leaves) {
    std::vector<long> idx;
    if (t->size() <= coords_per_tensor) {
      for (long i = 0; i < t->size(); ++i) idx.push_back(i);
    } else {
      std::uniform_int_distribution<long> pick(0, t->size() - 1);
      for (int i = 0; i < coords_per_tensor; ++i) idx.push_back(pick(rng));
    }
    for (long i : idx) {
      const double orig = t->data[i];
      t->data[i] = orig + h;
      const double lp = loss_fn();
      t->data[i] = orig - h;
      const double lm = loss_fn();
      t->data[i] = orig;
      const double fd = (lp - lm) / (2.0 * h);
      const double an = t->grad.empty() ? 0.0 : t->grad[i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
      res.max_rel_err = std::max(res.max_rel_err, std::abs(fd - an) / denom);
      ++res.coords_checked;
    }
  }
  return res;
}

}  // namespace testutil

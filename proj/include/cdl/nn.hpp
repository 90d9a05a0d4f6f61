#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "cdl/autograd.hpp"
#include "cdl/random.hpp"

namespace cdl::nn {

using ag::Matrix;
using ag::ParameterStore;
using ag::Var;

/// Fills every parameter with U(-1/sqrt(fan_in), 1/sqrt(fan_in)); parameters
/// whose name ends in ".b" (biases) are zeroed.
void init_uniform(ParameterStore& params, Rng& rng);

/// Adam with optional global gradient-norm clipping.
class Adam {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 5.0;  // <= 0 disables clipping
  };

  Adam() = default;
  Adam(const ParameterStore& params, Options options);

  /// Applies one update from the accumulated gradients (scaled by
  /// `grad_scale`) and zeroes them. Returns the pre-clip gradient norm.
  double step(ParameterStore& params, double grad_scale = 1.0);

  const Options& options() const { return options_; }
  void set_lr(double lr) { options_.lr = lr; }
  std::int64_t steps() const { return t_; }

  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  Options options_;
  std::int64_t t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

/// Indices of one GRU layer's parameters inside a ParameterStore. Gates are
/// stacked as [update; reset; candidate].
struct GruLayer {
  std::size_t w = 0;    // 3H x in
  std::size_t u = 0;    // 3H x H
  std::size_t b = 0;    // 3H x 1, input side
  std::size_t bh = 0;   // 3H x 1, recurrent side

  static GruLayer create(ParameterStore& params, const std::string& prefix, int input, int hidden);
  static std::size_t parameter_count(int input, int hidden) {
    return 3 * static_cast<std::size_t>(hidden) * (input + hidden) + 6 * static_cast<std::size_t>(hidden);
  }
};

/// Graph-bound handles of a GRU layer.
struct GruVars {
  Var w, u, b, bh;
  int hidden = 0;
};

/// h' = (1 - z) * n + z * h with z, r sigmoid gates and
/// n = tanh(W_n x + b_n + r * (U_n h + bh_n)).
Var gru_step(const GruVars& layer, Var x, Var h);

}  // namespace cdl::nn

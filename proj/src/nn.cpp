#include "cdl/nn.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "cdl/error.hpp"

namespace cdl::nn {

void init_uniform(ParameterStore& params, Rng& rng) {
  for (auto& p : params) {
    const bool bias = p.name.size() >= 2 && p.name.compare(p.name.size() - 2, 2, ".b") == 0;
    if (bias) {
      p.value.setZero();
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(1, p.value.cols())));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value(i) = uniform(rng, -bound, bound);
  }
}

Adam::Adam(const ParameterStore& params, Options options) : options_(options) {
  for (const auto& p : params) {
    m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
}

double Adam::step(ParameterStore& params, double grad_scale) {
  if (params.size() != m_.size()) throw std::logic_error("optimizer state does not match parameters");
  const double raw = params.grad_norm() * std::abs(grad_scale);
  if (!std::isfinite(raw)) throw DivergenceError("non-finite gradient norm");
  double factor = grad_scale;
  if (options_.clip_norm > 0.0 && raw > options_.clip_norm) factor *= options_.clip_norm / raw;

  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (options_.lr != 0.0) {
      const Matrix g = p.grad * factor;
      m_[i] = b1 * m_[i] + (1.0 - b1) * g;
      v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
      p.value.array() -= options_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + options_.eps);
    }
    p.grad.setZero();
  }
  return raw;
}

void Adam::save(std::ostream& out) const {
  auto write = [&](const void* d, std::size_t n) { out.write(static_cast<const char*>(d), static_cast<std::streamsize>(n)); };
  write(&t_, sizeof t_);
  const auto n = static_cast<std::uint64_t>(m_.size());
  write(&n, sizeof n);
  for (std::size_t i = 0; i < m_.size(); ++i) {
    const auto sz = static_cast<std::uint64_t>(m_[i].size());
    write(&sz, sizeof sz);
    write(m_[i].data(), sizeof(double) * sz);
    write(v_[i].data(), sizeof(double) * sz);
  }
}

void Adam::load(std::istream& in) {
  auto read = [&](void* d, std::size_t n) {
    in.read(static_cast<char*>(d), static_cast<std::streamsize>(n));
    if (!in) throw IntegrityError("truncated optimizer state");
  };
  read(&t_, sizeof t_);
  std::uint64_t n = 0;
  read(&n, sizeof n);
  if (n != m_.size()) throw IntegrityError("optimizer state has the wrong parameter count");
  for (std::size_t i = 0; i < m_.size(); ++i) {
    std::uint64_t sz = 0;
    read(&sz, sizeof sz);
    if (sz != static_cast<std::uint64_t>(m_[i].size())) throw IntegrityError("optimizer state shape mismatch");
    read(m_[i].data(), sizeof(double) * sz);
    read(v_[i].data(), sizeof(double) * sz);
  }
}

GruLayer GruLayer::create(ParameterStore& params, const std::string& prefix, int input, int hidden) {
  GruLayer l;
  l.w = params.add(prefix + ".W", 3 * hidden, input);
  l.u = params.add(prefix + ".U", 3 * hidden, hidden);
  l.b = params.add(prefix + ".b", 3 * hidden, 1);
  l.bh = params.add(prefix + ".bh.b", 3 * hidden, 1);
  return l;
}

Var gru_step(const GruVars& layer, Var x, Var h) {
  const int hd = layer.hidden;
  Var gx = ag::add(ag::matmul(layer.w, x), layer.b);
  Var gh = ag::add(ag::matmul(layer.u, h), layer.bh);
  Var z = ag::sigmoid(ag::add(ag::rows(gx, 0, hd), ag::rows(gh, 0, hd)));
  Var r = ag::sigmoid(ag::add(ag::rows(gx, hd, hd), ag::rows(gh, hd, hd)));
  Var n = ag::tanh(ag::add(ag::rows(gx, 2 * hd, hd), ag::cmul(r, ag::rows(gh, 2 * hd, hd))));
  // (1 - z) * n + z * h  ==  n + z * (h - n)
  return ag::add(n, ag::cmul(z, ag::sub(h, n)));
}

}  // namespace cdl::nn

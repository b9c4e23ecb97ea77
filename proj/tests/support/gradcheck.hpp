#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "metroflow/autodiff/ops.hpp"

namespace metroflow::testing {

inline Tensor random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                            double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(rows, cols);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

inline double relative_error(double a, double b, double floor = 1e-2) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

/// Scalar loss built from variables bound to the given input tensors.
using LossFn = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheck {
  double max_error = 0.0;
  std::size_t checked = 0;
};

/// Compares tape gradients of every input entry with central differences.
inline GradCheck check_gradients(const LossFn& loss, std::vector<Tensor> inputs, double eps = 1e-5,
                                 double floor = 1e-2) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.variable(t));
    tape.backward(loss(tape, vars));
    for (std::size_t i = 0; i < vars.size(); ++i) {
      analytic.push_back(vars[i].grad().empty() ? Tensor::zeros_like(inputs[i]) : vars[i].grad());
    }
  }
  auto evaluate = [&]() {
    Tape tape(false);
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.constant(t));
    return loss(tape, vars).value()(0, 0);
  };
  GradCheck result;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      double& x = inputs[i].values()[j];
      const double saved = x;
      x = saved + eps;
      const double up = evaluate();
      x = saved - eps;
      const double down = evaluate();
      x = saved;
      const double numeric = (up - down) / (2 * eps);
      result.max_error = std::max(result.max_error, relative_error(analytic[i].values()[j], numeric, floor));
      ++result.checked;
    }
  }
  return result;
}

/// Same check for parameters owned by a module: loss is rebuilt on a fresh tape.
inline GradCheck check_parameter_gradients(const std::function<Var(Tape&)>& loss,
                                           const std::vector<Parameter*>& params, double eps = 1e-5,
                                           double floor = 1e-2) {
  for (Parameter* p : params) p->grad = Tensor::zeros_like(p->value);
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  GradCheck result;
  for (Parameter* p : params) {
    const Tensor analytic = p->grad;
    for (std::size_t j = 0; j < p->value.size(); ++j) {
      double& x = p->value.values()[j];
      const double saved = x;
      x = saved + eps;
      double up = 0.0, down = 0.0;
      {
        Tape tape(false);
        up = loss(tape).value()(0, 0);
      }
      x = saved - eps;
      {
        Tape tape(false);
        down = loss(tape).value()(0, 0);
      }
      x = saved;
      const double numeric = (up - down) / (2 * eps);
      result.max_error = std::max(result.max_error, relative_error(analytic.values()[j], numeric, floor));
      ++result.checked;
    }
  }
  return result;
}

/// Σ_ij c_ij·x_ij with fixed random weights c: a loss with a dense, generic gradient.
inline Var weighted_sum(Tape& tape, Var x, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  const Tensor c = random_tensor(x.rows(), x.cols(), rng, -1.0, 1.0);
  return ad::sum(ad::mul(x, tape.constant(c)));
}

}  // namespace metroflow::testing

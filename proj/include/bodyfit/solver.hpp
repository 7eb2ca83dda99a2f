#pragma once

// Powell's dogleg trust-region method for nonlinear least squares,
// F(x) = |r(x)|^2, with analytic, dual-number or finite-difference Jacobians.

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bodyfit/dual.hpp"
#include "bodyfit/errors.hpp"

namespace bodyfit {

struct Objective {
  int dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residuals;
  /// Optional: fills residuals and Jacobian together. Finite differences are
  /// used when absent.
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd&)> linearize;
};

enum class Termination { GradientTolerance, StepTolerance, MaxIterations };

const char* to_string(Termination t);

struct SolveOptions {
  double gtol = 1e-8;   ///< on |grad F|_inf
  double xtol = 1e-10;  ///< relative step size
  int max_iterations = 100;
  double initial_radius = 0.0;  ///< 0: length of the first Gauss-Newton step
  double max_radius = 1e6;
  std::string trace_path;  ///< optional CSV log of every iteration
};

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;  ///< after the iteration (accepted value)
  double radius = 0.0;     ///< radius used for the step
  double step_norm = 0.0;
  double gain_ratio = 0.0;
  bool accepted = false;
};

struct SolveReport {
  Eigen::VectorXd x;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
  int accepted_steps = 0;
  Termination termination = Termination::MaxIterations;
  std::vector<double> trace;  ///< objective after each accepted step, starting at x0
  std::vector<IterationRecord> history;
};

SolveReport minimize(const Objective& obj, const Eigen::VectorXd& x0,
                     const SolveOptions& opts = {});

/// Jacobian from the objective's provider, else central differences.
Eigen::MatrixXd jacobian(const Objective& obj, const Eigen::VectorXd& x);

Eigen::MatrixXd finite_difference_jacobian(const Objective& obj, const Eigen::VectorXd& x,
                                           double step = 1e-6);

/// Dogleg step for the model |r + J h|^2 inside radius `radius`, given the
/// gradient g = J^T r and the Gauss-Newton step.
Eigen::VectorXd dogleg_step(const Eigen::MatrixXd& J, const Eigen::VectorXd& g,
                            const Eigen::VectorXd& gauss_newton, double radius);

/// Minimizer of |r + J h|^2 (damped slightly when J^T J is singular).
Eigen::VectorXd gauss_newton_step(const Eigen::MatrixXd& J, const Eigen::VectorXd& r);

// ---------------------------------------------------------------------------
// Automatic differentiation. `f` is a generic callable
//   f(const T* params, std::vector<T>& residuals)
// over the full parameter vector; only the indices in `free` are optimized,
// the others stay at their `base` values.

namespace detail {

template <int N, class F>
void dual_linearize(F& f, const Eigen::VectorXd& base, const std::vector<int>& free,
                    const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
  using D = Dual<N>;
  const int n = static_cast<int>(free.size());
  std::vector<D> params(static_cast<std::size_t>(base.size()));
  for (Eigen::Index i = 0; i < base.size(); ++i) params[i] = D(base[i]);
  for (int k = 0; k < n; ++k) params[free[k]] = D::variable(x[k], k, n);
  std::vector<D> out;
  f(params.data(), out);
  r.resize(static_cast<Eigen::Index>(out.size()));
  J.resize(static_cast<Eigen::Index>(out.size()), n);
  for (std::size_t i = 0; i < out.size(); ++i) {
    r[i] = out[i].v;
    if (out[i].is_constant()) {
      J.row(i).setZero();
    } else {
      J.row(i) = out[i].d.transpose();
    }
  }
}

}  // namespace detail

template <class F>
Objective autodiff_objective(const Eigen::VectorXd& base, std::vector<int> free, F f) {
  Objective obj;
  obj.dim = static_cast<int>(free.size());
  obj.residuals = [base, free, f](const Eigen::VectorXd& x) mutable {
    Eigen::VectorXd params = base;
    for (std::size_t k = 0; k < free.size(); ++k) params[free[k]] = x[k];
    std::vector<double> out;
    f(params.data(), out);
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(out.data(), out.size()));
  };
  obj.linearize = [base, free, f](const Eigen::VectorXd& x, Eigen::VectorXd& r,
                                  Eigen::MatrixXd& J) mutable {
    switch (free.size()) {
      case 6: detail::dual_linearize<6>(f, base, free, x, r, J); break;
      case 75: detail::dual_linearize<75>(f, base, free, x, r, J); break;
      case 85: detail::dual_linearize<85>(f, base, free, x, r, J); break;
      default: detail::dual_linearize<Eigen::Dynamic>(f, base, free, x, r, J); break;
    }
  };
  return obj;
}

inline std::vector<int> index_range(int begin, int end) {
  std::vector<int> out;
  for (int i = begin; i < end; ++i) out.push_back(i);
  return out;
}

}  // namespace bodyfit

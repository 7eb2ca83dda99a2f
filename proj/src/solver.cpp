#include "bodyfit/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Cholesky>

namespace bodyfit {

const char* to_string(Termination t) {
  switch (t) {
    case Termination::GradientTolerance: return "gradient-tolerance";
    case Termination::StepTolerance: return "step-tolerance";
    case Termination::MaxIterations: return "max-iterations";
  }
  return "unknown";
}

Eigen::MatrixXd finite_difference_jacobian(const Objective& obj, const Eigen::VectorXd& x,
                                           double step) {
  const Eigen::VectorXd r0 = obj.residuals(x);
  Eigen::MatrixXd J(r0.size(), x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + h;
    const Eigen::VectorXd rp = obj.residuals(xp);
    xp[i] = x[i] - h;
    const Eigen::VectorXd rm = obj.residuals(xp);
    xp[i] = x[i];
    J.col(i) = (rp - rm) / (2.0 * h);
  }
  return J;
}

Eigen::MatrixXd jacobian(const Objective& obj, const Eigen::VectorXd& x) {
  if (obj.linearize) {
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    obj.linearize(x, r, J);
    return J;
  }
  return finite_difference_jacobian(obj, x);
}

Eigen::VectorXd gauss_newton_step(const Eigen::MatrixXd& J, const Eigen::VectorXd& r) {
  const Eigen::MatrixXd A = J.transpose() * J;
  const Eigen::VectorXd b = -(J.transpose() * r);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  Eigen::VectorXd h;
  bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
  if (ok) {
    // Reject numerically singular factorizations.
    const Eigen::VectorXd d = ldlt.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    ok = dmax > 0.0 && d.minCoeff() > 1e-14 * dmax;
    if (ok) h = ldlt.solve(b);
  }
  if (!ok || !h.allFinite()) {
    const double scale = std::max(A.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    Eigen::MatrixXd damped = A;
    damped.diagonal().array() += 1e-10 * scale;
    h = damped.ldlt().solve(b);
  }
  return h;
}

Eigen::VectorXd dogleg_step(const Eigen::MatrixXd& J, const Eigen::VectorXd& g,
                            const Eigen::VectorXd& gauss_newton, double radius) {
  const double gn_norm = gauss_newton.norm();
  if (gn_norm <= radius) return gauss_newton;
  const double g2 = g.squaredNorm();
  const double jg2 = (J * g).squaredNorm();
  if (g2 == 0.0 || jg2 == 0.0) return gauss_newton * (radius / gn_norm);
  const Eigen::VectorXd cauchy = -(g2 / jg2) * g;
  const double c_norm = cauchy.norm();
  if (c_norm >= radius) return cauchy * (radius / c_norm);
  // Walk from the Cauchy point towards the Gauss-Newton point until the
  // trust-region boundary: |c + t (gn - c)| = radius.
  const Eigen::VectorXd diff = gauss_newton - cauchy;
  const double a = diff.squaredNorm();
  const double b = 2.0 * cauchy.dot(diff);
  const double c = c_norm * c_norm - radius * radius;
  const double disc = std::sqrt(std::max(0.0, b * b - 4.0 * a * c));
  // Numerically stable positive root.
  const double t = b > 0.0 ? (-2.0 * c) / (b + disc) : (-b + disc) / (2.0 * a);
  return cauchy + t * diff;
}

namespace {

void evaluate(const Objective& obj, const Eigen::VectorXd& x, Eigen::VectorXd& r,
              Eigen::MatrixXd& J) {
  if (obj.linearize) {
    obj.linearize(x, r, J);
  } else {
    r = obj.residuals(x);
    J = finite_difference_jacobian(obj, x);
  }
}

void write_trace(const std::string& path, const SolveReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write solver trace to " + path);
  out.precision(17);
  out << "iteration,objective,radius,step_norm,gain_ratio,accepted\n";
  for (const auto& it : report.history) {
    out << it.iteration << ',' << it.objective << ',' << it.radius << ',' << it.step_norm << ','
        << it.gain_ratio << ',' << (it.accepted ? 1 : 0) << '\n';
  }
}

}  // namespace

SolveReport minimize(const Objective& obj, const Eigen::VectorXd& x0, const SolveOptions& opts) {
  if (x0.size() != obj.dim) throw InvalidArgument("start vector has the wrong dimension");
  if (!x0.allFinite()) throw InvalidStart("start vector is not finite");
  SolveReport report;
  report.x = x0;

  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  evaluate(obj, report.x, r, J);
  double F = r.squaredNorm();
  if (!std::isfinite(F) || !J.allFinite()) {
    throw InvalidStart("objective is not finite at the start point");
  }
  report.initial_objective = F;
  report.trace.push_back(F);

  Eigen::VectorXd g = J.transpose() * r;
  double radius = opts.initial_radius;
  bool have_step = false;
  Eigen::VectorXd gn;

  auto finish = [&](Termination t) {
    report.termination = t;
    report.final_objective = F;
    if (!opts.trace_path.empty()) write_trace(opts.trace_path, report);
    return report;
  };

  if (obj.dim == 0 || 2.0 * g.lpNorm<Eigen::Infinity>() < opts.gtol) {
    return finish(Termination::GradientTolerance);
  }

  while (report.iterations < opts.max_iterations) {
    ++report.iterations;
    if (!have_step) {
      gn = gauss_newton_step(J, r);
      have_step = true;
    }
    if (!(radius > 0.0)) {
      const double n = gn.norm();
      radius = n > 0.0 && std::isfinite(n) ? std::min(n, opts.max_radius) : 1.0;
    }
    const Eigen::VectorXd h = dogleg_step(J, g, gn, radius);
    const double h_norm = h.norm();
    IterationRecord rec;
    rec.iteration = report.iterations;
    rec.radius = radius;
    rec.step_norm = h_norm;

    if (h_norm <= opts.xtol * (report.x.norm() + opts.xtol)) {
      rec.objective = F;
      report.history.push_back(rec);
      return finish(Termination::StepTolerance);
    }

    const Eigen::VectorXd x_new = report.x + h;
    const double predicted = F - (r + J * h).squaredNorm();
    Eigen::VectorXd r_new = obj.residuals(x_new);
    const double F_new = r_new.squaredNorm();
    const double actual = F - F_new;
    const double rho = predicted > 0.0 ? actual / predicted : (actual > 0.0 ? 1.0 : -1.0);
    rec.gain_ratio = rho;

    if (std::isfinite(F_new) && actual > 0.0) {
      report.x = x_new;
      Eigen::MatrixXd J_new;
      evaluate(obj, report.x, r_new, J_new);
      r = std::move(r_new);
      J = std::move(J_new);
      F = r.squaredNorm();
      g = J.transpose() * r;
      have_step = false;
      ++report.accepted_steps;
      report.trace.push_back(F);
      rec.accepted = true;
    }
    rec.objective = F;
    report.history.push_back(rec);

    if (!std::isfinite(F_new) || rho < 0.25) {
      radius *= 0.25;
    } else if (rho > 0.75) {
      radius = std::min(2.0 * radius, opts.max_radius);
    }

    if (rec.accepted && 2.0 * g.lpNorm<Eigen::Infinity>() < opts.gtol) {
      return finish(Termination::GradientTolerance);
    }
  }
  return finish(Termination::MaxIterations);
}

}  // namespace bodyfit

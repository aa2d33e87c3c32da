#pragma once

// Time integration: explicit SSP-RK2 with stage capture (the two-stage form
//
//   u1 = S(u0 + dt F(u0)),   u2 = S(1/2 (u1 + u0 + dt F(u1))),
//
// S the slope limiter), and implicit Backward Euler solving
// u* - u - dt F(u*) = 0 by Newton with matrix-free GMRES for the linear
// updates.  Tangent callables have signature (state, t) -> slope and
// directional derivatives (state, direction, t) -> slope; both explicit
// stages are evaluated at the times a two-stage SSP scheme implies (t and
// t + dt).

#include <cmath>
#include <limits>
#include <string>
#include <type_traits>
#include <utility>

#include "dgnet/limiter.hpp"

namespace dgnet {

enum class TimeScheme { ssp_rk2, backward_euler };

inline TimeScheme time_scheme_from_string(const std::string& s) {
  if (s == "ssp-rk2") return TimeScheme::ssp_rk2;
  if (s == "backward-euler") return TimeScheme::backward_euler;
  throw ConfigError("unknown time scheme '" + s + "'");
}

enum class JvpMode { autodiff, finite_difference };

inline JvpMode jvp_mode_from_string(const std::string& s) {
  if (s == "autodiff") return JvpMode::autodiff;
  if (s == "finite-difference") return JvpMode::finite_difference;
  throw ConfigError("unknown jvp mode '" + s + "'");
}

// One accepted explicit step with both stages, enough to replay the update
// exactly: u2 equals re-running the scheme from u0 bitwise in a fixed build.
template <typename Real>
struct StepRecord {
  StateField<Real> u0, u1, u2;
  Real dt = 0;
};

template <typename Real>
struct ImplicitConfig {
  Real newton_tol = std::is_same_v<Real, float> ? Real(1e-6) : Real(1e-10);
  int max_newton = 50;
  Real gmres_rtol = std::is_same_v<Real, float> ? Real(1e-5) : Real(1e-8);
  int gmres_restart = 30;
  JvpMode jvp_mode = JvpMode::autodiff;
};

template <typename Real>
struct NewtonDiagnostics {
  int newton_iterations = 0;
  int gmres_iterations = 0;  // Krylov vectors over all solves
  Real residual = 0;         // final infinity-norm of u* - u - dt F(u*)
  bool converged = false;
};

template <typename Real, typename Tangent>
StepRecord<Real> ssp_rk2_step(const StateField<Real>& u, Real dt, Tangent&& tangent,
                              const LimiterConfig<Real>& limiter) {
  if (!(dt > Real(0))) throw ConfigError("time step must be positive");
  const double t0 = u.t, t1 = u.t + double(dt);

  StepRecord<Real> rec;
  rec.dt = dt;
  rec.u0 = u;

  StateField<Real> stage = tangent(u, t0);
  StateField<Real> v = u;
  v.v += dt * stage.v;
  v.t = t1;
  rec.u1 = apply_limiter(v, limiter);
  rec.u1.t = t1;

  stage = tangent(rec.u1, t1);
  v.v = Real(0.5) * (rec.u1.v + u.v + dt * stage.v);
  rec.u2 = apply_limiter(v, limiter);
  rec.u2.t = t1;
  return rec;
}

// One-sided finite-difference directional derivative of a tangent,
// (F(u + h v) - F(u)) / h with h = sqrt(machine eps) (1 + |u|) / |v|.
template <typename Real, typename Tangent>
StateField<Real> finite_difference_jvp(Tangent&& tangent, const StateField<Real>& u,
                                       const StateField<Real>& du, double t) {
  StateField<Real> out(u.Np, u.K, u.m);
  out.t = u.t;
  const Real vnorm = du.v.template lpNorm<Eigen::Infinity>();
  if (vnorm == Real(0)) {
    out.v.setZero();
    return out;
  }
  const Real h = std::sqrt(std::numeric_limits<Real>::epsilon()) *
                 (Real(1) + u.v.template lpNorm<Eigen::Infinity>()) / vnorm;
  StateField<Real> up = u;
  up.v += h * du.v;
  out.v = (tangent(up, t).v - tangent(u, t).v) / h;
  return out;
}

template <typename Real>
struct GmresResult {
  int iterations = 0;
  Real rel_residual = 1;
  bool converged = false;
};

// Restarted GMRES for A x = b with x0 = 0 (A any linear operator callable on
// vectors).  Stops on |r|/|b| <= rtol, on max_iters Krylov vectors, or when a
// restart cycle makes no progress.
template <typename Real, typename Op>
GmresResult<Real> gmres_solve(Op&& A, const VecX<Real>& b, VecX<Real>& x, int restart, Real rtol,
                              int max_iters) {
  const auto n = b.size();
  x = VecX<Real>::Zero(n);
  GmresResult<Real> res;
  const Real bnorm = b.norm();
  if (bnorm == Real(0)) {
    res.converged = true;
    res.rel_residual = 0;
    return res;
  }

  VecX<Real> r = b;
  Real beta = bnorm;
  MatX<Real> V(n, restart + 1);
  MatX<Real> H(restart + 1, restart);
  VecX<Real> cs(restart), sn(restart), g(restart + 1), w(n);

  while (res.iterations < max_iters) {
    H.setZero();
    g.setZero();
    g(0) = beta;
    V.col(0) = r / beta;

    int j = 0;
    Real rel = beta / bnorm;
    while (j < restart && res.iterations < max_iters && rel > rtol) {
      w = A(V.col(j));
      ++res.iterations;
      for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt
        H(i, j) = V.col(i).dot(w);
        w -= H(i, j) * V.col(i);
      }
      H(j + 1, j) = w.norm();
      if (H(j + 1, j) != Real(0)) V.col(j + 1) = w / H(j + 1, j);

      for (int i = 0; i < j; ++i) {  // previous Givens rotations
        const Real hi = cs(i) * H(i, j) + sn(i) * H(i + 1, j);
        H(i + 1, j) = -sn(i) * H(i, j) + cs(i) * H(i + 1, j);
        H(i, j) = hi;
      }
      const Real den = std::hypot(H(j, j), H(j + 1, j));
      if (den == Real(0)) {
        cs(j) = 1;
        sn(j) = 0;
      } else {
        cs(j) = H(j, j) / den;
        sn(j) = H(j + 1, j) / den;
      }
      H(j, j) = den;
      H(j + 1, j) = 0;
      g(j + 1) = -sn(j) * g(j);
      g(j) = cs(j) * g(j);
      ++j;
      rel = std::abs(g(j)) / bnorm;
    }

    if (j > 0) {
      // back-substitute H(0:j,0:j) y = g(0:j) and accumulate
      VecX<Real> y =
          H.topLeftCorner(j, j).template triangularView<Eigen::Upper>().solve(g.head(j));
      x.noalias() += V.leftCols(j) * y;
    }
    res.rel_residual = rel;
    if (rel <= rtol) {
      res.converged = true;
      return res;
    }
    if (res.iterations >= max_iters) return res;

    r = b - A(x);  // true residual for the restart
    const Real beta_new = r.norm();
    if (!(beta_new < Real(0.999) * beta)) return res;  // stagnated (or NaN)
    beta = beta_new;
    res.rel_residual = beta / bnorm;
    if (res.rel_residual <= rtol) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

namespace detail {

// FD Jacobian product reusing the already-computed F(w).
template <typename Real, typename Tangent>
StateField<Real> fd_jvp_cached(Tangent&& tangent, const StateField<Real>& w,
                               const StateField<Real>& F, const StateField<Real>& du, double t) {
  StateField<Real> out(w.Np, w.K, w.m);
  out.t = w.t;
  const Real vnorm = du.v.template lpNorm<Eigen::Infinity>();
  if (vnorm == Real(0)) {
    out.v.setZero();
    return out;
  }
  const Real h = std::sqrt(std::numeric_limits<Real>::epsilon()) *
                 (Real(1) + w.v.template lpNorm<Eigen::Infinity>()) / vnorm;
  StateField<Real> wp = w;
  wp.v += h * du.v;
  out.v = (tangent(wp, t).v - F.v) / h;
  return out;
}

}  // namespace detail

// Backward Euler: Newton on R(w) = w - u - dt F(w), Jacobian I - dt A(w)
// applied matrix-free.  In finite-difference mode the Jacobian products reuse
// F(w) recovered from the residual, costing one tangent evaluation each.  On
// non-convergence: fills `diag` when given, throws otherwise.
template <typename Real, typename Tangent, typename Jvp>
StateField<Real> backward_euler_step(const StateField<Real>& u, Real dt, Tangent&& tangent,
                                     Jvp&& jvp, const ImplicitConfig<Real>& cfg,
                                     NewtonDiagnostics<Real>* diag_out = nullptr) {
  if (!(dt > Real(0))) throw ConfigError("time step must be positive");
  if (!(cfg.newton_tol > Real(0)) || !(cfg.gmres_rtol > Real(0)))
    throw ConfigError("implicit tolerances must be positive");
  if (cfg.max_newton < 1 || cfg.gmres_restart < 1)
    throw ConfigError("implicit iteration limits must be positive");

  const double t1 = u.t + double(dt);
  const auto rows = u.v.rows(), cols = u.v.cols();
  const int n = int(rows * cols);
  const int max_gmres = std::max(20 * cfg.gmres_restart, n);

  StateField<Real> w = u;
  w.t = t1;
  StateField<Real> F = tangent(w, t1);
  MatX<Real> R = w.v - u.v - dt * F.v;

  NewtonDiagnostics<Real> diag;
  diag.residual = R.cwiseAbs().maxCoeff();

  StateField<Real> dir(u.Np, u.K, u.m);
  dir.t = t1;
  while (diag.residual > cfg.newton_tol && diag.newton_iterations < cfg.max_newton) {
    auto apply = [&](const VecX<Real>& vv) -> VecX<Real> {
      dir.v = Eigen::Map<const MatX<Real>>(vv.data(), rows, cols);
      StateField<Real> Adir = cfg.jvp_mode == JvpMode::autodiff
                                  ? jvp(w, dir, t1)
                                  : detail::fd_jvp_cached(tangent, w, F, dir, t1);
      VecX<Real> out(n);
      Eigen::Map<MatX<Real>>(out.data(), rows, cols) = dir.v - dt * Adir.v;
      return out;
    };
    VecX<Real> rhs(n);
    Eigen::Map<MatX<Real>>(rhs.data(), rows, cols) = -R;
    VecX<Real> delta;
    const auto lin = gmres_solve<Real>(apply, rhs, delta, cfg.gmres_restart, cfg.gmres_rtol,
                                       max_gmres);
    diag.gmres_iterations += lin.iterations;

    w.v += Eigen::Map<const MatX<Real>>(delta.data(), rows, cols);
    F = tangent(w, t1);
    R = w.v - u.v - dt * F.v;
    diag.residual = R.cwiseAbs().maxCoeff();
    ++diag.newton_iterations;
    if (!std::isfinite(double(diag.residual)))
      throw NumericalError("backward Euler produced a non-finite residual");
  }
  diag.converged = diag.residual <= cfg.newton_tol;
  if (diag_out) *diag_out = diag;
  if (!diag.converged && !diag_out)
    throw NumericalError("backward Euler did not converge: residual " +
                         std::to_string(double(diag.residual)) + " after " +
                         std::to_string(diag.newton_iterations) + " Newton iterations");
  return w;
}

// Transient driver: emits n_steps + 1 snapshots (u0 included) through
// sink(step_index, state).  Backward-Euler steps are followed by the limiter
// (shock runs keep S active exactly as in the explicit scheme).
template <typename Real, typename Tangent, typename Jvp, typename Sink>
StateField<Real> integrate(const StateField<Real>& u0, Real dt, int n_steps, TimeScheme scheme,
                           Tangent&& tangent, Jvp&& jvp, const LimiterConfig<Real>& limiter,
                           const ImplicitConfig<Real>& icfg, Sink&& sink) {
  if (n_steps < 0) throw ConfigError("number of steps must be nonnegative");
  StateField<Real> u = u0;
  sink(0, static_cast<const StateField<Real>&>(u));
  for (int i = 0; i < n_steps; ++i) {
    try {
      if (scheme == TimeScheme::ssp_rk2) {
        u = std::move(ssp_rk2_step(u, dt, tangent, limiter).u2);
      } else {
        u = backward_euler_step(u, dt, tangent, jvp, icfg);
        u = apply_limiter(u, limiter);
        u.t = u0.t + double(dt) * (i + 1);
      }
    } catch (const NumericalError& e) {
      throw NumericalError("time step " + std::to_string(i + 1) + ": " + e.what(), e.element,
                           i + 1);
    }
    sink(i + 1, static_cast<const StateField<Real>&>(u));
  }
  return u;
}

}  // namespace dgnet

#pragma once

// DG spatial operator F(u): weak-form volume term plus per-face lifted
// numerical fluxes, in collocation or over-integration (de-aliasing) mode.
// Also provides the analytic directional derivative (JVP) used by the
// matrix-free implicit solver.

#include <cmath>
#include <string>

#include "dgnet/euler.hpp"
#include "dgnet/operators.hpp"

namespace dgnet {

namespace detail {

template <typename Real>
inline void check_state(const Physics& ph, const Real* u, int k) {
  if (ph.eq != Equations::euler) return;
  if (!is_valid_state(u, ph.dim, Real(ph.gamma)))
    throw NumericalError("nonphysical state (rho <= 0 or p <= 0)", k);
}

// Ghost states for one face worth of trace values.  `pts` holds the physical
// coordinates of the trace points, row-major (x, y).
template <typename Real, typename MatM, typename MatP>
inline void ghost_trace(const BoundarySpec& spec, const Physics& ph, const MatM& um, MatP& up,
                        const Real* n, const double* pts, double t, int k) {
  const int m = ph.n_comp();
  Real ui[4], ug[4];
  for (int i = 0; i < um.rows(); ++i) {
    for (int q = 0; q < m; ++q) ui[q] = um(i, q);
    boundary_ghost_state(spec, ph, ui, n, pts + 2 * i, t, ug);
    detail::check_state(ph, ug, k);
    for (int q = 0; q < m; ++q) up(i, q) = ug[q];
  }
}

// Directional derivative of the ghost map.  Inflow and Dirichlet data do not
// depend on the interior state; outflow copies it; the wall reflection is
// linear, so the same mirror applies to the perturbation.
template <typename Real, typename MatM, typename MatP>
inline void ghost_trace_jvp(const BoundarySpec& spec, const Physics& ph, const MatM& dum,
                            MatP& dup, const Real* n) {
  const int m = ph.n_comp();
  switch (spec.kind) {
    case BcKind::inflow:
    case BcKind::dirichlet:
      dup.setZero();
      return;
    case BcKind::outflow:
      dup = dum;
      return;
    case BcKind::wall: {
      for (int i = 0; i < dum.rows(); ++i) {
        dup(i, 0) = dum(i, 0);
        const Real mon = ph.dim == 1 ? dum(i, 1) * n[0] : dum(i, 1) * n[0] + dum(i, 2) * n[1];
        dup(i, 1) = dum(i, 1) - Real(2) * mon * n[0];
        if (ph.dim == 2) dup(i, 2) = dum(i, 2) - Real(2) * mon * n[1];
        dup(i, m - 1) = dum(i, m - 1);
      }
      return;
    }
    case BcKind::periodic:
      throw ConfigError("periodic boundary reached the ghost-state path");
  }
}

// Volume contribution: tangent += Wr (rx.F1 + ry.F2) + Ws (sx.F1 + sy.F2),
// with the flux matrices evaluated at `pts` rows (nodes or cubature points)
// and projected by (Pr, Ps).  F1/F2 are scratch of matching shape.
template <typename Real>
inline void volume_term(const DGOperators<Real>& ops, const Physics& ph,
                        const MatX<Real>& u_pts, const MatX<Real>& Pr, const MatX<Real>& Ps,
                        MatX<Real>& F1, MatX<Real>& F2, MatX<Real>& out) {
  const int m = ph.n_comp();
  const int npts = int(u_pts.rows());
  Real uloc[4], f1[4], f2[4];
  for (int k = 0; k < ops.K; ++k) {
    for (int i = 0; i < npts; ++i) {
      for (int q = 0; q < m; ++q) uloc[q] = u_pts(i, k * m + q);
      detail::check_state(ph, uloc, k);
      physical_flux(ph, uloc, f1, f2);
      for (int q = 0; q < m; ++q) F1(i, k * m + q) = f1[q];
      if (ph.dim == 2)
        for (int q = 0; q < m; ++q) F2(i, k * m + q) = f2[q];
    }
    const Real rx = ops.rst_x(k, 0);
    if (ph.dim == 1) {
      F1.middleCols(k * m, m) *= rx;
    } else {
      const Real sx = ops.rst_x(k, 1), ry = ops.rst_x(k, 2), sy = ops.rst_x(k, 3);
      for (int q = 0; q < m; ++q) {
        const int c = k * m + q;
        for (int i = 0; i < npts; ++i) {
          const Real g1 = F1(i, c), g2 = F2(i, c);
          F1(i, c) = rx * g1 + ry * g2;
          F2(i, c) = sx * g1 + sy * g2;
        }
      }
    }
  }
  out.noalias() += Pr * F1;
  if (ph.dim == 2) out.noalias() += Ps * F2;
}

// Same contraction for the linearized fluxes dF_i = A_i(u) du.
template <typename Real>
inline void volume_term_jvp(const DGOperators<Real>& ops, const Physics& ph,
                            const MatX<Real>& u_pts, const MatX<Real>& du_pts,
                            const MatX<Real>& Pr, const MatX<Real>& Ps, MatX<Real>& F1,
                            MatX<Real>& F2, MatX<Real>& out) {
  const int m = ph.n_comp();
  const int npts = int(u_pts.rows());
  const Real e1[2] = {Real(1), Real(0)}, e2[2] = {Real(0), Real(1)};
  Real uloc[4], dloc[4], A[16];
  for (int k = 0; k < ops.K; ++k) {
    for (int i = 0; i < npts; ++i) {
      for (int q = 0; q < m; ++q) {
        uloc[q] = u_pts(i, k * m + q);
        dloc[q] = du_pts(i, k * m + q);
      }
      detail::check_state(ph, uloc, k);
      normal_flux_jacobian(ph, uloc, e1, A);
      for (int q = 0; q < m; ++q) {
        Real acc = 0;
        for (int r = 0; r < m; ++r) acc += A[q * m + r] * dloc[r];
        F1(i, k * m + q) = acc;
      }
      if (ph.dim == 2) {
        normal_flux_jacobian(ph, uloc, e2, A);
        for (int q = 0; q < m; ++q) {
          Real acc = 0;
          for (int r = 0; r < m; ++r) acc += A[q * m + r] * dloc[r];
          F2(i, k * m + q) = acc;
        }
      }
    }
    const Real rx = ops.rst_x(k, 0);
    if (ph.dim == 1) {
      F1.middleCols(k * m, m) *= rx;
    } else {
      const Real sx = ops.rst_x(k, 1), ry = ops.rst_x(k, 2), sy = ops.rst_x(k, 3);
      for (int q = 0; q < m; ++q) {
        const int c = k * m + q;
        for (int i = 0; i < npts; ++i) {
          const Real g1 = F1(i, c), g2 = F2(i, c);
          F1(i, c) = rx * g1 + ry * g2;
          F2(i, c) = sx * g1 + sy * g2;
        }
      }
    }
  }
  out.noalias() += Pr * F1;
  if (ph.dim == 2) out.noalias() += Ps * F2;
}

// Directional derivative of the Lax-Friedrichs / central flux at one point.
// The dissipation speed uses max(lambda_m, lambda_p); on the max we follow
// std::max's tie-breaking (the plus side) so the derivative matches the
// primal evaluation exactly.
template <typename Real>
inline void numerical_flux_jvp(FluxScheme scheme, const Physics& ph, const Real* um,
                               const Real* up, const Real* dum, const Real* dup, const Real* n,
                               Real* out) {
  const int m = ph.n_comp();
  Real Am[16], Ap[16];
  normal_flux_jacobian(ph, um, n, Am);
  normal_flux_jacobian(ph, up, n, Ap);
  for (int q = 0; q < m; ++q) {
    Real acc = 0;
    for (int r = 0; r < m; ++r) acc += Am[q * m + r] * dum[r] + Ap[q * m + r] * dup[r];
    out[q] = Real(0.5) * acc;
  }
  if (scheme == FluxScheme::central) return;
  if (scheme != FluxScheme::lax_friedrichs)
    throw ConfigError("analytic flux derivative supports lax-friedrichs and central only");
  const Real lm = side_wave_speed(ph, um, n);
  const Real lp = side_wave_speed(ph, up, n);
  const Real lambda = std::max(lm, lp);
  Real grad[4], dlambda = 0;
  if (lm > lp) {
    side_wave_speed_grad(ph, um, n, grad);
    for (int q = 0; q < m; ++q) dlambda += grad[q] * dum[q];
  } else {
    side_wave_speed_grad(ph, up, n, grad);
    for (int q = 0; q < m; ++q) dlambda += grad[q] * dup[q];
  }
  for (int q = 0; q < m; ++q)
    out[q] += Real(0.5) * (dlambda * (um[q] - up[q]) + lambda * (dum[q] - dup[q]));
}

} // namespace detail

// Nodal interpolant of a catalog initial condition.
template <typename Real>
StateField<Real> init_field(const DGOperators<Real>& ops, const std::string& problem,
                            double gamma) {
  const Physics ph{Equations::euler, ops.dim, gamma, {0, 0}};
  StateField<Real> u(ops.Np, ops.K, ph.n_comp());
  for (int k = 0; k < ops.K; ++k)
    for (int i = 0; i < ops.Np; ++i) {
      const double x[2] = {double(ops.x(i, k)), ops.dim == 2 ? double(ops.y(i, k)) : 0.0};
      EulerState s = initial_state(problem, x, gamma);
      for (int q = 0; q < ph.n_comp(); ++q) u.v(i, k * ph.n_comp() + q) = Real(s.u[q]);
    }
  return u;
}

// The DG tangent slope F(u).  Interior faces use the numerical flux on both
// sides independently (antisymmetric by construction, so interior face
// integrals telescope); boundary faces build ghost traces from `bcs`.
template <typename Real>
StateField<Real> dg_tangent(const StateField<Real>& u, const DGOperators<Real>& ops,
                            const FluxModel& model, const BoundaryConfig& bcs, double t) {
  const Physics& ph = model.physics;
  const int m = ph.n_comp();
  if (u.Np != ops.Np || u.K != ops.K || u.m != m)
    throw ConfigError("state field shape does not match operators/physics");

  StateField<Real> out(ops.Np, ops.K, m);
  out.t = u.t;
  out.v.setZero();

  const bool oi = ops.mode == QuadratureMode::over_integration;

  // Volume term.
  if (!oi) {
    MatX<Real> F1(ops.Np, ops.K * m), F2;
    if (ph.dim == 2) F2.resize(ops.Np, ops.K * m);
    detail::volume_term(ops, ph, u.v, ops.Wr, ops.Ws, F1, F2, out.v);
  } else {
    MatX<Real> uc = ops.Icub * u.v;
    MatX<Real> F1(uc.rows(), ops.K * m), F2;
    if (ph.dim == 2) F2.resize(uc.rows(), ops.K * m);
    detail::volume_term(ops, ph, uc, ops.PVr, ops.PVs, F1, F2, out.v);
  }

  // Face terms.
  const bool face_quad = oi && ops.dim == 2;
  const int nfp = ops.Nfp;
  const int nfq = face_quad ? ops.n_fq() : nfp;
  MatX<Real> um(nfp, m), up(nfp, m), umq(nfq, m), upq(nfq, m), fs(nfq, m);
  std::vector<double> pts(size_t(2 * nfp), 0.0);
  Real a[4], b[4], f[4];

  for (int k = 0; k < ops.K; ++k) {
    for (int fc = 0; fc < ops.Nfaces; ++fc) {
      const int kf = ops.face_index(k, fc);
      const Real n[2] = {ops.normal(kf, 0), ops.dim == 2 ? ops.normal(kf, 1) : Real(0)};
      const auto& fm = ops.basis.fmask[fc];
      for (int i = 0; i < nfp; ++i)
        for (int q = 0; q < m; ++q) um(i, q) = u.v(fm[i], k * m + q);

      const int kn = ops.nbr_elem(kf);
      if (kn >= 0) {
        for (int i = 0; i < nfp; ++i)
          for (int q = 0; q < m; ++q) up(i, q) = u.v(ops.nbr_node(kf, i), kn * m + q);
      } else {
        const auto it = bcs.find(ops.face_tag[kf]);
        if (it == bcs.end())
          throw ConfigError("no boundary condition for tag '" + ops.face_tag[kf] + "'");
        for (int i = 0; i < nfp; ++i) {
          pts[2 * i] = double(ops.x(fm[i], k));
          pts[2 * i + 1] = ops.dim == 2 ? double(ops.y(fm[i], k)) : 0.0;
        }
        if (!face_quad) {
          detail::ghost_trace(it->second, ph, um, up, n, pts.data(), t, k);
        } else {
          // evaluate boundary data directly at the face quadrature points
          umq.noalias() = ops.Ifq * um;
          Eigen::Matrix<double, Eigen::Dynamic, 2> xf(nfp, 2);
          for (int i = 0; i < nfp; ++i) xf.row(i) << pts[2 * i], pts[2 * i + 1];
          Eigen::Matrix<double, Eigen::Dynamic, 2> xq =
              ops.Ifq.template cast<double>() * xf;
          std::vector<double> qpts(size_t(2 * nfq));
          for (int i = 0; i < nfq; ++i) {
            qpts[2 * i] = xq(i, 0);
            qpts[2 * i + 1] = xq(i, 1);
          }
          detail::ghost_trace(it->second, ph, umq, upq, n, qpts.data(), t, k);
        }
      }

      const MatX<Real>* pm = &um;
      const MatX<Real>* pp = &up;
      if (face_quad) {
        umq.noalias() = ops.Ifq * um;
        if (kn >= 0) upq.noalias() = ops.Ifq * up; // ghosts already sit at the quad points
        pm = &umq;
        pp = &upq;
      }
      for (int i = 0; i < nfq; ++i) {
        for (int q = 0; q < m; ++q) {
          a[q] = (*pm)(i, q);
          b[q] = (*pp)(i, q);
        }
        detail::check_state(ph, a, k);
        detail::check_state(ph, b, kn >= 0 ? kn : k);
        numerical_flux(model.scheme, ph, a, b, n, f);
        for (int q = 0; q < m; ++q) fs(i, q) = f[q];
      }
      const auto& L = face_quad ? ops.lift_oi[fc] : ops.lift[fc];
      out.v.middleCols(k * m, m).noalias() -= ops.Fscale(kf) * (L * fs);
    }
  }
  return out;
}

// Analytic directional derivative of dg_tangent in the direction du
// (Lax-Friedrichs and central fluxes; the HLL branch structure is not
// linearized here).
template <typename Real>
StateField<Real> dg_tangent_jvp(const StateField<Real>& u, const StateField<Real>& du,
                                const DGOperators<Real>& ops, const FluxModel& model,
                                const BoundaryConfig& bcs, double t) {
  (void)t;
  const Physics& ph = model.physics;
  const int m = ph.n_comp();
  if (u.Np != ops.Np || u.K != ops.K || u.m != m || du.Np != u.Np || du.K != u.K || du.m != u.m)
    throw ConfigError("state field shape does not match operators/physics");

  StateField<Real> out(ops.Np, ops.K, m);
  out.t = u.t;
  out.v.setZero();

  const bool oi = ops.mode == QuadratureMode::over_integration;
  if (!oi) {
    MatX<Real> F1(ops.Np, ops.K * m), F2;
    if (ph.dim == 2) F2.resize(ops.Np, ops.K * m);
    detail::volume_term_jvp(ops, ph, u.v, du.v, ops.Wr, ops.Ws, F1, F2, out.v);
  } else {
    MatX<Real> uc = ops.Icub * u.v;
    MatX<Real> duc = ops.Icub * du.v;
    MatX<Real> F1(uc.rows(), ops.K * m), F2;
    if (ph.dim == 2) F2.resize(uc.rows(), ops.K * m);
    detail::volume_term_jvp(ops, ph, uc, duc, ops.PVr, ops.PVs, F1, F2, out.v);
  }

  const bool face_quad = oi && ops.dim == 2;
  const int nfp = ops.Nfp;
  const int nfq = face_quad ? ops.n_fq() : nfp;
  MatX<Real> um(nfp, m), up(nfp, m), dm(nfp, m), dp(nfp, m);
  MatX<Real> umq(nfq, m), upq(nfq, m), dmq(nfq, m), dpq(nfq, m), fs(nfq, m);
  std::vector<double> pts(size_t(2 * nfp), 0.0);
  Real a[4], b[4], da[4], db[4], f[4];

  for (int k = 0; k < ops.K; ++k) {
    for (int fc = 0; fc < ops.Nfaces; ++fc) {
      const int kf = ops.face_index(k, fc);
      const Real n[2] = {ops.normal(kf, 0), ops.dim == 2 ? ops.normal(kf, 1) : Real(0)};
      const auto& fm = ops.basis.fmask[fc];
      for (int i = 0; i < nfp; ++i)
        for (int q = 0; q < m; ++q) {
          um(i, q) = u.v(fm[i], k * m + q);
          dm(i, q) = du.v(fm[i], k * m + q);
        }
      const int kn = ops.nbr_elem(kf);
      if (kn >= 0) {
        for (int i = 0; i < nfp; ++i)
          for (int q = 0; q < m; ++q) {
            up(i, q) = u.v(ops.nbr_node(kf, i), kn * m + q);
            dp(i, q) = du.v(ops.nbr_node(kf, i), kn * m + q);
          }
      }
      bool ghost_at_quad = false;
      if (kn < 0) {
        const auto it = bcs.find(ops.face_tag[kf]);
        if (it == bcs.end())
          throw ConfigError("no boundary condition for tag '" + ops.face_tag[kf] + "'");
        for (int i = 0; i < nfp; ++i) {
          pts[2 * i] = double(ops.x(fm[i], k));
          pts[2 * i + 1] = ops.dim == 2 ? double(ops.y(fm[i], k)) : 0.0;
        }
        if (!face_quad) {
          detail::ghost_trace(it->second, ph, um, up, n, pts.data(), t, k);
          detail::ghost_trace_jvp(it->second, ph, dm, dp, n);
        } else {
          umq.noalias() = ops.Ifq * um;
          dmq.noalias() = ops.Ifq * dm;
          Eigen::Matrix<double, Eigen::Dynamic, 2> xf(nfp, 2);
          for (int i = 0; i < nfp; ++i) xf.row(i) << pts[2 * i], pts[2 * i + 1];
          Eigen::Matrix<double, Eigen::Dynamic, 2> xq = ops.Ifq.template cast<double>() * xf;
          std::vector<double> qpts(size_t(2 * nfq));
          for (int i = 0; i < nfq; ++i) {
            qpts[2 * i] = xq(i, 0);
            qpts[2 * i + 1] = xq(i, 1);
          }
          detail::ghost_trace(it->second, ph, umq, upq, n, qpts.data(), t, k);
          detail::ghost_trace_jvp(it->second, ph, dmq, dpq, n);
          ghost_at_quad = true;
        }
      }

      const MatX<Real>*pm = &um, *pp = &up, *qm = &dm, *qp = &dp;
      if (face_quad) {
        umq.noalias() = ops.Ifq * um;
        dmq.noalias() = ops.Ifq * dm;
        if (!ghost_at_quad) {
          upq.noalias() = ops.Ifq * up;
          dpq.noalias() = ops.Ifq * dp;
        }
        pm = &umq;
        pp = &upq;
        qm = &dmq;
        qp = &dpq;
      }
      for (int i = 0; i < nfq; ++i) {
        for (int q = 0; q < m; ++q) {
          a[q] = (*pm)(i, q);
          b[q] = (*pp)(i, q);
          da[q] = (*qm)(i, q);
          db[q] = (*qp)(i, q);
        }
        detail::check_state(ph, a, k);
        detail::check_state(ph, b, kn >= 0 ? kn : k);
        detail::numerical_flux_jvp(model.scheme, ph, a, b, da, db, n, f);
        for (int q = 0; q < m; ++q) fs(i, q) = f[q];
      }
      const auto& L = face_quad ? ops.lift_oi[fc] : ops.lift[fc];
      out.v.middleCols(k * m, m).noalias() -= ops.Fscale(kf) * (L * fs);
    }
  }
  return out;
}

} // namespace dgnet

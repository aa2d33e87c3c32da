#pragma once

// The DGNet block approximating the DG tangent slope.  Face inputs (the d
// directional average fluxes and the state jump, per equation and face node)
// and per-element nodal volume fluxes are scaled into [-1, 1], pushed through
// one-hidden-layer tanh networks shared across equations, rescaled, and
// assembled with the usual collocation volume/lift contraction.  A flux-oracle
// mode routes the exact Lax-Friedrichs algebra through the same normalization
// plumbing and must reproduce dg_tangent.  Reverse-mode derivatives with
// respect to parameters and state feed the training loop.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "dgnet/dg.hpp"

namespace dgnet {

enum class SurrogateMode { learned, flux_oracle };

inline SurrogateMode surrogate_mode_from_string(const std::string& s) {
  if (s == "learned") return SurrogateMode::learned;
  if (s == "flux-oracle") return SurrogateMode::flux_oracle;
  throw ConfigError("unknown surrogate mode '" + s + "'");
}

// ---------------------------------------------------------------------------
// One-hidden-layer perceptron, y = W2 tanh(W1 x + b1) + b2.
// ---------------------------------------------------------------------------

template <typename Real>
struct Mlp {
  MatX<Real> W1, W2;
  VecX<Real> b1, b2;

  int in() const { return int(W1.cols()); }
  int hidden() const { return int(W1.rows()); }
  int out() const { return int(W2.rows()); }
  Eigen::Index size() const { return W1.size() + b1.size() + W2.size() + b2.size(); }

  void set_shape(int n_in, int n_hidden, int n_out) {
    W1 = MatX<Real>::Zero(n_hidden, n_in);
    b1 = VecX<Real>::Zero(n_hidden);
    W2 = MatX<Real>::Zero(n_out, n_hidden);
    b2 = VecX<Real>::Zero(n_out);
  }
  void set_zero() {
    W1.setZero();
    b1.setZero();
    W2.setZero();
    b2.setZero();
  }
  bool finite() const {
    return W1.allFinite() && b1.allFinite() && W2.allFinite() && b2.allFinite();
  }
};

template <typename Real>
VecX<Real> mlp_forward(const Mlp<Real>& net, const VecX<Real>& x) {
  if (int(x.size()) != net.in() || net.W2.cols() != net.W1.rows() ||
      net.b1.size() != net.W1.rows() || net.b2.size() != net.W2.rows())
    throw ConfigError("mlp shape mismatch");
  return net.W2 * (net.W1 * x + net.b1).array().tanh().matrix() + net.b2;
}

// Accumulates d<gy, y>/dparams into `grad` and, when gx is non-null,
// d<gy, y>/dx into *gx.
template <typename Real>
void mlp_vjp(const Mlp<Real>& net, const VecX<Real>& x, const VecX<Real>& gy, Mlp<Real>& grad,
             VecX<Real>* gx = nullptr) {
  const VecX<Real> th = (net.W1 * x + net.b1).array().tanh().matrix();
  grad.W2.noalias() += gy * th.transpose();
  grad.b2 += gy;
  const VecX<Real> gh =
      ((net.W2.transpose() * gy).array() * (Real(1) - th.array().square())).matrix();
  grad.W1.noalias() += gh * x.transpose();
  grad.b1 += gh;
  if (gx) gx->noalias() += net.W1.transpose() * gh;
}

// ---------------------------------------------------------------------------
// Parameter bundle.  The flux network is shared across equation components;
// the volume network acts per (direction, equation) nodal flux vector and is
// replaced by the identity when disabled.
// ---------------------------------------------------------------------------

template <typename Real>
struct SurrogateParams {
  static constexpr Real beta = beta_floor<Real>();

  int dim = 1, Np = 0;
  bool vol_enabled = false;
  Mlp<Real> flux;  // (dim + 1) -> hidden -> 1
  Mlp<Real> vol;   // Np -> hidden -> Np, empty when vol_enabled is false

  Eigen::Index n_params() const { return flux.size() + (vol_enabled ? vol.size() : 0); }
  bool finite() const { return flux.finite() && (!vol_enabled || vol.finite()); }

  void check(int d, int np) const {
    if (dim != d || flux.in() != d + 1 || flux.out() != 1)
      throw ConfigError("flux network shape does not match the spatial dimension");
    if (vol_enabled && (Np != np || vol.in() != np || vol.out() != np))
      throw ConfigError("volume network shape does not match the basis");
  }

  template <typename F>
  void visit(F&& f) {
    f(flux.W1);
    f(flux.b1);
    f(flux.W2);
    f(flux.b2);
    if (vol_enabled) {
      f(vol.W1);
      f(vol.b1);
      f(vol.W2);
      f(vol.b2);
    }
  }
  template <typename F>
  void visit(F&& f) const {
    f(flux.W1);
    f(flux.b1);
    f(flux.W2);
    f(flux.b2);
    if (vol_enabled) {
      f(vol.W1);
      f(vol.b1);
      f(vol.W2);
      f(vol.b2);
    }
  }

  VecX<Real> to_vector() const {
    VecX<Real> v(n_params());
    Eigen::Index at = 0;
    visit([&](const auto& blk) {
      v.segment(at, blk.size()) = Eigen::Map<const VecX<Real>>(blk.data(), blk.size());
      at += blk.size();
    });
    return v;
  }

  void from_vector(const VecX<Real>& v) {
    if (v.size() != n_params()) throw ConfigError("parameter vector length mismatch");
    Eigen::Index at = 0;
    visit([&](auto& blk) {
      Eigen::Map<VecX<Real>>(blk.data(), blk.size()) = v.segment(at, blk.size());
      at += blk.size();
    });
  }

  // shape-matched zero bundle, for gradients and optimizer moments
  SurrogateParams<Real> zeros_like() const {
    SurrogateParams<Real> g = *this;
    g.flux.set_zero();
    g.vol.set_zero();
    return g;
  }
};

// All weights and biases drawn from N(0, stddev^2).
template <typename Real = double>
SurrogateParams<Real> init_surrogate_params(int dim, int np, bool vol_enabled, Rng& rng,
                                            double stddev = 0.01, int hidden = 128) {
  if (dim < 1 || dim > 2) throw ConfigError("the surrogate supports 1D and 2D only");
  if (vol_enabled && np < 1)
    throw ConfigError("the volume network needs a positive basis size");
  SurrogateParams<Real> p;
  p.dim = dim;
  p.Np = np;
  p.vol_enabled = vol_enabled;
  p.flux.set_shape(dim + 1, hidden, 1);
  if (vol_enabled) p.vol.set_shape(np, hidden, np);
  p.visit([&](auto& blk) {
    for (Eigen::Index i = 0; i < blk.size(); ++i) blk.data()[i] = Real(stddev * rng.normal());
  });
  return p;
}

// ---------------------------------------------------------------------------
// Input scaling.  Scales are the largest magnitude among the values they
// gate, floored at beta, so everything entering a network lies in [-1, 1].
// ---------------------------------------------------------------------------

template <typename Real>
struct NormalizedVolumeFlux {
  VecX<Real> fbar;
  Real eta = 0;
  int argmax = -1;  // node attaining the scale, -1 when the floor is active
};

template <typename Real>
NormalizedVolumeFlux<Real> normalize_volume_flux(const VecX<Real>& f,
                                                 Real beta = beta_floor<Real>()) {
  NormalizedVolumeFlux<Real> r;
  Real mx = 0;
  for (Eigen::Index l = 0; l < f.size(); ++l)
    if (std::abs(f(l)) > mx) {
      mx = std::abs(f(l));
      r.argmax = int(l);
    }
  r.eta = std::max(mx, beta);
  if (!(mx > beta)) r.argmax = -1;
  r.fbar = f / r.eta;
  return r;
}

template <typename Real>
struct NormalizedFaceTriple {
  Real vals[3] = {0, 0, 0};  // d directional average fluxes, then the jump
  Real psi = 0;
  int n = 0;
  int argmax = -1;  // entry attaining psi, -1 when the floor is active
};

template <typename Real>
NormalizedFaceTriple<Real> normalize_face_triple(const Real* avg, int d, Real jump,
                                                 Real beta = beta_floor<Real>()) {
  NormalizedFaceTriple<Real> r;
  r.n = d + 1;
  Real raw[3] = {0, 0, 0};
  for (int l = 0; l < d; ++l) raw[l] = avg[l];
  raw[d] = jump;
  Real mx = 0;
  for (int l = 0; l <= d; ++l)
    if (std::abs(raw[l]) > mx) {
      mx = std::abs(raw[l]);
      r.argmax = l;
    }
  r.psi = std::max(mx, beta);
  if (!(mx > beta)) r.argmax = -1;
  for (int l = 0; l <= d; ++l) r.vals[l] = raw[l] / r.psi;
  return r;
}

namespace detail {

template <typename Real>
inline void check_density(const Physics& ph, const Real* u, int k) {
  if (ph.eq == Equations::euler && !(u[0] > Real(0)))
    throw NumericalError("nonpositive density", k);
}

// Trace states of face instance (k, fc): interior/periodic neighbors by node
// match, physical boundaries through the ghost map exactly as in dg_tangent.
// Returns the neighbor element, or -1 for a ghost face.
template <typename Real>
int gather_face_states(const StateField<Real>& u, const DGOperators<Real>& ops,
                       const Physics& ph, const BoundaryConfig& bcs, double t, int k, int fc,
                       MatX<Real>& um, MatX<Real>& up) {
  const int m = ph.n_comp();
  const int kf = ops.face_index(k, fc);
  const auto& fm = ops.basis.fmask[fc];
  for (int i = 0; i < ops.Nfp; ++i)
    for (int q = 0; q < m; ++q) um(i, q) = u.v(fm[i], k * m + q);
  const int kn = ops.nbr_elem(kf);
  if (kn >= 0) {
    for (int i = 0; i < ops.Nfp; ++i)
      for (int q = 0; q < m; ++q) up(i, q) = u.v(ops.nbr_node(kf, i), kn * m + q);
    return kn;
  }
  const auto it = bcs.find(ops.face_tag[kf]);
  if (it == bcs.end())
    throw ConfigError("no boundary condition for tag '" + ops.face_tag[kf] + "'");
  const Real n[2] = {ops.normal(kf, 0), ops.dim == 2 ? ops.normal(kf, 1) : Real(0)};
  std::vector<double> pts(size_t(2 * ops.Nfp));
  for (int i = 0; i < ops.Nfp; ++i) {
    pts[2 * i] = double(ops.x(fm[i], k));
    pts[2 * i + 1] = ops.dim == 2 ? double(ops.y(fm[i], k)) : 0.0;
  }
  ghost_trace(it->second, ph, um, up, n, pts.data(), t, k);
  return -1;
}

// Normal flux of one gathered face: per node and equation, normalize the
// (averages, jump) triple, evaluate the flux network (or the exact LF algebra
// in oracle mode), and rescale by psi.
template <typename Real>
void dgnet_face_flux(const SurrogateParams<Real>& params, const Physics& ph, SurrogateMode mode,
                     const MatX<Real>& um, const MatX<Real>& up, const Real* n, int k, int kn,
                     MatX<Real>& fs) {
  const int m = ph.n_comp();
  const int d = ph.dim;
  Real a[4] = {}, b[4] = {}, f1m[4] = {}, f2m[4] = {}, f1p[4] = {}, f2p[4] = {}, avg[2] = {};
  VecX<Real> xin(d + 1);
  for (int i = 0; i < int(um.rows()); ++i) {
    for (int q = 0; q < m; ++q) {
      a[q] = um(i, q);
      b[q] = up(i, q);
    }
    if (mode == SurrogateMode::flux_oracle) {
      check_state(ph, a, k);
      check_state(ph, b, kn >= 0 ? kn : k);
    } else {
      check_density(ph, a, k);
      check_density(ph, b, kn >= 0 ? kn : k);
    }
    physical_flux(ph, a, f1m, f2m);
    physical_flux(ph, b, f1p, f2p);
    for (int q = 0; q < m; ++q) {
      avg[0] = n[0] * Real(0.5) * (f1m[q] + f1p[q]);
      if (d == 2) avg[1] = n[1] * Real(0.5) * (f2m[q] + f2p[q]);
      const Real jump = a[q] - b[q];
      const auto tri = normalize_face_triple(avg, d, jump);
      if (mode == SurrogateMode::learned) {
        for (int l = 0; l <= d; ++l) xin(l) = tri.vals[l];
        fs(i, q) = tri.psi * mlp_forward(params.flux, xin)(0);
      } else {
        // exact LF in physical units, routed through the same rescaling
        const Real lam = max_wave_speed(ph, a, b, n);
        Real phys = Real(0.5) * lam * jump;
        for (int l = 0; l < d; ++l) phys += avg[l];
        fs(i, q) = tri.psi * (phys / tri.psi);
      }
    }
  }
}

} // namespace detail

// ---------------------------------------------------------------------------
// The learned tangent slope.  Always integrates collocation-style: nodal
// fluxes contracted with (Wr, Ws), face fluxes lifted per local face; the
// volume network, when enabled, is the learned correction applied to each
// (direction, equation) nodal flux vector before the geometric mixing.
// ---------------------------------------------------------------------------

template <typename Real>
StateField<Real> dgnet_tangent(const StateField<Real>& u, const SurrogateParams<Real>& params,
                               const DGOperators<Real>& ops, const FluxModel& model,
                               const BoundaryConfig& bcs, double t,
                               SurrogateMode mode = SurrogateMode::learned) {
  const Physics& ph = model.physics;
  const int m = ph.n_comp();
  if (u.Np != ops.Np || u.K != ops.K || u.m != m)
    throw ConfigError("state field shape does not match operators/physics");
  params.check(ops.dim, ops.Np);

  StateField<Real> out(ops.Np, ops.K, m);
  out.t = u.t;

  // volume path
  MatX<Real> F1(ops.Np, ops.K * m), F2;
  if (ph.dim == 2) F2.resize(ops.Np, ops.K * m);
  {
    Real uloc[4] = {}, f1[4] = {}, f2[4] = {};
    for (int k = 0; k < ops.K; ++k)
      for (int i = 0; i < ops.Np; ++i) {
        for (int q = 0; q < m; ++q) uloc[q] = u.v(i, k * m + q);
        if (mode == SurrogateMode::flux_oracle)
          detail::check_state(ph, uloc, k);
        else
          detail::check_density(ph, uloc, k);
        physical_flux(ph, uloc, f1, f2);
        for (int q = 0; q < m; ++q) F1(i, k * m + q) = f1[q];
        if (ph.dim == 2)
          for (int q = 0; q < m; ++q) F2(i, k * m + q) = f2[q];
      }
  }
  if (params.vol_enabled && mode == SurrogateMode::learned) {
    VecX<Real> fcol(ops.Np);
    for (int k = 0; k < ops.K; ++k)
      for (int q = 0; q < m; ++q)
        for (int dd = 0; dd < ph.dim; ++dd) {
          MatX<Real>& F = dd == 0 ? F1 : F2;
          fcol = F.col(k * m + q);
          const auto nf = normalize_volume_flux(fcol);
          F.col(k * m + q) = nf.eta * mlp_forward(params.vol, nf.fbar);
        }
  }
  for (int k = 0; k < ops.K; ++k) {
    const Real rx = ops.rst_x(k, 0);
    if (ph.dim == 1) {
      F1.middleCols(k * m, m) *= rx;
    } else {
      const Real sx = ops.rst_x(k, 1), ry = ops.rst_x(k, 2), sy = ops.rst_x(k, 3);
      for (int q = 0; q < m; ++q) {
        const int c = k * m + q;
        for (int i = 0; i < ops.Np; ++i) {
          const Real g1 = F1(i, c), g2 = F2(i, c);
          F1(i, c) = rx * g1 + ry * g2;
          F2(i, c) = sx * g1 + sy * g2;
        }
      }
    }
  }
  out.v.noalias() += ops.Wr * F1;
  if (ph.dim == 2) out.v.noalias() += ops.Ws * F2;

  // face path
  MatX<Real> um(ops.Nfp, m), up(ops.Nfp, m), fs(ops.Nfp, m);
  for (int k = 0; k < ops.K; ++k)
    for (int fc = 0; fc < ops.Nfaces; ++fc) {
      const int kf = ops.face_index(k, fc);
      const Real n[2] = {ops.normal(kf, 0), ops.dim == 2 ? ops.normal(kf, 1) : Real(0)};
      const int kn = detail::gather_face_states(u, ops, ph, bcs, t, k, fc, um, up);
      detail::dgnet_face_flux(params, ph, mode, um, up, n, k, kn, fs);
      out.v.middleCols(k * m, m).noalias() -= ops.Fscale(kf) * (ops.lift[fc] * fs);
    }
  return out;
}

// Reverse-mode derivative of the learned tangent: accumulates the parameter
// cotangent of <cot, dgnet_tangent(u)> into `grad` (shaped like `params`) and
// returns the state cotangent.  Branch choices -- normalization argmax, ghost
// maps, the flux-network inputs' max -- are frozen, so the derivative is exact
// almost everywhere.
template <typename Real>
StateField<Real> dgnet_tangent_vjp(const StateField<Real>& u,
                                   const SurrogateParams<Real>& params,
                                   const DGOperators<Real>& ops, const FluxModel& model,
                                   const BoundaryConfig& bcs, double t,
                                   const StateField<Real>& cot, SurrogateParams<Real>& grad) {
  const Physics& ph = model.physics;
  const int m = ph.n_comp();
  if (u.Np != ops.Np || u.K != ops.K || u.m != m || cot.Np != u.Np || cot.K != u.K ||
      cot.m != u.m)
    throw ConfigError("state field shape does not match operators/physics");
  params.check(ops.dim, ops.Np);
  grad.check(ops.dim, ops.Np);

  StateField<Real> gu(ops.Np, ops.K, m);
  gu.t = u.t;

  const Real e1[2] = {Real(1), Real(0)}, e2[2] = {Real(0), Real(1)};

  // volume path: out += Wr (rx T1 + ry T2) + Ws (sx T1 + sy T2), with
  // T = eta vol(f / eta) when enabled and T = f otherwise
  {
    Real uloc[4] = {}, f1[4] = {}, f2[4] = {}, A[16] = {};
    MatX<Real> P1(ops.Np, m), P2(ops.Np, m);
    MatX<Real> gG1(ops.Np, m), gG2(ops.Np, m), gP1(ops.Np, m), gP2(ops.Np, m);
    VecX<Real> fcol(ops.Np), gT(ops.Np), gfbar(ops.Np), gy(ops.Np);
    for (int k = 0; k < ops.K; ++k) {
      for (int i = 0; i < ops.Np; ++i) {
        for (int q = 0; q < m; ++q) uloc[q] = u.v(i, k * m + q);
        detail::check_density(ph, uloc, k);
        physical_flux(ph, uloc, f1, f2);
        for (int q = 0; q < m; ++q) P1(i, q) = f1[q];
        if (ph.dim == 2)
          for (int q = 0; q < m; ++q) P2(i, q) = f2[q];
      }
      const auto C = cot.v.middleCols(k * m, m);
      gG1.noalias() = ops.Wr.transpose() * C;
      if (ph.dim == 2) gG2.noalias() = ops.Ws.transpose() * C;
      const Real rx = ops.rst_x(k, 0);
      if (ph.dim == 1) {
        gP1 = rx * gG1;
      } else {
        const Real sx = ops.rst_x(k, 1), ry = ops.rst_x(k, 2), sy = ops.rst_x(k, 3);
        gP1 = rx * gG1 + sx * gG2;
        gP2 = ry * gG1 + sy * gG2;
      }
      if (params.vol_enabled) {
        for (int q = 0; q < m; ++q)
          for (int dd = 0; dd < ph.dim; ++dd) {
            const MatX<Real>& P = dd == 0 ? P1 : P2;
            MatX<Real>& gP = dd == 0 ? gP1 : gP2;
            fcol = P.col(q);
            gT = gP.col(q);
            const auto nf = normalize_volume_flux(fcol);
            const VecX<Real> y = mlp_forward(params.vol, nf.fbar);
            gy = nf.eta * gT;
            Real geta = y.dot(gT);
            gfbar.setZero();
            mlp_vjp(params.vol, nf.fbar, gy, grad.vol, &gfbar);
            gP.col(q) = gfbar / nf.eta;
            geta -= nf.fbar.dot(gfbar) / nf.eta;
            if (nf.argmax >= 0)
              gP(nf.argmax, q) += geta * (fcol(nf.argmax) >= Real(0) ? Real(1) : Real(-1));
          }
      }
      for (int i = 0; i < ops.Np; ++i) {
        for (int q = 0; q < m; ++q) uloc[q] = u.v(i, k * m + q);
        normal_flux_jacobian(ph, uloc, e1, A);
        for (int r = 0; r < m; ++r) {
          Real acc = 0;
          for (int q = 0; q < m; ++q) acc += gP1(i, q) * A[q * m + r];
          gu.v(i, k * m + r) += acc;
        }
        if (ph.dim == 2) {
          normal_flux_jacobian(ph, uloc, e2, A);
          for (int r = 0; r < m; ++r) {
            Real acc = 0;
            for (int q = 0; q < m; ++q) acc += gP2(i, q) * A[q * m + r];
            gu.v(i, k * m + r) += acc;
          }
        }
      }
    }
  }

  // face path
  const int d = ph.dim;
  MatX<Real> um(ops.Nfp, m), up(ops.Nfp, m);
  MatX<Real> gfs(ops.Nfp, m), gUM(ops.Nfp, m), gUP(ops.Nfp, m), gUPt(ops.Nfp, m);
  VecX<Real> xin(d + 1), gx(d + 1), gyv(1);
  Real a[4] = {}, b[4] = {}, f1m[4] = {}, f2m[4] = {}, f1p[4] = {}, f2p[4] = {}, avg[2] = {};
  Real A1m[16] = {}, A2m[16] = {}, A1p[16] = {}, A2p[16] = {};

  for (int k = 0; k < ops.K; ++k)
    for (int fc = 0; fc < ops.Nfaces; ++fc) {
      const int kf = ops.face_index(k, fc);
      const Real n[2] = {ops.normal(kf, 0), d == 2 ? ops.normal(kf, 1) : Real(0)};
      const int kn = detail::gather_face_states(u, ops, ph, bcs, t, k, fc, um, up);
      gfs.noalias() =
          -ops.Fscale(kf) * (ops.lift[fc].transpose() * cot.v.middleCols(k * m, m));
      gUM.setZero();
      gUP.setZero();

      for (int i = 0; i < ops.Nfp; ++i) {
        for (int q = 0; q < m; ++q) {
          a[q] = um(i, q);
          b[q] = up(i, q);
        }
        detail::check_density(ph, a, k);
        detail::check_density(ph, b, kn >= 0 ? kn : k);
        physical_flux(ph, a, f1m, f2m);
        physical_flux(ph, b, f1p, f2p);
        normal_flux_jacobian(ph, a, e1, A1m);
        normal_flux_jacobian(ph, b, e1, A1p);
        if (d == 2) {
          normal_flux_jacobian(ph, a, e2, A2m);
          normal_flux_jacobian(ph, b, e2, A2p);
        }
        for (int q = 0; q < m; ++q) {
          avg[0] = n[0] * Real(0.5) * (f1m[q] + f1p[q]);
          if (d == 2) avg[1] = n[1] * Real(0.5) * (f2m[q] + f2p[q]);
          const Real jump = a[q] - b[q];
          const auto tri = normalize_face_triple(avg, d, jump);
          const Real gout = gfs(i, q);
          for (int l = 0; l <= d; ++l) xin(l) = tri.vals[l];
          Real gpsi = mlp_forward(params.flux, xin)(0) * gout;
          gyv(0) = tri.psi * gout;
          gx.setZero();
          mlp_vjp(params.flux, xin, gyv, grad.flux, &gx);
          Real gX[3] = {0, 0, 0};
          Real dotv = 0;
          for (int l = 0; l <= d; ++l) {
            gX[l] = gx(l) / tri.psi;
            dotv += gx(l) * tri.vals[l];
          }
          gpsi -= dotv / tri.psi;
          if (tri.argmax >= 0) {
            const Real raw = tri.argmax < d ? avg[tri.argmax] : jump;
            gX[tri.argmax] += gpsi * (raw >= Real(0) ? Real(1) : Real(-1));
          }
          for (int r = 0; r < m; ++r) {
            Real cm = Real(0.5) * n[0] * gX[0] * A1m[q * m + r];
            Real cp = Real(0.5) * n[0] * gX[0] * A1p[q * m + r];
            if (d == 2) {
              cm += Real(0.5) * n[1] * gX[1] * A2m[q * m + r];
              cp += Real(0.5) * n[1] * gX[1] * A2p[q * m + r];
            }
            gUM(i, r) += cm;
            gUP(i, r) += cp;
          }
          gUM(i, q) += gX[d];
          gUP(i, q) -= gX[d];
        }
      }

      const auto& fm = ops.basis.fmask[fc];
      if (kn >= 0) {
        for (int i = 0; i < ops.Nfp; ++i)
          for (int r = 0; r < m; ++r) {
            gu.v(fm[i], k * m + r) += gUM(i, r);
            gu.v(ops.nbr_node(kf, i), kn * m + r) += gUP(i, r);
          }
      } else {
        // the ghost maps (zero, identity, mirror) are self-adjoint, so the
        // forward directional derivative doubles as the transpose
        const auto it = bcs.find(ops.face_tag[kf]);
        detail::ghost_trace_jvp(it->second, ph, gUP, gUPt, n);
        for (int i = 0; i < ops.Nfp; ++i)
          for (int r = 0; r < m; ++r) gu.v(fm[i], k * m + r) += gUM(i, r) + gUPt(i, r);
      }
    }
  return gu;
}

// Conservation diagnostic: the flux network is evaluated once per oriented
// face side, so the two sides of an interior face need not cancel.  Returns
// the max over interior faces, matched nodes, and equations of |f*_A + f*_B|
// (zero for a conservative flux such as the oracle).
template <typename Real>
Real face_flux_mismatch(const StateField<Real>& u, const SurrogateParams<Real>& params,
                        const DGOperators<Real>& ops, const FluxModel& model,
                        const BoundaryConfig& bcs, double t,
                        SurrogateMode mode = SurrogateMode::learned) {
  const Physics& ph = model.physics;
  const int m = ph.n_comp();
  if (u.Np != ops.Np || u.K != ops.K || u.m != m)
    throw ConfigError("state field shape does not match operators/physics");
  params.check(ops.dim, ops.Np);

  std::vector<MatX<Real>> flux(static_cast<size_t>(ops.K * ops.Nfaces));
  MatX<Real> um(ops.Nfp, m), up(ops.Nfp, m);
  for (int k = 0; k < ops.K; ++k)
    for (int fc = 0; fc < ops.Nfaces; ++fc) {
      const int kf = ops.face_index(k, fc);
      if (ops.nbr_elem(kf) < 0) continue;
      const Real n[2] = {ops.normal(kf, 0), ops.dim == 2 ? ops.normal(kf, 1) : Real(0)};
      const int kn = detail::gather_face_states(u, ops, ph, bcs, t, k, fc, um, up);
      flux[size_t(kf)].resize(ops.Nfp, m);
      detail::dgnet_face_flux(params, ph, mode, um, up, n, k, kn, flux[size_t(kf)]);
    }

  Real mis = 0;
  for (int k = 0; k < ops.K; ++k)
    for (int fc = 0; fc < ops.Nfaces; ++fc) {
      const int kf = ops.face_index(k, fc);
      const int kn = ops.nbr_elem(kf);
      if (kn < 0) continue;
      const int kfp = ops.face_index(kn, ops.nbr_face(kf));
      const auto& fmp = ops.basis.fmask[ops.nbr_face(kf)];
      for (int i = 0; i < ops.Nfp; ++i) {
        const int vn = ops.nbr_node(kf, i);
        int j = -1;
        for (int jj = 0; jj < ops.Nfp; ++jj)
          if (fmp[jj] == vn) j = jj;
        if (j < 0) throw ConfigError("face node matching failed");
        for (int q = 0; q < m; ++q)
          mis = std::max(mis, std::abs(flux[size_t(kf)](i, q) + flux[size_t(kfp)](j, q)));
      }
    }
  return mis;
}

// ---------------------------------------------------------------------------
// Checkpoints: an 8-byte magic, a JSON shape header, then the parameter
// blocks as little-endian doubles regardless of the compute precision.
// ---------------------------------------------------------------------------

inline constexpr char checkpoint_magic[9] = "DGNCKPT1";

template <typename Real>
void save_checkpoint(const std::string& path, const SurrogateParams<Real>& p) {
  if (!p.finite()) throw NumericalError("refusing to checkpoint non-finite parameters");
  nlohmann::json h;
  h["format"] = "dgnet-checkpoint";
  h["version"] = 1;
  h["dim"] = p.dim;
  h["np"] = p.Np;
  h["vol_enabled"] = p.vol_enabled;
  h["hidden"] = p.flux.hidden();
  h["blocks"] = nlohmann::json::array();
  const char* names[8] = {"flux.W1", "flux.b1", "flux.W2", "flux.b2",
                          "vol.W1",  "vol.b1",  "vol.W2",  "vol.b2"};
  int bi = 0;
  p.visit([&](const auto& blk) {
    h["blocks"].push_back(
        {{"name", names[bi++]}, {"rows", blk.rows()}, {"cols", blk.cols()}});
  });
  const std::string hs = h.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open checkpoint '" + path + "' for writing");
  f.write(checkpoint_magic, 8);
  const std::uint64_t hl = hs.size();
  f.write(reinterpret_cast<const char*>(&hl), sizeof hl);
  f.write(hs.data(), std::streamsize(hs.size()));
  p.visit([&](const auto& blk) {
    for (Eigen::Index i = 0; i < blk.size(); ++i) {
      const double v = double(blk.data()[i]);
      f.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  });
  if (!f) throw ConfigError("failed writing checkpoint '" + path + "'");
}

template <typename Real = double>
SurrogateParams<Real> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open checkpoint '" + path + "'");
  char magic[8];
  f.read(magic, 8);
  if (!f || std::string(magic, 8) != checkpoint_magic)
    throw ParseError("'" + path + "' is not a dgnet checkpoint");
  std::uint64_t hl = 0;
  f.read(reinterpret_cast<char*>(&hl), sizeof hl);
  if (!f || hl == 0 || hl > (std::uint64_t(1) << 20))
    throw ParseError("corrupt checkpoint header in '" + path + "'");
  std::string hs(size_t(hl), '\0');
  f.read(hs.data(), std::streamsize(hl));
  if (!f) throw ParseError("corrupt checkpoint header in '" + path + "'");
  nlohmann::json h = nlohmann::json::parse(hs, nullptr, false);
  if (h.is_discarded() || h.value("version", 0) != 1 ||
      h.value("format", "") != std::string("dgnet-checkpoint"))
    throw ParseError("unsupported checkpoint header in '" + path + "'");

  SurrogateParams<Real> p;
  p.dim = h.at("dim").get<int>();
  p.Np = h.at("np").get<int>();
  p.vol_enabled = h.at("vol_enabled").get<bool>();
  const int hidden = h.at("hidden").get<int>();
  if (p.dim < 1 || p.dim > 2 || hidden < 1)
    throw ParseError("implausible checkpoint shapes in '" + path + "'");
  p.flux.set_shape(p.dim + 1, hidden, 1);
  if (p.vol_enabled) p.vol.set_shape(p.Np, hidden, p.Np);

  const auto& blocks = h.at("blocks");
  size_t bi = 0;
  bool shape_ok = blocks.size() == (p.vol_enabled ? 8u : 4u);
  p.visit([&](auto& blk) {
    if (!shape_ok) return;
    const auto& B = blocks.at(bi++);
    if (B.at("rows").get<Eigen::Index>() != blk.rows() ||
        B.at("cols").get<Eigen::Index>() != blk.cols())
      shape_ok = false;
  });
  if (!shape_ok) throw ParseError("checkpoint block shapes do not match in '" + path + "'");

  p.visit([&](auto& blk) {
    for (Eigen::Index i = 0; i < blk.size(); ++i) {
      double v = 0;
      f.read(reinterpret_cast<char*>(&v), sizeof v);
      blk.data()[i] = Real(v);
    }
  });
  if (!f) throw ParseError("checkpoint '" + path + "' is truncated");
  f.peek();
  if (!f.eof()) throw ParseError("checkpoint '" + path + "' has trailing data");
  if (!p.finite()) throw ParseError("checkpoint '" + path + "' holds non-finite values");
  return p;
}

} // namespace dgnet

#pragma once

// Smooth vertex-based slope limiter S.  Per element and component the nodal
// deviation from the element mean is scaled by
//
//   sigma = min_c (A_c^2 + eps) / (A_c^2 + e_c + eps),   e_c = h_c (h_c + A_c),
//   h_c = max(0, |d_c| - A_c),
//
// where d_c is the corner deviation and A_c the one-sided band built from the
// means of the elements sharing that corner (the max when d_c >= 0, the min
// otherwise).  The factor is 1 exactly when every corner stays inside its
// band, scales deviations into the band otherwise (sigma*|d| <= A + O(eps)),
// and is C^1 in the nodal values away from a measure-zero set of branch ties.
// Corners on the domain boundary do not constrain: their stencils are
// one-sided, so smooth data with a gradient component into the boundary would
// otherwise be flagged as an extremum.  eps = 1e-10 * (local mean scale)^2
// removes the division singularity; it is treated as frozen by the derivative.

#include <algorithm>
#include <cmath>
#include <vector>

#include "dgnet/operators.hpp"

namespace dgnet {

template <typename Real>
struct LimiterConfig {
  bool enabled = false;
  int dim = 1, Np = 0, K = 0, n_corners = 0;
  Real eps_scale = Real(1e-10);
  std::vector<int> corner_node;          // node index of each reference corner
  std::vector<std::vector<int>> stencil; // per (element, corner): elements sharing the vertex
  VecX<Real> mean_w;                     // quadrature mean weights, sum 1

  const std::vector<int>& corner_stencil(int k, int c) const {
    return stencil[size_t(k) * n_corners + c];
  }
};

template <typename Real>
LimiterConfig<Real> build_limiter_config(const DGOperators<Real>& ops, bool enabled) {
  LimiterConfig<Real> cfg;
  cfg.enabled = enabled;
  cfg.dim = ops.dim;
  cfg.Np = ops.Np;
  cfg.K = ops.K;
  cfg.n_corners = ops.dim + 1;
  if (enabled && ops.N != 1) throw ConfigError("the slope limiter supports order N=1 only");

  // mean weights: row sums of M-hat normalized to 1
  Eigen::VectorXd w = ops.basis.M.rowwise().sum();
  w /= w.sum();
  cfg.mean_w = w.cast<Real>();

  // reference corners -> node indices
  if (ops.dim == 1) {
    cfg.corner_node = {0, ops.Np - 1};
  } else {
    const double ref[3][2] = {{-1, -1}, {1, -1}, {-1, 1}};
    for (int c = 0; c < 3; ++c) {
      int found = -1;
      for (int i = 0; i < ops.Np; ++i)
        if (std::abs(ops.basis.r(i) - ref[c][0]) < 1e-10 &&
            std::abs(ops.basis.s(i) - ref[c][1]) < 1e-10)
          found = i;
      if (found < 0) throw ConfigError("basis nodes do not include the reference corners");
      cfg.corner_node.push_back(found);
    }
  }

  // vertices on any boundary face see a one-sided neighborhood; leave their
  // corners unconstrained (empty stencil)
  std::vector<char> on_hull(size_t(ops.mesh.n_vertices()), 0);
  for (const auto& bf : ops.conn.boundary) {
    const auto fv = ops.mesh.face_vertices(bf.k, bf.ke);
    on_hull[fv[0]] = 1;
    if (fv[1] >= 0) on_hull[fv[1]] = 1;
  }

  cfg.stencil.resize(size_t(ops.K) * cfg.n_corners);
  for (int k = 0; k < ops.K; ++k)
    for (int c = 0; c < cfg.n_corners; ++c) {
      const int vid = ops.mesh.elements(k, c);
      if (!on_hull[vid])
        cfg.stencil[size_t(k) * cfg.n_corners + c] = ops.conn.vertex_elements[vid];
    }
  return cfg;
}

namespace detail {

// Per-corner factor pieces shared by the forward pass and the derivative.
template <typename Real>
struct CornerFactor {
  Real s = Real(1); // the smooth factor
  Real d = 0, A = 0, h = 0, N = 0, D = 0;
  int arg = -1;       // stencil index attaining the band bound (-1: unconstrained)
  bool d_nonneg = true;
};

template <typename Real>
inline CornerFactor<Real> corner_factor(const LimiterConfig<Real>& cfg,
                                        const Eigen::Ref<const Eigen::RowVectorX<Real>>& means,
                                        Real mean_k, Real dev, int k, int c, int m, int q,
                                        Real eps) {
  CornerFactor<Real> f;
  const auto& st = cfg.corner_stencil(k, c);
  if (st.size() < 2) return f; // hull corner: one-sided stencil, no constraint
  f.d = dev;
  f.d_nonneg = dev >= Real(0);
  Real bound = means(st[0] * m + q);
  int arg = 0;
  for (size_t j = 1; j < st.size(); ++j) {
    const Real mj = means(st[j] * m + q);
    if (f.d_nonneg ? (mj > bound) : (mj < bound)) {
      bound = mj;
      arg = int(j);
    }
  }
  f.arg = arg;
  f.A = f.d_nonneg ? bound - mean_k : mean_k - bound;
  f.h = std::max(Real(0), std::abs(f.d) - f.A);
  const Real e = f.h * (f.h + f.A);
  f.N = f.A * f.A + eps;
  f.D = f.N + e;
  f.s = f.D == Real(0) ? Real(1) : f.N / f.D;
  return f;
}

} // namespace detail

template <typename Real>
StateField<Real> apply_limiter(const StateField<Real>& u, const LimiterConfig<Real>& cfg) {
  StateField<Real> out = u;
  if (!cfg.enabled) return out;
  if (u.Np != cfg.Np || u.K != cfg.K)
    throw ConfigError("state field shape does not match the limiter configuration");
  const int m = u.m;
  const Eigen::RowVectorX<Real> means = cfg.mean_w.transpose() * u.v;

  for (int k = 0; k < cfg.K; ++k)
    for (int q = 0; q < m; ++q) {
      const Real mean_k = means(k * m + q);
      Real scale = std::abs(mean_k);
      for (int c = 0; c < cfg.n_corners; ++c)
        for (int j : cfg.corner_stencil(k, c))
          scale = std::max(scale, std::abs(means(j * m + q)));
      const Real eps = cfg.eps_scale * scale * scale;

      Real sigma = Real(1);
      for (int c = 0; c < cfg.n_corners; ++c) {
        const Real dev = u.v(cfg.corner_node[c], k * m + q) - mean_k;
        sigma = std::min(
            sigma, detail::corner_factor<Real>(cfg, means, mean_k, dev, k, c, m, q, eps).s);
      }
      const Real one_minus = Real(1) - sigma;
      if (one_minus != Real(0))
        out.col(k, q) = u.col(k, q).array() - one_minus * (u.col(k, q).array() - mean_k);
    }
  return out;
}

// Reverse-mode derivative: cotangent of the loss w.r.t. u given the cotangent
// w.r.t. apply_limiter(u).  Almost-everywhere exact; eps is frozen.
template <typename Real>
StateField<Real> apply_limiter_vjp(const StateField<Real>& u, const LimiterConfig<Real>& cfg,
                                   const StateField<Real>& cot) {
  if (!cfg.enabled) return cot;
  if (u.Np != cfg.Np || u.K != cfg.K || cot.Np != u.Np || cot.K != u.K || cot.m != u.m)
    throw ConfigError("state field shape does not match the limiter configuration");
  const int m = u.m;
  const Eigen::RowVectorX<Real> means = cfg.mean_w.transpose() * u.v;

  StateField<Real> acc(u.Np, u.K, m);
  acc.t = cot.t;
  acc.v.setZero();
  Eigen::RowVectorX<Real> gmeans = Eigen::RowVectorX<Real>::Zero(means.size());

  for (int k = 0; k < cfg.K; ++k)
    for (int q = 0; q < m; ++q) {
      const Real mean_k = means(k * m + q);
      Real scale = std::abs(mean_k);
      for (int c = 0; c < cfg.n_corners; ++c)
        for (int j : cfg.corner_stencil(k, c))
          scale = std::max(scale, std::abs(means(j * m + q)));
      const Real eps = cfg.eps_scale * scale * scale;

      Real sigma = Real(1);
      int cmin = -1;
      detail::CornerFactor<Real> fmin;
      for (int c = 0; c < cfg.n_corners; ++c) {
        const Real dev = u.v(cfg.corner_node[c], k * m + q) - mean_k;
        auto f = detail::corner_factor<Real>(cfg, means, mean_k, dev, k, c, m, q, eps);
        if (f.s < sigma) {
          sigma = f.s;
          cmin = c;
          fmin = f;
        }
      }

      // out_i = u_i - (1 - sigma) (u_i - mean)
      Real gsum = 0, gsigma = 0;
      for (int i = 0; i < u.Np; ++i) {
        const Real g = cot.v(i, k * m + q);
        acc.v(i, k * m + q) += sigma * g;
        gsum += g;
        gsigma += g * (u.v(i, k * m + q) - mean_k);
      }
      gmeans(k * m + q) += (Real(1) - sigma) * gsum;

      if (cmin >= 0 && gsigma != Real(0)) {
        const auto& f = fmin;
        // s = N/D with N = A^2 + eps, D = N + h (h + A)
        const Real D2 = f.D * f.D;
        const Real act = f.h > Real(0) ? Real(1) : Real(0);
        const Real sgn = f.d_nonneg ? Real(1) : Real(-1);
        // de = (2h + A) dh + h dA, dh = act (sgn dd - dA)
        // ds/dd and ds/dA from ds = (dN D - N dD)/D^2, dN = 2A dA, dD = dN + de
        const Real ds_dd = -f.N / D2 * act * (2 * f.h + f.A) * sgn;
        const Real de_dA = -act * (2 * f.h + f.A) + f.h;
        const Real ds_dA = (2 * f.A * f.D - f.N * (2 * f.A + de_dA)) / D2;
        const Real gd = gsigma * ds_dd;
        const Real gA = gsigma * ds_dA;
        // d = u(corner) - mean_k
        acc.v(cfg.corner_node[cmin], k * m + q) += gd;
        gmeans(k * m + q) -= gd;
        // A = (bound - mean_k) or (mean_k - bound)
        const auto& st = cfg.corner_stencil(k, cmin);
        const int jb = st[f.arg];
        if (f.d_nonneg) {
          gmeans(jb * m + q) += gA;
          gmeans(k * m + q) -= gA;
        } else {
          gmeans(k * m + q) += gA;
          gmeans(jb * m + q) -= gA;
        }
      }
    }

  // means(col) = mean_w . u.col
  acc.v.noalias() += cfg.mean_w * gmeans;
  return acc;
}

} // namespace dgnet

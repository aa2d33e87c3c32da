// Reference-element machinery: Jacobi polynomials, Gauss/Gauss-Lobatto rules,
// 1D Legendre-Gauss-Lobatto nodes, 2D alpha-optimized warp-and-blend simplex
// nodes, Vandermonde/differentiation/mass matrices, per-face extraction and
// lift operators, and over-integration (de-aliasing) quadrature of degree
// >= 2N+1 for both volume and face integrals.
//
// Reference triangle: vertices (-1,-1), (1,-1), (-1,1); faces traversed
// counterclockwise: face 0 = v0->v1 (s=-1), face 1 = v1->v2 (r+s=0),
// face 2 = v2->v0 (r=-1). Each face carries a local coordinate xi in [-1,1]
// along its traversal; face nodes sit at the 1D LGL points of that coordinate.
#pragma once

#include "dgnet/common.hpp"

#include <algorithm>
#include <array>
#include <numeric>

namespace dgnet {

// ---------------------------------------------------------------------------
// Jacobi polynomials, orthonormal on [-1,1] w.r.t. (1-x)^a (1+x)^b.
// ---------------------------------------------------------------------------

inline VectorXd jacobi_p(const VectorXd& x, double a, double b, int n) {
  const double g0 =
      std::pow(2.0, a + b + 1) / (a + b + 1) * std::tgamma(a + 1) * std::tgamma(b + 1) / std::tgamma(a + b + 1);
  VectorXd p_prev = VectorXd::Constant(x.size(), 1.0 / std::sqrt(g0));
  if (n == 0) return p_prev;
  const double g1 = (a + 1) * (b + 1) / (a + b + 3) * g0;
  VectorXd p_cur = (((a + b + 2) / 2.0) * x.array() + (a - b) / 2.0).matrix() / std::sqrt(g1);
  if (n == 1) return p_cur;
  double a_old = 2.0 / (2 + a + b) * std::sqrt((a + 1) * (b + 1) / (a + b + 3));
  for (int i = 1; i < n; ++i) {
    const double h1 = 2.0 * i + a + b;
    const double a_new = 2.0 / (h1 + 2) *
                         std::sqrt((i + 1) * (i + 1 + a + b) * (i + 1 + a) * (i + 1 + b) / ((h1 + 1) * (h1 + 3)));
    const double b_new = -(a * a - b * b) / (h1 * (h1 + 2));
    VectorXd p_next = ((x.array() - b_new).matrix().cwiseProduct(p_cur) - a_old * p_prev) / a_new;
    p_prev.swap(p_cur);
    p_cur.swap(p_next);
    a_old = a_new;
  }
  return p_cur;
}

inline VectorXd grad_jacobi_p(const VectorXd& x, double a, double b, int n) {
  if (n == 0) return VectorXd::Zero(x.size());
  return std::sqrt(n * (n + a + b + 1)) * jacobi_p(x, a + 1, b + 1, n - 1);
}

// Gauss-Jacobi rule with `npts` points (Golub-Welsch on the symmetric
// recurrence matrix; weights from the first eigenvector components).
inline void jacobi_gq(double a, double b, int npts, VectorXd& x, VectorXd& w) {
  if (npts < 1) throw ConfigError("jacobi_gq: need at least one point");
  const double mu0 =
      std::pow(2.0, a + b + 1) * std::tgamma(a + 1) * std::tgamma(b + 1) / std::tgamma(a + b + 2);
  if (npts == 1) {
    x = VectorXd::Constant(1, (b - a) / (a + b + 2));
    w = VectorXd::Constant(1, mu0);
    return;
  }
  MatrixXd J = MatrixXd::Zero(npts, npts);
  for (int k = 0; k < npts; ++k) {
    const double h1 = 2.0 * k + a + b;
    J(k, k) = (k == 0 && a + b == 0) ? 0.0 : -(a * a - b * b) / (h1 * (h1 + 2));
  }
  for (int k = 0; k < npts - 1; ++k) {
    const double h1 = 2.0 * k + a + b;
    J(k, k + 1) = 2.0 / (h1 + 2) *
                  std::sqrt((k + 1) * (k + 1 + a + b) * (k + 1 + a) * (k + 1 + b) / ((h1 + 1) * (h1 + 3)));
    J(k + 1, k) = J(k, k + 1);
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(J);
  x = es.eigenvalues();
  w.resize(npts);
  for (int k = 0; k < npts; ++k) {
    const double v0 = es.eigenvectors()(0, k);
    w(k) = mu0 * v0 * v0;
  }
}

// Legendre-Gauss-Lobatto nodes (N+1 of them, endpoints included).
inline VectorXd jacobi_gl(int N) {
  if (N < 1) throw ConfigError("jacobi_gl: order must be >= 1");
  VectorXd x(N + 1);
  x(0) = -1.0;
  x(N) = 1.0;
  if (N > 1) {
    VectorXd xi, wi;
    jacobi_gq(1.0, 1.0, N - 1, xi, wi);
    x.segment(1, N - 1) = xi;
  }
  return x;
}

inline void gauss_legendre(int npts, VectorXd& x, VectorXd& w) { jacobi_gq(0.0, 0.0, npts, x, w); }

// ---------------------------------------------------------------------------
// 1D modal basis matrices.
// ---------------------------------------------------------------------------

inline MatrixXd vandermonde_1d(int N, const VectorXd& x) {
  MatrixXd V(x.size(), N + 1);
  for (int j = 0; j <= N; ++j) V.col(j) = jacobi_p(x, 0, 0, j);
  return V;
}

inline MatrixXd grad_vandermonde_1d(int N, const VectorXd& x) {
  MatrixXd V(x.size(), N + 1);
  for (int j = 0; j <= N; ++j) V.col(j) = grad_jacobi_p(x, 0, 0, j);
  return V;
}

// ---------------------------------------------------------------------------
// 2D modal basis on the reference triangle (Koornwinder-Dubiner).
// ---------------------------------------------------------------------------

inline void rs_to_ab(const VectorXd& r, const VectorXd& s, VectorXd& a, VectorXd& b) {
  const auto n = r.size();
  a.resize(n);
  b = s;
  for (Eigen::Index i = 0; i < n; ++i)
    a(i) = (s(i) != 1.0) ? 2.0 * (1.0 + r(i)) / (1.0 - s(i)) - 1.0 : -1.0;
}

inline VectorXd simplex_2d_p(const VectorXd& a, const VectorXd& b, int i, int j) {
  const VectorXd fa = jacobi_p(a, 0, 0, i);
  const VectorXd gb = jacobi_p(b, 2 * i + 1, 0, j);
  VectorXd p = std::sqrt(2.0) * fa.cwiseProduct(gb);
  for (Eigen::Index k = 0; k < p.size(); ++k) p(k) *= std::pow(1.0 - b(k), i);
  return p;
}

inline void grad_simplex_2d_p(const VectorXd& a, const VectorXd& b, int i, int j, VectorXd& dr, VectorXd& ds) {
  const VectorXd fa = jacobi_p(a, 0, 0, i);
  const VectorXd dfa = grad_jacobi_p(a, 0, 0, i);
  const VectorXd gb = jacobi_p(b, 2 * i + 1, 0, j);
  const VectorXd dgb = grad_jacobi_p(b, 2 * i + 1, 0, j);
  const auto n = a.size();
  dr.resize(n);
  ds.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double hb = 0.5 * (1.0 - b(k));
    const double hbi1 = (i > 0) ? std::pow(hb, i - 1) : 1.0;
    double d_r = dfa(k) * gb(k);
    if (i > 0) d_r *= hbi1;
    double d_s = dfa(k) * gb(k) * 0.5 * (1.0 + a(k));
    if (i > 0) d_s *= hbi1;
    double tmp = dgb(k) * std::pow(hb, i);
    if (i > 0) tmp -= 0.5 * i * gb(k) * hbi1;
    d_s += fa(k) * tmp;
    const double scale = std::pow(2.0, i + 0.5);
    dr(k) = scale * d_r;
    ds(k) = scale * d_s;
  }
}

inline MatrixXd vandermonde_2d(int N, const VectorXd& r, const VectorXd& s) {
  VectorXd a, b;
  rs_to_ab(r, s, a, b);
  const int Np = (N + 1) * (N + 2) / 2;
  MatrixXd V(r.size(), Np);
  int sk = 0;
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N - i; ++j) V.col(sk++) = simplex_2d_p(a, b, i, j);
  return V;
}

inline void grad_vandermonde_2d(int N, const VectorXd& r, const VectorXd& s, MatrixXd& Vr, MatrixXd& Vs) {
  VectorXd a, b;
  rs_to_ab(r, s, a, b);
  const int Np = (N + 1) * (N + 2) / 2;
  Vr.resize(r.size(), Np);
  Vs.resize(r.size(), Np);
  int sk = 0;
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N - i; ++j) {
      VectorXd dr, ds;
      grad_simplex_2d_p(a, b, i, j, dr, ds);
      Vr.col(sk) = dr;
      Vs.col(sk) = ds;
      ++sk;
    }
}

// ---------------------------------------------------------------------------
// Alpha-optimized warp-and-blend interpolation nodes on the triangle.
// ---------------------------------------------------------------------------

namespace detail {

// Warp displacement carrying equidistant 1D nodes to LGL along an edge.
inline VectorXd warp_factor(int N, const VectorXd& rout) {
  const VectorXd lgl = jacobi_gl(N);
  VectorXd req(N + 1);
  for (int i = 0; i <= N; ++i) req(i) = -1.0 + 2.0 * i / N;
  const MatrixXd Veq = vandermonde_1d(N, req);
  MatrixXd Pmat(N + 1, rout.size());
  for (int i = 0; i <= N; ++i) Pmat.row(i) = jacobi_p(rout, 0, 0, i).transpose();
  const MatrixXd Lmat = Veq.transpose().fullPivLu().solve(Pmat);  // Lagrange values at rout
  VectorXd warp = Lmat.transpose() * (lgl - req);
  for (Eigen::Index k = 0; k < rout.size(); ++k) {
    const bool interior = std::abs(rout(k)) < 1.0 - 1e-10;
    const double sf = 1.0 - (interior ? rout(k) * rout(k) : 0.0);
    warp(k) = interior ? warp(k) / sf : 0.0;
  }
  return warp;
}

}  // namespace detail

// Returns (r, s) reference coordinates of the (N+1)(N+2)/2 nodes.
inline void nodes_2d(int N, VectorXd& r, VectorXd& s) {
  static const double alp_opt[] = {0.0000, 0.0000, 1.4152, 0.1001, 0.2751, 0.9800, 1.0999, 1.2832,
                                   1.3648, 1.4773, 1.4959, 1.5743, 1.5770, 1.6223, 1.6258};
  const double alpha = (N < 16) ? alp_opt[N - 1] : 5.0 / 3.0;
  const int Np = (N + 1) * (N + 2) / 2;

  VectorXd L1(Np), L2(Np), L3(Np);
  int sk = 0;
  for (int n = 0; n <= N; ++n)
    for (int m = 0; m <= N - n; ++m) {
      L1(sk) = double(n) / N;
      L3(sk) = double(m) / N;
      ++sk;
    }
  L2 = VectorXd::Ones(Np) - L1 - L3;

  // Equilateral-triangle coordinates, then warp each edge and blend.
  VectorXd x = -L2 + L3;
  VectorXd y = (-L2 - L3 + 2.0 * L1) / std::sqrt(3.0);
  const VectorXd blend1 = 4.0 * L2.cwiseProduct(L3);
  const VectorXd blend2 = 4.0 * L1.cwiseProduct(L3);
  const VectorXd blend3 = 4.0 * L1.cwiseProduct(L2);
  const VectorXd wf1 = detail::warp_factor(N, L3 - L2);
  const VectorXd wf2 = detail::warp_factor(N, L1 - L3);
  const VectorXd wf3 = detail::warp_factor(N, L2 - L1);
  VectorXd warp1(Np), warp2(Np), warp3(Np);
  for (int k = 0; k < Np; ++k) {
    warp1(k) = blend1(k) * wf1(k) * (1.0 + std::pow(alpha * L1(k), 2));
    warp2(k) = blend2(k) * wf2(k) * (1.0 + std::pow(alpha * L2(k), 2));
    warp3(k) = blend3(k) * wf3(k) * (1.0 + std::pow(alpha * L3(k), 2));
  }
  x += warp1 + std::cos(2.0 * M_PI / 3.0) * warp2 + std::cos(4.0 * M_PI / 3.0) * warp3;
  y += 0.0 * warp1 + std::sin(2.0 * M_PI / 3.0) * warp2 + std::sin(4.0 * M_PI / 3.0) * warp3;

  // Equilateral -> reference triangle.
  r.resize(Np);
  s.resize(Np);
  for (int k = 0; k < Np; ++k) {
    const double l1 = (std::sqrt(3.0) * y(k) + 1.0) / 3.0;
    const double l2 = (-3.0 * x(k) - std::sqrt(3.0) * y(k) + 2.0) / 6.0;
    const double l3 = (3.0 * x(k) - std::sqrt(3.0) * y(k) + 2.0) / 6.0;
    r(k) = -l2 + l3 - l1;
    s(k) = -l2 - l3 + l1;
  }
}

// Collapsed-coordinate cubature on the reference triangle, exact for total
// degree `degree`: tensor Gauss-Legendre (in a) x Gauss-Jacobi(1,0) (in b)
// with ceil((degree+1)/2) points per direction.
inline void triangle_cubature(int degree, VectorXd& r, VectorXd& s, VectorXd& w) {
  const int n = (degree + 2) / 2;
  VectorXd xa, wa, xb, wb;
  gauss_legendre(n, xa, wa);
  jacobi_gq(1.0, 0.0, n, xb, wb);
  r.resize(n * n);
  s.resize(n * n);
  w.resize(n * n);
  int sk = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      r(sk) = (1.0 + xa(i)) * (1.0 - xb(j)) / 2.0 - 1.0;
      s(sk) = xb(j);
      w(sk) = 0.5 * wa(i) * wb(j);
      ++sk;
    }
}

// ---------------------------------------------------------------------------
// NodalBasis: everything the DG operators need on the reference element.
// ---------------------------------------------------------------------------

struct NodalBasis {
  int dim = 0;
  int N = 0;       // polynomial order
  int Np = 0;      // nodes per element
  int Nfaces = 0;  // 2 (1D) or 3 (2D)
  int Nfp = 0;     // nodes per face

  VectorXd r, s;  // reference nodes (s empty in 1D)
  MatrixXd V, invV;
  MatrixXd M;        // reference mass matrix, exact: (V V^T)^{-1}
  MatrixXd Dr, Ds;   // nodal differentiation (Ds empty in 1D)
  MatrixXd Wr, Ws;   // weak derivative operators M^{-1} D^T M (collocation volume term)
  std::vector<std::vector<int>> fmask;  // per face: node indices ordered along traversal
  MatrixXd Mface;                       // reference face mass (Nfp x Nfp; [1] in 1D)
  std::vector<MatrixXd> lift;           // per face: M^{-1} E_f  (Np x Nfp), collocation

  // Volume over-integration of degree >= 2N+1.
  VectorXd cub_r, cub_s, cub_w;
  MatrixXd Icub;      // interpolation nodes -> cubature points (nq x Np)
  MatrixXd PVr, PVs;  // projection of cubature-point flux: M^{-1} G^T W (Np x nq)

  // Face over-integration (2D only; 1D face data are point values).
  VectorXd fq_xi, fq_w;             // Gauss points/weights on the face coordinate
  MatrixXd Ifq;                     // face nodes -> face quadrature points (nfq x Nfp)
  std::vector<MatrixXd> lift_oi;    // per face: M^{-1} E_f^{oi} (Np x nfq)

  int n_cub() const { return int(cub_w.size()); }
  int n_face_quad() const { return dim == 1 ? 1 : int(fq_w.size()); }
};

inline NodalBasis build_basis(int dim, int N) {
  if (dim != 1 && dim != 2) throw ConfigError("build_basis: dim must be 1 or 2");
  if (N < 1 || N > 8) throw ConfigError("build_basis: order must be in [1, 8]");
  NodalBasis B;
  B.dim = dim;
  B.N = N;

  if (dim == 1) {
    B.Np = N + 1;
    B.Nfaces = 2;
    B.Nfp = 1;
    B.r = jacobi_gl(N);
    B.V = vandermonde_1d(N, B.r);
    B.invV = B.V.inverse();
    B.M = (B.V * B.V.transpose()).inverse();
    B.Dr = grad_vandermonde_1d(N, B.r) * B.invV;
    B.Wr = B.M.ldlt().solve(B.Dr.transpose() * B.M);
    B.fmask = {{0}, {B.Np - 1}};
    B.Mface = MatrixXd::Ones(1, 1);
    for (int f = 0; f < 2; ++f) {
      MatrixXd E = MatrixXd::Zero(B.Np, 1);
      E(B.fmask[f][0], 0) = 1.0;
      B.lift.push_back(B.M.ldlt().solve(E));
    }
    B.lift_oi = B.lift;

    VectorXd xq, wq;
    gauss_legendre(N + 1, xq, wq);  // degree 2N+1
    B.cub_r = xq;
    B.cub_w = wq;
    B.Icub = vandermonde_1d(N, xq) * B.invV;
    const MatrixXd G = grad_vandermonde_1d(N, xq) * B.invV;
    B.PVr = B.M.ldlt().solve(G.transpose() * wq.asDiagonal());
    return B;
  }

  // --- 2D triangle ---
  B.Np = (N + 1) * (N + 2) / 2;
  B.Nfaces = 3;
  B.Nfp = N + 1;
  nodes_2d(N, B.r, B.s);
  B.V = vandermonde_2d(N, B.r, B.s);
  B.invV = B.V.inverse();
  B.M = (B.V * B.V.transpose()).inverse();
  MatrixXd Vr, Vs;
  grad_vandermonde_2d(N, B.r, B.s, Vr, Vs);
  B.Dr = Vr * B.invV;
  B.Ds = Vs * B.invV;
  B.Wr = B.M.ldlt().solve(B.Dr.transpose() * B.M);
  B.Ws = B.M.ldlt().solve(B.Ds.transpose() * B.M);

  // Face extraction, ordered along the CCW traversal of each face.
  const double tol = 1e-10;
  std::array<std::vector<int>, 3> fm;
  for (int k = 0; k < B.Np; ++k) {
    if (std::abs(B.s(k) + 1.0) < tol) fm[0].push_back(k);
    if (std::abs(B.r(k) + B.s(k)) < tol) fm[1].push_back(k);
    if (std::abs(B.r(k) + 1.0) < tol) fm[2].push_back(k);
  }
  auto sort_by = [&](std::vector<int>& v, auto key, bool asc) {
    std::sort(v.begin(), v.end(), [&](int i, int j) { return asc ? key(i) < key(j) : key(i) > key(j); });
  };
  sort_by(fm[0], [&](int i) { return B.r(i); }, true);   // v0 -> v1
  sort_by(fm[1], [&](int i) { return B.s(i); }, true);   // v1 -> v2
  sort_by(fm[2], [&](int i) { return B.s(i); }, false);  // v2 -> v0
  for (auto& f : fm) {
    if (int(f.size()) != B.Nfp) throw NumericalError("build_basis: face extraction did not find Nfp nodes");
    B.fmask.push_back(f);
  }

  // Face nodes are LGL along each edge; the reference face mass matrix is the
  // 1D mass at those points (same for all three faces).
  const VectorXd xi = jacobi_gl(N);
  const MatrixXd V1 = vandermonde_1d(N, xi);
  B.Mface = (V1 * V1.transpose()).inverse();
  for (int f = 0; f < 3; ++f) {
    MatrixXd E = MatrixXd::Zero(B.Np, B.Nfp);
    for (int i = 0; i < B.Nfp; ++i)
      for (int j = 0; j < B.Nfp; ++j) E(B.fmask[f][i], j) = B.Mface(i, j);
    B.lift.push_back(B.M.ldlt().solve(E));
  }

  // Volume over-integration.
  triangle_cubature(2 * N + 1, B.cub_r, B.cub_s, B.cub_w);
  B.Icub = vandermonde_2d(N, B.cub_r, B.cub_s) * B.invV;
  MatrixXd Gr, Gs;
  grad_vandermonde_2d(N, B.cub_r, B.cub_s, Gr, Gs);
  Gr = (Gr * B.invV).eval();
  Gs = (Gs * B.invV).eval();
  B.PVr = B.M.ldlt().solve(Gr.transpose() * B.cub_w.asDiagonal());
  B.PVs = B.M.ldlt().solve(Gs.transpose() * B.cub_w.asDiagonal());

  // Face over-integration: Gauss points on the face coordinate.
  gauss_legendre(N + 1, B.fq_xi, B.fq_w);
  B.Ifq = vandermonde_1d(N, B.fq_xi) * V1.inverse();
  for (int f = 0; f < 3; ++f) {
    MatrixXd E = MatrixXd::Zero(B.Np, int(B.fq_w.size()));
    const MatrixXd Et = B.Ifq.transpose() * B.fq_w.asDiagonal();  // Nfp x nfq
    for (int i = 0; i < B.Nfp; ++i) E.row(B.fmask[f][i]) = Et.row(i);
    B.lift_oi.push_back(B.M.ldlt().solve(E));
  }
  return B;
}

}  // namespace dgnet

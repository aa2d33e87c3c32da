#pragma once

// Mesh-level DG operator bundle: reference matrices cast to the working
// precision, per-element geometric factors, nodal coordinates, and
// node-level face connectivity (including periodic pairs resolved into
// interior-style matches).  Affine elements share the reference operators,
// so per-element matrices are exposed as cheap accessors instead of storage.

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dgnet/basis.hpp"
#include "dgnet/euler.hpp"
#include "dgnet/mesh.hpp"

namespace dgnet {

enum class QuadratureMode { collocation, over_integration };

inline QuadratureMode quadrature_mode_from_string(const std::string& s) {
  if (s == "collocation") return QuadratureMode::collocation;
  if (s == "over-integration") return QuadratureMode::over_integration;
  throw ConfigError("unknown quadrature mode '" + s + "'");
}

// Nodal conservative values, stored as an Np x (K*m) matrix whose column
// k*m + q holds component q of element k.  The layout keeps the whole-mesh
// derivative and lift applications single matrix products.
template <typename Real>
struct StateField {
  int Np = 0, K = 0, m = 0;
  double t = 0.0;
  MatX<Real> v;

  StateField() = default;
  StateField(int np, int k, int mm, double time = 0.0)
      : Np(np), K(k), m(mm), t(time), v(MatX<Real>::Zero(np, k * mm)) {}

  auto col(int k, int q) { return v.col(k * m + q); }
  auto col(int k, int q) const { return v.col(k * m + q); }
  bool finite() const { return v.allFinite(); }
};

template <typename Real>
struct DGOperators {
  int dim = 1, N = 1, Np = 0, Nfaces = 0, Nfp = 0, K = 0;
  QuadratureMode mode = QuadratureMode::collocation;

  Mesh mesh;              // retained for stencils, exports, and diagnostics
  Connectivity conn;
  NodalBasis basis;       // double-precision reference element

  // reference operators in working precision
  MatX<Real> M, Dr, Ds, Wr, Ws;
  std::vector<MatX<Real>> lift, lift_oi;  // per local face
  MatX<Real> Icub, PVr, PVs, Ifq;
  VecX<Real> cub_w, fq_w;

  // geometry: per element, and per face instance kf = k*Nfaces + f
  VecX<Real> detJ;
  MatX<Real> rst_x;        // K x dim^2: [rx] in 1D, [rx, sx, ry, sy] in 2D
  MatX<Real> normal;       // (K*Nfaces) x dim
  VecX<Real> sJ, Fscale;
  MatX<Real> x, y;         // Np x K nodal coordinates (y unused in 1D)

  // node-level face connectivity; nbr_elem < 0 marks a physical boundary
  Eigen::VectorXi nbr_elem, nbr_face;
  Eigen::MatrixXi nbr_node;            // (K*Nfaces) x Nfp, neighbor-local node ids
  std::vector<std::string> face_tag;   // boundary tag, "" when interior/periodic
  std::vector<int> boundary_faces;     // face instances that still need ghosts

  int face_index(int k, int f) const { return k * Nfaces + f; }
  int n_cub() const { return int(basis.cub_w.size()); }
  int n_fq() const { return int(basis.fq_w.size()); }

  // M^k = J^k M-hat (affine elements)
  MatX<Real> element_mass(int k) const { return detJ(k) * M; }

  // V_i^k = (M^k)^{-1} S_i^k, assembled from the shared reference parts
  MatX<Real> element_V(int k, int i) const {
    if (dim == 1) return rst_x(k, 0) * Wr;
    return rst_x(k, 2 * i) * Wr + rst_x(k, 2 * i + 1) * Ws;
  }

  // E^{k,e}: lifts face-nodal values of face f into the element's Np slots
  MatX<Real> element_lift(int k, int f) const {
    return Fscale(face_index(k, f)) * lift[f];
  }
};

namespace detail {

template <typename Real>
MatX<Real> cast_mat(const Eigen::MatrixXd& a) {
  return a.template cast<Real>();
}

// Match each face node of instance kf (translated by tr) to a node of the
// partner face by coordinates.  Returns the permutation into pf's fmask.
template <typename Real>
std::vector<int> match_face_nodes(const DGOperators<Real>& ops, int k, int f, int kp, int fp,
                                  const double* tr, double tol) {
  const auto& fm = ops.basis.fmask;
  const int nfp = ops.Nfp;
  std::vector<int> perm(nfp, -1);
  std::vector<bool> used(nfp, false);
  for (int i = 0; i < nfp; ++i) {
    const int ni = fm[f][i];
    const double xi = double(ops.x(ni, k)) + tr[0];
    const double yi = ops.dim == 2 ? double(ops.y(ni, k)) + tr[1] : 0.0;
    for (int j = 0; j < nfp; ++j) {
      if (used[j]) continue;
      const int nj = fm[fp][j];
      const double dx = xi - double(ops.x(nj, kp));
      const double dy = ops.dim == 2 ? yi - double(ops.y(nj, kp)) : 0.0;
      if (dx * dx + dy * dy < tol * tol) {
        perm[i] = j;
        used[j] = true;
        break;
      }
    }
    if (perm[i] < 0)
      throw ParseError("face nodes of elements " + std::to_string(k) + " and " +
                       std::to_string(kp) + " do not align");
  }
  return perm;
}

} // namespace detail

// Assemble the operator bundle for one mesh at order N.  `bc` supplies
// periodic tag pairs, which are resolved into node-matched interior faces;
// all other tags stay in boundary_faces for ghost-state evaluation.
template <typename Real = double>
DGOperators<Real> build_element_operators(const Mesh& mesh, int N, QuadratureMode mode,
                                          const BoundaryConfig* bc = nullptr) {
  DGOperators<Real> ops;
  ops.mesh = mesh;
  ops.dim = mesh.dim;
  ops.N = N;
  ops.mode = mode;
  ops.basis = build_basis(mesh.dim, N);
  ops.conn = build_connectivity(mesh);
  const NodalBasis& b = ops.basis;
  ops.Np = b.Np;
  ops.Nfaces = b.Nfaces;
  ops.Nfp = b.Nfp;
  ops.K = mesh.K();

  ops.M = detail::cast_mat<Real>(b.M);
  ops.Dr = detail::cast_mat<Real>(b.Dr);
  ops.Wr = detail::cast_mat<Real>(b.Wr);
  ops.Icub = detail::cast_mat<Real>(b.Icub);
  ops.PVr = detail::cast_mat<Real>(b.PVr);
  ops.cub_w = b.cub_w.template cast<Real>();
  for (const auto& lf : b.lift) ops.lift.push_back(detail::cast_mat<Real>(lf));
  for (const auto& lf : b.lift_oi) ops.lift_oi.push_back(detail::cast_mat<Real>(lf));
  if (mesh.dim == 2) {
    ops.Ds = detail::cast_mat<Real>(b.Ds);
    ops.Ws = detail::cast_mat<Real>(b.Ws);
    ops.PVs = detail::cast_mat<Real>(b.PVs);
    ops.Ifq = detail::cast_mat<Real>(b.Ifq);
    ops.fq_w = b.fq_w.template cast<Real>();
  }

  ElementGeometry geom = geometric_factors(mesh);
  ops.detJ = geom.detJ.template cast<Real>();
  ops.rst_x = detail::cast_mat<Real>(geom.rst_x);
  ops.normal = detail::cast_mat<Real>(geom.normal);
  ops.sJ = geom.sJ.template cast<Real>();
  ops.Fscale = geom.Fscale.template cast<Real>();

  // nodal coordinates from the affine map
  const int K = ops.K, Np = ops.Np;
  ops.x.resize(Np, K);
  if (mesh.dim == 2) ops.y.resize(Np, K);
  for (int k = 0; k < K; ++k) {
    if (mesh.dim == 1) {
      const double x0 = mesh.vertices(mesh.elements(k, 0), 0);
      const double x1 = mesh.vertices(mesh.elements(k, 1), 0);
      for (int i = 0; i < Np; ++i)
        ops.x(i, k) = Real(x0 + 0.5 * (b.r(i) + 1.0) * (x1 - x0));
    } else {
      Eigen::Vector2d v0 = mesh.vertices.row(mesh.elements(k, 0));
      Eigen::Vector2d v1 = mesh.vertices.row(mesh.elements(k, 1));
      Eigen::Vector2d v2 = mesh.vertices.row(mesh.elements(k, 2));
      for (int i = 0; i < Np; ++i) {
        const double lr = 0.5 * (b.r(i) + 1.0), ls = 0.5 * (b.s(i) + 1.0);
        ops.x(i, k) = Real(v0(0) + lr * (v1(0) - v0(0)) + ls * (v2(0) - v0(0)));
        ops.y(i, k) = Real(v0(1) + lr * (v1(1) - v0(1)) + ls * (v2(1) - v0(1)));
      }
    }
  }

  // face connectivity at node level
  const int nfi = K * ops.Nfaces;
  ops.nbr_elem = Eigen::VectorXi::Constant(nfi, -1);
  ops.nbr_face = Eigen::VectorXi::Constant(nfi, -1);
  ops.nbr_node = Eigen::MatrixXi::Constant(nfi, ops.Nfp, -1);
  ops.face_tag.assign(nfi, "");
  const double tol = 1e-8 * std::max(mesh.scale(), 1e-30);
  const double zero_tr[2] = {0.0, 0.0};

  for (const auto& fc : ops.conn.interior) {
    const int kf = ops.face_index(fc.k, fc.ke);
    const int kfp = ops.face_index(fc.n, fc.ne);
    ops.nbr_elem(kf) = fc.n;
    ops.nbr_face(kf) = fc.ne;
    ops.nbr_elem(kfp) = fc.k;
    ops.nbr_face(kfp) = fc.ke;
    auto perm = detail::match_face_nodes(ops, fc.k, fc.ke, fc.n, fc.ne, zero_tr, tol);
    for (int i = 0; i < ops.Nfp; ++i) {
      ops.nbr_node(kf, i) = b.fmask[fc.ne][perm[i]];
      ops.nbr_node(kfp, perm[i]) = b.fmask[fc.ke][i];
    }
  }

  // boundary faces: resolve periodic pairs, keep the rest tagged
  std::map<std::string, std::vector<std::pair<int, int>>> by_tag; // tag -> (k, face)
  for (const auto& fb : ops.conn.boundary) by_tag[fb.tag].push_back({fb.k, fb.ke});

  std::set<std::string> resolved;
  if (bc) {
    for (const auto& [tag, spec] : *bc) {
      if (spec.kind != BcKind::periodic || resolved.count(tag)) continue;
      auto it = bc->find(spec.partner);
      if (it == bc->end() || it->second.kind != BcKind::periodic)
        throw ConfigError("periodic tag '" + tag + "' has no periodic partner '" +
                          spec.partner + "'");
      if (!by_tag.count(tag) || !by_tag.count(spec.partner))
        throw ConfigError("periodic tag pair (" + tag + ", " + spec.partner +
                          ") missing from the mesh");
      const auto& A = by_tag[tag];
      const auto& B = by_tag[spec.partner];
      if (A.size() != B.size())
        throw ConfigError("periodic pair (" + tag + ", " + spec.partner +
                          ") has mismatched face counts");
      const double tr[2] = {spec.translation[0], spec.translation[1]};
      std::vector<bool> taken(B.size(), false);
      for (const auto& [k, f] : A) {
        // locate the partner face by translated midpoint
        double cx = 0, cy = 0;
        for (int i = 0; i < ops.Nfp; ++i) {
          cx += double(ops.x(b.fmask[f][i], k));
          if (mesh.dim == 2) cy += double(ops.y(b.fmask[f][i], k));
        }
        cx = cx / ops.Nfp + tr[0];
        cy = cy / ops.Nfp + tr[1];
        int found = -1;
        for (size_t jb = 0; jb < B.size(); ++jb) {
          if (taken[jb]) continue;
          const auto& [kp, fp] = B[jb];
          double px = 0, py = 0;
          for (int i = 0; i < ops.Nfp; ++i) {
            px += double(ops.x(b.fmask[fp][i], kp));
            if (mesh.dim == 2) py += double(ops.y(b.fmask[fp][i], kp));
          }
          px /= ops.Nfp;
          py /= ops.Nfp;
          if ((cx - px) * (cx - px) + (cy - py) * (cy - py) < tol * tol) {
            found = int(jb);
            break;
          }
        }
        if (found < 0)
          throw ConfigError("periodic face of tag '" + tag +
                            "' has no geometric partner under the configured translation");
        taken[found] = true;
        const auto& [kp, fp] = B[found];
        auto perm = detail::match_face_nodes(ops, k, f, kp, fp, tr, tol);
        const int kf = ops.face_index(k, f);
        const int kfp = ops.face_index(kp, fp);
        ops.nbr_elem(kf) = kp;
        ops.nbr_face(kf) = fp;
        ops.nbr_elem(kfp) = k;
        ops.nbr_face(kfp) = f;
        for (int i = 0; i < ops.Nfp; ++i) {
          ops.nbr_node(kf, i) = b.fmask[fp][perm[i]];
          ops.nbr_node(kfp, perm[i]) = b.fmask[f][i];
        }
      }
      resolved.insert(tag);
      resolved.insert(spec.partner);
    }
  }

  for (const auto& fb : ops.conn.boundary) {
    if (resolved.count(fb.tag)) continue;
    const int kf = ops.face_index(fb.k, fb.ke);
    ops.face_tag[kf] = fb.tag;
    ops.boundary_faces.push_back(kf);
  }

  return ops;
}

// Mass-weighted squared L2 norm of one conservative component.
template <typename Real>
Real l2_norm_sq(const DGOperators<Real>& ops, const StateField<Real>& u, int q) {
  Real acc = Real(0);
  for (int k = 0; k < ops.K; ++k) {
    auto uk = u.col(k, q);
    acc += ops.detJ(k) * (uk.dot(ops.M * uk));
  }
  return acc;
}

template <typename Real>
Real l2_norm(const DGOperators<Real>& ops, const StateField<Real>& u, int q) {
  return std::sqrt(std::max(Real(0), l2_norm_sq(ops, u, q)));
}

} // namespace dgnet

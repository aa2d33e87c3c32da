#include <catch2/catch_amalgamated.hpp>

#include "dgnet/basis.hpp"

#include <cmath>

using namespace dgnet;

TEST_CASE("1D LGL nodes match closed forms", "[basis]") {
  const VectorXd r1 = jacobi_gl(1);
  REQUIRE(r1.size() == 2);
  CHECK(r1(0) == Catch::Approx(-1.0));
  CHECK(r1(1) == Catch::Approx(1.0));

  // N=3: {-1, -1/sqrt(5), 1/sqrt(5), 1};  N=4: {-1, -sqrt(3/7), 0, sqrt(3/7), 1}
  const VectorXd r3 = jacobi_gl(3);
  CHECK(r3(1) == Catch::Approx(-std::sqrt(0.2)).epsilon(1e-12));
  CHECK(r3(2) == Catch::Approx(std::sqrt(0.2)).epsilon(1e-12));
  const VectorXd r4 = jacobi_gl(4);
  CHECK(r4(1) == Catch::Approx(-std::sqrt(3.0 / 7.0)).epsilon(1e-12));
  CHECK(std::abs(r4(2)) < 1e-13);
}

TEST_CASE("Gauss rules reproduce textbook points and weights", "[basis]") {
  VectorXd x, w;
  gauss_legendre(2, x, w);
  CHECK(x(0) == Catch::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-13));
  CHECK(x(1) == Catch::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-13));
  CHECK(w(0) == Catch::Approx(1.0).epsilon(1e-13));
  CHECK(w(1) == Catch::Approx(1.0).epsilon(1e-13));

  // Single Gauss-Jacobi(1,0) point: centroid of weight (1-x) with its full mass.
  jacobi_gq(1.0, 0.0, 1, x, w);
  CHECK(x(0) == Catch::Approx(-1.0 / 3.0).epsilon(1e-13));
  CHECK(w(0) == Catch::Approx(2.0).epsilon(1e-13));

  // Degree-2n-1 exactness on [-1,1]: n=5 integrates x^8 exactly (2/9).
  gauss_legendre(5, x, w);
  double acc = 0;
  for (int i = 0; i < 5; ++i) acc += w(i) * std::pow(x(i), 8);
  CHECK(acc == Catch::Approx(2.0 / 9.0).epsilon(1e-13));
}

TEST_CASE("1D reference mass matrix at N=1 is the exact linear-product integral", "[basis]") {
  const NodalBasis B = build_basis(1, 1);
  // On the reference interval (length 2) the exact mass is (1/3)[[2,1],[1,2]];
  // a physical element of length h scales it by J = h/2, i.e. (h/6)[[2,1],[1,2]].
  CHECK(B.M(0, 0) == Catch::Approx(2.0 / 3.0).epsilon(1e-13));
  CHECK(B.M(0, 1) == Catch::Approx(1.0 / 3.0).epsilon(1e-13));
  CHECK(B.M(1, 0) == Catch::Approx(1.0 / 3.0).epsilon(1e-13));
  CHECK(B.M(1, 1) == Catch::Approx(2.0 / 3.0).epsilon(1e-13));
}

TEST_CASE("1D differentiation is exact on polynomials up to N", "[basis]") {
  const NodalBasis B = build_basis(1, 3);
  VectorXd u(B.Np), du_exact(B.Np);
  for (int i = 0; i < B.Np; ++i) {
    u(i) = std::pow(B.r(i), 3);
    du_exact(i) = 3.0 * B.r(i) * B.r(i);
  }
  CHECK(((B.Dr * u) - du_exact).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("mass matrices are SPD and satisfy summation-by-parts", "[basis]") {
  for (int N : {1, 2, 4, 8}) {
    const NodalBasis B = build_basis(1, N);
    CHECK((B.M - B.M.transpose()).lpNorm<Eigen::Infinity>() < 1e-12);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(B.M);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    // Exact integration gives M*Dr + (M*Dr)^T = e_R e_R^T - e_L e_L^T.
    MatrixXd Q = B.M * B.Dr;
    MatrixXd bnd = MatrixXd::Zero(B.Np, B.Np);
    bnd(B.Np - 1, B.Np - 1) = 1.0;
    bnd(0, 0) = -1.0;
    CHECK((Q + Q.transpose() - bnd).lpNorm<Eigen::Infinity>() < 1e-11);
  }
  for (int N : {1, 3, 6}) {
    const NodalBasis B = build_basis(2, N);
    CHECK((B.M - B.M.transpose()).lpNorm<Eigen::Infinity>() < 1e-12);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(B.M);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("2D node counts and N=2 node positions", "[basis]") {
  const NodalBasis B1 = build_basis(2, 1);
  CHECK(B1.Np == 3);
  CHECK(B1.Nfp == 2);
  const NodalBasis B2 = build_basis(2, 2);
  CHECK(B2.Np == 6);
  CHECK(B2.Nfp == 3);
  // At N=2 the LGL points are equidistant, so warping vanishes: nodes are the
  // three vertices plus the three edge midpoints.
  std::vector<std::pair<double, double>> expect = {{-1, -1}, {1, -1}, {-1, 1}, {0, -1}, {0, 0}, {-1, 0}};
  for (auto [er, es] : expect) {
    bool found = false;
    for (int k = 0; k < B2.Np; ++k)
      if (std::abs(B2.r(k) - er) < 1e-10 && std::abs(B2.s(k) - es) < 1e-10) found = true;
    CHECK(found);
  }
}

TEST_CASE("2D differentiation matrices are exact on the polynomial space", "[basis]") {
  const NodalBasis B = build_basis(2, 4);
  for (int i = 0; i <= 4; ++i)
    for (int j = 0; j <= 4 - i; ++j) {
      VectorXd u(B.Np), dr(B.Np), ds(B.Np);
      for (int k = 0; k < B.Np; ++k) {
        u(k) = std::pow(B.r(k), i) * std::pow(B.s(k), j);
        dr(k) = i == 0 ? 0.0 : i * std::pow(B.r(k), i - 1) * std::pow(B.s(k), j);
        ds(k) = j == 0 ? 0.0 : j * std::pow(B.r(k), i) * std::pow(B.s(k), j - 1);
      }
      CHECK(((B.Dr * u) - dr).lpNorm<Eigen::Infinity>() < 1e-9);
      CHECK(((B.Ds * u) - ds).lpNorm<Eigen::Infinity>() < 1e-9);
    }
}

TEST_CASE("triangle cubature integrates monomials exactly up to its degree", "[basis]") {
  // Frozen moments of r^i s^j over the reference triangle (exact rationals).
  struct Mom {
    int i, j;
    double val;
  };
  const Mom cases[] = {{0, 0, 2.0},
                       {1, 0, -2.0 / 3.0},
                       {2, 1, -2.0 / 15.0},
                       {3, 2, -2.0 / 21.0},
                       {4, 4, 2.0 / 25.0},
                       {5, 6, -2.0 / 91.0},
                       {7, 2, -2.0 / 33.0},
                       {8, 9, -2.0 / 171.0},
                       {0, 17, -2.0 / 19.0}};
  VectorXd r, s, w;
  triangle_cubature(17, r, s, w);
  for (const auto& c : cases) {
    double acc = 0;
    for (Eigen::Index q = 0; q < w.size(); ++q) acc += w(q) * std::pow(r(q), c.i) * std::pow(s(q), c.j);
    CHECK(acc == Catch::Approx(c.val).epsilon(1e-12));
  }
  // Rule built for a basis: degree 2N+1 with N=3 must integrate (3,2) exactly.
  triangle_cubature(7, r, s, w);
  double acc = 0;
  for (Eigen::Index q = 0; q < w.size(); ++q) acc += w(q) * std::pow(r(q), 3) * std::pow(s(q), 2);
  CHECK(acc == Catch::Approx(-2.0 / 21.0).epsilon(1e-12));
}

TEST_CASE("face masks select LGL-distributed edge nodes in traversal order", "[basis]") {
  for (int N : {1, 2, 3, 5}) {
    const NodalBasis B = build_basis(2, N);
    REQUIRE(int(B.fmask.size()) == 3);
    const VectorXd xi = jacobi_gl(N);
    for (int f = 0; f < 3; ++f) {
      REQUIRE(int(B.fmask[f].size()) == B.Nfp);
      for (int i = 0; i < B.Nfp; ++i) {
        const int k = B.fmask[f][i];
        const double r = B.r(k), s = B.s(k);
        // On the face, and at the LGL position of the face coordinate.
        if (f == 0) {
          CHECK(std::abs(s + 1.0) < 1e-10);
          CHECK(r == Catch::Approx(xi(i)).margin(1e-10));
        } else if (f == 1) {
          CHECK(std::abs(r + s) < 1e-10);
          CHECK(s == Catch::Approx(xi(i)).margin(1e-10));
        } else {
          CHECK(std::abs(r + 1.0) < 1e-10);
          CHECK(s == Catch::Approx(-xi(i)).margin(1e-10));
        }
      }
    }
  }
}

TEST_CASE("over-integration collapses to collocation on polynomial data", "[basis]") {
  for (int dim : {1, 2}) {
    for (int N : {1, 2, 4}) {
      const NodalBasis B = build_basis(dim, N);
      // Volume: projecting the interpolant evaluated at cubature points equals
      // the collocation weak-derivative operator (both are exact integrals).
      CHECK((B.PVr * B.Icub - B.Wr).lpNorm<Eigen::Infinity>() < 1e-10);
      if (dim == 2) {
        CHECK((B.PVs * B.Icub - B.Ws).lpNorm<Eigen::Infinity>() < 1e-10);
        for (int f = 0; f < 3; ++f)
          CHECK((B.lift_oi[f] * B.Ifq - B.lift[f]).lpNorm<Eigen::Infinity>() < 1e-10);
      }
    }
  }
}

TEST_CASE("build_basis rejects unsupported inputs", "[basis]") {
  CHECK_THROWS_AS(build_basis(3, 1), ConfigError);
  CHECK_THROWS_AS(build_basis(1, 0), ConfigError);
  CHECK_THROWS_AS(build_basis(2, 9), ConfigError);
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dgnet/limiter.hpp"

using namespace dgnet;

namespace {

constexpr double kPi = 3.14159265358979323846;

template <typename Ops>
Eigen::VectorXd element_means(const Ops& ops, const StateField<double>& u, int q) {
  Eigen::VectorXd w = ops.basis.M.rowwise().sum();
  w /= w.sum();
  Eigen::VectorXd out(u.K);
  for (int k = 0; k < u.K; ++k) out(k) = w.dot(u.col(k, q));
  return out;
}

} // namespace

TEST_CASE("disabled limiter is the identity", "[limiter]") {
  Mesh mesh = uniform_1d_mesh(0.0, 1.0, 5);
  auto ops = build_element_operators<double>(mesh, 3, QuadratureMode::collocation);
  auto cfg = build_limiter_config(ops, false);
  StateField<double> u(ops.Np, ops.K, 3);
  u.v.setRandom();
  StateField<double> out = apply_limiter(u, cfg);
  CHECK((out.v.array() == u.v.array()).all());
  StateField<double> cot(ops.Np, ops.K, 3);
  cot.v.setRandom();
  StateField<double> back = apply_limiter_vjp(u, cfg, cot);
  CHECK((back.v.array() == cot.v.array()).all());
}

TEST_CASE("limiter requires first order when enabled", "[limiter]") {
  Mesh mesh = uniform_1d_mesh(0.0, 1.0, 5);
  auto ops = build_element_operators<double>(mesh, 2, QuadratureMode::collocation);
  CHECK_THROWS_AS(build_limiter_config(ops, true), ConfigError);
  CHECK_NOTHROW(build_limiter_config(ops, false));
}

TEST_CASE("constant fields pass through bitwise", "[limiter]") {
  SECTION("1d") {
    Mesh mesh = uniform_1d_mesh(0.0, 1.0, 6);
    auto ops = build_element_operators<double>(mesh, 1, QuadratureMode::collocation);
    auto cfg = build_limiter_config(ops, true);
    StateField<double> u(ops.Np, ops.K, 3);
    for (int k = 0; k < ops.K; ++k) {
      u.col(k, 0).setConstant(1.3);
      u.col(k, 1).setConstant(-0.4);
      u.col(k, 2).setConstant(0.0);
    }
    StateField<double> out = apply_limiter(u, cfg);
    CHECK((out.v.array() == u.v.array()).all());
  }
  SECTION("2d") {
    Mesh mesh = center_split_quad_mesh(0.0, 1.0, 0.0, 1.0, 2, 2);
    auto ops = build_element_operators<double>(mesh, 1, QuadratureMode::collocation);
    auto cfg = build_limiter_config(ops, true);
    StateField<double> u(ops.Np, ops.K, 4);
    for (int k = 0; k < ops.K; ++k)
      for (int q = 0; q < 4; ++q) u.col(k, q).setConstant(0.25 * (q + 1));
    StateField<double> out = apply_limiter(u, cfg);
    CHECK((out.v.array() == u.v.array()).all());
  }
}

TEST_CASE("globally linear data is left untouched", "[limiter]") {
  SECTION("1d") {
    Mesh mesh = uniform_1d_mesh(0.0, 1.0, 8);
    auto ops = build_element_operators<double>(mesh, 1, QuadratureMode::collocation);
    auto cfg = build_limiter_config(ops, true);
    StateField<double> u(ops.Np, ops.K, 1);
    for (int k = 0; k < ops.K; ++k)
      for (int i = 0; i < ops.Np; ++i) u.v(i, k) = 0.7 * ops.x(i, k) + 0.2;
    StateField<double> out = apply_limiter(u, cfg);
    CHECK((out.v - u.v).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SECTION("2d") {
    Mesh mesh = center_split_quad_mesh(0.0, 1.0, 0.0, 1.0, 3, 2);
    auto ops = build_element_operators<double>(mesh, 1, QuadratureMode::collocation);
    auto cfg = build_limiter_config(ops, true);
    StateField<double> u(ops.Np, ops.K, 1);
    for (int k = 0; k < ops.K; ++k)
      for (int i = 0; i < ops.Np; ++i)
        u.v(i, k) = 0.3 * ops.x(i, k) - 0.8 * ops.y(i, k) + 1.0;
    StateField<double> out = apply_limiter(u, cfg);
    CHECK((out.v - u.v).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("spiked elements are pulled into the neighborhood band", "[limiter]") {
  Mesh mesh = uniform_1d_mesh(0.0, 1.0, 10);
  auto ops = build_element_operators<double>(mesh, 1, QuadratureMode::collocation);
  auto cfg = build_limiter_config(ops, true);
  Rng rng(4242);
  for (int trial = 0; trial < 30; ++trial) {
    StateField<double> u(ops.Np, ops.K, 1);
    for (int k = 0; k < ops.K; ++k)
      for (int i = 0; i < ops.Np; ++i) u.v(i, k) = 1.0 + 0.3 * std::sin(2 * kPi * ops.x(i, k));
    const int ks = 2 + int(rng.uniform_index(6));
    const double amp = (0.5 + 4.5 * rng.uniform()) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    u.v(0, ks) += amp;
    u.v(1, ks) -= amp; // zero quadrature mean for symmetric N=1 weights

    Eigen::VectorXd mean_before = element_means(ops, u, 0);
    StateField<double> out = apply_limiter(u, cfg);
    Eigen::VectorXd mean_after = element_means(ops, out, 0);
    for (int k = 0; k < ops.K; ++k)
      CHECK(std::abs(mean_after(k) - mean_before(k)) <= 1e-13 * (1.0 + std::abs(mean_before(k))));

    // nodal range of the spiked element vs the union of its corner stencils
    double lo = mean_before(ks), hi = mean_before(ks);
    for (int c = 0; c < cfg.n_corners; ++c)
      for (int j : cfg.corner_stencil(ks, c)) {
        lo = std::min(lo, mean_before(j));
        hi = std::max(hi, mean_before(j));
      }
    for (int i = 0; i < ops.Np; ++i) {
      CHECK(out.v(i, ks) >= lo - 1e-6);
      CHECK(out.v(i, ks) <= hi + 1e-6);
    }

    // idempotence on this corpus
    StateField<double> twice = apply_limiter(out, cfg);
    CHECK((twice.v - out.v).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("2d spike handling preserves means and bounds the range", "[limiter]") {
  Mesh mesh = center_split_quad_mesh(0.0, 1.0, 0.0, 1.0, 3, 3);
  auto ops = build_element_operators<double>(mesh, 1, QuadratureMode::collocation);
  auto cfg = build_limiter_config(ops, true);
  Rng rng(99);
  Eigen::VectorXd w = ops.basis.M.rowwise().sum();
  w /= w.sum();
  // restrict the spike to elements whose corners all carry stencils (hull
  // corners are unconstrained by design)
  std::vector<int> interior;
  for (int k = 0; k < ops.K; ++k) {
    bool all = true;
    for (int c = 0; c < cfg.n_corners; ++c)
      if (cfg.corner_stencil(k, c).empty()) all = false;
    if (all) interior.push_back(k);
  }
  REQUIRE(!interior.empty());
  for (int trial = 0; trial < 20; ++trial) {
    StateField<double> u(ops.Np, ops.K, 1);
    for (int k = 0; k < ops.K; ++k)
      for (int i = 0; i < ops.Np; ++i)
        u.v(i, k) = 2.0 + 0.2 * std::sin(2 * kPi * ops.x(i, k)) * std::cos(2 * kPi * ops.y(i, k));
    const int ks = interior[rng.uniform_index(std::uint64_t(interior.size()))];
    Eigen::Vector3d p;
    for (int i = 0; i < 3; ++i) p(i) = 4.0 * (2.0 * rng.uniform() - 1.0);
    p.array() -= w.dot(p); // zero-mean spike
    u.col(ks, 0) += p;

    Eigen::VectorXd mean_before = element_means(ops, u, 0);
    StateField<double> out = apply_limiter(u, cfg);
    Eigen::VectorXd mean_after = element_means(ops, out, 0);
    for (int k = 0; k < ops.K; ++k)
      CHECK(std::abs(mean_after(k) - mean_before(k)) <= 1e-13 * (1.0 + std::abs(mean_before(k))));

    double lo = mean_before(ks), hi = mean_before(ks);
    for (int c = 0; c < cfg.n_corners; ++c)
      for (int j : cfg.corner_stencil(ks, c)) {
        lo = std::min(lo, mean_before(j));
        hi = std::max(hi, mean_before(j));
      }
    for (int i = 0; i < ops.Np; ++i) {
      CHECK(out.v(i, ks) >= lo - 1e-6);
      CHECK(out.v(i, ks) <= hi + 1e-6);
    }
    StateField<double> twice = apply_limiter(out, cfg);
    CHECK((twice.v - out.v).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("limiter derivative matches finite differences", "[limiter]") {
  Rng rng(2026);
  auto run_case = [&](auto ops) {
    auto cfg = build_limiter_config(ops, true);
    const int m = ops.dim + 2;
    StateField<double> u(ops.Np, ops.K, m);
    for (int i = 0; i < u.v.rows(); ++i)
      for (int j = 0; j < u.v.cols(); ++j) u.v(i, j) = 1.0 + 0.8 * (2.0 * rng.uniform() - 1.0);
    StateField<double> du = u, cot = u;
    for (int i = 0; i < u.v.rows(); ++i)
      for (int j = 0; j < u.v.cols(); ++j) {
        du.v(i, j) = 2.0 * rng.uniform() - 1.0;
        cot.v(i, j) = 2.0 * rng.uniform() - 1.0;
      }
    StateField<double> back = apply_limiter_vjp(u, cfg, cot);
    const double analytic = (back.v.array() * du.v.array()).sum();
    const double h = 1e-6;
    StateField<double> up = u, um = u;
    up.v += h * du.v;
    um.v -= h * du.v;
    const double fd = ((apply_limiter(up, cfg).v - apply_limiter(um, cfg).v).array() *
                       cot.v.array())
                          .sum() /
                      (2 * h);
    CHECK(analytic == Catch::Approx(fd).epsilon(1e-5).margin(1e-9));
  };
  SECTION("1d") {
    Mesh mesh = uniform_1d_mesh(0.0, 1.0, 7);
    run_case(build_element_operators<double>(mesh, 1, QuadratureMode::collocation));
  }
  SECTION("2d") {
    Mesh mesh = center_split_quad_mesh(0.0, 1.0, 0.0, 1.0, 2, 2);
    run_case(build_element_operators<double>(mesh, 1, QuadratureMode::collocation));
  }
}

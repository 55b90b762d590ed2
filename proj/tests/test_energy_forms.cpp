// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <nematic/energy.hpp>
#include <nematic/fe_space.hpp>
#include <nematic/model.hpp>

using namespace nematic;

namespace {

Vec twist_field(const FESpace& sp, double theta0) {
  return project_nodal(sp, [theta0](int c, double, double y) {
    const double th = theta0 * (2.0 * y - 1.0);
    if (c == 0) return std::cos(th);
    if (c == 2) return std::sin(th);
    return 0.0;
  });
}

Vec random_field(const FESpace& sp, unsigned seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> ur(lo, hi);
  Vec u(sp.dof_count());
  for (int i = 0; i < u.size(); ++i) u[i] = ur(gen);
  return u;
}

// Energy of a y-only director restricted to one node column, integrated as a
// 1D piecewise-quadratic with 5-point Gauss per cell.  Independent arithmetic
// from the 2D path; both integrate the same polynomials exactly.
double column_energy_1d(const FESpace& sp, const Vec& n) {
  const auto rule = gauss_rule(5);  // tensor rule; use its 1D x-line
  const double h = sp.mesh.hy();
  double e = 0.0;
  for (int k = 0; k < sp.mesh.ny; ++k) {
    for (int q = 0; q < 5; ++q) {
      const double t = rule.x[q];
      const double w = rule.w.segment(0, 5)[q] / rule.w.segment(0, 5).sum() * h;
      double sum = 0.0;
      for (int c = 0; c < 3; ++c) {
        double dp = 0.0;
        for (int a = 0; a < 3; ++a)
          dp += n[sp.dof(sp.mesh.node_id(0, 2 * k + a), c)] *
                nematic::detail::dlag1(a, t) / h;
        sum += dp * dp;
      }
      e += 0.5 * sum * w;
    }
  }
  return e;
}

}  // namespace

TEST_CASE("z tensor closed forms") {
  Eigen::Matrix3d z = z_tensor(Eigen::Vector3d(0, 0, 1), 0.7);
  CHECK((z - Eigen::Vector3d(1, 1, 0.7).asDiagonal().toDenseMatrix()).norm() < 1e-15);

  z = z_tensor(Eigen::Vector3d(0.3, -0.4, 0.8), 1.0);
  CHECK((z - Eigen::Matrix3d::Identity()).norm() < 1e-15);

  const Eigen::Vector3d m = Eigen::Vector3d(1, 1, 1) / std::sqrt(3.0);
  z = z_tensor(m, 0.5);
  CHECK((z - (Eigen::Matrix3d::Identity() - Eigen::Matrix3d::Ones() / 6.0)).norm() < 1e-14);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(z);
  CHECK(es.eigenvalues()[0] == Catch::Approx(0.5).epsilon(1e-12));
  CHECK(es.eigenvalues()[1] == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(es.eigenvalues()[2] == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("z tensor eigenvalues for random directions") {
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> ur(-1.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    Eigen::Vector3d n(ur(gen), ur(gen), ur(gen));
    const double kappa = 0.25 + 0.5 * (ur(gen) + 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(z_tensor(n, kappa));
    Eigen::Vector3d expect(1.0 - (1.0 - kappa) * n.squaredNorm(), 1.0, 1.0);
    std::sort(expect.data(), expect.data() + 3);
    CHECK((es.eigenvalues() - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("frank energy of constant and twist fields") {
  FESpace sp = make_space(build_mesh(16, 16), Family::Q2Vector3);
  FrankConstants fc{1.0, 1.2, 1.0};

  Vec uniform = project_nodal(sp, [](int c, double, double) { return c == 2 ? 1.0 : 0.0; });
  CHECK(frank_energy(sp, uniform, fc) == Catch::Approx(0.0).margin(1e-14));

  const double theta0 = M_PI / 8.0;
  FESpace sp64 = make_space(build_mesh(64, 64), Family::Q2Vector3);
  const double e = frank_energy(sp64, twist_field(sp64, theta0), fc);
  CHECK(e == Catch::Approx(2.0 * fc.K2 * theta0 * theta0).epsilon(1e-7));
}

TEST_CASE("frank energy against 1d column quadrature") {
  FESpace sp = make_space(build_mesh(64, 64), Family::Q2Vector3);
  auto g = [](double y) { return 0.3 + 0.7 * y - 0.4 * y * y + 0.2 * std::sin(2.0 * y); };
  Vec n = project_nodal(sp, [&](int c, double, double y) {
    if (c == 1) return std::sin(g(y));
    if (c == 2) return std::cos(g(y));
    return 0.0;
  });
  FrankConstants one{1.0, 1.0, 1.0};
  const double e2d = frank_energy(sp, n, one);
  // identical piecewise polynomials, independent integration routes
  CHECK(e2d == Catch::Approx(column_energy_1d(sp, n)).epsilon(1e-12));
  // continuum value 1/2 int g'^2; nodal interpolation perturbs it at O(h^3)
  auto dg = [](double y) { return 0.7 - 0.8 * y + 0.4 * std::cos(2.0 * y); };
  double cont = 0.0;
  const int m = 2000;
  auto r5 = gauss_rule(5);
  for (int k = 0; k < m; ++k)
    for (int q = 0; q < 5; ++q) {
      const double w1 = r5.w[q] / r5.w.segment(0, 5).sum();
      const double y = (k + r5.x[q]) / m;
      cont += 0.5 * dg(y) * dg(y) * w1 / m;
    }
  CHECK(e2d == Catch::Approx(cont).epsilon(1e-5));
}

TEST_CASE("penalty energy and constraint closed forms") {
  FESpace sp = make_space(build_mesh(8, 8), Family::Q2Vector3);
  FrankConstants fc{1.0, 1.2, 1.0};

  Vec two = project_nodal(sp, [](int c, double, double) { return c == 2 ? 2.0 : 0.0; });
  CHECK(constraint_value(sp, two) == Catch::Approx(9.0).epsilon(1e-13));
  CHECK(penalty_energy(sp, two, fc, {50.0}) == Catch::Approx(450.0).epsilon(1e-12));

  Vec unit = project_nodal(sp, [](int c, double, double) { return c == 0 ? 1.0 : 0.0; });
  CHECK(constraint_value(sp, unit) == Catch::Approx(0.0).margin(1e-15));
  CHECK(penalty_energy(sp, unit, fc, {1e3}) == Catch::Approx(0.0).margin(1e-13));

  const double eps = 0.37;
  Vec stretched = project_nodal(sp, [&](int c, double, double) {
    return c == 0 ? std::sqrt(1.0 + eps) : 0.0;
  });
  CHECK(constraint_value(sp, stretched) == Catch::Approx(eps * eps).epsilon(1e-12));

  CHECK_THROWS_AS(penalty_energy(sp, unit, fc, {0.0}), std::invalid_argument);
}

TEST_CASE("penalty splits into elastic and constraint parts") {
  FESpace sp = make_space(build_mesh(8, 8), Family::Q2Vector3);
  FrankConstants fc{1.0, 0.8, 1.3};
  const PenaltyConfig pc{1e4};
  Vec n = random_field(sp, 91);
  const double p = penalty_energy(sp, n, fc, pc);
  const double split = 2.0 * frank_energy(sp, n, fc) + pc.zeta * constraint_value(sp, n);
  CHECK(p == Catch::Approx(split).epsilon(1e-12));
}

TEST_CASE("penalty energy of the analytic twist interpolant") {
  FESpace sp = make_space(build_mesh(64, 64), Family::Q2Vector3);
  FrankConstants fc{1.0, 1.2, 1.0};
  const double theta0 = M_PI / 8.0;
  const double p = penalty_energy(sp, twist_field(sp, theta0), fc, {1e3});
  CHECK(p == Catch::Approx(2.0 * 2.0 * fc.K2 * theta0 * theta0).epsilon(1e-6));
}

TEST_CASE("frank energy symmetries") {
  FESpace sp = make_space(build_mesh(8, 6), Family::Q2Vector3);
  FrankConstants fc{1.1, 0.7, 1.4};
  Vec n = random_field(sp, 17);
  CHECK(frank_energy(sp, n, fc) == Catch::Approx(frank_energy(sp, Vec(-n), fc)).epsilon(1e-13));

  // shift a periodic field by one full cell column: cells permute, energy exact
  Vec shifted(n.size());
  const Mesh& m = sp.mesh;
  for (int iy = 0; iy < m.node_rows(); ++iy)
    for (int ix = 0; ix < m.node_cols(); ++ix)
      for (int c = 0; c < 3; ++c)
        shifted[sp.dof(m.node_id(ix + 2, iy), c)] = n[sp.dof(m.node_id(ix, iy), c)];
  CHECK(frank_energy(sp, shifted, fc) == Catch::Approx(frank_energy(sp, n, fc)).epsilon(1e-12));
}

TEST_CASE("frank energy nonnegative where z stays psd") {
  FESpace sp = make_space(build_mesh(6, 6), Family::Q2Vector3);
  FrankConstants fc{0.9, 0.5, 1.1};  // kappa < 1: psd needs |n|^2 < 1/(1-kappa)
  for (unsigned s : {1u, 2u, 3u, 4u}) {
    Vec n = random_field(sp, s, -0.7, 0.7);  // |n|^2 <= 1.47 < 1/(1-5/11)
    CHECK(frank_energy(sp, n, fc) >= 0.0);
  }
}

TEST_CASE("deviation stats extremes") {
  FESpace sp = make_space(build_mesh(8, 8), Family::Q2Vector3);
  Vec unit = project_nodal(sp, [](int c, double, double) { return c == 1 ? 1.0 : 0.0; });
  auto s = deviation_stats(sp, unit);
  CHECK(s.min_dev == Catch::Approx(0.0).margin(1e-14));
  CHECK(s.max_dev == Catch::Approx(0.0).margin(1e-14));

  Vec two = project_nodal(sp, [](int c, double, double) { return c == 2 ? 2.0 : 0.0; });
  s = deviation_stats(sp, two);
  CHECK(s.min_dev == Catch::Approx(3.0).epsilon(1e-14));
  CHECK(s.max_dev == Catch::Approx(3.0).epsilon(1e-14));

  // scale by 1 + a sin(2 pi x): deviations straddle zero
  Vec wavy = project_nodal(sp, [](int c, double x, double) {
    const double a = 1.0 + 0.1 * std::sin(2.0 * M_PI * x);
    return c == 0 ? a : 0.0;
  });
  s = deviation_stats(sp, wavy);
  CHECK(s.min_dev < -0.15);
  CHECK(s.max_dev > 0.15);
  CHECK(s.min_dev > -0.21);
  CHECK(s.max_dev < 0.22);
}

TEST_CASE("flexo energy reductions and closed forms") {
  Mesh m = build_mesh(8, 8);
  FESpace nsp = make_space(m, Family::Q2Vector3);
  FESpace psp = make_space(m, Family::Q2Scalar);
  FrankConstants fc{1.0, 4.0, 1.0};

  // couplings off, phi = 0: twice the elastic reporting energy
  ElectricConstants off{1.42809, 7.0, 7.0, 0.0, 0.0};
  Vec n = random_field(nsp, 5);
  Vec phi0 = Vec::Zero(psp.dof_count());
  CHECK(flexo_energy(nsp, n, psp, phi0, fc, off) ==
        Catch::Approx(2.0 * frank_energy(nsp, n, fc)).epsilon(1e-12));

  // constant unit director, phi = y: only the dielectric term survives
  Vec unit = project_nodal(nsp, [](int c, double, double) { return c == 0 ? 1.0 : 0.0; });
  Vec lin = project_nodal(psp, [](int, double, double y) { return y; });
  ElectricConstants ec{1.42809, 2.0, 2.0, 0.0, 0.0};
  CHECK(flexo_energy(nsp, unit, psp, lin, fc, ec) ==
        Catch::Approx(-1.42809 * 2.0).epsilon(1e-12));

  FESpace other = make_space(build_mesh(4, 4), Family::Q2Scalar);
  CHECK_THROWS_AS(flexo_energy(nsp, unit, other, Vec::Zero(other.dof_count()), fc, ec),
                  std::invalid_argument);
}

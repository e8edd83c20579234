#include "mvldp/hjb.hpp"

#include "mvldp/ldp.hpp"
#include "mvldp/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace mvldp;

namespace {

Eigen::VectorXd vec1(double v) {
  Eigen::VectorXd x(1);
  x << v;
  return x;
}

constexpr double kSigBar = 0.7809548923832687;
const char* kSigBarSrc = "0.7809548923832687";

SystemSpec flat_system(const std::string& b1, const std::string& sigma1) {
  SystemSpec spec;
  spec.n = 1;
  spec.m = 1;
  spec.d1 = 1;
  spec.d2 = 1;
  expr::Dims dims{1, 1};
  spec.b1 = expr::CoeffField::vector_field({b1}, dims);
  spec.sigma1 = expr::CoeffField::matrix_field({{sigma1}}, dims);
  spec.b2 = expr::CoeffField::vector_field({"-0.5*y0"}, dims);
  spec.sigma2 = expr::CoeffField::matrix_field({{"0.3"}}, dims);
  spec.op = MonotoneOp::zero(1);
  spec.x0 = vec1(0.0);
  spec.y0 = vec1(0.0);
  return spec;
}

AveragedCoeffs exact_avg(const std::string& b1, const std::string& sigma1) {
  return AveragedCoeffs::build(flat_system(b1, sigma1), ErgodicConfig{});
}

expr::CoeffField scalar_h(const std::string& src) {
  return expr::CoeffField::scalar(src, expr::Dims{1, 1});
}

// Terminal scan of the decoupled variational formula for constant

// coefficients: inf_y {(x-y)^2/(2 s^2 t) + h(y)}.
double scan_oracle(double x, double t, double sig, double (*h)(double)) {
  double best = std::numeric_limits<double>::infinity();
  for (double y = -2.5; y <= 3.0; y += 1e-4) {
    const double v = (x - y) * (x - y) / (2.0 * sig * sig * t) + h(y);
    best = std::min(best, v);
  }
  return best;
}

double kink_h(double y) { return std::min(1.0, std::abs(y - 0.4)); }

double node_value(const GridSolution& sol, int frame, double x) {
  const double pos = (x - sol.x.front()) / sol.dx;
  const int j = static_cast<int>(std::llround(pos));
  REQUIRE(std::abs(pos - j) < 1e-6);
  return sol.u[frame][j];
}

}  // namespace

TEST_CASE("hamiltonian closed forms") {
  AveragedCoeffs avg = exact_avg("0.3*x0", kSigBarSrc);
  for (double x : {-1.5, 0.0, 0.7}) {
    CHECK(hamiltonian(avg, vec1(x), vec1(0.0)) == 0.0);
  }
  AveragedCoeffs flat = exact_avg("0", kSigBarSrc);
  const double ref = -0.5 * kSigBar * kSigBar;
  CHECK(hamiltonian(flat, vec1(0.2), vec1(1.0)) ==
        doctest::Approx(ref).epsilon(1e-14));
  // <bbar,p> shifts linearly.
  CHECK(hamiltonian(avg, vec1(2.0), vec1(1.0)) ==
        doctest::Approx(0.6 + ref).epsilon(1e-12));
}

TEST_CASE("hamiltonian quadratic term matches its sup formulation") {
  AveragedCoeffs avg = exact_avg("0", "0.5 + 0.2*cos(x0)");
  rng::NoiseStream u(777, 0, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const double x = 4.0 * u.uniform(4 * trial) - 2.0;
    const double p = 4.0 * u.uniform(4 * trial + 1) - 2.0;
    const double sig = avg.sigma(vec1(x))(0, 0);
    const double lhs = 0.5 * (sig * p) * (sig * p);
    double sup = -std::numeric_limits<double>::infinity();
    const double zmax = std::abs(sig * p) + 1.0;
    for (double z = -zmax; z <= zmax; z += 1e-3) {
      sup = std::max(sup, -p * sig * z - 0.5 * z * z);
    }
    CHECK(std::abs(sup - lhs) <= 1e-3);
    // and the Hamiltonian uses exactly this quadratic form
    CHECK(hamiltonian(avg, vec1(x), vec1(p)) ==
          doctest::Approx(-lhs).epsilon(1e-12));
  }
}

TEST_CASE("constant data is an exact fixed point of the scheme") {
  AveragedCoeffs avg = exact_avg("0.4", kSigBarSrc);
  HjbConfig cfg;
  cfg.dx = 2e-2;
  cfg.t_final = 0.3;
  cfg.x_min = -1.0;
  cfg.x_max = 1.0;
  GridSolution sol = solve_1d(avg, MonotoneOp::zero(1), scalar_h("0.7"), cfg);
  for (const auto& frame : sol.u) {
    for (double v : frame) CHECK(std::abs(v - 0.7) <= 1e-12);
  }
  HjbResidualReport rep = residual_check(sol, avg, MonotoneOp::zero(1));
  CHECK(rep.max_residual <= 1e-12);
  CHECK(rep.excluded == 0);
  CHECK(rep.checked > 0);
}

TEST_CASE("initial frame reproduces h exactly") {
  AveragedCoeffs avg = exact_avg("0", kSigBarSrc);
  HjbConfig cfg;
  cfg.dx = 1e-2;
  cfg.t_final = 0.1;
  GridSolution sol = solve_1d(avg, MonotoneOp::zero(1),
                              scalar_h("min(1, abs(x0 - 0.4))"), cfg);
  const Eigen::VectorXd yd = Eigen::VectorXd::Zero(1);
  expr::CoeffField h = scalar_h("min(1, abs(x0 - 0.4))");
  for (std::size_t j = 0; j < sol.x.size(); ++j) {
    CHECK(sol.u[0][j] == h.eval_scalar(vec1(sol.x[j]), yd));
  }
  CHECK(sol.t.front() == 0.0);
  CHECK(sol.t.back() == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("grid solution tracks the variational scan oracle") {
  AveragedCoeffs avg = exact_avg("0", kSigBarSrc);
  HjbConfig cfg;
  cfg.dx = 1e-2;
  cfg.t_final = 0.5;
  // x-free Hamiltonian: the monotone scheme preserves Lip(h) = 1, so the
  // occurring-slope bound is sharp and the viscosity can sit right on it.
  cfg.p_max = 1.0;
  GridSolution sol = solve_1d(avg, MonotoneOp::zero(1),
                              scalar_h("min(1, abs(x0 - 0.4))"), cfg);
  const int last = static_cast<int>(sol.u.size()) - 1;
  for (double xp : {-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0}) {
    CAPTURE(xp);
    const double oracle = scan_oracle(xp, 0.5, kSigBar, kink_h);
    CHECK(std::abs(node_value(sol, last, xp) - oracle) <= 2e-2);
  }
}

TEST_CASE("solution stays within the bounds of the data") {
  AveragedCoeffs avg = exact_avg("0", kSigBarSrc);
  HjbConfig cfg;
  cfg.dx = 1e-2;
  cfg.t_final = 0.5;
  GridSolution sol = solve_1d(avg, MonotoneOp::zero(1),
                              scalar_h("min(1, abs(x0 - 0.4))"), cfg);
  for (const auto& frame : sol.u) {
    for (double v : frame) {
      CHECK(v >= -1e-12);
      CHECK(v <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("refining dx halves the error against the closed form") {
  // h = min(1, x^2): on |x| <= 0.6 the plateau never competes and
  // u(t,x) = x^2 / (1 + 2 s^2 t) exactly.
  AveragedCoeffs avg = exact_avg("0", kSigBarSrc);
  const double t = 0.3;
  const double shrink = 1.0 + 2.0 * kSigBar * kSigBar * t;
  auto sup_err = [&](double dx) {
    HjbConfig cfg;
    cfg.dx = dx;
    cfg.t_final = t;
    GridSolution sol =
        solve_1d(avg, MonotoneOp::zero(1), scalar_h("min(1, x0^2)"), cfg);
    const int last = static_cast<int>(sol.u.size()) - 1;
    double err = 0.0;
    for (std::size_t j = 0; j < sol.x.size(); ++j) {
      if (std::abs(sol.x[j]) > 0.6) continue;
      err = std::max(err, std::abs(sol.u[last][j] - sol.x[j] * sol.x[j] / shrink));
    }
    return err;
  };
  const double coarse = sup_err(2e-2);
  const double fine = sup_err(1e-2);
  CAPTURE(coarse);
  CAPTURE(fine);
  CHECK(fine < coarse);
  const double ratio = coarse / fine;
  CHECK(ratio >= 1.5);
  CHECK(ratio <= 2.5);
}

TEST_CASE("box solve agrees with the variational optimizer at probes") {
  AveragedCoeffs avg = exact_avg("0", kSigBarSrc);
  MonotoneOp box = MonotoneOp::box(vec1(-0.8), vec1(0.8));
  expr::CoeffField h = scalar_h("min(1, abs(x0 - 0.4))");
  HjbConfig cfg;
  cfg.dx = 1e-2;
  cfg.t_final = 0.3;
  GridSolution sol = solve_1d(avg, box, h, cfg);
  CHECK(sol.x.front() == doctest::Approx(-0.8).epsilon(1e-12));
  CHECK(sol.x.back() == doctest::Approx(0.8).epsilon(1e-12));
  const int last = static_cast<int>(sol.u.size()) - 1;
  for (double xp : {-0.6, -0.3, 0.0, 0.3, 0.6}) {
    CAPTURE(xp);
    VariationalResult vr = variational_value(avg, box, vec1(xp), 0.3, h);
    CHECK(std::abs(node_value(sol, last, xp) - vr.value) <= 2e-2);
  }
}

TEST_CASE("residual is small off kinks and kink cells are excluded") {
  AveragedCoeffs avg = exact_avg("0", kSigBarSrc);
  HjbConfig cfg;
  cfg.dx = 1e-2;
  cfg.t_final = 0.3;
  GridSolution sol =
      solve_1d(avg, MonotoneOp::zero(1), scalar_h("min(1, x0^2)"), cfg);
  HjbResidualReport rep = residual_check(sol, avg, MonotoneOp::zero(1));
  CHECK(rep.excluded > 1000);  // the data kink at |x| = 1 persists
  CHECK(rep.checked > rep.excluded);
  CHECK(rep.max_residual <= 0.1);
}

TEST_CASE("smooth convex data keeps the residual at truncation size") {
  AveragedCoeffs avg = exact_avg("0", kSigBarSrc);
  HjbConfig cfg;
  cfg.dx = 1e-2;
  cfg.t_final = 0.2;
  GridSolution sol = solve_1d(avg, MonotoneOp::zero(1), scalar_h("x0^2"), cfg);
  HjbResidualReport rep = residual_check(sol, avg, MonotoneOp::zero(1));
  CHECK(rep.excluded == 0);  // no kink ever forms from convex data
  CHECK(rep.max_residual <= 0.06);

  HjbConfig coarse = cfg;
  coarse.dx = 2e-2;
  GridSolution sol2 =
      solve_1d(avg, MonotoneOp::zero(1), scalar_h("x0^2"), coarse);
  HjbResidualReport rep2 = residual_check(sol2, avg, MonotoneOp::zero(1));
  CHECK(rep.max_residual < rep2.max_residual);  // first-order truncation
}

TEST_CASE("grid parameter validation") {
  AveragedCoeffs avg = exact_avg("0", kSigBarSrc);
  expr::CoeffField h = scalar_h("x0^2");

  HjbConfig big_dt;
  big_dt.dx = 1e-2;
  big_dt.dt = 1e-2;  // violates dt (theta + theta/dx) <= dx by two orders
  big_dt.t_final = 0.2;
  CHECK_THROWS_AS(solve_1d(avg, MonotoneOp::zero(1), h, big_dt),
                  std::invalid_argument);

  HjbConfig ragged;
  ragged.dx = 0.3;  // does not divide the window [-2, 2]
  CHECK_THROWS_AS(solve_1d(avg, MonotoneOp::zero(1), h, ragged),
                  std::invalid_argument);

  HjbConfig ok;
  CHECK_THROWS_AS(solve_1d(avg, MonotoneOp::ball(vec1(0.0), 1.0), h, ok),
                  std::invalid_argument);

  expr::CoeffField hy = expr::CoeffField::scalar("y0", expr::Dims{1, 1});
  CHECK_THROWS_AS(solve_1d(avg, MonotoneOp::zero(1), hy, ok),
                  std::invalid_argument);
}

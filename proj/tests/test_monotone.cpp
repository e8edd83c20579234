#include "doctest.h"
#include "mvldp/monotone.hpp"

#include <cmath>
#include <random>

using mvldp::ExtendedReal;
using mvldp::MonotoneOp;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

Eigen::VectorXd vec1(double a) {
  Eigen::VectorXd v(1);
  v << a;
  return v;
}

// Grid-scan oracle for the SubdiffAbs resolvent: minimizes the proximal
// objective 0.5*(p-z)^2 + lambda*w*|p| by brute force.
double prox_abs_scan(double z, double lambda, double w) {
  double best_p = -3.0, best_v = 1e300;
  for (double p = -3.0; p <= 3.0; p += 1e-4) {
    const double v = 0.5 * (p - z) * (p - z) + lambda * w * std::abs(p);
    if (v < best_v) {
      best_v = v;
      best_p = p;
    }
  }
  return best_p;
}

std::vector<MonotoneOp> all_variants() {
  std::vector<MonotoneOp> ops;
  ops.push_back(MonotoneOp::zero(2));
  ops.push_back(MonotoneOp::box(vec2(-1.0, -1.0), vec2(1.0, 1.0)));
  ops.push_back(MonotoneOp::ball(vec2(0.5, -0.25), 1.5));
  ops.push_back(MonotoneOp::subdiff_abs(1.0));
  Eigen::MatrixXd q(2, 2);
  q << 2.0, 0.5, 0.5, 1.0;
  ops.push_back(MonotoneOp::subdiff_quadratic(q));
  return ops;
}

}  // namespace

TEST_CASE("zero operator: resolvent is the identity") {
  auto op = MonotoneOp::zero(2);
  const Eigen::VectorXd z = vec2(1.7, -42.0);
  for (double lam : {0.0, 0.01, 0.3, 7.0}) {
    CHECK(op.resolvent(lam, z) == z);
  }
}

TEST_CASE("box: projection and lambda-independent resolvent") {
  auto op = MonotoneOp::box(vec2(-1.0, -1.0), vec2(1.0, 1.0));
  const Eigen::VectorXd z = vec2(1.7, -0.3);
  const Eigen::VectorXd p = op.project(z);
  CHECK(p == vec2(1.0, -0.3));
  // Resolvent of a normal cone is the projection, for every lambda.
  CHECK(op.resolvent(0.3, z) == p);
  CHECK(op.resolvent(7.0, z) == p);
}

TEST_CASE("subdiff abs: soft threshold against the scan oracle") {
  auto op = MonotoneOp::subdiff_abs(1.0);
  const double lam = 0.5;

  CHECK(std::abs(prox_abs_scan(0.3, lam, 1.0) - 0.0) < 2e-4);
  CHECK(std::abs(prox_abs_scan(2.0, lam, 1.0) - 1.5) < 2e-4);

  CHECK(op.resolvent(lam, vec1(0.3))[0] == 0.0);
  CHECK(op.resolvent(lam, vec1(2.0))[0] == 1.5);
  CHECK(op.resolvent(lam, vec1(-2.0))[0] == -1.5);
  CHECK(op.resolvent(lam, vec1(0.5))[0] == 0.0);  // kink boundary maps to 0

  for (double z : {-2.3, -0.9, -0.2, 0.0, 0.4, 1.1, 2.8}) {
    CHECK(std::abs(op.resolvent(lam, vec1(z))[0] - prox_abs_scan(z, lam, 1.0)) <
          2e-4);
  }
}

TEST_CASE("subdiff quadratic: dense solve matches closed forms") {
  Eigen::MatrixXd q(2, 2);
  q << 2.0, 0.0, 0.0, 0.5;
  auto op = MonotoneOp::subdiff_quadratic(q);
  // (I + 0.5*Q) is diag(2, 1.25); z = (2,2) maps to (1, 1.6).
  const Eigen::VectorXd p = op.resolvent(0.5, vec2(2.0, 2.0));
  CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(1.6).epsilon(1e-14));

  // Independent dense solve.
  Eigen::MatrixXd full(2, 2);
  full << 1.7, -0.3, -0.3, 2.2;
  auto op2 = MonotoneOp::subdiff_quadratic(full);
  const Eigen::VectorXd z = vec2(0.8, -1.9);
  const double lam = 0.37;
  const Eigen::VectorXd want =
      (Eigen::MatrixXd::Identity(2, 2) + lam * full).fullPivLu().solve(z);
  CHECK((op2.resolvent(lam, z) - want).norm() < 1e-13);

  Eigen::MatrixXd indef(2, 2);
  indef << 1.0, 0.0, 0.0, -0.5;
  CHECK_THROWS_AS(MonotoneOp::subdiff_quadratic(indef), std::invalid_argument);
  Eigen::MatrixXd nonsym(2, 2);
  nonsym << 1.0, 0.5, -0.5, 1.0;
  CHECK_THROWS_AS(MonotoneOp::subdiff_quadratic(nonsym), std::invalid_argument);
}

TEST_CASE("one-sided evaluations on a box") {
  auto op = MonotoneOp::box(vec1(-1.0), vec1(1.0));

  // Right face: cone is [0, inf).
  CHECK(op.a_lower(vec1(1.0), vec1(1.0)) == ExtendedReal::finite(0.0));
  CHECK(op.a_upper(vec1(1.0), vec1(1.0)).is_pos_inf());
  CHECK(op.a_lower(vec1(1.0), vec1(-1.0)).is_neg_inf());
  CHECK(op.a_upper(vec1(1.0), vec1(-1.0)) == ExtendedReal::finite(0.0));

  // Interior: cone is {0}.
  CHECK(op.a_lower(vec1(0.2), vec1(5.0)) == ExtendedReal::finite(0.0));
  CHECK(op.a_upper(vec1(0.2), vec1(-5.0)) == ExtendedReal::finite(0.0));

  // Degenerate face: cone is the whole line.
  auto flat = MonotoneOp::box(vec1(0.0), vec1(0.0));
  CHECK(flat.a_lower(vec1(0.0), vec1(1.0)).is_neg_inf());
  CHECK(flat.a_upper(vec1(0.0), vec1(1.0)).is_pos_inf());
  CHECK(flat.a_lower(vec1(0.0), vec1(0.0)) == ExtendedReal::finite(0.0));

  CHECK_THROWS_AS(op.a_lower(vec1(1.5), vec1(1.0)), std::domain_error);
}

TEST_CASE("one-sided evaluations on a ball") {
  auto op = MonotoneOp::ball(vec2(0.0, 0.0), 1.0);
  const Eigen::VectorXd bd = vec2(1.0, 0.0);

  CHECK(op.a_lower(bd, vec2(1.0, 0.0)) == ExtendedReal::finite(0.0));
  CHECK(op.a_upper(bd, vec2(1.0, 0.0)).is_pos_inf());
  CHECK(op.a_lower(bd, vec2(-1.0, 0.0)).is_neg_inf());
  CHECK(op.a_upper(bd, vec2(-1.0, 0.0)) == ExtendedReal::finite(0.0));
  CHECK(op.a_lower(bd, vec2(0.0, 1.0)) == ExtendedReal::finite(0.0));  // tangent
  CHECK(op.a_upper(bd, vec2(0.0, 1.0)) == ExtendedReal::finite(0.0));
  CHECK(op.a_lower(vec2(0.3, 0.1), vec2(9.0, -4.0)) == ExtendedReal::finite(0.0));
  CHECK_THROWS_AS(op.a_upper(vec2(1.1, 0.0), vec2(1.0, 0.0)), std::domain_error);
}

TEST_CASE("one-sided evaluations for subdifferential variants") {
  auto ab = MonotoneOp::subdiff_abs(1.5);
  CHECK(ab.a_lower(vec1(0.0), vec1(2.0)) == ExtendedReal::finite(-3.0));
  CHECK(ab.a_upper(vec1(0.0), vec1(2.0)) == ExtendedReal::finite(3.0));
  CHECK(ab.a_lower(vec1(0.7), vec1(2.0)) == ExtendedReal::finite(3.0));
  CHECK(ab.a_upper(vec1(-0.7), vec1(2.0)) == ExtendedReal::finite(-3.0));

  Eigen::MatrixXd q(2, 2);
  q << 2.0, 0.0, 0.0, 1.0;
  auto qu = MonotoneOp::subdiff_quadratic(q);
  const Eigen::VectorXd x = vec2(1.0, -2.0);
  const Eigen::VectorXd v = vec2(0.5, 0.5);
  // Single-valued: lower == upper == <Qx, v>.
  CHECK(qu.a_lower(x, v) == ExtendedReal::finite(0.0));
  CHECK(qu.a_upper(x, v) == ExtendedReal::finite(0.0));
}

TEST_CASE("extended reals compare but never compute") {
  CHECK(ExtendedReal::neg_inf() < ExtendedReal::finite(-1e300));
  CHECK(ExtendedReal::finite(1e300) < ExtendedReal::pos_inf());
  CHECK(ExtendedReal::finite(1.0) < ExtendedReal::finite(2.0));
  CHECK(ExtendedReal::neg_inf() <= ExtendedReal::neg_inf());
  CHECK(ExtendedReal::neg_inf() == ExtendedReal::neg_inf());
  CHECK_THROWS_AS(ExtendedReal::pos_inf().value(), std::logic_error);
}

TEST_CASE("domain predicates") {
  auto box = MonotoneOp::box(vec2(-1.0, -1.0), vec2(1.0, 1.0));
  CHECK(box.zero_in_interior());
  CHECK(box.interior_radius(vec2(0.0, 0.0)) == 1.0);
  CHECK(box.domain_distance(vec2(2.0, 0.0)) == 1.0);

  auto shifted = MonotoneOp::box(vec2(0.0, -1.0), vec2(1.0, 1.0));
  CHECK(!shifted.zero_in_interior());

  auto ball = MonotoneOp::ball(vec2(0.0, 0.0), 2.0);
  CHECK(ball.zero_in_interior());
  CHECK(ball.interior_radius(vec2(0.0, 0.0)) == 2.0);

  auto far = MonotoneOp::ball(vec2(3.0, 0.0), 1.0);
  CHECK(!far.zero_in_interior());

  CHECK(MonotoneOp::subdiff_abs(1.0).zero_in_interior());
  CHECK(MonotoneOp::zero(3).interior_radius(Eigen::VectorXd::Zero(3)) ==
        std::numeric_limits<double>::infinity());
}

TEST_CASE("graph samples respect the variant structure") {
  auto box = MonotoneOp::box(vec2(-1.0, 0.5), vec2(1.0, 2.0));
  auto pairs = box.graph_sample(7, 500);
  CHECK(pairs.size() == 500);
  bool saw_boundary = false, saw_interior = false;
  for (const auto& p : pairs) {
    CHECK(box.domain_distance(p.x) <= 1e-12);
    for (int i = 0; i < 2; ++i) {
      if (p.y[i] > 0.0) CHECK(p.x[i] == box.box_upper()[i]);
      if (p.y[i] < 0.0) CHECK(p.x[i] == box.box_lower()[i]);
    }
    if (p.y.norm() > 0) saw_boundary = true;
    if (p.y.norm() == 0) saw_interior = true;
  }
  CHECK(saw_boundary);
  CHECK(saw_interior);

  auto ball = MonotoneOp::ball(vec2(0.5, -0.25), 1.5);
  for (const auto& p : ball.graph_sample(9, 300)) {
    CHECK(ball.domain_distance(p.x) <= 1e-12);
    if (p.y.norm() > 0) {
      const Eigen::VectorXd n = p.x - ball.ball_center();
      CHECK(std::abs(n.norm() - 1.5) < 1e-12);
      CHECK(n.dot(p.y) >= 0.0);
      // y is parallel to the outward normal
      CHECK(std::abs(n[0] * p.y[1] - n[1] * p.y[0]) < 1e-12);
    }
  }

  auto ab = MonotoneOp::subdiff_abs(0.8);
  for (const auto& p : ab.graph_sample(11, 300)) {
    if (p.x[0] == 0.0)
      CHECK(std::abs(p.y[0]) <= 0.8);
    else
      CHECK(p.y[0] == (p.x[0] > 0 ? 0.8 : -0.8));
  }

  // Deterministic in the seed.
  auto a1 = box.graph_sample(42, 50);
  auto a2 = box.graph_sample(42, 50);
  for (size_t i = 0; i < a1.size(); ++i) {
    CHECK(a1[i].x == a2[i].x);
    CHECK(a1[i].y == a2[i].y);
  }
}

TEST_CASE("property: resolvents are nonexpansive") {
  std::mt19937 gen(555);
  std::uniform_real_distribution<double> coord(-3.0, 3.0), lam(0.01, 2.0);
  for (const auto& op : all_variants()) {
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
      Eigen::VectorXd z1(op.dim()), z2(op.dim());
      for (int k = 0; k < op.dim(); ++k) {
        z1[k] = coord(gen);
        z2[k] = coord(gen);
      }
      const double dz = (z1 - z2).norm();
      if (dz < 1e-12) continue;
      const double l = lam(gen);
      const double dp = (op.resolvent(l, z1) - op.resolvent(l, z2)).norm();
      worst = std::max(worst, dp / dz);
    }
    CHECK(worst <= 1.0 + 1e-12);
  }
}

TEST_CASE("property: resolvent output is monotone-consistent with the graph") {
  std::mt19937 gen(556);
  std::uniform_real_distribution<double> coord(-3.0, 3.0), lam(0.01, 2.0);
  for (const auto& op : all_variants()) {
    const auto graph = op.graph_sample(1234, 1000);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      Eigen::VectorXd z(op.dim());
      for (int k = 0; k < op.dim(); ++k) z[k] = coord(gen);
      const double l = lam(gen);
      const Eigen::VectorXd p = op.resolvent(l, z);
      const Eigen::VectorXd zeta = (z - p) / l;
      for (const auto& g : graph)
        worst = std::min(worst, (p - g.x).dot(zeta - g.y));
    }
    CHECK(worst >= -1e-9);
  }
}

TEST_CASE("property: projection is idempotent and a_lower <= a_upper") {
  std::mt19937 gen(557);
  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  for (const auto& op : all_variants()) {
    for (int i = 0; i < 500; ++i) {
      Eigen::VectorXd z(op.dim()), v(op.dim());
      for (int k = 0; k < op.dim(); ++k) {
        z[k] = coord(gen);
        v[k] = coord(gen);
      }
      const Eigen::VectorXd p = op.project(z);
      CHECK((op.project(p) - p).norm() <= 1e-14);
      CHECK(op.a_lower(p, v) <= op.a_upper(p, v));
    }
  }
}

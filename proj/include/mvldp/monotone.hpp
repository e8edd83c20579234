#ifndef MVLDP_MONOTONE_HPP
#define MVLDP_MONOTONE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace mvldp {

// Extended real used by the one-sided operator evaluations.  Deliberately
// supports comparisons only; the infinities are sentinels, never operands.
class ExtendedReal {
 public:
  static ExtendedReal finite(double v) { return ExtendedReal(0, v); }
  static ExtendedReal pos_inf() { return ExtendedReal(+1, 0.0); }
  static ExtendedReal neg_inf() { return ExtendedReal(-1, 0.0); }

  bool is_finite() const { return tag_ == 0; }
  bool is_pos_inf() const { return tag_ > 0; }
  bool is_neg_inf() const { return tag_ < 0; }

  // Finite value; calling this on an infinity is a logic error.
  double value() const;

  friend bool operator==(const ExtendedReal& a, const ExtendedReal& b) {
    return a.tag_ == b.tag_ && (a.tag_ != 0 || a.v_ == b.v_);
  }
  friend bool operator<(const ExtendedReal& a, const ExtendedReal& b) {
    if (a.tag_ != b.tag_) return a.tag_ < b.tag_;
    return a.tag_ == 0 && a.v_ < b.v_;
  }
  friend bool operator<=(const ExtendedReal& a, const ExtendedReal& b) {
    return a < b || a == b;
  }

 private:
  ExtendedReal(int tag, double v) : tag_(tag), v_(v) {}
  int tag_;
  double v_;
};

struct GraphPair {
  Eigen::VectorXd x;  // point in the domain
  Eigen::VectorXd y;  // element of A(x)
};

// Maximal monotone operator, one of a closed set of variants with exact
// resolvents.  Tolerance for membership/boundary classification is 1e-9.
class MonotoneOp {
 public:
  enum class Kind { Zero, Box, Ball, SubdiffAbs, SubdiffQuadratic };

  static MonotoneOp zero(int dim);
  static MonotoneOp box(Eigen::VectorXd lower, Eigen::VectorXd upper);
  static MonotoneOp ball(Eigen::VectorXd center, double radius);
  static MonotoneOp subdiff_abs(double weight);            // 1D, A = w.d|x|
  static MonotoneOp subdiff_quadratic(Eigen::MatrixXd q);  // A(x) = {Qx}

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }

  // Strict interior test for the origin, required of operators used in
  // simulation.
  bool zero_in_interior() const;

  double domain_distance(const Eigen::VectorXd& z) const;

  // Radius of the largest ball around a inside the domain (infinite for the
  // full-domain variants); 0 when a is not strictly interior.
  double interior_radius(const Eigen::VectorXd& a) const;

  Eigen::VectorXd project(const Eigen::VectorXd& z) const;

  // Resolvent (I + lambda A)^(-1), exact per variant.
  Eigen::VectorXd resolvent(double lambda, const Eigen::VectorXd& z) const;

  // Allocation-light form for stepping loops; out may alias z.
  void resolvent_into(double lambda, const Eigen::VectorXd& z,
                      Eigen::VectorXd& out) const;

  // Deterministic sample of graph pairs (x, y in A(x)); boundary points carry
  // outward normal rays of random nonnegative magnitude.
  std::vector<GraphPair> graph_sample(uint64_t seed, int count) const;

  // inf / sup of <zeta, v> over zeta in A(x).  Throws std::domain_error when
  // x lies outside the domain closure beyond tolerance.
  ExtendedReal a_lower(const Eigen::VectorXd& x, const Eigen::VectorXd& v) const;
  ExtendedReal a_upper(const Eigen::VectorXd& x, const Eigen::VectorXd& v) const;

  const Eigen::VectorXd& box_lower() const { return lower_; }
  const Eigen::VectorXd& box_upper() const { return upper_; }
  const Eigen::VectorXd& ball_center() const { return lower_; }
  double ball_radius() const { return scalar_; }
  double abs_weight() const { return scalar_; }
  const Eigen::MatrixXd& quadratic_q() const { return q_; }

  static constexpr double kTol = 1e-9;

 private:
  MonotoneOp() = default;
  void check_dim(const Eigen::VectorXd& z) const;

  Kind kind_ = Kind::Zero;
  int dim_ = 0;
  Eigen::VectorXd lower_, upper_;  // box bounds; lower_ doubles as ball center
  double scalar_ = 0.0;            // ball radius or abs weight
  Eigen::MatrixXd q_;
};

}  // namespace mvldp

#endif

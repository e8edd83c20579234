#include "mvldp/monotone.hpp"

#include "mvldp/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mvldp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double ExtendedReal::value() const {
  if (tag_ != 0)
    throw std::logic_error("ExtendedReal: value() on an infinity");
  return v_;
}

MonotoneOp MonotoneOp::zero(int dim) {
  if (dim <= 0) throw std::invalid_argument("zero: dim must be positive");
  MonotoneOp op;
  op.kind_ = Kind::Zero;
  op.dim_ = dim;
  return op;
}

MonotoneOp MonotoneOp::box(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  if (lower.size() == 0 || lower.size() != upper.size())
    throw std::invalid_argument("box: bound shapes disagree");
  for (int i = 0; i < lower.size(); ++i)
    if (!(lower[i] <= upper[i]))
      throw std::invalid_argument("box: lower bound exceeds upper bound");
  MonotoneOp op;
  op.kind_ = Kind::Box;
  op.dim_ = static_cast<int>(lower.size());
  op.lower_ = std::move(lower);
  op.upper_ = std::move(upper);
  return op;
}

MonotoneOp MonotoneOp::ball(Eigen::VectorXd center, double radius) {
  if (center.size() == 0) throw std::invalid_argument("ball: empty center");
  if (!(radius > 0.0)) throw std::invalid_argument("ball: radius must be positive");
  MonotoneOp op;
  op.kind_ = Kind::Ball;
  op.dim_ = static_cast<int>(center.size());
  op.lower_ = std::move(center);
  op.scalar_ = radius;
  return op;
}

MonotoneOp MonotoneOp::subdiff_abs(double weight) {
  if (!(weight >= 0.0)) throw std::invalid_argument("subdiff_abs: weight < 0");
  MonotoneOp op;
  op.kind_ = Kind::SubdiffAbs;
  op.dim_ = 1;
  op.scalar_ = weight;
  return op;
}

MonotoneOp MonotoneOp::subdiff_quadratic(Eigen::MatrixXd q) {
  if (q.rows() == 0 || q.rows() != q.cols())
    throw std::invalid_argument("subdiff_quadratic: Q must be square");
  const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("subdiff_quadratic: Q must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
  if (es.eigenvalues().minCoeff() < -1e-12 * scale)
    throw std::invalid_argument("subdiff_quadratic: Q must be PSD");
  MonotoneOp op;
  op.kind_ = Kind::SubdiffQuadratic;
  op.dim_ = static_cast<int>(q.rows());
  op.q_ = std::move(q);
  return op;
}

void MonotoneOp::check_dim(const Eigen::VectorXd& z) const {
  if (static_cast<int>(z.size()) != dim_)
    throw std::invalid_argument("MonotoneOp: dimension mismatch");
}

bool MonotoneOp::zero_in_interior() const {
  switch (kind_) {
    case Kind::Box:
      for (int i = 0; i < dim_; ++i)
        if (!(lower_[i] < 0.0 && 0.0 < upper_[i])) return false;
      return true;
    case Kind::Ball:
      return lower_.norm() < scalar_;
    default:
      return true;  // full-domain variants
  }
}

double MonotoneOp::domain_distance(const Eigen::VectorXd& z) const {
  check_dim(z);
  switch (kind_) {
    case Kind::Box: {
      double d2 = 0.0;
      for (int i = 0; i < dim_; ++i) {
        const double ex = std::max({lower_[i] - z[i], z[i] - upper_[i], 0.0});
        d2 += ex * ex;
      }
      return std::sqrt(d2);
    }
    case Kind::Ball:
      return std::max(0.0, (z - lower_).norm() - scalar_);
    default:
      return 0.0;
  }
}

double MonotoneOp::interior_radius(const Eigen::VectorXd& a) const {
  check_dim(a);
  switch (kind_) {
    case Kind::Box: {
      double r = kInf;
      for (int i = 0; i < dim_; ++i)
        r = std::min({r, a[i] - lower_[i], upper_[i] - a[i]});
      return std::max(0.0, r);
    }
    case Kind::Ball:
      return std::max(0.0, scalar_ - (a - lower_).norm());
    default:
      return kInf;
  }
}

Eigen::VectorXd MonotoneOp::project(const Eigen::VectorXd& z) const {
  check_dim(z);
  switch (kind_) {
    case Kind::Box:
      return z.cwiseMax(lower_).cwiseMin(upper_);
    case Kind::Ball: {
      const Eigen::VectorXd r = z - lower_;
      const double norm = r.norm();
      if (norm <= scalar_) return z;
      return lower_ + (scalar_ / norm) * r;
    }
    default:
      return z;
  }
}

void MonotoneOp::resolvent_into(double lambda, const Eigen::VectorXd& z,
                                Eigen::VectorXd& out) const {
  check_dim(z);
  if (!(lambda >= 0.0))
    throw std::invalid_argument("resolvent: lambda must be nonnegative");
  switch (kind_) {
    case Kind::Zero:
      out = z;
      return;
    case Kind::Box:
      // The resolvent of a normal cone is the metric projection, for every
      // lambda.
      out = z.cwiseMax(lower_).cwiseMin(upper_);
      return;
    case Kind::Ball:
      out = project(z);
      return;
    case Kind::SubdiffAbs: {
      const double t = lambda * scalar_;
      const double v = z[0];
      out.resize(1);
      out[0] = (std::abs(v) <= t) ? 0.0 : v - t * (v > 0 ? 1.0 : -1.0);
      return;
    }
    case Kind::SubdiffQuadratic: {
      Eigen::MatrixXd m = Eigen::MatrixXd::Identity(dim_, dim_) + lambda * q_;
      out = m.ldlt().solve(z);
      return;
    }
  }
}

Eigen::VectorXd MonotoneOp::resolvent(double lambda,
                                      const Eigen::VectorXd& z) const {
  Eigen::VectorXd out;
  resolvent_into(lambda, z, out);
  return out;
}

std::vector<GraphPair> MonotoneOp::graph_sample(uint64_t seed,
                                                int count) const {
  rng::NoiseStream u(seed, 0xA11CE, 0);
  rng::NoiseStream g(seed, 0xA11CE, 1);
  uint64_t du = 0, dg = 0;
  auto unif = [&] { return u.uniform(du++); };
  auto gauss = [&] { return g.normal(dg++); };

  std::vector<GraphPair> out;
  out.reserve(count);
  for (int s = 0; s < count; ++s) {
    GraphPair p;
    p.x.resize(dim_);
    p.y = Eigen::VectorXd::Zero(dim_);
    switch (kind_) {
      case Kind::Zero:
        for (int i = 0; i < dim_; ++i) p.x[i] = 2.0 * gauss();
        break;
      case Kind::Box:
        for (int i = 0; i < dim_; ++i) {
          if (upper_[i] - lower_[i] <= kTol) {
            p.x[i] = lower_[i];
            p.y[i] = 3.0 * gauss();  // degenerate face: cone is the whole line
            continue;
          }
          const double c = unif();
          if (c < 0.5) {  // interior
            p.x[i] = lower_[i] + (0.05 + 0.9 * unif()) * (upper_[i] - lower_[i]);
          } else if (c < 0.75) {  // lower face, inward-pointing cone
            p.x[i] = lower_[i];
            p.y[i] = std::log(unif());  // -Exp(1), possibly ~0
          } else {  // upper face
            p.x[i] = upper_[i];
            p.y[i] = -std::log(unif());
          }
        }
        break;
      case Kind::Ball: {
        Eigen::VectorXd dir(dim_);
        for (int i = 0; i < dim_; ++i) dir[i] = gauss();
        const double n = dir.norm();
        dir = (n > 0) ? Eigen::VectorXd(dir / n) : Eigen::VectorXd::Unit(dim_, 0);
        if (unif() < 0.5) {
          p.x = lower_ + (0.95 * unif() * scalar_) * dir;  // interior, y = 0
        } else {
          p.x = lower_ + scalar_ * dir;
          p.y = -std::log(unif()) * dir;  // outward normal ray
        }
        break;
      }
      case Kind::SubdiffAbs:
        if (unif() < 0.25) {
          p.x[0] = 0.0;
          p.y[0] = scalar_ * (2.0 * unif() - 1.0);
        } else {
          p.x[0] = 2.0 * gauss();
          if (p.x[0] == 0.0) p.x[0] = 1.0;
          p.y[0] = scalar_ * (p.x[0] > 0 ? 1.0 : -1.0);
        }
        break;
      case Kind::SubdiffQuadratic:
        for (int i = 0; i < dim_; ++i) p.x[i] = 2.0 * gauss();
        p.y = q_ * p.x;
        break;
    }
    out.push_back(std::move(p));
  }
  return out;
}

ExtendedReal MonotoneOp::a_lower(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& v) const {
  check_dim(x);
  check_dim(v);
  if (domain_distance(x) > kTol)
    throw std::domain_error("a_lower: x outside the domain closure");
  switch (kind_) {
    case Kind::Zero:
      return ExtendedReal::finite(0.0);
    case Kind::Box: {
      for (int i = 0; i < dim_; ++i) {
        const bool at_lower = x[i] - lower_[i] <= kTol;
        const bool at_upper = upper_[i] - x[i] <= kTol;
        if (at_lower && at_upper && v[i] != 0.0) return ExtendedReal::neg_inf();
        if (at_lower && !at_upper && v[i] > 0.0) return ExtendedReal::neg_inf();
        if (at_upper && !at_lower && v[i] < 0.0) return ExtendedReal::neg_inf();
      }
      return ExtendedReal::finite(0.0);
    }
    case Kind::Ball: {
      const Eigen::VectorXd r = x - lower_;
      if (r.norm() < scalar_ - kTol) return ExtendedReal::finite(0.0);
      const double s = r.dot(v) / r.norm();
      return s >= 0.0 ? ExtendedReal::finite(0.0) : ExtendedReal::neg_inf();
    }
    case Kind::SubdiffAbs:
      if (x[0] == 0.0) return ExtendedReal::finite(-scalar_ * std::abs(v[0]));
      return ExtendedReal::finite(scalar_ * (x[0] > 0 ? v[0] : -v[0]));
    case Kind::SubdiffQuadratic:
      return ExtendedReal::finite(v.dot(q_ * x));
  }
  return ExtendedReal::finite(0.0);
}

ExtendedReal MonotoneOp::a_upper(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& v) const {
  check_dim(x);
  check_dim(v);
  if (domain_distance(x) > kTol)
    throw std::domain_error("a_upper: x outside the domain closure");
  switch (kind_) {
    case Kind::Zero:
      return ExtendedReal::finite(0.0);
    case Kind::Box: {
      for (int i = 0; i < dim_; ++i) {
        const bool at_lower = x[i] - lower_[i] <= kTol;
        const bool at_upper = upper_[i] - x[i] <= kTol;
        if (at_lower && at_upper && v[i] != 0.0) return ExtendedReal::pos_inf();
        if (at_lower && !at_upper && v[i] < 0.0) return ExtendedReal::pos_inf();
        if (at_upper && !at_lower && v[i] > 0.0) return ExtendedReal::pos_inf();
      }
      return ExtendedReal::finite(0.0);
    }
    case Kind::Ball: {
      const Eigen::VectorXd r = x - lower_;
      if (r.norm() < scalar_ - kTol) return ExtendedReal::finite(0.0);
      const double s = r.dot(v) / r.norm();
      return s > 0.0 ? ExtendedReal::pos_inf() : ExtendedReal::finite(0.0);
    }
    case Kind::SubdiffAbs:
      if (x[0] == 0.0) return ExtendedReal::finite(scalar_ * std::abs(v[0]));
      return ExtendedReal::finite(scalar_ * (x[0] > 0 ? v[0] : -v[0]));
    case Kind::SubdiffQuadratic:
      return ExtendedReal::finite(v.dot(q_ * x));
  }
  return ExtendedReal::finite(0.0);
}

}  // namespace mvldp

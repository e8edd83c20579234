#include "mvldp/averaging.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvldp {

namespace {

void check_ergodic_cfg(const ErgodicConfig& cfg) {
  if (!(cfg.dt > 0.0))
    throw std::invalid_argument("ErgodicConfig: dt must be positive");
  if (cfg.thin < 1)
    throw std::invalid_argument("ErgodicConfig: thin must be >= 1");
  if (cfg.batches < 2)
    throw std::invalid_argument("ErgodicConfig: need at least 2 batches");
  if (cfg.n_samples < cfg.batches)
    throw std::invalid_argument("ErgodicConfig: n_samples < batches");
}

// Mixing rate from the dissipativity probe; the estimators refuse to run on
// a system without a verified rate unless the caller overrides.
double require_mixing_rate(const SystemSpec& spec, bool skip_check,
                           bool rate_needed, const char* who) {
  const auto rep = verify_dissipativity(spec);
  if (!rep.pass && !skip_check)
    throw std::runtime_error(
        std::string(who) +
        ": dissipativity probe failed (beta_hat <= 2 L_hat); set the "
        "override to proceed with explicit parameters");
  if (rate_needed && !(rep.alpha_hat > 0.0))
    throw std::runtime_error(
        std::string(who) +
        ": no positive mixing rate; burn_in/t_max must be set explicitly");
  return rep.alpha_hat;
}

long long to_steps(double time, double dt) {
  return static_cast<long long>(std::ceil(time / dt - 1e-12));
}

// Batch-means accumulator for a flattened quantity of dimension q.
class BatchAccum {
 public:
  BatchAccum(int q, int batches, long long per_batch)
      : per_batch_(per_batch),
        sums_(Eigen::MatrixXd::Zero(q, batches)) {}

  void add(const Eigen::VectorXd& f) {
    sums_.col(static_cast<int>(count_ / per_batch_)) += f;
    ++count_;
  }

  long long count() const { return count_; }

  void finish(Eigen::VectorXd& mean, Eigen::VectorXd& std_error) const {
    const int b = static_cast<int>(sums_.cols());
    mean = sums_.rowwise().sum() / static_cast<double>(count_);
    const Eigen::MatrixXd batch_means = sums_ / static_cast<double>(per_batch_);
    Eigen::VectorXd var = (batch_means.colwise() - mean)
                              .array()
                              .square()
                              .matrix()
                              .rowwise()
                              .sum() /
                          static_cast<double>(b - 1);
    std_error = (var / static_cast<double>(b)).cwiseSqrt();
  }

 private:
  long long per_batch_, count_ = 0;
  Eigen::MatrixXd sums_;
};

// One frozen trajectory at slow state x: burn-in, then n_used samples taken
// every cfg.thin steps.  visit(y) sees each retained sample.
template <class Visit>
long long ergodic_sweep(const SystemSpec& spec, const Eigen::VectorXd& x,
                        const ErgodicConfig& cfg, double burn_in,
                        Visit&& visit) {
  const long long per_batch = cfg.n_samples / cfg.batches;
  const long long n_used = per_batch * cfg.batches;
  const long long burn_steps = to_steps(burn_in, cfg.dt);

  FrozenRunner runner(spec, x, cfg.dt);
  rng::NoiseStream noise(cfg.seed, 0, kChannelFast);
  Eigen::VectorXd y = spec.y0;
  std::vector<double> z2(spec.d2);
  long long k = 0;
  for (; k < burn_steps; ++k) {
    noise.step_normals(static_cast<uint64_t>(k), spec.d2, z2.data());
    runner.step(y, z2.data());
  }
  for (long long s = 0; s < n_used; ++s) {
    for (int t = 0; t < cfg.thin; ++t, ++k) {
      noise.step_normals(static_cast<uint64_t>(k), spec.d2, z2.data());
      runner.step(y, z2.data());
    }
    visit(y);
  }
  return n_used;
}

double resolve_burn_in(const ErgodicConfig& cfg, double alpha_hat) {
  return cfg.burn_in >= 0.0 ? cfg.burn_in : 10.0 / alpha_hat;
}

struct SampledAverages {
  VectorEstimate drift;
  MatrixEstimate diffusion;
};

// Shared single sweep for bbar1 and abar1 so both come from one trajectory.
SampledAverages sample_averages(const SystemSpec& spec,
                                const Eigen::VectorXd& x,
                                const ErgodicConfig& cfg) {
  check_ergodic_cfg(cfg);
  const double alpha = require_mixing_rate(
      spec, cfg.skip_dissipativity_check, cfg.burn_in < 0.0, "averaging");
  const long long per_batch = cfg.n_samples / cfg.batches;

  const int n = spec.n;
  BatchAccum acc(n + n * n, cfg.batches, per_batch);
  Eigen::VectorXd f(n + n * n);
  Eigen::VectorXd b(n);
  Eigen::MatrixXd s(n, spec.d1);
  const long long n_used = ergodic_sweep(
      spec, x, cfg, resolve_burn_in(cfg, alpha), [&](const Eigen::VectorXd& y) {
        spec.b1.eval(x.data(), y.data(), b.data());
        spec.sigma1.eval(x.data(), y.data(), s.data());
        f.head(n) = b;
        Eigen::Map<Eigen::MatrixXd>(f.data() + n, n, n).noalias() =
            s * s.transpose();
        acc.add(f);
      });

  Eigen::VectorXd mean, se;
  acc.finish(mean, se);

  SampledAverages out;
  out.drift.value = mean.head(n);
  out.drift.std_error = se.head(n);
  out.drift.n_samples = n_used;

  const Eigen::MatrixXd raw =
      Eigen::Map<const Eigen::MatrixXd>(mean.data() + n, n, n);
  const Eigen::MatrixXd raw_se =
      Eigen::Map<const Eigen::MatrixXd>(se.data() + n, n, n);
  out.diffusion.value = 0.5 * (raw + raw.transpose());
  out.diffusion.std_error = 0.5 * (raw_se + raw_se.transpose());
  out.diffusion.n_samples = n_used;

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      out.diffusion.value);
  if (eig.eigenvalues().minCoeff() < -1e-10)
    throw std::runtime_error(
        "averaged_diffusion: estimate is not PSD within tolerance");
  return out;
}

}  // namespace

InvariantMeasureEstimate estimate_invariant(const SystemSpec& spec,
                                            const Eigen::VectorXd& x,
                                            const ErgodicConfig& cfg) {
  check_ergodic_cfg(cfg);
  const double alpha = require_mixing_rate(
      spec, cfg.skip_dissipativity_check, cfg.burn_in < 0.0,
      "estimate_invariant");
  const long long per_batch = cfg.n_samples / cfg.batches;

  InvariantMeasureEstimate out;
  out.x = x;
  out.samples.reserve(static_cast<std::size_t>(per_batch * cfg.batches));
  BatchAccum acc(spec.m, cfg.batches, per_batch);
  const long long n_used = ergodic_sweep(
      spec, x, cfg, resolve_burn_in(cfg, alpha), [&](const Eigen::VectorXd& y) {
        out.samples.push_back(y);
        acc.add(y);
      });

  out.mean.value.resize(spec.m);
  out.mean.std_error.resize(spec.m);
  acc.finish(out.mean.value, out.mean.std_error);
  out.mean.n_samples = n_used;

  out.covariance = Eigen::MatrixXd::Zero(spec.m, spec.m);
  for (const auto& y : out.samples) {
    const Eigen::VectorXd d = y - out.mean.value;
    out.covariance.noalias() += d * d.transpose();
  }
  out.covariance /= static_cast<double>(n_used - 1);
  out.n_effective = n_used;
  return out;
}

VectorEstimate averaged_drift(const SystemSpec& spec, const Eigen::VectorXd& x,
                              const ErgodicConfig& cfg) {
  return sample_averages(spec, x, cfg).drift;
}

MatrixEstimate averaged_diffusion(const SystemSpec& spec,
                                  const Eigen::VectorXd& x,
                                  const ErgodicConfig& cfg) {
  return sample_averages(spec, x, cfg).diffusion;
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols())
    throw std::invalid_argument("sqrt_psd: matrix must be square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("sqrt_psd: matrix must be symmetric");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  Eigen::VectorXd lam = eig.eigenvalues();
  for (int i = 0; i < lam.size(); ++i) {
    if (lam[i] < -1e-10)
      throw std::invalid_argument("sqrt_psd: matrix is not PSD");
    lam[i] = std::sqrt(std::max(lam[i], 0.0));
  }
  const Eigen::MatrixXd s =
      eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (s + s.transpose());
}

AveragedCoeffs AveragedCoeffs::build(
    const SystemSpec& spec, const ErgodicConfig& cfg,
    const std::vector<Eigen::VectorXd>& x_nodes) {
  AveragedCoeffs out;
  out.n_ = spec.n;

  const bool y_free = !spec.b1.depends_on_y() && !spec.sigma1.depends_on_y();
  const bool x_free = !spec.b1.depends_on_x() && !spec.sigma1.depends_on_x();

  if (y_free) {
    out.mode_ = Mode::Exact;
    out.b1_ = spec.b1;
    out.sigma1_ = spec.sigma1;
    return out;
  }
  if (x_free) {
    out.mode_ = Mode::Constant;
    auto avg = sample_averages(spec, spec.x0, cfg);
    out.sigma_.push_back(sqrt_psd(avg.diffusion.value));
    out.drift_.push_back(std::move(avg.drift));
    out.diffusion_.push_back(std::move(avg.diffusion));
    return out;
  }

  if (spec.n != 1)
    throw std::invalid_argument(
        "AveragedCoeffs: x-dependent slow coefficients are tabulated in one "
        "dimension only");
  if (x_nodes.size() < 2)
    throw std::invalid_argument(
        "AveragedCoeffs: x-dependent coefficients need at least 2 x_nodes");

  out.mode_ = Mode::Table;
  std::vector<Eigen::VectorXd> nodes = x_nodes;
  std::sort(nodes.begin(), nodes.end(),
            [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
              return a[0] < b[0];
            });
  for (const auto& xv : nodes) {
    auto avg = sample_averages(spec, xv, cfg);
    out.nodes_.push_back(xv[0]);
    out.sigma_.push_back(sqrt_psd(avg.diffusion.value));
    out.drift_.push_back(std::move(avg.drift));
    out.diffusion_.push_back(std::move(avg.diffusion));
  }
  return out;
}

int AveragedCoeffs::nearest_node(double x) const {
  const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), x);
  if (it == nodes_.begin()) return 0;
  if (it == nodes_.end()) return static_cast<int>(nodes_.size()) - 1;
  const int hi = static_cast<int>(it - nodes_.begin());
  return (x - nodes_[hi - 1] <= nodes_[hi] - x) ? hi - 1 : hi;
}

Eigen::VectorXd AveragedCoeffs::drift(const Eigen::VectorXd& x) const {
  switch (mode_) {
    case Mode::Exact: {
      const Eigen::VectorXd y = Eigen::VectorXd::Zero(b1_.dims().m);
      return b1_.eval_vector(x, y);
    }
    case Mode::Constant:
      return drift_[0].value;
    case Mode::Table: {
      const double t = x[0];
      if (t <= nodes_.front()) return drift_.front().value;
      if (t >= nodes_.back()) return drift_.back().value;
      const int hi = static_cast<int>(
          std::upper_bound(nodes_.begin(), nodes_.end(), t) - nodes_.begin());
      const double w = (t - nodes_[hi - 1]) / (nodes_[hi] - nodes_[hi - 1]);
      return (1.0 - w) * drift_[hi - 1].value + w * drift_[hi].value;
    }
  }
  throw std::logic_error("AveragedCoeffs: bad mode");
}

Eigen::MatrixXd AveragedCoeffs::diffusion(const Eigen::VectorXd& x) const {
  switch (mode_) {
    case Mode::Exact: {
      const Eigen::VectorXd y = Eigen::VectorXd::Zero(sigma1_.dims().m);
      const Eigen::MatrixXd s = sigma1_.eval_matrix(x, y);
      return s * s.transpose();
    }
    case Mode::Constant:
      return diffusion_[0].value;
    case Mode::Table: {
      const double t = x[0];
      if (t <= nodes_.front()) return diffusion_.front().value;
      if (t >= nodes_.back()) return diffusion_.back().value;
      const int hi = static_cast<int>(
          std::upper_bound(nodes_.begin(), nodes_.end(), t) - nodes_.begin());
      const double w = (t - nodes_[hi - 1]) / (nodes_[hi] - nodes_[hi - 1]);
      return (1.0 - w) * diffusion_[hi - 1].value + w * diffusion_[hi].value;
    }
  }
  throw std::logic_error("AveragedCoeffs: bad mode");
}

Eigen::MatrixXd AveragedCoeffs::sigma(const Eigen::VectorXd& x) const {
  if (mode_ == Mode::Constant) return sigma_[0];
  return sqrt_psd(diffusion(x));
}

const VectorEstimate& AveragedCoeffs::drift_estimate(
    const Eigen::VectorXd& x) const {
  if (mode_ == Mode::Exact)
    throw std::logic_error(
        "AveragedCoeffs: exact evaluation carries no error bars");
  return mode_ == Mode::Constant ? drift_[0] : drift_[nearest_node(x[0])];
}

const MatrixEstimate& AveragedCoeffs::diffusion_estimate(
    const Eigen::VectorXd& x) const {
  if (mode_ == Mode::Exact)
    throw std::logic_error(
        "AveragedCoeffs: exact evaluation carries no error bars");
  return mode_ == Mode::Constant ? diffusion_[0]
                                 : diffusion_[nearest_node(x[0])];
}

double psi_value(const SystemSpec& spec, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& y, const Eigen::VectorXd& p) {
  const Eigen::VectorXd b = spec.b1.eval_vector(x, y);
  const Eigen::MatrixXd s = spec.sigma1.eval_matrix(x, y);
  return b.dot(p) - 0.5 * (s.transpose() * p).squaredNorm();
}

double psi_bar(const AveragedCoeffs& avg, const Eigen::VectorXd& x,
               const Eigen::VectorXd& p) {
  return avg.drift(x).dot(p) - 0.5 * p.dot(avg.diffusion(x) * p);
}

Estimate kappa(const SystemSpec& spec, const AveragedCoeffs& avg,
               const Eigen::VectorXd& x, const Eigen::VectorXd& y,
               const Eigen::VectorXd& p, const KappaConfig& cfg) {
  return kappa_grid(spec, avg, x, {y}, p, cfg)[0];
}

std::vector<Estimate> kappa_grid(const SystemSpec& spec,
                                 const AveragedCoeffs& avg,
                                 const Eigen::VectorXd& x,
                                 const std::vector<Eigen::VectorXd>& ys,
                                 const Eigen::VectorXd& p,
                                 const KappaConfig& cfg) {
  if (!(cfg.dt > 0.0) || cfg.n_paths < 2)
    throw std::invalid_argument("kappa: bad dt or path count");
  if (ys.empty()) throw std::invalid_argument("kappa: empty start set");

  double t_max = cfg.t_max;
  if (t_max < 0.0) {
    const double alpha = verify_dissipativity(spec).alpha_hat;
    if (!(alpha > 0.0))
      throw std::runtime_error(
          "kappa: no positive mixing rate; set t_max explicitly");
    t_max = 2.0 / alpha * std::log(1.0 / cfg.tail_tol);
  }
  const long long steps = to_steps(t_max, cfg.dt);
  const double pbar = psi_bar(avg, x, p);

  const std::size_t g_count = ys.size();
  std::vector<double> sum(g_count, 0.0), sumsq(g_count, 0.0);
  std::vector<Eigen::VectorXd> state(g_count);
  std::vector<double> integral(g_count);
  FrozenRunner runner(spec, x, cfg.dt);
  std::vector<double> z2(spec.d2);

  Eigen::VectorXd b1buf(spec.n), sp(spec.d1);
  Eigen::MatrixXd s1buf(spec.n, spec.d1);
  auto psi_at = [&](const Eigen::VectorXd& yv) {
    spec.b1.eval(x.data(), yv.data(), b1buf.data());
    spec.sigma1.eval(x.data(), yv.data(), s1buf.data());
    sp.noalias() = s1buf.transpose() * p;
    return b1buf.dot(p) - 0.5 * sp.squaredNorm();
  };

  for (int path = 0; path < cfg.n_paths; ++path) {
    // Common random numbers: one noise stream per path, shared by every
    // grid start, so neighboring correctors stay strongly correlated.
    rng::NoiseStream noise(cfg.seed, static_cast<uint32_t>(path),
                           kChannelFast);
    for (std::size_t g = 0; g < g_count; ++g) {
      state[g] = ys[g];
      integral[g] = 0.0;
    }
    for (long long k = 0; k < steps; ++k) {
      noise.step_normals(static_cast<uint64_t>(k), spec.d2, z2.data());
      for (std::size_t g = 0; g < g_count; ++g) {
        integral[g] += cfg.dt * (psi_at(state[g]) - pbar);
        runner.step(state[g], z2.data());
      }
    }
    for (std::size_t g = 0; g < g_count; ++g) {
      sum[g] += integral[g];
      sumsq[g] += integral[g] * integral[g];
    }
  }

  std::vector<Estimate> out(g_count);
  for (std::size_t g = 0; g < g_count; ++g) {
    const double mean = sum[g] / cfg.n_paths;
    const double var =
        std::max(0.0, (sumsq[g] - cfg.n_paths * mean * mean) /
                          (cfg.n_paths - 1));
    out[g].value = mean;
    out[g].std_error = std::sqrt(var / cfg.n_paths);
    out[g].n_samples = cfg.n_paths;
  }
  return out;
}

PoissonResidualReport poisson_residual(const SystemSpec& spec,
                                       const AveragedCoeffs& avg,
                                       const Eigen::VectorXd& x,
                                       const std::vector<double>& y_grid,
                                       const Eigen::VectorXd& p,
                                       const KappaConfig& cfg) {
  if (spec.m != 1)
    throw std::invalid_argument("poisson_residual: needs a scalar fast state");
  if (y_grid.size() < 3)
    throw std::invalid_argument("poisson_residual: grid too small");
  const double delta = y_grid[1] - y_grid[0];
  for (std::size_t j = 1; j + 1 < y_grid.size(); ++j)
    if (std::abs(y_grid[j + 1] - y_grid[j] - delta) > 1e-9 * std::abs(delta))
      throw std::invalid_argument("poisson_residual: grid must be uniform");

  std::vector<Eigen::VectorXd> ys;
  ys.reserve(y_grid.size());
  for (double y : y_grid) {
    Eigen::VectorXd v(1);
    v[0] = y;
    ys.push_back(v);
  }
  const auto kap = kappa_grid(spec, avg, x, ys, p, cfg);
  const double pbar = psi_bar(avg, x, p);

  PoissonResidualReport rep;
  rep.tol = 0.05 * (1.0 + p.squaredNorm());
  rep.kappa_values.reserve(kap.size());
  for (const auto& e : kap) rep.kappa_values.push_back(e.value);
  for (std::size_t j = 1; j + 1 < y_grid.size(); ++j) {
    const double d1 =
        (rep.kappa_values[j + 1] - rep.kappa_values[j - 1]) / (2.0 * delta);
    const double d2 = (rep.kappa_values[j + 1] - 2.0 * rep.kappa_values[j] +
                       rep.kappa_values[j - 1]) /
                      (delta * delta);
    const Eigen::VectorXd b2 = spec.b2.eval_vector(x, ys[j]);
    const Eigen::MatrixXd s2 = spec.sigma2.eval_matrix(x, ys[j]);
    const double gen = b2[0] * d1 + 0.5 * s2.row(0).squaredNorm() * d2;
    const double res = std::abs(gen + psi_value(spec, x, ys[j], p) - pbar);
    rep.max_residual = std::max(rep.max_residual, res);
  }
  rep.pass = rep.max_residual <= rep.tol;
  return rep;
}

LipschitzReport lipschitz_probe(
    const SystemSpec& spec,
    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& x_pairs,
    const ErgodicConfig& cfg) {
  auto max_ratio = [&](uint64_t seed) {
    ErgodicConfig c = cfg;
    c.seed = seed;
    double worst = 0.0;
    for (const auto& [x1, x2] : x_pairs) {
      const double dist = (x1 - x2).norm();
      if (dist < 1e-12) continue;
      // Shared seed at both endpoints: the trajectories couple and the
      // difference of estimates tracks the difference of the true averages.
      const auto a1 = sample_averages(spec, x1, c);
      const auto a2 = sample_averages(spec, x2, c);
      const double num = (a1.drift.value - a2.drift.value).norm() +
                         (a1.diffusion.value - a2.diffusion.value).norm();
      worst = std::max(worst, num / dist);
    }
    return worst;
  };

  LipschitzReport rep;
  rep.c_hat = max_ratio(cfg.seed);
  rep.seed_spread =
      std::abs(rep.c_hat - max_ratio(cfg.seed ^ 0x9E3779B97F4A7C15ull));
  rep.n_pairs = static_cast<int>(x_pairs.size());
  return rep;
}

}  // namespace mvldp

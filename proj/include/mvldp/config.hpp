#ifndef MVLDP_CONFIG_HPP
#define MVLDP_CONFIG_HPP

#include "mvldp/averaging.hpp"
#include "mvldp/hjb.hpp"
#include "mvldp/ldp.hpp"
#include "mvldp/simulate.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace mvldp {

inline constexpr const char* kVersion = "0.1.0";

// Raised for any config problem; the message carries the JSON pointer of the
// offending field (and, for expressions, the parse offset).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Either a single (epsilon, gamma) pair or a sweep; a sweep lists epsilons
// and derives gamma = epsilon^gamma_exponent per entry.
struct ScheduleSpec {
  std::vector<double> epsilons;
  double gamma_exponent = 2.0;
  bool sweep() const { return !epsilons.empty(); }
};

struct AverageTask {
  bool present = false;
  std::vector<Eigen::VectorXd> x_nodes;  // defaults to {x0}
};

struct RateTask {
  bool present = false;
  Eigen::VectorXd x_target;
  double t = 1.0;
  OptControlConfig opt;
};

struct LaplaceTask {
  bool present = false;
  std::string h;  // scalar expression in x
  expr::CoeffField h_field;
  double t = 0.5;
  LaplaceConfig mc;
};

struct HjbTask {
  bool present = false;
  std::string h;
  expr::CoeffField h_field;
  HjbConfig grid;
};

struct CheckTask {
  bool present = false;
  DissipativityConfig dissipativity;
  std::string zeta;  // optional Lyapunov candidate, scalar in y
  expr::CoeffField zeta_field;
  LyapunovConfig lyapunov;
};

struct RunConfig {
  std::string name;
  SystemSpec system;
  bool has_scales = false;
  ScaleParams scales;   // first sweep entry when a sweep is given
  ScheduleSpec schedule;
  SimConfig sim;
  ErgodicConfig ergodic;
  AverageTask average;
  RateTask rate;
  LaplaceTask laplace;
  HjbTask hjb;
  CheckTask check;
  nlohmann::json raw;  // normalized source document, used for the manifest

  // Scale pairs the laplace sweep runs over (the single pair when no sweep).
  std::vector<ScaleParams> scale_list() const;
};

// Parses and fully validates a config document: expressions compiled,
// operator constructed, dims cross-checked, gamma/epsilon < 1 enforced for
// every listed epsilon.
RunConfig config_from_json(const nlohmann::json& root);
RunConfig load_config(const std::string& path);

// Built-in scenarios; "example5" is the bundled slow-fast example with
// b1 = 0, sigma1 = cos(y), b2 = s - y/2, sigma2 = nu (s = 0.3, nu = 0.5).
nlohmann::json builtin_scenario_json(const std::string& name);

// FNV-1a 64 over the canonical dump; stable across runs and platforms.
std::string config_digest(const nlohmann::json& root);

// Applies "dotted.path=value" onto the document; value is parsed as JSON
// when possible and kept as a string otherwise.
void apply_override(nlohmann::json& root, const std::string& assignment);

}  // namespace mvldp

#endif

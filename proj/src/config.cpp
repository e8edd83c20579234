#include "mvldp/config.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>

namespace mvldp {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& ptr, const std::string& msg) {
  throw ConfigError("schema error at " + ptr + ": " + msg);
}

const json* find(const json& obj, const std::string& key) {
  if (!obj.is_object()) return nullptr;
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const json& require(const json& obj, const std::string& ptr,
                    const std::string& key) {
  if (!obj.is_object()) fail(ptr, "expected an object");
  const json* j = find(obj, key);
  if (!j) fail(ptr + "/" + key, "missing field");
  return *j;
}

double as_num(const json& j, const std::string& ptr) {
  if (!j.is_number()) fail(ptr, "expected a number");
  return j.get<double>();
}

long long as_int(const json& j, const std::string& ptr) {
  if (!j.is_number_integer()) fail(ptr, "expected an integer");
  return j.get<long long>();
}

std::string as_str(const json& j, const std::string& ptr) {
  if (!j.is_string()) fail(ptr, "expected a string");
  return j.get<std::string>();
}

double opt_num(const json& obj, const std::string& ptr, const std::string& key,
               double def) {
  const json* j = find(obj, key);
  return j ? as_num(*j, ptr + "/" + key) : def;
}

long long opt_int(const json& obj, const std::string& ptr,
                  const std::string& key, long long def) {
  const json* j = find(obj, key);
  return j ? as_int(*j, ptr + "/" + key) : def;
}

Eigen::VectorXd as_vec(const json& j, const std::string& ptr) {
  if (!j.is_array()) fail(ptr, "expected an array of numbers");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<int>(i)] = as_num(j[i], ptr + "/" + std::to_string(i));
  return v;
}

Eigen::VectorXd req_vec(const json& obj, const std::string& ptr,
                        const std::string& key, int want) {
  Eigen::VectorXd v = as_vec(require(obj, ptr, key), ptr + "/" + key);
  if (v.size() != want)
    fail(ptr + "/" + key,
         "expected " + std::to_string(want) + " entries, got " +
             std::to_string(v.size()));
  return v;
}

std::vector<std::string> as_strings(const json& j, const std::string& ptr,
                                    int want) {
  if (!j.is_array()) fail(ptr, "expected an array of strings");
  if (static_cast<int>(j.size()) != want)
    fail(ptr, "expected " + std::to_string(want) + " entries, got " +
                  std::to_string(j.size()));
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(as_str(j[i], ptr + "/" + std::to_string(i)));
  return out;
}

std::vector<std::vector<std::string>> as_string_rows(const json& j,
                                                     const std::string& ptr,
                                                     int rows, int cols) {
  if (!j.is_array()) fail(ptr, "expected an array of string rows");
  if (static_cast<int>(j.size()) != rows)
    fail(ptr, "expected " + std::to_string(rows) + " rows, got " +
                  std::to_string(j.size()));
  std::vector<std::vector<std::string>> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(as_strings(j[i], ptr + "/" + std::to_string(i), cols));
  return out;
}

expr::Params parse_params(const json& obj, const std::string& ptr) {
  expr::Params params;
  const json* j = find(obj, "params");
  if (!j) return params;
  if (!j->is_object()) fail(ptr + "/params", "expected an object");
  for (auto it = j->begin(); it != j->end(); ++it)
    params[it.key()] = as_num(it.value(), ptr + "/params/" + it.key());
  return params;
}

template <typename F>
auto compile(const std::string& ptr, F&& build) {
  try {
    return build();
  } catch (const expr::ParseError& e) {
    throw ConfigError("expression parse error at " + ptr + ": " + e.what());
  }
}

MonotoneOp parse_operator(const json& sys, const std::string& ptr, int n) {
  const json* j = find(sys, "operator");
  if (!j) return MonotoneOp::zero(n);
  const std::string p = ptr + "/operator";
  const std::string kind = as_str(require(*j, p, "kind"), p + "/kind");
  if (kind == "zero") return MonotoneOp::zero(n);
  if (kind == "box")
    return MonotoneOp::box(req_vec(*j, p, "lower", n), req_vec(*j, p, "upper", n));
  if (kind == "ball")
    return MonotoneOp::ball(req_vec(*j, p, "center", n),
                            as_num(require(*j, p, "radius"), p + "/radius"));
  if (kind == "abs") {
    if (n != 1) fail(p, "abs operator requires n = 1");
    return MonotoneOp::subdiff_abs(as_num(require(*j, p, "weight"), p + "/weight"));
  }
  if (kind == "quadratic") {
    const json& q = require(*j, p, "q");
    auto rows = as_string_rows(q, p + "/q", n, n);
    Eigen::MatrixXd m(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        try {
          m(r, c) = std::stod(rows[r][c]);
        } catch (const std::exception&) {
          fail(p + "/q", "expected numeric entries");
        }
      }
    return MonotoneOp::subdiff_quadratic(m);
  }
  fail(p + "/kind", "unknown operator kind '" + kind + "'");
}

SystemSpec parse_system(const json& root) {
  const std::string ptr = "/system";
  const json& sys = require(root, "", "system");
  SystemSpec spec;
  spec.n = static_cast<int>(as_int(require(sys, ptr, "n"), ptr + "/n"));
  spec.m = static_cast<int>(as_int(require(sys, ptr, "m"), ptr + "/m"));
  spec.d1 = static_cast<int>(opt_int(sys, ptr, "d1", spec.n));
  spec.d2 = static_cast<int>(opt_int(sys, ptr, "d2", spec.m));
  if (spec.n <= 0 || spec.m <= 0 || spec.d1 <= 0 || spec.d2 <= 0)
    fail(ptr, "dims must be positive");
  const expr::Dims dims{spec.n, spec.m};
  const expr::Params params = parse_params(sys, ptr);

  const auto field = [&](const char* key, int rows, int cols, bool vector_form) {
    const json& j = require(sys, ptr, key);
    const std::string p = ptr + "/" + key;
    if (vector_form)
      return compile(p, [&] {
        return expr::CoeffField::vector_field(as_strings(j, p, rows), dims, params);
      });
    return compile(p, [&] {
      return expr::CoeffField::matrix_field(as_string_rows(j, p, rows, cols),
                                            dims, params);
    });
  };
  spec.b1 = field("b1", spec.n, 1, true);
  spec.sigma1 = field("sigma1", spec.n, spec.d1, false);
  spec.b2 = field("b2", spec.m, 1, true);
  spec.sigma2 = field("sigma2", spec.m, spec.d2, false);
  spec.op = parse_operator(sys, ptr, spec.n);
  spec.x0 = req_vec(sys, ptr, "x0", spec.n);
  spec.y0 = req_vec(sys, ptr, "y0", spec.m);
  try {
    spec.validate();
  } catch (const std::exception& e) {
    fail(ptr, e.what());
  }
  return spec;
}

void check_pair(const ScaleParams& s, const std::string& ptr) {
  try {
    s.validate();
  } catch (const std::exception& e) {
    fail(ptr, e.what());
  }
  if (!(s.gamma / s.epsilon < 1.0)) {
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "scale violation: gamma/epsilon = %g for epsilon = %g "
                  "(separation needs gamma/epsilon < 1)",
                  s.gamma / s.epsilon, s.epsilon);
    fail(ptr, buf);
  }
}

void parse_scales(const json& root, RunConfig& cfg) {
  const json* j = find(root, "scales");
  if (!j) return;
  const std::string ptr = "/scales";
  if (const json* eps = find(*j, "epsilons")) {
    if (!eps->is_array() || eps->empty())
      fail(ptr + "/epsilons", "expected a non-empty array");
    cfg.schedule.gamma_exponent = opt_num(*j, ptr, "gamma_exponent", 2.0);
    for (std::size_t i = 0; i < eps->size(); ++i) {
      const double e =
          as_num((*eps)[i], ptr + "/epsilons/" + std::to_string(i));
      ScaleParams s{e, std::pow(e, cfg.schedule.gamma_exponent)};
      check_pair(s, ptr + "/epsilons/" + std::to_string(i));
      cfg.schedule.epsilons.push_back(e);
    }
    cfg.scales = {cfg.schedule.epsilons.front(),
                  std::pow(cfg.schedule.epsilons.front(),
                           cfg.schedule.gamma_exponent)};
  } else {
    cfg.scales.epsilon = as_num(require(*j, ptr, "epsilon"), ptr + "/epsilon");
    cfg.scales.gamma = as_num(require(*j, ptr, "gamma"), ptr + "/gamma");
    check_pair(cfg.scales, ptr);
  }
  cfg.has_scales = true;
}

void parse_sim(const json& root, SimConfig& sim) {
  const json* j = find(root, "sim");
  if (!j) return;
  const std::string ptr = "/sim";
  sim.dt = opt_num(*j, ptr, "dt", sim.dt);
  sim.horizon = opt_num(*j, ptr, "horizon", sim.horizon);
  sim.seed = static_cast<uint64_t>(opt_int(*j, ptr, "seed", 1));
  sim.path_count = static_cast<int>(opt_int(*j, ptr, "path_count", 1));
  sim.fast_stability_factor =
      opt_num(*j, ptr, "fast_stability_factor", sim.fast_stability_factor);
}

void parse_ergodic(const json& root, ErgodicConfig& erg) {
  const json* j = find(root, "ergodic");
  if (!j) return;
  const std::string ptr = "/ergodic";
  erg.dt = opt_num(*j, ptr, "dt", erg.dt);
  erg.burn_in = opt_num(*j, ptr, "burn_in", erg.burn_in);
  erg.thin = static_cast<int>(opt_int(*j, ptr, "thin", erg.thin));
  erg.n_samples = opt_int(*j, ptr, "n_samples", erg.n_samples);
  erg.seed = static_cast<uint64_t>(opt_int(*j, ptr, "seed", 2024));
  erg.batches = static_cast<int>(opt_int(*j, ptr, "batches", erg.batches));
}

expr::CoeffField parse_observable(const json& obj, const std::string& ptr,
                                  const expr::Dims& dims,
                                  const expr::Params& params) {
  const std::string src = as_str(require(obj, ptr, "h"), ptr + "/h");
  auto h = compile(ptr + "/h",
                   [&] { return expr::CoeffField::scalar(src, dims, params); });
  if (h.depends_on_y()) fail(ptr + "/h", "observable must not reference y");
  return h;
}

void parse_tasks(const json& root, RunConfig& cfg, const expr::Params& params) {
  const expr::Dims dims{cfg.system.n, cfg.system.m};
  if (const json* j = find(root, "average")) {
    const std::string ptr = "/average";
    cfg.average.present = true;
    if (const json* nodes = find(*j, "x_nodes")) {
      if (!nodes->is_array()) fail(ptr + "/x_nodes", "expected an array");
      for (std::size_t i = 0; i < nodes->size(); ++i) {
        const std::string p = ptr + "/x_nodes/" + std::to_string(i);
        const json& entry = (*nodes)[i];
        Eigen::VectorXd v = entry.is_number()
                                ? Eigen::VectorXd::Constant(1, as_num(entry, p))
                                : as_vec(entry, p);
        if (v.size() != cfg.system.n)
          fail(p, "expected " + std::to_string(cfg.system.n) + " entries");
        cfg.average.x_nodes.push_back(std::move(v));
      }
    }
    if (cfg.average.x_nodes.empty()) cfg.average.x_nodes = {cfg.system.x0};
  }
  if (const json* j = find(root, "rate")) {
    const std::string ptr = "/rate";
    cfg.rate.present = true;
    cfg.rate.x_target = req_vec(*j, ptr, "x_target", cfg.system.n);
    cfg.rate.t = opt_num(*j, ptr, "t", cfg.rate.t);
    if (!(cfg.rate.t > 0.0)) fail(ptr + "/t", "must be positive");
    cfg.rate.opt.n_steps =
        static_cast<int>(opt_int(*j, ptr, "n_steps", cfg.rate.opt.n_steps));
    cfg.rate.opt.tol_gap = opt_num(*j, ptr, "tol_gap", cfg.rate.opt.tol_gap);
    cfg.rate.opt.restarts =
        static_cast<int>(opt_int(*j, ptr, "restarts", cfg.rate.opt.restarts));
    cfg.rate.opt.mu_max = opt_num(*j, ptr, "mu_max", cfg.rate.opt.mu_max);
  }
  if (const json* j = find(root, "laplace")) {
    const std::string ptr = "/laplace";
    cfg.laplace.present = true;
    cfg.laplace.h = as_str(require(*j, ptr, "h"), ptr + "/h");
    cfg.laplace.h_field = parse_observable(*j, ptr, dims, params);
    cfg.laplace.t = opt_num(*j, ptr, "t", cfg.laplace.t);
    if (!(cfg.laplace.t > 0.0)) fail(ptr + "/t", "must be positive");
    cfg.laplace.mc.n_paths = static_cast<int>(
        opt_int(*j, ptr, "n_paths", cfg.laplace.mc.n_paths));
    cfg.laplace.mc.dt = opt_num(*j, ptr, "dt", cfg.laplace.mc.dt);
    cfg.laplace.mc.seed =
        static_cast<uint64_t>(opt_int(*j, ptr, "seed", 321));
  }
  if (const json* j = find(root, "hjb")) {
    const std::string ptr = "/hjb";
    cfg.hjb.present = true;
    cfg.hjb.h = as_str(require(*j, ptr, "h"), ptr + "/h");
    cfg.hjb.h_field = parse_observable(*j, ptr, dims, params);
    HjbConfig& g = cfg.hjb.grid;
    g.dx = opt_num(*j, ptr, "dx", g.dx);
    g.dt = opt_num(*j, ptr, "dt", g.dt);
    g.t_final = opt_num(*j, ptr, "t_final", g.t_final);
    g.x_min = opt_num(*j, ptr, "x_min", g.x_min);
    g.x_max = opt_num(*j, ptr, "x_max", g.x_max);
    g.p_max = opt_num(*j, ptr, "p_max", g.p_max);
    g.theta = opt_num(*j, ptr, "theta", g.theta);
    g.cfl_safety = opt_num(*j, ptr, "cfl_safety", g.cfl_safety);
  }
  if (const json* j = find(root, "check")) {
    const std::string ptr = "/check";
    cfg.check.present = true;
    DissipativityConfig& d = cfg.check.dissipativity;
    d.sample_count =
        static_cast<int>(opt_int(*j, ptr, "sample_count", d.sample_count));
    d.radius = opt_num(*j, ptr, "radius", d.radius);
    d.seed = static_cast<uint64_t>(opt_int(*j, ptr, "seed", 7));
    if (const json* z = find(*j, "zeta")) {
      cfg.check.zeta = as_str(*z, ptr + "/zeta");
      auto zeta = compile(ptr + "/zeta", [&] {
        return expr::CoeffField::scalar(cfg.check.zeta, dims, params);
      });
      if (zeta.depends_on_x())
        fail(ptr + "/zeta", "Lyapunov candidate must not reference x");
      cfg.check.zeta_field = std::move(zeta);
      LyapunovConfig& l = cfg.check.lyapunov;
      l.l1 = as_num(require(*j, ptr, "l1"), ptr + "/l1");
      l.l2 = as_num(require(*j, ptr, "l2"), ptr + "/l2");
      l.ball_radius =
          as_num(require(*j, ptr, "ball_radius"), ptr + "/ball_radius");
    }
  }
}

}  // namespace

std::vector<ScaleParams> RunConfig::scale_list() const {
  if (!has_scales)
    throw ConfigError("schema error at /scales: missing field");
  if (!schedule.sweep()) return {scales};
  std::vector<ScaleParams> out;
  for (double e : schedule.epsilons)
    out.push_back({e, std::pow(e, schedule.gamma_exponent)});
  return out;
}

RunConfig config_from_json(const nlohmann::json& root) {
  if (!root.is_object())
    throw ConfigError("schema error at /: expected an object");
  RunConfig cfg;
  if (const json* j = find(root, "name")) cfg.name = as_str(*j, "/name");
  cfg.system = parse_system(root);
  parse_scales(root, cfg);
  parse_sim(root, cfg.sim);
  parse_ergodic(root, cfg.ergodic);
  parse_tasks(root, cfg, parse_params(require(root, "", "system"), "/system"));
  cfg.raw = root;
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json root = json::parse(in, nullptr, false);
  if (root.is_discarded())
    throw ConfigError("config is not well-formed JSON: " + path);
  return config_from_json(root);
}

nlohmann::json builtin_scenario_json(const std::string& name) {
  if (name != "example5")
    throw ConfigError("unknown scenario '" + name + "'");
  static const char* kExample5 = R"json({
    "name": "example5",
    "system": {
      "n": 1, "m": 1, "d1": 1, "d2": 1,
      "params": {"r": 0.1, "s": 0.3, "nu": 0.5},
      "b1": ["0"],
      "sigma1": [["cos(y0)"]],
      "b2": ["s - 0.5*y0"],
      "sigma2": [["nu"]],
      "operator": {"kind": "zero"},
      "x0": [0.0],
      "y0": [0.6]
    },
    "scales": {"epsilon": 0.1, "gamma": 0.01},
    "sim": {"dt": 0.0002, "horizon": 0.5, "seed": 1, "path_count": 200},
    "ergodic": {"dt": 0.001, "thin": 10, "n_samples": 200000, "seed": 2024},
    "average": {"x_nodes": [[0.0]]},
    "rate": {"x_target": [0.5], "t": 1.0},
    "laplace": {"h": "min(1, abs(x0 - 0.4))", "t": 0.5, "n_paths": 20000},
    "hjb": {"h": "min(1, abs(x0 - 0.4))", "dx": 0.01, "t_final": 0.5,
            "x_min": -2.0, "x_max": 2.0, "p_max": 1.0},
    "check": {"zeta": "1 + y0^2", "l1": 0.5, "l2": 1.0, "ball_radius": 2.2}
  })json";
  return json::parse(kExample5);
}

std::string config_digest(const nlohmann::json& root) {
  const std::string s = root.dump();
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void apply_override(nlohmann::json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like path.to.key=value: " +
                      assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;

  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty())
      throw ConfigError("override has an empty path segment: " + assignment);
    const bool last = dot == std::string::npos;
    if (node->is_array() &&
        key.find_first_not_of("0123456789") == std::string::npos) {
      const std::size_t idx = std::stoul(key);
      if (idx >= node->size())
        throw ConfigError("override index out of range: " + assignment);
      if (last) {
        (*node)[idx] = parsed;
        return;
      }
      node = &(*node)[idx];
    } else {
      if (!node->is_object()) *node = json::object();
      if (last) {
        (*node)[key] = parsed;
        return;
      }
      node = &(*node)[key];
    }
    start = dot + 1;
  }
}

}  // namespace mvldp

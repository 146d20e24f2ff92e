#include "lidcd/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lidcd {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double_value(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (...) {
    throw std::invalid_argument("config: bad numeric value for '" + key + "': " + v);
  }
}

int parse_int_value(const std::string& key, const std::string& v) {
  const double x = parse_double_value(key, v);
  const int i = static_cast<int>(x);
  if (x != i) throw std::invalid_argument("config: '" + key + "' must be an integer");
  return i;
}

bool parse_bool_value(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: '" + key + "' must be a boolean");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      const std::string t = trim(cur);
      if (!t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  const std::string t = trim(cur);
  if (!t.empty()) out.push_back(t);
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "d") cfg.d = parse_int_value(key, value);
  else if (key == "e") cfg.e = parse_double_value(key, value);
  else if (key == "edge_prob") cfg.edge_prob = parse_double_value(key, value);
  else if (key == "family") cfg.family = value;
  else if (key == "kind") cfg.kind = value;
  else if (key == "n") cfg.n = parse_int_value(key, value);
  else if (key == "variant") cfg.variant = value;
  else if (key == "likelihood") cfg.likelihood = value;
  else if (key == "alpha") cfg.alpha = parse_double_value(key, value);
  else if (key == "gamma") cfg.gamma = parse_double_value(key, value);
  else if (key == "xi_g") cfg.xi_g = parse_double_value(key, value);
  else if (key == "h") cfg.h = parse_int_value(key, value);
  else if (key == "K") cfg.K = parse_int_value(key, value);
  else if (key == "ffn_hidden") cfg.ffn_hidden = parse_int_value(key, value);
  else if (key == "ffn_blocks") cfg.ffn_blocks = parse_int_value(key, value);
  else if (key == "dropout") cfg.dropout = parse_double_value(key, value);
  else if (key == "flow_layers") cfg.flow_layers = parse_int_value(key, value);
  else if (key == "flow_hidden") cfg.flow_hidden = parse_int_value(key, value);
  else if (key == "sigma_floor") cfg.sigma_floor = parse_double_value(key, value);
  else if (key == "lr") cfg.lr = parse_double_value(key, value);
  else if (key == "weight_decay") cfg.weight_decay = parse_double_value(key, value);
  else if (key == "batch") cfg.batch = parse_int_value(key, value);
  else if (key == "epochs_first") cfg.epochs_first = parse_int_value(key, value);
  else if (key == "epochs_rest") cfg.epochs_rest = parse_int_value(key, value);
  else if (key == "fixed_epochs") cfg.fixed_epochs = parse_bool_value(key, value);
  else if (key == "max_outer") cfg.max_outer = parse_int_value(key, value);
  else if (key == "h_tol") cfg.h_tol = parse_double_value(key, value);
  else if (key == "temperature") cfg.temperature = parse_double_value(key, value);
  else if (key == "edge_threshold") cfg.edge_threshold = parse_double_value(key, value);
  else if (key == "val_split") cfg.val_split = parse_double_value(key, value);
  else if (key == "al_phi0") cfg.al_phi0 = parse_double_value(key, value);
  else if (key == "al_mu0") cfg.al_mu0 = parse_double_value(key, value);
  else if (key == "al_eta") cfg.al_eta = parse_double_value(key, value);
  else if (key == "al_delta") cfg.al_delta = parse_double_value(key, value);
  else if (key == "kappa") cfg.kappa = parse_double_value(key, value);
  else if (key == "f") cfg.f = parse_double_value(key, value);
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_double_value(key, value));
  else if (key == "name") cfg.name = value;
  else if (key == "out") cfg.out = value;
  else if (key == "strict_hparams") cfg.strict_hparams = parse_bool_value(key, value);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

namespace {

void parse_file_into(const std::string& path,
                     const std::function<void(const std::string&, const std::string&)>& sink) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected 'key = value' on line " +
                                  std::to_string(line_no));
    sink(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

bool in_grid(double v, std::initializer_list<double> grid) {
  for (double g : grid)
    if (std::fabs(v - g) < 1e-12) return true;
  return false;
}

}  // namespace

void validate(const ExperimentConfig& cfg) {
  if (cfg.d < 2) throw std::invalid_argument("config: d must be >= 2");
  if (cfg.n < 1) throw std::invalid_argument("config: n must be >= 1");
  if (cfg.edge_prob < 0.0 && (!(cfg.e > 0.0) || cfg.e > (cfg.d - 1) / 2.0))
    throw std::invalid_argument("config: e must satisfy 0 < e <= (d-1)/2 (or set edge_prob)");
  if (cfg.edge_prob > 1.0)
    throw std::invalid_argument("config: edge_prob must be within [0, 1]");
  if (cfg.K < 0) throw std::invalid_argument("config: K must be >= 0");
  if (cfg.h < 1) throw std::invalid_argument("config: h must be >= 1");
  if (!(cfg.alpha > 0.0)) throw std::invalid_argument("config: alpha must be > 0");
  if (!(cfg.temperature > 0.0)) throw std::invalid_argument("config: temperature must be > 0");
  if (cfg.val_split < 0.0 || cfg.val_split >= 1.0)
    throw std::invalid_argument("config: val_split must be in [0, 1)");
  if (cfg.f < 0.0 || cfg.f > 1.0) throw std::invalid_argument("config: f must be in [0, 1]");
  if (!(cfg.kappa > 0.0) || cfg.kappa >= 1.0)
    throw std::invalid_argument("config: kappa must be in (0, 1)");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
    throw std::invalid_argument("config: dropout must be in [0, 1)");
  family_from_string(cfg.family);
  intervention_kind_from_string(cfg.kind);
  variant_from_string(cfg.variant);
  likelihood_from_string(cfg.likelihood);
  if (cfg.strict_hparams) {
    if (!in_grid(cfg.xi_g, {-0.1, -0.01, 0.0, 0.01, 0.1}))
      throw std::invalid_argument(
          "config: xi_g outside the default grid {-.1,-.01,0,.01,.1}; pass "
          "strict_hparams=false to allow");
    if (!in_grid(cfg.gamma, {-0.1, -0.01}))
      throw std::invalid_argument(
          "config: gamma outside the default grid {-.1,-.01}; pass "
          "strict_hparams=false to allow");
  }
}

ExperimentConfig parse_experiment_config(
    const std::string& path_or_empty,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  ExperimentConfig cfg;
  if (!path_or_empty.empty())
    parse_file_into(path_or_empty,
                    [&](const std::string& k, const std::string& v) { apply_key(cfg, k, v); });
  for (const auto& [k, v] : overrides) apply_key(cfg, k, v);
  validate(cfg);
  return cfg;
}

BenchmarkConfig parse_benchmark_config(
    const std::string& path_or_empty,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  BenchmarkConfig bc;
  const auto sink = [&](const std::string& k, const std::string& v) {
    if (k == "families") bc.families = split_list(v);
    else if (k == "es") {
      bc.es.clear();
      for (const std::string& s : split_list(v)) bc.es.push_back(parse_double_value(k, s));
    } else if (k == "kinds") bc.kinds = split_list(v);
    else if (k == "variants") bc.variants = split_list(v);
    else if (k == "scms") bc.scms = parse_int_value(k, v);
    else if (k == "workers") bc.workers = parse_int_value(k, v);
    else apply_key(bc.base, k, v);
  };
  if (!path_or_empty.empty()) parse_file_into(path_or_empty, sink);
  for (const auto& [k, v] : overrides) sink(k, v);
  if (bc.scms < 1) throw std::invalid_argument("config: scms must be >= 1");
  if (bc.workers < 1) throw std::invalid_argument("config: workers must be >= 1");
  validate(bc.base);
  return bc;
}

FitSettings ExperimentConfig::fit_settings() const {
  FitSettings s;
  s.variant = variant_from_string(variant);
  s.likelihood = likelihood_from_string(likelihood);
  s.family = density_family_from_string(
      family == "nongaussian" ? std::string("flow") : family);
  s.alpha = alpha;
  s.gamma = gamma;
  s.xi_g = xi_g;
  s.h = h;
  s.K = K;
  s.ffn_hidden = ffn_hidden;
  s.ffn_blocks = ffn_blocks;
  s.dropout = dropout;
  s.flow_layers = flow_layers;
  s.flow_hidden = flow_hidden;
  s.sigma_floor = sigma_floor;
  s.lr = lr;
  s.weight_decay = weight_decay;
  s.batch = batch;
  s.epochs_first = epochs_first;
  s.epochs_rest = epochs_rest;
  s.fixed_epochs = fixed_epochs;
  s.max_outer = max_outer;
  s.h_tol = h_tol;
  s.temperature = temperature;
  s.edge_threshold = edge_threshold;
  s.val_split = val_split;
  s.al_phi0 = al_phi0;
  s.al_mu0 = al_mu0;
  s.al_eta = al_eta;
  s.al_delta = al_delta;
  s.kappa = kappa;
  s.label_fraction = f;
  return s;
}

std::map<std::string, std::string> ExperimentConfig::echo() const {
  std::map<std::string, std::string> m;
  m["d"] = fmt(d);
  m["e"] = fmt(e);
  m["edge_prob"] = fmt(edge_prob);
  m["family"] = family;
  m["kind"] = kind;
  m["n"] = fmt(n);
  m["variant"] = variant;
  m["likelihood"] = likelihood;
  m["alpha"] = fmt(alpha);
  m["gamma"] = fmt(gamma);
  m["xi_g"] = fmt(xi_g);
  m["h"] = fmt(h);
  m["K"] = fmt(K);
  m["ffn_hidden"] = fmt(ffn_hidden);
  m["ffn_blocks"] = fmt(ffn_blocks);
  m["dropout"] = fmt(dropout);
  m["flow_layers"] = fmt(flow_layers);
  m["flow_hidden"] = fmt(flow_hidden);
  m["sigma_floor"] = fmt(sigma_floor);
  m["lr"] = fmt(lr);
  m["weight_decay"] = fmt(weight_decay);
  m["batch"] = fmt(batch);
  m["epochs_first"] = fmt(epochs_first);
  m["epochs_rest"] = fmt(epochs_rest);
  m["fixed_epochs"] = fixed_epochs ? "true" : "false";
  m["max_outer"] = fmt(max_outer);
  m["h_tol"] = fmt(h_tol);
  m["temperature"] = fmt(temperature);
  m["edge_threshold"] = fmt(edge_threshold);
  m["val_split"] = fmt(val_split);
  m["al_phi0"] = fmt(al_phi0);
  m["al_mu0"] = fmt(al_mu0);
  m["al_eta"] = fmt(al_eta);
  m["al_delta"] = fmt(al_delta);
  m["kappa"] = fmt(kappa);
  m["f"] = fmt(f);
  m["seed"] = std::to_string(seed);
  m["name"] = name;
  m["out"] = out;
  m["strict_hparams"] = strict_hparams ? "true" : "false";
  return m;
}

std::string output_root(const ExperimentConfig& cfg) {
  if (!cfg.out.empty()) return cfg.out;
  const char* env = std::getenv("LIDCD_RUNS_ROOT");
  if (env != nullptr && env[0] != '\0') return env;
  return "runs";
}

void write_config_echo(const std::map<std::string, std::string>& echo,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_config_echo: cannot open " + path);
  for (const auto& [k, v] : echo) out << k << " = " << v << '\n';
}

}  // namespace lidcd

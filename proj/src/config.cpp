#include "rsm/config.hpp"

#include "rsm/error.hpp"
#include "rsm/io.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <set>
#include <sstream>

namespace rsm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> tokens(const std::string& s) {
  std::istringstream ss(s);
  std::vector<std::string> out;
  std::string t;
  while (ss >> t) out.push_back(t);
  return out;
}

template <class T>
T parse_int(const std::string& s) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) {
    throw InvalidInput("expected an integer, got '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw InvalidInput("expected true or false, got '" + s + "'");
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
Field num(const std::string& key, T RunConfig::*ptr) {
  return {key, [ptr](RunConfig& c, const std::string& v) {
            if constexpr (std::is_floating_point_v<T>) {
              c.*ptr = parse_double(v);
            } else {
              c.*ptr = parse_int<T>(v);
            }
          },
          [ptr](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.*ptr);
            } else {
              return std::to_string(c.*ptr);
            }
          }};
}

template <class T, class Sub>
Field sub_num(const std::string& key, Sub CertifyConfig::*sub, T Sub::*ptr) {
  return {key, [sub, ptr](RunConfig& c, const std::string& v) {
            if constexpr (std::is_floating_point_v<T>) {
              c.certify.*sub.*ptr = parse_double(v);
            } else {
              c.certify.*sub.*ptr = parse_int<T>(v);
            }
          },
          [sub, ptr](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.certify.*sub.*ptr);
            } else {
              return std::to_string(c.certify.*sub.*ptr);
            }
          }};
}

Field str(const std::string& key, std::string RunConfig::*ptr) {
  return {key, [ptr](RunConfig& c, const std::string& v) { c.*ptr = v; },
          [ptr](const RunConfig& c) { return c.*ptr; }};
}

template <class T>
Field list(const std::string& key, std::vector<T> RunConfig::*ptr) {
  return {key,
          [ptr](RunConfig& c, const std::string& v) {
            std::vector<T> out;
            for (const auto& t : tokens(v)) {
              if constexpr (std::is_floating_point_v<T>) {
                out.push_back(parse_double(t));
              } else {
                out.push_back(parse_int<T>(t));
              }
            }
            c.*ptr = std::move(out);
          },
          [ptr](const RunConfig& c) { return join(c.*ptr); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    using L = LearnerConfig;
    using V = VerifierConfig;
    std::vector<Field> f;
    f.push_back(str("benchmark", &RunConfig::benchmark));
    f.push_back(str("policy", &RunConfig::policy));
    f.push_back(list("gain", &RunConfig::gain));
    f.push_back({"hidden",
                 [](RunConfig& c, const std::string& v) {
                   std::vector<int> h;
                   for (const auto& t : tokens(v)) h.push_back(parse_int<int>(t));
                   c.certify.hidden = std::move(h);
                 },
                 [](const RunConfig& c) { return join(c.certify.hidden); }});
    f.push_back(num("seed", &RunConfig::seed));
    f.push_back(str("output_dir", &RunConfig::output_dir));
    f.push_back(sub_num("lambda", &CertifyConfig::learner, &L::lambda));
    f.push_back(sub_num("delta", &CertifyConfig::learner, &L::delta));
    f.push_back(sub_num("learning_rate", &CertifyConfig::learner, &L::learning_rate));
    f.push_back(sub_num("samples_per_point", &CertifyConfig::learner, &L::samples_per_point));
    f.push_back(sub_num("epochs", &CertifyConfig::learner, &L::epochs));
    f.push_back(sub_num("learner_tau", &CertifyConfig::learner, &L::tau));
    f.push_back(sub_num("learner_grid_tau", &CertifyConfig::learner, &L::grid_tau));
    f.push_back(sub_num("batch_size", &CertifyConfig::learner, &L::batch_size));
    f.push_back(sub_num("verifier_tau", &CertifyConfig::verifier, &V::tau));
    f.push_back(sub_num("cells_per_dim", &CertifyConfig::verifier, &V::cells_per_dim));
    f.push_back(sub_num("slack", &CertifyConfig::verifier, &V::slack));
    f.push_back({"refinement",
                 [](RunConfig& c, const std::string& v) { c.certify.verifier.refinement = parse_refinement(v); },
                 [](const RunConfig& c) { return to_string(c.certify.verifier.refinement); }});
    f.push_back(sub_num("refine_after", &CertifyConfig::verifier, &V::refine_after));
    f.push_back(sub_num("refine_factor", &CertifyConfig::verifier, &V::refine_factor));
    f.push_back(sub_num("min_tau", &CertifyConfig::verifier, &V::min_tau));
    f.push_back(sub_num("refine_splits", &CertifyConfig::verifier, &V::refine_splits));
    f.push_back(sub_num("max_counterexamples", &CertifyConfig::verifier, &V::max_counterexamples));
    f.push_back(sub_num("grid_cap", &CertifyConfig::verifier, &V::grid_cap));
    f.push_back(sub_num("max_iterations", &CertifyConfig::verifier, &V::max_iterations));
    f.push_back(sub_num("timeout", &CertifyConfig::verifier, &V::timeout_seconds));
    f.push_back(str("certificate", &RunConfig::certificate));
    f.push_back({"random_v", [](RunConfig& c, const std::string& v) { c.random_v = parse_bool(v); },
                 [](const RunConfig& c) { return std::string(c.random_v ? "true" : "false"); }});
    f.push_back(num("bound_states", &RunConfig::bound_states));
    f.push_back(num("bound_mc_samples", &RunConfig::bound_mc_samples));
    f.push_back(list("bound_ks", &RunConfig::bound_ks));
    f.push_back(num("sim_runs", &RunConfig::sim_runs));
    f.push_back(list("sim_x0", &RunConfig::sim_x0));
    f.push_back(num("sim_steps", &RunConfig::sim_steps));
    f.push_back(num("sim_trajectories", &RunConfig::sim_trajectories));
    f.push_back({"zero_noise", [](RunConfig& c, const std::string& v) { c.zero_noise = parse_bool(v); },
                 [](const RunConfig& c) { return std::string(c.zero_noise ? "true" : "false"); }});
    f.push_back(num("contour_resolution", &RunConfig::contour_resolution));
    f.push_back(list("tail_times", &RunConfig::tail_times));
    return f;
  }();
  return all;
}

}  // namespace

void RunConfig::validate() const {
  if (benchmark != "2d-system" && benchmark != "inverted-pendulum") {
    throw ConfigError("benchmark: unknown benchmark '" + benchmark + "'");
  }
  if (policy.empty()) throw ConfigError("policy: must be 'analytic' or a weights path");
  if (!gain.empty() && gain.size() != 2) throw ConfigError("gain: expected 2 values");
  if (certify.hidden.empty()) throw ConfigError("hidden: need at least one hidden layer");
  for (int h : certify.hidden) {
    if (h < 1) throw ConfigError("hidden: layer sizes must be positive");
  }
  certify.learner.validate();
  certify.verifier.validate();
  if (bound_states < 1) throw ConfigError("bound_states: must be at least 1");
  if (bound_mc_samples < 2) throw ConfigError("bound_mc_samples: must be at least 2");
  if (bound_ks.empty()) throw ConfigError("bound_ks: need at least one value");
  for (int k : bound_ks) {
    if (k < 1) throw ConfigError("bound_ks: values must be positive");
  }
  if (sim_runs < 1) throw ConfigError("sim_runs: must be at least 1");
  if (!sim_x0.empty() && sim_x0.size() != 2) throw ConfigError("sim_x0: expected 2 values");
  if (sim_steps < 1) throw ConfigError("sim_steps: must be at least 1");
  if (sim_trajectories < 1) throw ConfigError("sim_trajectories: must be at least 1");
  if (contour_resolution < 2) throw ConfigError("contour_resolution: must be at least 2");
  for (long long t : tail_times) {
    if (t < 1) throw ConfigError("tail_times: values must be at least 1");
  }
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value, got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& fs = fields();
    const auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return f.key == key; });
    if (it == fs.end()) throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    try {
      it->set(cfg, value);
    } catch (const Error& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": key '" + key + "': " + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const Field& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace rsm

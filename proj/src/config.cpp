#include "adlim/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "adlim/errors.hpp"
#include "adlim/profile.hpp"

namespace adlim {

namespace {

struct Issue {
  int line;
  std::string token;
  std::string what;
};

std::string strip(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

[[noreturn]] void raise(const std::vector<Issue>& issues) {
  std::ostringstream os;
  os << "config invalid:";
  for (const auto& e : issues) {
    os << "\n  line " << e.line << ": " << e.what;
    if (!e.token.empty()) os << " (at '" << e.token << "')";
  }
  throw ConfigError(os.str());
}

bool parse_double(const std::string& s, double* out) {
  // Accepts plain numbers and the literal products the configs use (2*pi).
  try {
    Profile p = Profile::parse(s);
    if (!p.is_constant()) return false;
    *out = p.value(0.0);
    return true;
  } catch (const ProfileParseError&) {
    return false;
  }
}

bool parse_int(const std::string& s, int* out) {
  double d;
  if (!parse_double(s, &d)) return false;
  int v = static_cast<int>(d);
  if (static_cast<double>(v) != d) return false;
  *out = v;
  return true;
}

std::vector<double> parse_list(const std::string& s, bool* ok) {
  std::vector<double> out;
  std::string item;
  std::istringstream is(s);
  *ok = true;
  while (std::getline(is, item, ',')) {
    item = strip(item);
    if (item.empty()) {
      *ok = false;
      return out;
    }
    double v;
    if (!parse_double(item, &v)) {
      *ok = false;
      return out;
    }
    out.push_back(v);
  }
  if (out.empty()) *ok = false;
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::vector<Issue> issues;
  std::vector<std::pair<std::string, std::string>> seen;  // section, key

  std::istringstream in(text);
  std::string raw;
  std::string section;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        issues.push_back({lineno, line, "unterminated section header"});
        continue;
      }
      section = line.substr(1, line.size() - 2);
      if (section != "model" && section != "numerics" && section != "sweep" &&
          section != "output") {
        issues.push_back({lineno, section, "unknown section"});
        section.clear();
      }
      continue;
    }

    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      issues.push_back({lineno, line, "expected key = value"});
      continue;
    }
    std::string key = strip(line.substr(0, eq));
    std::string value = unquote(strip(line.substr(eq + 1)));
    if (section.empty()) {
      issues.push_back({lineno, key, "key outside any section"});
      continue;
    }
    for (const auto& s : seen) {
      if (s.first == section && s.second == key) {
        issues.push_back({lineno, key, "duplicate key in [" + section + "]"});
      }
    }
    seen.emplace_back(section, key);

    auto bad_value = [&](const std::string& why) {
      issues.push_back({lineno, value, key + ": " + why});
    };

    if (section == "model") {
      if (key == "kind") {
        if (value == "strip") {
          cfg.kind = ModelKind::DirichletStrip;
        } else if (value == "warped") {
          cfg.kind = ModelKind::WarpedCircleFibre;
        } else {
          bad_value("expected strip or warped");
        }
      } else if (key == "profile") {
        cfg.profile_text = value;
      } else if (key == "v_base") {
        cfg.v_base_text = value;
      } else if (key == "v_fibre") {
        cfg.v_fibre_text = value;
      } else if (key == "h1_s") {
        cfg.h1_s_text = value;
      } else if (key == "h1_v") {
        cfg.h1_v_text = value;
      } else if (key == "length") {
        if (!parse_double(value, &cfg.length) || cfg.length <= 0.0) {
          bad_value("expected a positive number");
        }
      } else {
        issues.push_back({lineno, key, "unknown key in [model]"});
      }
    } else if (section == "numerics") {
      if (key == "n_x") {
        if (!parse_int(value, &cfg.n_x)) bad_value("expected an integer");
      } else if (key == "n_z") {
        if (!parse_int(value, &cfg.n_z)) bad_value("expected an integer");
      } else if (key == "solver_tol") {
        if (!parse_double(value, &cfg.solver_tol) || cfg.solver_tol <= 0.0) {
          bad_value("expected a positive number");
        }
      } else if (key == "dense_limit") {
        if (!parse_int(value, &cfg.dense_limit)) bad_value("expected an integer");
      } else if (key == "dim_cap") {
        if (!parse_int(value, &cfg.dim_cap)) bad_value("expected an integer");
      } else if (key == "seed") {
        int s;
        if (!parse_int(value, &s) || s < 0) {
          bad_value("expected a nonnegative integer");
        } else {
          cfg.seed = static_cast<std::uint64_t>(s);
        }
      } else {
        issues.push_back({lineno, key, "unknown key in [numerics]"});
      }
    } else if (section == "sweep") {
      if (key == "epsilon") {
        bool ok;
        cfg.epsilons = parse_list(value, &ok);
        if (!ok) bad_value("expected a comma-separated list of numbers");
      } else if (key == "order") {
        if (!parse_int(value, &cfg.order) || cfg.order < 0) {
          bad_value("expected a nonnegative integer");
        }
      } else if (key == "alpha") {
        if (!parse_double(value, &cfg.alpha)) bad_value("expected a number");
      } else if (key == "window_const") {
        if (!parse_double(value, &cfg.window_const)) bad_value("expected a number");
      } else if (key == "window_anchor") {
        if (value == "band0") {
          cfg.window_anchor = WindowAnchor::Band0;
        } else if (value == "band1") {
          cfg.window_anchor = WindowAnchor::Band1;
        } else if (value == "absolute") {
          cfg.window_anchor = WindowAnchor::Absolute;
        } else {
          bad_value("expected band0, band1, or absolute");
        }
      } else if (key == "window_offset") {
        if (!parse_double(value, &cfg.window_offset)) bad_value("expected a number");
      } else if (key == "count") {
        if (!parse_int(value, &cfg.count) || cfg.count < 1) {
          bad_value("expected a positive integer");
        }
      } else if (key == "time") {
        if (!parse_double(value, &cfg.time_horizon) || cfg.time_horizon <= 0.0) {
          bad_value("expected a positive number");
        }
      } else if (key == "guard") {
        if (value == "auto") {
          cfg.guard = GuardMode::Auto;
        } else if (value == "on") {
          cfg.guard = GuardMode::On;
        } else if (value == "off") {
          cfg.guard = GuardMode::Off;
        } else {
          bad_value("expected auto, on, or off");
        }
      } else {
        issues.push_back({lineno, key, "unknown key in [sweep]"});
      }
    } else if (section == "output") {
      if (key == "dir") {
        cfg.out_dir = value;
      } else if (key == "format") {
        if (value != "csv") {
          bad_value("only csv output is implemented");
        }
        cfg.format = value;
      } else {
        issues.push_back({lineno, key, "unknown key in [output]"});
      }
    }
  }

  // Cross-field validation (reported with line 0: they concern the whole
  // file, not one key).
  if (cfg.n_x < 16 || cfg.n_x % 2 != 0) {
    issues.push_back({0, std::to_string(cfg.n_x), "n_x must be even and >= 16"});
  }
  if (cfg.n_z < 4) {
    issues.push_back({0, std::to_string(cfg.n_z), "n_z must be >= 4"});
  }
  if (static_cast<long long>(cfg.n_x) * cfg.n_z >
      static_cast<long long>(cfg.dim_cap)) {
    issues.push_back({0, std::to_string(cfg.n_x * cfg.n_z),
                      "n_x*n_z exceeds dim_cap"});
  }
  for (double e : cfg.epsilons) {
    if (!(e > 0.0) || e > 1.0) {
      issues.push_back({0, std::to_string(e), "epsilon values must lie in (0, 1]"});
      break;
    }
  }
  for (std::size_t i = 1; i < cfg.epsilons.size(); ++i) {
    if (cfg.epsilons[i] >= cfg.epsilons[i - 1]) {
      issues.push_back({0, std::to_string(cfg.epsilons[i]),
                        "epsilon list must be strictly decreasing"});
      break;
    }
  }
  if (cfg.epsilons.empty()) {
    issues.push_back({0, "epsilon", "sweep needs at least one epsilon"});
  }

  // Profile expressions must at least parse (model-level constraints are
  // checked when the geometry is built).
  auto check_expr = [&](const std::string& text, const char* key) {
    if (text.empty()) return;
    try {
      Profile::parse(text);
    } catch (const ProfileParseError& e) {
      issues.push_back({0, text.substr(e.position(),
                                       std::min<std::size_t>(
                                           12, text.size() - e.position())),
                        std::string(key) + ": " + e.what()});
    }
  };
  check_expr(cfg.profile_text, "profile");
  check_expr(cfg.v_base_text, "v_base");
  check_expr(cfg.v_fibre_text, "v_fibre");
  check_expr(cfg.h1_s_text, "h1_s");
  check_expr(cfg.h1_v_text, "h1_v");

  if (!issues.empty()) raise(issues);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string ExperimentConfig::effective_profile_text() const {
  if (!profile_text.empty()) return profile_text;
  return kind == ModelKind::DirichletStrip ? "1.25 + 0.1*cos(1*x)"
                                           : "2*pi*(1 + 0.2*cos(1*x))";
}

ModelGeometry ExperimentConfig::make_model(double eps) const {
  Profile profile = Profile::parse(effective_profile_text());
  Profile vb = v_base_text.empty() ? Profile::constant(0.0)
                                   : Profile::parse(v_base_text);
  Profile vf = v_fibre_text.empty() ? Profile::constant(0.0)
                                    : Profile::parse(v_fibre_text);
  H1Spec h1;
  h1.s = h1_s_text.empty() ? Profile::constant(0.0) : Profile::parse(h1_s_text);
  h1.v = h1_v_text.empty() ? Profile::constant(0.0) : Profile::parse(h1_v_text);

  BaseCircle base;
  base.L = length;
  base.n_x = n_x;
  if (kind == ModelKind::DirichletStrip) {
    return build_strip_model(base, profile, vb, vf, h1, eps);
  }
  if (!vf.is_zero()) {
    throw ConfigError(
        "v_fibre is a strip-model knob; the warped model keeps its ground "
        "band flat (remove v_fibre or use kind = strip)");
  }
  return build_warped_model(base, profile, vb, h1, eps);
}

void ExperimentConfig::require_rate_sweep() const {
  if (epsilons.size() < 4) {
    throw ConfigError("rate-fitting experiments need >= 4 sweep points (got " +
                      std::to_string(epsilons.size()) + ")");
  }
}

}  // namespace adlim

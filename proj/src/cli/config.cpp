#include "dflag/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <cmath>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "dflag/expr.hpp"

namespace dflag {

namespace pt = boost::property_tree;

std::string_view to_string(ConnectionSource s) {
  return s == ConnectionSource::christoffel ? "christoffel" : "omega";
}

std::string_view to_string(BundleKind b) { return b == BundleKind::tangent ? "tangent" : "sym2"; }

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(const std::string& raw) {
  std::string s = trim(raw);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
    return s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double number(const std::string& text, const std::string& where) {
  try {
    return parse_constant(text);
  } catch (const ParseError& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const SingularEvaluation& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

std::vector<double> numbers(const std::string& text, const std::string& where) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) {
    if (item.empty()) throw ConfigError(where + ": empty list entry");
    out.push_back(number(item, where));
  }
  return out;
}

std::size_t count(const std::string& text, const std::string& where) {
  double v = number(text, where);
  if (v < 0 || v != std::floor(v) || v > 1e9) throw ConfigError(where + ": expected a non-negative integer");
  return static_cast<std::size_t>(v);
}

std::size_t coordinate_index(const std::vector<std::string>& coords, const std::string& name,
                             const std::string& where) {
  for (std::size_t k = 0; k < coords.size(); ++k)
    if (coords[k] == name) return k;
  throw ConfigError(where + ": unknown coordinate '" + name + "'");
}

}  // namespace

JobConfig parse_config(std::string_view text, std::string name) {
  pt::ptree tree;
  try {
    std::istringstream is{std::string(text)};
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  static const std::set<std::string> sections{"chart", "connection", "tolerances", "base", "transport"};
  for (const auto& [section, body] : tree) {
    if (!sections.count(section)) throw ConfigError("config: unknown section [" + section + "]");
    if (body.empty() && !body.data().empty()) throw ConfigError("config: key '" + section + "' outside a section");
  }

  JobConfig cfg;
  cfg.name = std::move(name);
  auto section = [&](const std::string& s) -> const pt::ptree* {
    auto it = tree.find(s);
    return it == tree.not_found() ? nullptr : &it->second;
  };

  // [chart]
  const pt::ptree* chart = section("chart");
  if (!chart) throw ConfigError("config: missing [chart] section");
  std::string grid_text;
  for (const auto& [key, value] : *chart) {
    std::string v = unquote(value.data());
    if (key == "coords")
      cfg.coords = split(v, ',');
    else if (key == "lower")
      cfg.lower = numbers(v, "chart.lower");
    else if (key == "upper")
      cfg.upper = numbers(v, "chart.upper");
    else if (key == "grid")
      grid_text = v;
    else
      throw ConfigError("config: unknown key chart." + key);
  }
  if (cfg.coords.empty()) throw ConfigError("config: chart.coords is required");
  const std::size_t m = cfg.coords.size();
  if (cfg.lower.size() != m || cfg.upper.size() != m)
    throw ConfigError("config: chart.lower and chart.upper need one value per coordinate");
  if (grid_text.empty()) throw ConfigError("config: chart.grid is required");
  for (const auto& g : split(grid_text, ',')) cfg.grid.push_back(count(g, "chart.grid"));
  if (cfg.grid.size() == 1) cfg.grid.assign(m, cfg.grid[0]);
  if (cfg.grid.size() != m) throw ConfigError("config: chart.grid needs one count or one per coordinate");
  try {
    (void)cfg.chart();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: chart: ") + e.what());
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  // [connection]
  const pt::ptree* conn = section("connection");
  if (!conn) throw ConfigError("config: missing [connection] section");
  static const std::regex gamma_key(R"(Gamma\[(\w+)\]\[(\w+)\]\[(\w+)\])");
  static const std::regex omega_key(R"(omega\[(\d+)\]\[(\d+)\]\[(\w+)\])");
  bool bundle_given = false;
  std::vector<std::pair<std::string, std::string>> raw;
  for (const auto& [key, value] : *conn) {
    std::string v = unquote(value.data());
    if (key == "source") {
      if (v == "christoffel")
        cfg.source = ConnectionSource::christoffel;
      else if (v == "omega")
        cfg.source = ConnectionSource::omega;
      else
        throw ConfigError("config: connection.source must be christoffel or omega");
    } else if (key == "bundle") {
      bundle_given = true;
      if (v == "tangent")
        cfg.bundle = BundleKind::tangent;
      else if (v == "sym2")
        cfg.bundle = BundleKind::sym2;
      else
        throw ConfigError("config: connection.bundle must be tangent or sym2");
    } else if (key == "rank") {
      cfg.rank = count(v, "connection.rank");
    } else {
      raw.emplace_back(key, v);
    }
  }
  if (cfg.source == ConnectionSource::omega) {
    if (cfg.rank == 0) throw ConfigError("config: connection.rank is required for source = omega");
    if (bundle_given && cfg.bundle != BundleKind::tangent)
      throw ConfigError("config: connection.bundle applies to source = christoffel only");
  }
  std::set<std::vector<std::size_t>> seen;
  for (const auto& [key, v] : raw) {
    std::smatch mt;
    CoefficientEntry entry;
    const std::string where = "connection." + key;
    if (std::regex_match(key, mt, gamma_key)) {
      if (cfg.source != ConnectionSource::christoffel) throw ConfigError("config: " + where + " needs source = christoffel");
      entry.index = {coordinate_index(cfg.coords, mt[1], where), coordinate_index(cfg.coords, mt[2], where),
                     coordinate_index(cfg.coords, mt[3], where)};
    } else if (std::regex_match(key, mt, omega_key)) {
      if (cfg.source != ConnectionSource::omega) throw ConfigError("config: " + where + " needs source = omega");
      std::size_t i = count(mt[1], where), j = count(mt[2], where);
      if (i < 1 || j < 1 || i > cfg.rank || j > cfg.rank)
        throw ConfigError("config: " + where + ": fiber index out of range 1.." + std::to_string(cfg.rank));
      entry.index = {i - 1, j - 1, coordinate_index(cfg.coords, mt[3], where)};
    } else {
      throw ConfigError("config: unknown key " + where);
    }
    if (!seen.insert(entry.index).second) throw ConfigError("config: duplicate entry " + where);
    entry.expression = v;
    try {
      (void)parse_scalar_field(v, cfg.coords);
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what(), e.column());
    }
    cfg.entries.push_back(std::move(entry));
  }

  // [tolerances]
  if (const pt::ptree* tol = section("tolerances")) {
    for (const auto& [key, value] : *tol) {
      std::string v = unquote(value.data());
      if (key == "tau_rank")
        cfg.tolerances.tau_rank = number(v, "tolerances.tau_rank");
      else if (key == "tau_stab")
        cfg.tolerances.tau_stab = number(v, "tolerances.tau_stab");
      else if (key == "residual")
        cfg.tolerances.residual = number(v, "tolerances.residual");
      else if (key == "fd_order")
        cfg.tolerances.fd_order = static_cast<int>(count(v, "tolerances.fd_order"));
      else
        throw ConfigError("config: unknown key tolerances." + key);
    }
    const auto& t = cfg.tolerances;
    if (!(t.tau_rank > 0) || !(t.tau_stab > 0) || !(t.residual > 0))
      throw ConfigError("config: tolerances must be positive");
    if (t.fd_order < 2 || t.fd_order % 2) throw ConfigError("config: tolerances.fd_order must be even and >= 2");
  }

  // [base]
  cfg.base.resize(m);
  for (std::size_t mu = 0; mu < m; ++mu) cfg.base[mu] = 0.5 * (cfg.lower[mu] + cfg.upper[mu]);
  if (const pt::ptree* base = section("base")) {
    for (const auto& [key, value] : *base) {
      if (key != "point") throw ConfigError("config: unknown key base." + key);
      cfg.base = numbers(unquote(value.data()), "base.point");
    }
  }
  if (cfg.base.size() != m) throw ConfigError("config: base.point needs one value per coordinate");
  if (!cfg.chart().contains(cfg.base)) throw ConfigError("config: base point outside the chart domain");

  // [transport]
  if (const pt::ptree* tr = section("transport")) {
    for (const auto& [key, value] : *tr) {
      std::string v = unquote(value.data());
      if (key == "path") {
        for (const auto& vertex : split(v, '|')) {
          Point p = numbers(vertex, "transport.path");
          if (p.size() != m) throw ConfigError("config: transport.path vertices need one value per coordinate");
          if (!cfg.chart().contains(p)) throw ConfigError("config: transport.path vertex outside the chart domain");
          cfg.path.push_back(std::move(p));
        }
        if (cfg.path.size() < 2) throw ConfigError("config: transport.path needs at least two vertices");
      } else if (key == "vector") {
        auto w = numbers(v, "transport.vector");
        cfg.transport_vector = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
      } else if (key == "steps") {
        cfg.transport_steps = count(v, "transport.steps");
      } else {
        throw ConfigError("config: unknown key transport." + key);
      }
    }
    if (cfg.transport_vector && static_cast<std::size_t>(cfg.transport_vector->size()) != cfg.fiber_rank())
      throw ConfigError("config: transport.vector needs " + std::to_string(cfg.fiber_rank()) + " components");
  }
  return cfg;
}

JobConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.stem().string());
}

Chart JobConfig::chart() const { return Chart(coords, lower, upper, grid); }

std::size_t JobConfig::fiber_rank() const {
  const std::size_t m = coords.size();
  if (source == ConnectionSource::omega) return rank;
  return bundle == BundleKind::tangent ? m : m * (m + 1) / 2;
}

Connection JobConfig::tangent_connection() const {
  if (source != ConnectionSource::christoffel) throw ConfigError("config: a Christoffel table is required");
  Chart c = chart();
  const std::size_t m = c.dim();
  Christoffel gamma(m * m * m, ScalarField::constant(0.0, c.coords()));
  for (const auto& e : entries)
    gamma[(e.index[0] * m + e.index[1]) * m + e.index[2]] = parse_scalar_field(e.expression, c.coords());
  return connection_from_christoffel(gamma, c);
}

Connection JobConfig::connection() const {
  if (source == ConnectionSource::christoffel) {
    Connection tm = tangent_connection();
    return bundle == BundleKind::sym2 ? induce_sym2(tm) : tm;
  }
  Chart c = chart();
  const std::size_t m = c.dim();
  std::vector<ScalarField> omega(rank * rank * m, ScalarField::constant(0.0, c.coords()));
  for (const auto& e : entries)
    omega[(e.index[0] * rank + e.index[1]) * m + e.index[2]] = parse_scalar_field(e.expression, c.coords());
  return Connection(c, rank, std::move(omega));
}

}  // namespace dflag

#include "dflag/commands.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

#include "dflag/error.hpp"
#include "dflag/flag.hpp"
#include "dflag/frobenius.hpp"
#include "dflag/metric.hpp"

namespace dflag {

namespace {

Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i] + 0.0);  // no -0 in reports
  return a;
}

Json matrix_rows(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vector_json(m.row(r).transpose()));
  return a;
}

Json columns(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(vector_json(m.col(c)));
  return a;
}

FlagOptions flag_options(const JobConfig& cfg) {
  FlagOptions o;
  o.tau_rank = cfg.tolerances.tau_rank;
  o.tau_stab = cfg.tolerances.tau_stab;
  o.fd_order = cfg.tolerances.fd_order;
  o.origin = cfg.base;
  return o;
}

Json header(std::string_view command, const JobConfig& cfg) {
  Json j;
  j["command"] = command;
  j["config"] = cfg.name;
  j["chart"] = {{"coords", cfg.coords}, {"lower", cfg.lower}, {"upper", cfg.upper}, {"grid", cfg.grid}};
  j["connection"] = {{"source", to_string(cfg.source)},
                     {"bundle", cfg.source == ConnectionSource::omega ? "explicit" : to_string(cfg.bundle)},
                     {"fiber_rank", cfg.fiber_rank()}};
  j["base_point"] = cfg.base;
  return j;
}

Json tolerances(const JobConfig& cfg) {
  const FlagOptions flag;
  const AdaptedFrameOptions frame;
  return {{"tau_rank", cfg.tolerances.tau_rank},
          {"tau_stab", cfg.tolerances.tau_stab},
          {"residual", cfg.tolerances.residual},
          {"fd_order", cfg.tolerances.fd_order},
          {"frame_fd_order", cfg.tolerances.fd_order + 2},
          {"noise_safety", flag.noise_safety},
          {"block_tolerance", frame.block_tolerance},
          {"membership", 1e-6}};
}

Json flag_json(const FlagReport& rep) {
  Json j;
  j["ranks"] = rep.ranks;
  j["rank_final"] = rep.rank_final();
  j["iterations"] = rep.iterations;
  j["converged"] = rep.converged;
  j["regular_fraction"] = rep.regular_fraction();
  Json stages = Json::array();
  for (const auto& d : rep.diagnostics)
    stages.push_back({{"stage", d.stage},
                      {"max_rank", d.max_rank},
                      {"min_rank", d.min_rank},
                      {"regular_points", d.regular_points},
                      {"largest_discarded", d.largest_discarded},
                      {"smallest_kept", d.smallest_kept},
                      {"alignment_failures", d.alignment_failures}});
  j["stages"] = std::move(stages);
  return j;
}

void write_number(std::ostream& os, double v) {
  if (!std::isfinite(v)) {
    os << "nan";
    return;
  }
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  os.write(buf, res.ptr - buf);
}

}  // namespace

Json cmd_analyze(const JobConfig& cfg) {
  Connection conn = cfg.connection();
  FlagReport rep = derived_flag(conn, flag_options(cfg));
  Json j = header("analyze", cfg);
  j.update(flag_json(rep));
  const bool regular = is_regular(rep, cfg.base);
  j["base_regular"] = regular;
  if (regular)
    j["basis_at_base"] = columns(fiber_at(rep.flat(), cfg.base).basis);
  else
    j["basis_at_base"] = nullptr;
  j["tolerances"] = tolerances(cfg);
  return j;
}

Json cmd_sections(const JobConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
  Connection conn = cfg.connection();
  const Chart chart = conn.chart();
  FlagReport rep = derived_flag(conn, flag_options(cfg));
  Json j = header("sections", cfg);
  j["ranks"] = rep.ranks;
  j["rank_final"] = rep.rank_final();
  Json files = Json::array();
  if (rep.rank_final() == 0) {
    log << "flat subbundle has rank 0: no parallel sections\n";
    j["sections"] = std::move(files);
    j["tolerances"] = tolerances(cfg);
    return j;
  }
  if (!is_regular(rep, cfg.base)) throw IrregularPoint("base point is not a regular point of the flag");

  AdaptedFrameOptions fo;
  fo.fd_order = cfg.tolerances.fd_order + 2;
  AdaptedFrame adapted = adapted_frame(conn, rep.flat(), chart.nearest_node(cfg.base), fo);
  ParallelFrameField pf = integrate_parallel_frame(adapted, cfg.base);

  std::filesystem::create_directories(out_dir);
  std::vector<SectionField> sections;
  for (Eigen::Index k = 0; k < pf.base_frame.cols(); ++k) {
    SectionField s = make_parallel_section(pf, pf.base_frame.col(k));
    const double residual = parallelism_residual(conn, s, cfg.tolerances.fd_order);
    const std::string file = "section_" + std::to_string(k + 1) + ".csv";
    std::ofstream csv(out_dir / file);
    if (!csv) throw std::runtime_error("cannot write " + (out_dir / file).string());
    for (const auto& c : cfg.coords) csv << c << ',';
    for (std::size_t i = 0; i < conn.rank(); ++i) csv << 'f' << i + 1 << (i + 1 < conn.rank() ? ',' : '\n');
    for (std::size_t node = 0; node < chart.size(); ++node) {
      for (double x : chart.point(node)) {
        write_number(csv, x);
        csv << ',';
      }
      Eigen::VectorXd v = s.at_node(node);
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        write_number(csv, v[i]);
        csv << (i + 1 < v.size() ? ',' : '\n');
      }
    }
    log << "section " << k + 1 << ": parallelism residual " << residual << " (tolerance "
        << cfg.tolerances.residual << ")" << (residual < cfg.tolerances.residual ? "" : "  EXCEEDED") << '\n';
    files.push_back({{"file", file},
                     {"value_at_base", vector_json(pf.base_frame.col(k))},
                     {"residual", residual},
                     {"within_tolerance", residual < cfg.tolerances.residual}});
    sections.push_back(std::move(s));
  }

  // Smallest singular value of the stacked sections over reachable nodes.
  double independence = std::numeric_limits<double>::infinity();
  for (std::size_t node = 0; node < chart.size(); ++node) {
    if (!pf.valid[node]) continue;
    Eigen::MatrixXd stack(static_cast<Eigen::Index>(conn.rank()), static_cast<Eigen::Index>(sections.size()));
    for (std::size_t k = 0; k < sections.size(); ++k) stack.col(static_cast<Eigen::Index>(k)) = sections[k].at_node(node);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(stack);
    independence = std::min(independence, svd.singularValues()(svd.singularValues().size() - 1));
  }
  j["sections"] = std::move(files);
  j["min_singular_value"] = independence;
  j["reachable_fraction"] =
      double(std::count(pf.valid.begin(), pf.valid.end(), char(1))) / double(chart.size());
  j["tolerances"] = tolerances(cfg);
  return j;
}

Json cmd_metric_check(const JobConfig& cfg) {
  Connection tm = cfg.tangent_connection();
  MetricOptions options;
  options.flag = flag_options(cfg);
  options.frame.fd_order = cfg.tolerances.fd_order + 2;
  options.residual_tolerance = cfg.tolerances.residual;
  MetricReport rep = metric_check(tm, cfg.base, options);
  const std::size_t m = tm.dim();

  Json j = header("metric-check", cfg);
  j["connection"]["bundle"] = "tangent";
  j["connection"]["fiber_rank"] = m;
  j["verdict"] = to_string(rep.verdict);
  j["rank"] = rep.rank;
  j["ranks"] = rep.flag.ranks;
  Json basis = Json::array();
  for (Eigen::Index c = 0; c < rep.basis.cols(); ++c) basis.push_back(matrix_rows(sym2_to_matrix(rep.basis.col(c), m)));
  j["basis_at_base"] = std::move(basis);
  if (rep.witness) {
    j["coefficients"] = vector_json(*rep.coefficients);
    j["witness"] = matrix_rows(*rep.witness);
    j["witness_min_eigenvalue"] = rep.witness_min_eigenvalue;
    j["witness_residual"] = rep.witness_residual;
  } else {
    j["coefficients"] = nullptr;
    j["witness"] = nullptr;
  }
  j["tolerances"] = tolerances(cfg);
  return j;
}

Json cmd_transport(const JobConfig& cfg) {
  if (cfg.path.empty()) throw ConfigError("config: transport.path is required");
  if (!cfg.transport_vector) throw ConfigError("config: transport.vector is required");
  Connection conn = cfg.connection();
  TransportOptions options;
  options.steps_per_segment = cfg.transport_steps;
  Eigen::VectorXd w1 = parallel_transport(conn, cfg.path, *cfg.transport_vector, options);

  Json j = header("transport", cfg);
  j["path"] = cfg.path;
  j["w0"] = vector_json(*cfg.transport_vector);
  j["w1"] = vector_json(w1);
  const bool closed = cfg.path.size() > 1 && cfg.path.front() == cfg.path.back();
  j["closed"] = closed;
  if (closed) {
    Eigen::VectorXd defect = w1 - *cfg.transport_vector;
    j["defect"] = vector_json(defect);
    j["defect_norm"] = defect.norm();
  }
  j["tolerances"] = tolerances(cfg);
  return j;
}

void apply(const Overrides& overrides, JobConfig& cfg) {
  if (overrides.tau_rank) {
    if (!(*overrides.tau_rank > 0)) throw ConfigError("--tol-rank must be positive");
    cfg.tolerances.tau_rank = *overrides.tau_rank;
  }
  if (overrides.grid) {
    if (*overrides.grid < 3) throw ConfigError("--grid must be at least 3");
    cfg.grid.assign(cfg.coords.size(), *overrides.grid);
  }
}

int run(std::string_view command, const std::filesystem::path& config, const Overrides& overrides,
        const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err) {
  try {
    JobConfig cfg = load_config(config);
    apply(overrides, cfg);
    Json report;
    if (command == "analyze")
      report = cmd_analyze(cfg);
    else if (command == "sections")
      report = cmd_sections(cfg, out_dir, err);
    else if (command == "metric-check")
      report = cmd_metric_check(cfg);
    else if (command == "transport")
      report = cmd_transport(cfg);
    else
      throw ConfigError("unknown command " + std::string(command));
    out << report.dump(2) << '\n';
    return exit_ok;
  } catch (const IrregularPoint& e) {
    err << "error: " << e.what() << '\n';
    return exit_irregular;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return exit_config;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_config;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::exception& e) {
    // NumericalError, SingularEvaluation, NotInSubbundle and the like
    err << "error: " << e.what() << '\n';
    return exit_numerical;
  }
}

}  // namespace dflag

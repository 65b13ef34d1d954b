// gperiodic command line: graph constants, cell spectra, tube data and
// scenario runs. Exit codes: 0 all verdicts pass, 1 a verdict fails,
// 2 usage or config error, 3 solver non-convergence.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gperiodic/gperiodic.hpp"

using namespace gperiodic;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string format = "json";
  std::optional<double> tol;
  std::optional<int> max_depth;
  std::uint64_t seed = 42;
  std::string family = "tree";
  int valence = 3;
  int dimension = 1;
  int count = 2;
  std::string report;
};

void emit(const Options& o, const std::string& stem, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  fs::create_directories(o.out);
  const auto path = fs::path(o.out) / (stem + (o.format == "csv" ? ".csv" : ".json"));
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write " + path.string());
  f << text << '\n';
  std::cerr << "wrote " << path.string() << '\n';
}

int cmd_graph(const Options& o) {
  GraphFamily fam;
  if (o.family == "tree") {
    fam = {GraphFamily::Kind::Tree, 1, o.valence};
  } else if (o.family == "lattice" || o.family == "Z" || o.family == "Z2") {
    const int dim = o.family == "Z2" ? 2 : o.dimension;
    if (dim < 1 || dim > 2) throw ValidationError("lattice dimension must be 1 or 2");
    fam = {GraphFamily::Kind::Lattice, dim, 2 * dim};
  } else {
    throw ValidationError("unknown family '" + o.family + "'");
  }
  if (fam.kind == GraphFamily::Kind::Tree && o.valence < 3) throw ValidationError("tree valence must be at least 3");
  if (fam.kind == GraphFamily::Kind::Tree && o.max_depth && regular_tree_size(o.valence, *o.max_depth) > kMaxBallVertices)
    throw ValidationError("--max-depth " + std::to_string(*o.max_depth) + " gives a tree ball above the vertex limit");
  Mu0Options opt;
  if (o.tol) opt.tol = *o.tol;
  if (o.max_depth) opt.max_depth = *o.max_depth;
  opt.seed = o.seed;
  const auto gc = mu0_estimate(fam, opt);
  if (o.format == "csv") {
    std::ostringstream s;
    s << std::setprecision(12) << "depth,mu0,cheeger_sweep,folner\n";
    for (std::size_t i = 0; i < gc.depths.size(); ++i)
      s << gc.depths[i] << ',' << gc.mu0_estimates[i] << ',' << gc.cheeger_estimates[i] << ',' << gc.folner_ratio[i] << '\n';
    emit(o, "graph", s.str());
  } else {
    nlohmann::json j;
    to_json(j, gc);
    emit(o, "graph", j.dump(2));
  }
  // combinatorial Cheeger inequalities on the deepest ball (mu0 and sweep h at the same depth)
  const double v = gc.valence, h = gc.cheeger_estimates.back(), mu = gc.mu0_estimates.back();
  const bool ok = h * h / (2 * v) <= mu + 1e-3 && mu <= h + 1e-3;
  std::cerr << gc.family << ": depth " << gc.depths.back() << " mu0 " << mu << ", h " << h << "; converged mu0 ~ "
            << gc.converged_mu0 << (ok ? "" : " (Cheeger inequalities FAIL)") << '\n';
  return ok ? 0 : 1;
}

nlohmann::json cell_table(const nlohmann::json& cfg) { return cfg.contains("cell") ? cfg.at("cell") : cfg; }

int cmd_cell(const Options& o) {
  const auto cfg = load_config(o.config);
  const auto mesh = build_cell(cell_spec_from_json(cell_table(cfg)));
  const auto spec = neumann_spectrum(mesh, std::max(2, o.count), o.tol.value_or(1e-9));
  auto j = spectrum_to_json(mesh, spec);
  const auto rec = check_recollement(mesh, spec, 1e-8);
  j["recollement"] = {{"ok", rec.ok}, {"max_deviation", rec.max_deviation}};
  if (o.format == "csv") {
    std::ostringstream s;
    s << std::setprecision(12) << "node,phi0,phi1\n";
    for (int i = 0; i < mesh.node_count(); ++i) s << i << ',' << spec.phi0[i] << ',' << spec.phi1[i] << '\n';
    emit(o, "cell", s.str());
  } else {
    emit(o, "cell", j.dump(2));
  }
  return spec.usable_gap && rec.ok ? 0 : 1;
}

TubeProfile tube_profile(const nlohmann::json& t) {
  if (!t.contains("radial")) return tube_from_json(t);
  const std::string kind = t.at("radial").get<std::string>();
  const int n = t.value("n", 2), nr = t.value("nr", 101), nx = t.value("nx", 1);
  const double R = t.value("R", 1.0), vol = t.value("vol_alpha", 1.0), rate = t.value("rate", 1.0);
  std::function<double(double)> f;
  if (kind == "flat")
    f = [](double) { return 1.0; };
  else if (kind == "cosh")
    f = [rate](double r) { return std::cosh(rate * r); };
  else if (kind == "exp")
    f = [rate](double r) { return std::exp(rate * r); };
  else
    throw ValidationError("unknown radial profile '" + kind + "'");
  return TubeProfile::from_function(n, R, vol, nx, nr, [f](double, double r) { return f(r); });
}

int cmd_tube(const Options& o) {
  const auto cfg = load_config(o.config);
  if (!cfg.contains("tube")) throw ValidationError("config needs a [tube] table");
  const auto t = tube_profile(cfg.at("tube"));
  const auto d = compute_derived(t);
  auto j = derived_to_json(d);
  bool ok = true;
  if (cfg.contains("comparison")) {
    const auto& c = cfg.at("comparison");
    const double P = c.value("P", 1.0), Q = c.value("Q", 0.0), R0 = c.value("R0", t.R());
    const auto g = g_inf_profile(d, P, Q, R0);
    const auto h = harmonic_solve_tube(t, P, Q, R0);
    const double ginf = sampled_energy(d, g);
    const double slack = c.value("tolerance", 1e-9) * std::max(1.0, ginf);
    ok = h.energy >= ginf - slack;
    j["comparison"] = {{"R0", h.R0},
                       {"harmonic_energy", h.energy},
                       {"g_inf_energy", ginf},
                       {"closed_form_energy", g.energy},
                       {"holds", ok}};
    if (c.contains("phi0")) j["A2"] = constant_A2(d, c.at("phi0").get<double>());
  }
  emit(o, "tube", j.dump(2));
  return ok ? 0 : 1;
}

int cmd_run(const Options& o) {
  auto cfg = load_config(o.config);
  if (o.tol) cfg["tolerances"]["solver"] = *o.tol;
  if (o.max_depth) {
    auto& g = cfg["graph"];
    std::vector<int> sched = g.contains("schedule") ? g.at("schedule").get<std::vector<int>>() : std::vector<int>{};
    std::erase_if(sched, [&](int p) { return p > *o.max_depth; });
    if (sched.empty()) sched.push_back(*o.max_depth);
    g["schedule"] = sched;
    g["estimate_depth"] = std::min(g.value("estimate_depth", 12), std::max(*o.max_depth, 2));
  }
  cfg["seed"] = o.seed;
  const auto sc = scenario_from_json(cfg);
  BoundReport r;
  try {
    r = run_any(sc);
  } catch (const ScenarioError& e) {
    Options partial = o;
    partial.format = "json";
    if (!o.out.empty()) emit(partial, sc.name + ".partial", e.partial().dump(2));
    std::rethrow_exception(e.cause());
  }
  const auto j = report_to_json(r);
  if (o.out.empty()) {
    std::cout << (o.format == "csv" ? report_to_csv(j) : j.dump(2) + "\n");
  } else {
    Options js = o;
    js.format = "json";
    emit(js, sc.name, j.dump(2));
    js.format = "csv";
    emit(js, sc.name, report_to_csv(j));
  }
  for (const auto& v : r.verdicts)
    std::cerr << (v.pass ? "pass " : "FAIL ") << v.name << ": " << v.lhs << ' ' << v.relation << ' ' << v.rhs << '\n';
  return r.all_pass() ? 0 : 1;
}

int cmd_report(const Options& o) {
  const std::string path = o.report.empty() ? o.config : o.report;
  if (path.empty()) throw ValidationError("report needs a report file");
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open report '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), 0);
  }
  if (!j.contains("depths")) throw ValidationError("not a scenario report");
  Options csv = o;
  csv.format = "csv";
  emit(csv, fs::path(path).stem().string(), report_to_csv(j));
  return j.value("all_pass", false) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral bounds for graph-periodic spaces"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--tol", o.tol, "tolerance");
    sub->add_option("--max-depth", o.max_depth, "largest ball depth")->check(CLI::PositiveNumber);
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--out", o.out, "output directory (stdout when absent)");
    sub->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  };
  auto* graph = app.add_subcommand("graph", "mu0 and Cheeger estimates of a graph family");
  common(graph);
  graph->add_option("--family", o.family, "tree, lattice, Z or Z2");
  graph->add_option("--valence", o.valence, "tree valence");
  graph->add_option("--dimension", o.dimension, "lattice dimension");
  auto* cell = app.add_subcommand("cell", "Neumann spectrum of a cell");
  common(cell);
  cell->add_option("--config", o.config, "cell or scenario config")->required();
  cell->add_option("--count", o.count, "number of eigenpairs");
  auto* tube = app.add_subcommand("tube", "tube-derived quantities and the harmonic comparison");
  common(tube);
  tube->add_option("--config", o.config, "tube config")->required();
  auto* run = app.add_subcommand("run", "run a scenario");
  common(run);
  run->add_option("--config", o.config, "scenario config")->required();
  auto* report = app.add_subcommand("report", "render a JSON report as CSV plot data");
  common(report);
  report->add_option("report", o.report, "report JSON");
  report->add_option("--config", o.config, "report JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (*graph) return cmd_graph(o);
    if (*cell) return cmd_cell(o);
    if (*tube) return cmd_tube(o);
    if (*run) return cmd_run(o);
    if (*report) return cmd_report(o);
  } catch (const SolverError& e) {
    std::cerr << "solver: " << e.what() << '\n';
    return 3;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violated: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

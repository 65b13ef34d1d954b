#pragma once

#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gperiodic/assembly.hpp"
#include "gperiodic/cell.hpp"
#include "gperiodic/error.hpp"
#include "gperiodic/graph.hpp"
#include "gperiodic/tube.hpp"
#include "json.hpp"

namespace gperiodic {

struct Scenario {
  enum class Kind { Gap, Bounded };
  enum class Family { Lattice, Tree, Single };

  std::string name = "scenario";
  Kind kind = Kind::Gap;
  Family family = Family::Tree;
  int valence = 3;    // trees and single vertex
  int dimension = 1;  // lattices
  std::vector<int> schedule{2, 3, 4};
  std::optional<double> mu0_ref;
  int estimate_depth = 12;
  CellSpec cell;
  int tube_n = 2;
  std::optional<double> tube_R;
  std::optional<double> cutoff_R;
  bool cutoff = true;
  double slack = 0.05;
  double amenable_abs = 5e-3;
  double solver_tol = 1e-9;
  std::uint64_t seed = 42;

  int graph_valence() const { return family == Family::Lattice ? 2 * dimension : valence; }
  GraphFamily graph_family() const {
    return family == Family::Lattice ? GraphFamily{GraphFamily::Kind::Lattice, dimension, 2 * dimension}
                                     : GraphFamily{GraphFamily::Kind::Tree, 1, valence};
  }
  std::string family_name() const { return family == Family::Single ? "single" : graph_family().name(); }

  /// Closed form v - 2 sqrt(v - 1) for trees, 0 for lattices, unless given.
  double reference_mu0() const {
    if (mu0_ref) return *mu0_ref;
    if (family == Family::Tree) return valence - 2.0 * std::sqrt(valence - 1.0);
    return 0.0;
  }
};

inline Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  try {
    s.name = j.value("name", s.name);
    const std::string kind = j.value("kind", "gap");
    if (kind == "gap")
      s.kind = Scenario::Kind::Gap;
    else if (kind == "bounded")
      s.kind = Scenario::Kind::Bounded;
    else
      throw ValidationError("unknown scenario kind '" + kind + "'");
    if (!j.contains("graph")) throw ValidationError("scenario needs a [graph] table");
    if (!j.contains("cell")) throw ValidationError("scenario needs a [cell] table");
    const auto& g = j.at("graph");
    const std::string fam = g.value("family", "tree");
    if (fam == "tree")
      s.family = Scenario::Family::Tree;
    else if (fam == "lattice")
      s.family = Scenario::Family::Lattice;
    else if (fam == "single")
      s.family = Scenario::Family::Single;
    else
      throw ValidationError("unknown graph family '" + fam + "'");
    s.valence = g.value("valence", s.valence);
    s.dimension = g.value("dimension", s.dimension);
    if (g.contains("schedule")) s.schedule = g.at("schedule").get<std::vector<int>>();
    if (g.contains("mu0_ref")) s.mu0_ref = g.at("mu0_ref").get<double>();
    s.estimate_depth = g.value("estimate_depth", s.estimate_depth);
    s.cell = cell_spec_from_json(j.at("cell"));
    if (j.contains("tube")) {
      const auto& t = j.at("tube");
      s.tube_n = t.value("n", s.tube_n);
      if (t.contains("R")) s.tube_R = t.at("R").get<double>();
    }
    if (j.contains("cutoff")) {
      const auto& c = j.at("cutoff");
      s.cutoff = c.value("enabled", s.cutoff);
      if (c.contains("R")) s.cutoff_R = c.at("R").get<double>();
    }
    if (j.contains("tolerances")) {
      const auto& t = j.at("tolerances");
      s.slack = t.value("slack", s.slack);
      s.amenable_abs = t.value("amenable_abs", s.amenable_abs);
      s.solver_tol = t.value("solver", s.solver_tol);
    }
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("scenario: ") + e.what());
  }
  if (s.family == Scenario::Family::Lattice && (s.dimension < 1 || s.dimension > 2))
    throw ValidationError("lattice dimension must be 1 or 2");
  if (s.family == Scenario::Family::Tree && s.valence < 3) throw ValidationError("tree valence must be at least 3");
  if (s.schedule.empty()) throw ValidationError("empty depth schedule");
  for (std::size_t i = 1; i < s.schedule.size(); ++i)
    if (s.schedule[i] <= s.schedule[i - 1]) throw ValidationError("depth schedule must increase");
  if (s.tube_n < 2) throw ValidationError("tube dimension n must be at least 2");
  if (!(s.slack >= 0.0 && s.slack < 1.0)) throw ValidationError("slack must lie in [0, 1)");
  return s;
}

struct Verdict {
  std::string name;
  bool pass = false;
  double lhs = 0.0;
  std::string relation;
  double rhs = 0.0;
};

struct DepthRow {
  BracketEntry bracket;
  double folner = 0.0;  // #boundary/#interior of the ball interior
  std::optional<CutoffReport> cutoff;
};

struct BoundReport {
  std::string name;
  std::string kind;
  std::string family;
  int valence = 0;
  double lambda0_C = 0.0, lambda1_C = 0.0, eta = 0.0;
  std::vector<double> phi0_at_transitions;
  double cell_volume = 0.0;
  double mu0_ref = 0.0;
  std::optional<GraphConstants> graph;
  double h_est = 0.0;
  // tube data of the transition giving the smallest A
  int tube_n = 2;
  double tube_R = 0.0, vol_alpha = 0.0, vol_tube_plus = 0.0, U_inf_R = 0.0, phi0_transition = 0.0;
  std::optional<LowerConstants> constants;
  double Aprime = 0.0;
  double cutoff_R = 0.0;
  int k = 0;
  std::vector<DepthRow> rows;
  double upper_inf = 0.0, upper_inf_uncertainty = 0.0;
  double delta_last = 0.0, delta_inf = 0.0;
  double lower_bound = 0.0;      // A eta mu0_ref (Gap) or eta B mu0/(1 + B mu0) (Bounded)
  double lower_provable = 0.0;   // eta A mu0/(1 + A mu0)
  double upper_bound = 0.0;      // lambda0(C) + A' h_est
  std::vector<Verdict> verdicts;
  double seconds = 0.0;

  bool all_pass() const {
    for (const auto& v : verdicts)
      if (!v.pass) return false;
    return true;
  }
};

/// Carries the stage that failed and the partial report; `cause` is the
/// original exception.
class ScenarioError : public Error {
 public:
  ScenarioError(const std::string& stage, const std::string& what, nlohmann::json partial, std::exception_ptr cause)
      : Error("stage '" + stage + "': " + what), stage_(stage), partial_(std::move(partial)), cause_(cause) {}
  const std::string& stage() const noexcept { return stage_; }
  const nlohmann::json& partial() const noexcept { return partial_; }
  std::exception_ptr cause() const noexcept { return cause_; }

 private:
  std::string stage_;
  nlohmann::json partial_;
  std::exception_ptr cause_;
};

inline nlohmann::json report_to_json(const BoundReport& r, bool with_timing = true) {
  nlohmann::json j;
  j["scenario"] = r.name;
  j["kind"] = r.kind;
  j["family"] = r.family;
  j["valence"] = r.valence;
  j["cell"] = {{"lambda0", r.lambda0_C},
               {"lambda1", r.lambda1_C},
               {"eta", r.eta},
               {"volume", r.cell_volume},
               {"phi0_at_transitions", r.phi0_at_transitions}};
  j["mu0_ref"] = r.mu0_ref;
  j["h_est"] = r.h_est;
  if (r.graph) {
    nlohmann::json g;
    to_json(g, *r.graph);
    j["graph"] = g;
  }
  nlohmann::json c = {{"tube_n", r.tube_n},
                      {"tube_R", r.tube_R},
                      {"vol_alpha", r.vol_alpha},
                      {"vol_tube_plus", r.vol_tube_plus},
                      {"U_inf_R", r.U_inf_R},
                      {"phi0_transition", r.phi0_transition},
                      {"Aprime", r.Aprime},
                      {"cutoff_R", r.cutoff_R},
                      {"k", r.k},
                      {"k_choice", "graph valence"}};
  if (r.constants) {
    c["A"] = r.constants->A;
    c["A1"] = r.constants->A1;
    c["A2"] = r.constants->A2;
    c["A3"] = r.constants->A3 ? nlohmann::json(*r.constants->A3) : nlohmann::json(nullptr);
    c["kappa"] = r.constants->kappa;
  }
  j["constants"] = c;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json x = {{"depth", row.bracket.depth},
                        {"cells", row.bracket.cells},
                        {"dimension", row.bracket.dimension},
                        {"lambda0_upper", row.bracket.upper},
                        {"delta", row.bracket.delta},
                        {"residual", row.bracket.residual},
                        {"folner", row.folner}};
    if (row.cutoff) {
      x["cutoff"] = {{"quotient", row.cutoff->quotient}, {"bound", row.cutoff->bound},
                     {"epsilon", row.cutoff->epsilon},   {"boundary", row.cutoff->boundary},
                     {"subset", row.cutoff->subset_size}, {"holds", row.cutoff->holds}};
    }
    rows.push_back(x);
  }
  j["depths"] = rows;
  j["upper_inf"] = r.upper_inf;
  j["upper_inf_uncertainty"] = r.upper_inf_uncertainty;
  j["delta_last"] = r.delta_last;
  j["delta_inf"] = r.delta_inf;
  j["lower_bound"] = r.lower_bound;
  j["lower_provable"] = r.lower_provable;
  j["upper_bound"] = r.upper_bound;
  nlohmann::json vs = nlohmann::json::array();
  for (const auto& v : r.verdicts)
    vs.push_back({{"name", v.name}, {"pass", v.pass}, {"lhs", v.lhs}, {"relation", v.relation}, {"rhs", v.rhs}});
  j["verdicts"] = vs;
  j["all_pass"] = r.all_pass();
  if (with_timing) {
    nlohmann::json t = {{"total_seconds", r.seconds}};
    for (const auto& row : r.rows) t["depth_seconds"].push_back(row.bracket.seconds);
    j["timing"] = t;
  }
  return j;
}

/// Plot data: one line per depth.
inline std::string report_to_csv(const nlohmann::json& report) {
  std::ostringstream out;
  out << std::setprecision(12);
  out << "depth,cells,dimension,lambda0_upper,delta,cutoff_quotient,cutoff_bound,lower_bound,upper_bound\n";
  for (const auto& row : report.at("depths")) {
    out << row.at("depth").get<int>() << ',' << row.at("cells").get<int>() << ',' << row.at("dimension").get<int>()
        << ',' << row.at("lambda0_upper").get<double>() << ',' << row.at("delta").get<double>() << ',';
    if (row.contains("cutoff"))
      out << row.at("cutoff").at("quotient").get<double>() << ',' << row.at("cutoff").at("bound").get<double>();
    else
      out << ',';
    out << ',' << report.at("lower_bound").get<double>() << ',' << report.at("upper_bound").get<double>() << '\n';
  }
  return out.str();
}

namespace detail {

inline Verdict verdict_le(std::string name, double lhs, double rhs) {
  return {std::move(name), lhs <= rhs, lhs, "<=", rhs};
}

inline Verdict verdict_ge(std::string name, double lhs, double rhs) {
  return {std::move(name), lhs >= rhs, lhs, ">=", rhs};
}

struct Pipeline {
  const Scenario& sc;
  BoundReport r;
  std::string stage = "setup";
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  explicit Pipeline(const Scenario& s) : sc(s) {
    r.name = s.name;
    r.kind = s.kind == Scenario::Kind::Gap ? "gap" : "bounded";
    r.family = s.family_name();
    r.valence = s.graph_valence();
    r.mu0_ref = s.reference_mu0();
    r.tube_n = s.tube_n;
  }

  GraphBall ball(int depth) const {
    if (sc.family == Scenario::Family::Single) return GraphBall::single_vertex(sc.valence);
    return sc.graph_family().ball(depth);
  }

  void graph_constants() {
    stage = "graph";
    if (sc.family == Scenario::Family::Single) return;
    Mu0Options opt;
    opt.max_depth = std::max(opt.min_depth, sc.estimate_depth);
    opt.seed = sc.seed;
    r.graph = mu0_estimate(sc.graph_family(), opt);
    r.h_est = r.graph->converged_h;
  }

  // min over transitions of A, with Phi0 taken from phi0 (or the constant).
  void tube_constants(const CellMesh& c, const CellSpectrum& spec, std::optional<double> constant_phi) {
    stage = "tube";
    r.k = r.valence;
    if (c.valence() == 0) return;
    for (int port = 0; port < c.valence(); ++port) {
      const auto t = transition_tube(c, spec, port, sc.tube_n, sc.tube_R);
      const auto d = compute_derived(t.profile);
      const double phi = constant_phi.value_or(t.phi0);
      const auto lc = constant_A(d, phi, spec.lambda1, t.vol_tube_plus);
      if (!r.constants || lc.A < r.constants->A) {
        r.constants = lc;
        r.tube_R = t.profile.R();
        r.vol_alpha = t.profile.vol_alpha();
        r.vol_tube_plus = t.vol_tube_plus;
        r.U_inf_R = d.U_inf.back();
        r.phi0_transition = phi;
      }
    }
  }

  void brackets(const CellMesh& c, const CellSpectrum& spec, const std::vector<double>& phi) {
    stage = "assembly";
    if (sc.family == Scenario::Family::Single) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto s = glue(ball(0), c, Truncation::Neumann);
      const auto l = glued_lambda0(s, std::nullopt, sc.solver_tol);
      DepthRow row;
      row.bracket = {0, 1, s.dimension(), l.value, l.value - spec.lambda0, l.residual,
                     std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
      r.rows.push_back(row);
      r.upper_inf = l.value;
      r.delta_last = r.delta_inf = l.value - spec.lambda0;
      return;
    }
    const auto b = lambda0_bracket(sc.graph_family(), c, spec, sc.schedule, sc.solver_tol);
    r.upper_inf = b.upper_inf;
    r.upper_inf_uncertainty = b.upper_inf_uncertainty;
    r.delta_last = b.delta_last();
    r.delta_inf = b.delta_inf();
    if (sc.cutoff_R)
      r.cutoff_R = *sc.cutoff_R;
    else if (c.valence() >= 2)
      r.cutoff_R = collar_width(c);
    for (const auto& e : b.entries) {
      DepthRow row;
      row.bracket = e;
      const auto g = ball(e.depth);
      const auto interior = g.interior_vertices();
      if (!interior.empty()) {
        row.folner = folner_ratio(g, interior);
        if (sc.cutoff && r.cutoff_R > 0.0) {
          stage = "cutoff";
          const auto s = glue(g, c, Truncation::Neumann);
          row.cutoff = cutoff_rayleigh(s, spec, interior, phi, r.cutoff_R);
          stage = "assembly";
        }
      }
      r.rows.push_back(row);
    }
    if (r.cutoff_R > 0.0) r.Aprime = constant_Aprime(r.k, r.cutoff_R, std::max(0.0, spec.lambda0));
  }

  void cutoff_verdicts() {
    bool any = false, holds = true, dominates = true;
    double worst = -1e300, worst_gap = -1e300;
    for (const auto& row : r.rows) {
      if (!row.cutoff) continue;
      any = true;
      holds = holds && row.cutoff->holds;
      worst = std::max(worst, row.cutoff->quotient - row.cutoff->bound);
      const double gap = row.bracket.upper - row.cutoff->quotient;
      dominates = dominates && gap <= 10 * sc.solver_tol * std::max(1.0, row.cutoff->quotient);
      worst_gap = std::max(worst_gap, gap);
    }
    if (!any) return;
    r.verdicts.push_back({"cutoff_quotient_within_bound", holds, worst, "<=", 0.0});
    r.verdicts.push_back({"upper_bracket_below_cutoff_quotient", dominates, worst_gap, "<=", 0.0});
  }

  void finish() {
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

template <class F>
BoundReport run_stages(const Scenario& sc, F body) {
  Pipeline p(sc);
  try {
    body(p);
  } catch (const Error& e) {
    p.finish();
    throw ScenarioError(p.stage, e.what(), report_to_json(p.r), std::current_exception());
  }
  p.finish();
  return p.r;
}

}  // namespace detail

/// Lower and upper theorem checks for a cell with lambda0(C) >= 0 glued along
/// the scenario's graph family.
inline BoundReport run_scenario(const Scenario& sc) {
  if (sc.kind != Scenario::Kind::Gap) throw ValidationError("run_scenario needs a gap scenario");
  return detail::run_stages(sc, [&](detail::Pipeline& p) {
    auto& r = p.r;
    p.stage = "cell";
    const auto c = build_cell(sc.cell);
    if (c.valence() != sc.graph_valence() && sc.family != Scenario::Family::Single)
      throw ValidationError("cell transitions do not match the graph valence");
    const auto spec = neumann_spectrum(c, 2, sc.solver_tol);
    r.lambda0_C = spec.lambda0;
    r.lambda1_C = spec.lambda1;
    r.eta = spec.eta;
    r.phi0_at_transitions = spec.phi0_at_transitions;
    r.cell_volume = c.volume();
    if (!check_recollement(c, spec, 1e-8).ok) throw ValidationError("cell fails the recollement condition");
    p.graph_constants();
    p.tube_constants(c, spec, std::nullopt);
    p.brackets(c, spec, spec.phi0);
    p.stage = "verdicts";

    const double tol = 10 * sc.solver_tol * std::max(1.0, r.lambda0_C);
    double min_delta = 1e300;
    for (const auto& row : r.rows) min_delta = std::min(min_delta, row.bracket.delta);
    r.verdicts.push_back(detail::verdict_ge("upper_bracket_above_lambda0_C", min_delta, -tol));

    if (sc.family == Scenario::Family::Single) {
      r.verdicts.push_back(detail::verdict_le("single_cell_identity", std::abs(r.delta_last), tol));
      return;
    }
    const double mu0 = r.mu0_ref;
    if (r.constants) {
      const double A = r.constants->A;
      r.lower_bound = A * r.eta * mu0;
      r.lower_provable = r.eta * A * mu0 / (1.0 + A * mu0);
    }
    r.upper_bound = r.lambda0_C + r.Aprime * r.h_est;
    if (mu0 > 0.0) {
      const double d_est = std::min(r.delta_last, r.delta_inf);
      r.verdicts.push_back(detail::verdict_ge("positive_gap", d_est, 1e-12));
      r.verdicts.push_back(detail::verdict_ge("gap_lower_bound", d_est, r.lower_bound * (1.0 - sc.slack)));
      r.verdicts.push_back(
          detail::verdict_ge("sandwich", r.rows.back().bracket.upper, r.lambda0_C + r.lower_bound - tol));
    } else {
      bool decreasing = true;
      for (std::size_t i = 1; i < r.rows.size(); ++i)
        decreasing = decreasing && r.rows[i].bracket.delta < r.rows[i - 1].bracket.delta;
      r.verdicts.push_back({"amenable_delta_decreasing", decreasing, r.delta_last, "decreasing", 0.0});
      r.verdicts.push_back(detail::verdict_le("amenable_equality", r.delta_last, sc.amenable_abs));
    }
    if (r.Aprime > 0.0)
      r.verdicts.push_back(detail::verdict_le("upper_bound", r.rows.back().bracket.upper, r.upper_bound * (1.0 + sc.slack)));
    p.cutoff_verdicts();
  });
}

/// Finite-volume cells: phi0 is the constant 1/sqrt(Vol(C)) and the two-sided
/// bound eta B mu0/(1 + B mu0) <= lambda0(M) <= A'(lambda0 = 0) h.
inline BoundReport run_bounded_decomposition(const Scenario& sc) {
  if (sc.kind != Scenario::Kind::Bounded) throw ValidationError("run_bounded_decomposition needs a bounded scenario");
  if (sc.family == Scenario::Family::Single) throw ValidationError("bounded decomposition needs a graph family");
  return detail::run_stages(sc, [&](detail::Pipeline& p) {
    auto& r = p.r;
    p.stage = "cell";
    const auto c = build_cell(sc.cell);
    if (c.has_dirichlet()) throw ValidationError("bounded decomposition needs a finite-volume cell without Dirichlet ends");
    if (c.valence() != sc.graph_valence()) throw ValidationError("cell transitions do not match the graph valence");
    auto spec = neumann_spectrum(c, 2, sc.solver_tol);
    const double vol = c.volume();
    const double phi_const = 1.0 / std::sqrt(vol);
    for (double x : spec.phi0)
      if (std::abs(x - phi_const) > 1e-6 * phi_const) throw ValidationError("first eigenfunction is not constant");
    spec.lambda0 = 0.0;  // exact for a Neumann cell; the solver returns round-off
    r.lambda0_C = 0.0;
    r.lambda1_C = spec.lambda1;
    r.eta = spec.lambda1;
    r.phi0_at_transitions.assign(static_cast<std::size_t>(c.valence()), phi_const);
    r.cell_volume = vol;
    std::fill(spec.phi0.begin(), spec.phi0.end(), phi_const);
    p.graph_constants();
    p.tube_constants(c, spec, phi_const);
    p.brackets(c, spec, spec.phi0);
    p.stage = "verdicts";

    const double mu0 = r.mu0_ref;
    if (r.constants) {
      const double B = r.constants->A;
      r.lower_bound = r.eta * B * mu0 / (1.0 + B * mu0);
      r.lower_provable = r.lower_bound;
    }
    if (r.cutoff_R > 0.0) {
      r.Aprime = constant_Aprime(r.k, r.cutoff_R, 0.0);
      r.upper_bound = r.Aprime * r.h_est;
    }
    const double last = r.rows.back().bracket.upper;
    if (mu0 > 0.0) {
      const double est = std::min(last, r.upper_inf);
      r.verdicts.push_back(detail::verdict_ge("positive_lambda0", est, 1e-12));
      r.verdicts.push_back(detail::verdict_ge("bounded_lower", est, r.lower_bound * (1.0 - sc.slack)));
    } else {
      bool decreasing = true;
      for (std::size_t i = 1; i < r.rows.size(); ++i)
        decreasing = decreasing && r.rows[i].bracket.upper < r.rows[i - 1].bracket.upper;
      r.verdicts.push_back({"amenable_upper_decreasing", decreasing, last, "decreasing", 0.0});
      r.verdicts.push_back(detail::verdict_le("amenable_limit", r.upper_inf, sc.amenable_abs));
    }
    if (r.upper_bound > 0.0) r.verdicts.push_back(detail::verdict_le("bounded_upper", last, r.upper_bound * (1.0 + sc.slack)));
    p.cutoff_verdicts();
  });
}

inline BoundReport run_any(const Scenario& sc) {
  return sc.kind == Scenario::Kind::Gap ? run_scenario(sc) : run_bounded_decomposition(sc);
}

}  // namespace gperiodic

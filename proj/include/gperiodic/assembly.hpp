#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <utility>
#include <vector>

#include "gperiodic/cell.hpp"
#include "gperiodic/eigensolver.hpp"
#include "gperiodic/error.hpp"
#include "gperiodic/graph.hpp"
#include "gperiodic/sparse.hpp"
#include "gperiodic/tube.hpp"

namespace gperiodic {

enum class Truncation { Neumann, Dirichlet };

/// Maps a graph edge to the (leg of edge.a, leg of edge.b) pair to identify.
using PairingRule = std::function<std::pair<int, int>(const GraphEdge&)>;

inline std::pair<int, int> port_pairing(const GraphEdge& e) { return {e.port_a, e.port_b}; }

/// One cell copy per ball vertex, transition nodes identified along edges.
/// Nodes are grouped into classes (identified copies share one class); a
/// class carries a global dof unless it is eliminated by a Dirichlet
/// condition.
struct GluedSpace {
  GraphBall graph;
  CellMesh cell;
  Truncation mode = Truncation::Neumann;
  SparseOperator op;
  std::vector<int> class_of;  // copy * cell_nodes + node -> class
  std::vector<int> dof_of;    // class -> dof or -1
  int class_count = 0;

  int cell_nodes() const { return cell.node_count(); }
  int copies() const { return graph.vertex_count(); }
  int dimension() const { return op.dimension(); }
  int node_class(int copy, int node) const {
    return class_of[static_cast<std::size_t>(copy) * cell_nodes() + node];
  }
  int dof(int copy, int node) const { return dof_of[node_class(copy, node)]; }

  /// Cell-local values of a global function (zero at eliminated nodes).
  std::vector<double> restrict_to(int copy, const std::vector<double>& f) const {
    std::vector<double> out(static_cast<std::size_t>(cell_nodes()), 0.0);
    for (int j = 0; j < cell_nodes(); ++j) {
      const int d = dof(copy, j);
      if (d >= 0) out[j] = f[d];
    }
    return out;
  }
};

inline GluedSpace glue(const GraphBall& g, const CellMesh& c, Truncation mode, const PairingRule& pairing = port_pairing) {
  const int v = c.valence();
  if (g.valence() != v && g.edge_count() > 0) throw ValidationError("graph valence does not match the cell's transitions");
  if (g.vertex_count() == 0) throw ValidationError("graph ball is empty");
  GluedSpace s;
  s.graph = g;
  s.cell = c;
  s.mode = mode;
  const int N = c.node_count();
  const std::size_t total = static_cast<std::size_t>(g.vertex_count()) * N;

  std::vector<int> parent(total);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<std::vector<char>> used(static_cast<std::size_t>(g.vertex_count()), std::vector<char>(std::max(v, 1), 0));
  for (const auto& e : g.edges()) {
    const auto [la, lb] = pairing(e);
    if (la < 0 || la >= v || lb < 0 || lb >= v) throw ValidationError("pairing rule returned a leg out of range");
    if (used[e.a][la] || used[e.b][lb]) throw ValidationError("pairing rule is not a bijection on legs");
    used[e.a][la] = used[e.b][lb] = 1;
    parent[find(e.a * N + c.transition_node(la))] = find(e.b * N + c.transition_node(lb));
  }

  std::vector<int> root_class(total, -1);
  s.class_of.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    const int r = find(static_cast<int>(i));
    if (root_class[r] < 0) root_class[r] = s.class_count++;
    s.class_of[i] = root_class[r];
  }

  std::vector<char> eliminated(static_cast<std::size_t>(s.class_count), 0);
  for (int u = 0; u < g.vertex_count(); ++u)
    for (int j = 0; j < N; ++j)
      if (c.is_dirichlet(j)) eliminated[s.class_of[static_cast<std::size_t>(u) * N + j]] = 1;
  if (mode == Truncation::Dirichlet)
    for (int u = 0; u < g.vertex_count(); ++u)
      for (int leg = 0; leg < v; ++leg)
        if (!used[u][leg]) eliminated[s.class_of[static_cast<std::size_t>(u) * N + c.transition_node(leg)]] = 1;

  s.dof_of.assign(static_cast<std::size_t>(s.class_count), -1);
  int n = 0;
  for (int k = 0; k < s.class_count; ++k)
    if (!eliminated[k]) s.dof_of[k] = n++;
  if (n == 0) throw ValidationError("every node of the glued space is eliminated");

  const auto local = c.local_operator();
  const auto kt = local.stiffness.triplets();
  const auto mdiag = local.mass.diagonal_values();
  std::vector<Triplet> K, M;
  K.reserve(kt.size() * g.vertex_count());
  M.reserve(total);
  for (int u = 0; u < g.vertex_count(); ++u) {
    for (const auto& t : kt) {
      const int a = s.dof(u, t.row), b = s.dof(u, t.col);
      if (a >= 0 && b >= 0) K.push_back({a, b, t.value});
    }
    for (int j = 0; j < N; ++j) {
      const int a = s.dof(u, j);
      if (a >= 0) M.push_back({a, a, mdiag[j]});
    }
  }
  s.op = {CsrMatrix::from_triplets(n, K), CsrMatrix::from_triplets(n, M)};
  return s;
}

struct GlobalLambda0 {
  double value = 0.0;
  std::vector<double> vector;
  double residual = 0.0;
  bool converged = false;
};

/// Bottom of the glued spectrum. The glued Rayleigh quotient is a ratio of
/// sums of cell quotients, so lambda0(C) is a valid shift below it.
inline GlobalLambda0 glued_lambda0(const GluedSpace& s, std::optional<double> lower_bound, double tol = 1e-9) {
  EigenOptions opt;
  opt.count = 1;
  opt.tol = tol;
  opt.lower_bound = lower_bound;
  const auto r = smallest_eigenpairs(s.op, opt);
  GlobalLambda0 out;
  out.converged = r.converged;
  out.residual = r.max_residual;
  if (!r.pairs.empty()) {
    out.value = r.pairs[0].value;
    out.vector = r.pairs[0].vector;
  }
  if (!r.converged) throw SolverError("glued eigensolver did not converge", r.max_residual);
  return out;
}

// --------------------------------------------------------------- brackets

struct BracketEntry {
  int depth = 0;
  int cells = 0;
  int dimension = 0;
  double upper = 0.0;
  double delta = 0.0;  // upper - lambda0(C)
  double residual = 0.0;
  double seconds = 0.0;
};

struct Lambda0Bracket {
  double lambda0_C = 0.0;
  std::vector<BracketEntry> entries;
  double upper_inf = 0.0;  // two-point tail estimate, clamped to [lambda0_C, last upper]
  double upper_inf_uncertainty = 0.0;
  double delta_last() const { return entries.empty() ? 0.0 : entries.back().delta; }
  double delta_inf() const { return upper_inf - lambda0_C; }
};

/// Dirichlet-truncated glued balls over the schedule. lambda0(C) is the lower
/// end of the bracket; the upper values must be nonincreasing.
inline Lambda0Bracket lambda0_bracket(const GraphFamily& family, const CellMesh& c, const CellSpectrum& spec,
                                      const std::vector<int>& schedule, double tol = 1e-9) {
  if (schedule.empty()) throw ValidationError("empty depth schedule");
  for (std::size_t i = 1; i < schedule.size(); ++i)
    if (schedule[i] <= schedule[i - 1]) throw ValidationError("depth schedule must increase");
  Lambda0Bracket b;
  b.lambda0_C = spec.lambda0;
  for (int p : schedule) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto g = family.ball(p);
    const auto s = glue(g, c, Truncation::Dirichlet);
    const auto l = glued_lambda0(s, spec.lambda0, tol);
    BracketEntry e;
    e.depth = p;
    e.cells = g.vertex_count();
    e.dimension = s.dimension();
    e.upper = l.value;
    e.delta = l.value - spec.lambda0;
    e.residual = l.residual;
    e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!b.entries.empty()) {
      const double prev = b.entries.back().upper;
      if (e.upper > prev + 10 * tol * std::max(1.0, std::abs(prev)))
        throw InvariantViolation("Dirichlet-truncated lambda0 increased with depth");
    }
    if (e.upper < spec.lambda0 - 10 * tol * std::max(1.0, spec.lambda0))
      throw InvariantViolation("glued lambda0 fell below lambda0(C)");
    b.entries.push_back(e);
  }
  const auto& last = b.entries.back();
  b.upper_inf = last.upper;
  if (b.entries.size() >= 2) {
    const auto& prev = b.entries[b.entries.size() - 2];
    b.upper_inf = spec.lambda0 + richardson_tail(prev.depth, std::max(0.0, prev.delta), last.depth, std::max(0.0, last.delta));
  }
  b.upper_inf_uncertainty = last.upper - b.upper_inf;
  return b;
}

// ----------------------------------------------------------------- cutoff

namespace detail {

/// Multi-source shortest path lengths over the glued mesh classes.
inline std::vector<double> class_distances(const GluedSpace& s, const std::vector<int>& source_classes) {
  std::vector<std::vector<std::pair<int, double>>> adj(static_cast<std::size_t>(s.class_count));
  for (int u = 0; u < s.copies(); ++u)
    for (const auto& e : s.cell.elements()) {
      const int a = s.node_class(u, e.a), b = s.node_class(u, e.b);
      adj[a].push_back({b, e.length});
      adj[b].push_back({a, e.length});
    }
  std::vector<double> d(static_cast<std::size_t>(s.class_count), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  for (int k : source_classes)
    if (d[k] > 0.0) {
      d[k] = 0.0;
      pq.push({0.0, k});
    }
  while (!pq.empty()) {
    const auto [dist, k] = pq.top();
    pq.pop();
    if (dist > d[k]) continue;
    for (const auto& [m, len] : adj[k])
      if (dist + len < d[m]) {
        d[m] = dist + len;
        pq.push({d[m], m});
      }
  }
  return d;
}

}  // namespace detail

/// Smallest distance inside the cell between two distinct transitions: the
/// width of a one-cell collar.
inline double collar_width(const CellMesh& c) {
  if (c.valence() < 2) throw ValidationError("collar width needs at least two transitions");
  double best = std::numeric_limits<double>::infinity();
  GraphBall one = GraphBall::single_vertex(c.valence());
  GluedSpace s = glue(one, c, Truncation::Neumann);
  for (int a = 0; a < c.valence(); ++a) {
    const auto d = detail::class_distances(s, {s.node_class(0, c.transition_node(a))});
    for (int b = 0; b < c.valence(); ++b)
      if (b != a) best = std::min(best, d[s.node_class(0, c.transition_node(b))]);
  }
  return best;
}

struct CutoffReport {
  double quotient = 0.0;
  double phi_quotient = 0.0;  // Rayleigh quotient of phi on one cell
  double epsilon = 0.0;       // phi_quotient - lambda0(C), clamped at 0
  int subset_size = 0;
  int boundary = 0;
  int k = 0;
  double R = 0.0;
  double Aprime = 0.0;
  double bound = 0.0;
  bool holds = false;
  double margin = 0.0;  // bound - quotient
};

/// Rayleigh quotient of phi * psi where psi = max(0, 1 - d(x, M_p)/R) and
/// M_p is the union of the cells over `subset`.
inline CutoffReport cutoff_rayleigh(const GluedSpace& s, const CellSpectrum& spec, const std::vector<int>& subset,
                                    const std::vector<double>& phi, std::optional<double> R = std::nullopt) {
  if (s.mode != Truncation::Neumann) throw ValidationError("cutoff test functions live on the Neumann glued space");
  if (subset.empty()) throw ValidationError("empty subset");
  if (phi.size() != static_cast<std::size_t>(s.cell_nodes())) throw ValidationError("phi does not match the cell mesh");
  for (double x : phi)
    if (x < 0.0) throw ValidationError("phi must be nonnegative");
  const auto& g = s.graph;
  std::vector<char> in(static_cast<std::size_t>(g.vertex_count()), 0);
  for (int u : subset) {
    if (u < 0 || u >= g.vertex_count() || in[u]) throw ValidationError("bad subset vertex");
    in[u] = 1;
  }
  const bool whole = static_cast<int>(subset.size()) == g.vertex_count();
  if (!whole)
    for (int u : subset)
      if (!g.is_interior(u)) throw ValidationError("collar missing: subset touches the ball frontier");

  CutoffReport rep;
  rep.subset_size = static_cast<int>(subset.size());
  rep.boundary = 0;
  if (!whole)
    for (int u : subset) {
      bool edge = g.degree(u) < g.valence();
      for (const auto& nb : g.neighbors(u)) edge = edge || !in[nb.vertex];
      if (edge) ++rep.boundary;
    }
  rep.k = g.valence();
  rep.R = R.value_or(s.cell.valence() >= 2 ? collar_width(s.cell) : 1.0);
  if (!(rep.R > 0.0)) throw ValidationError("cutoff width must be positive");

  const auto local = s.cell.local_operator();
  rep.phi_quotient = local.stiffness.quadratic_form(phi) / local.mass.quadratic_form(phi);
  rep.epsilon = std::max(0.0, rep.phi_quotient - spec.lambda0);

  std::vector<int> sources;
  for (int u : subset)
    for (int j = 0; j < s.cell_nodes(); ++j) sources.push_back(s.node_class(u, j));
  const auto d = detail::class_distances(s, sources);

  std::vector<double> f(static_cast<std::size_t>(s.dimension()), 0.0);
  for (int u = 0; u < s.copies(); ++u)
    for (int j = 0; j < s.cell_nodes(); ++j) {
      const int k = s.node_class(u, j), dof = s.dof_of[k];
      if (dof < 0) continue;
      const double psi = std::max(0.0, 1.0 - d[k] / rep.R);
      f[dof] = std::max(f[dof], phi[j] * psi);
    }
  rep.quotient = s.op.stiffness.quadratic_form(f) / s.op.mass.quadratic_form(f);
  rep.Aprime = constant_Aprime(rep.k, rep.R, spec.lambda0);
  rep.bound = spec.lambda0 + rep.epsilon +
              (rep.Aprime + rep.epsilon * rep.k) * static_cast<double>(rep.boundary) / rep.subset_size;
  rep.margin = rep.bound - rep.quotient;
  rep.holds = rep.quotient <= rep.bound + 1e-12 * std::max(1.0, rep.bound);
  return rep;
}

// ---------------------------------------------------------- discretization

struct Discretization {
  std::vector<double> a2, b, c2, grad_g2;
  std::vector<std::vector<double>> g;  // per-cell residual fields
  double energy = 0.0;                 // f^T K f
  double mass = 0.0;                   // f^T M f
  double decomposed_energy = 0.0;      // sum lambda0 b^2 + |grad g|^2
  double max_pythagoras_error = 0.0;   // |a^2 - b^2 - c^2|
  double max_orthogonality = 0.0;      // |<g, phi0>|
  double max_gap_violation = 0.0;      // max(0, lambda1 c^2 - |grad g|^2)
  double b_scale = 1.0;                // b_i = b_scale * <f, phi0>
};

namespace detail {

inline Discretization project(const GluedSpace& s, const std::vector<double>& f, const std::vector<double>& phi,
                              double lambda0, double lambda1) {
  if (f.size() != static_cast<std::size_t>(s.dimension())) throw ValidationError("function does not match the glued space");
  const auto local = s.cell.local_operator();
  Discretization d;
  d.energy = s.op.stiffness.quadratic_form(f);
  d.mass = s.op.mass.quadratic_form(f);
  for (int u = 0; u < s.copies(); ++u) {
    const auto fi = s.restrict_to(u, f);
    const double a2 = local.mass.quadratic_form(fi);
    const double b = local.mass.bilinear_form(fi, phi);
    std::vector<double> gi(fi.size());
    for (std::size_t j = 0; j < fi.size(); ++j) gi[j] = fi[j] - b * phi[j];
    const double c2 = local.mass.quadratic_form(gi);
    const double gg = local.stiffness.quadratic_form(gi);
    d.a2.push_back(a2);
    d.b.push_back(b);
    d.c2.push_back(c2);
    d.grad_g2.push_back(gg);
    d.decomposed_energy += lambda0 * b * b + gg;
    d.max_pythagoras_error = std::max(d.max_pythagoras_error, std::abs(a2 - b * b - c2));
    d.max_orthogonality = std::max(d.max_orthogonality, std::abs(local.mass.bilinear_form(gi, phi)));
    d.max_gap_violation = std::max(d.max_gap_violation, lambda1 * c2 - gg);
    d.g.push_back(std::move(gi));
  }
  return d;
}

}  // namespace detail

/// Cell-by-cell projection of f onto phi0: a_i^2 = |f|^2, b_i = <f, phi0>,
/// g_i = f - b_i phi0, c_i^2 = |g_i|^2 on each copy.
inline Discretization discretize_against_phi0(const GluedSpace& s, const std::vector<double>& f, const CellSpectrum& spec) {
  if (spec.phi0.size() != static_cast<std::size_t>(s.cell_nodes())) throw ValidationError("spectrum does not belong to this cell");
  return detail::project(s, f, spec.phi0, spec.lambda0, spec.lambda1);
}

/// Finite-volume variant: phi0 = 1 / sqrt(Vol(C)), so b_i here is
/// sqrt(Vol(C)) times the cell mean of f; b_scale = 1 / sqrt(Vol(C)) turns it
/// into the mean.
inline Discretization discretize_against_constant(const GluedSpace& s, const std::vector<double>& f, double lambda1) {
  if (s.cell.has_dirichlet()) throw ValidationError("constant eigenfunction needs a cell without Dirichlet ends");
  const double vol = s.cell.volume();
  const std::vector<double> phi(static_cast<std::size_t>(s.cell_nodes()), 1.0 / std::sqrt(vol));
  auto d = detail::project(s, f, phi, 0.0, lambda1);
  d.b_scale = 1.0 / std::sqrt(vol);
  return d;
}

/// phi0 of every copy written into the glued dofs (cells in `cells`, or all).
inline std::vector<double> extend_phi0(const GluedSpace& s, const CellSpectrum& spec, const std::vector<int>& cells = {}) {
  std::vector<double> f(static_cast<std::size_t>(s.dimension()), 0.0);
  std::vector<int> list = cells;
  if (list.empty()) {
    list.resize(static_cast<std::size_t>(s.copies()));
    std::iota(list.begin(), list.end(), 0);
  }
  for (int u : list)
    for (int j = 0; j < s.cell_nodes(); ++j) {
      const int d = s.dof(u, j);
      if (d >= 0) f[d] = spec.phi0[j];
    }
  return f;
}

}  // namespace gperiodic

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gperiodic/eigensolver.hpp"
#include "gperiodic/error.hpp"
#include "gperiodic/sparse.hpp"
#include "json.hpp"

namespace gperiodic {

/// One undirected edge. `port_a` is the slot of this edge at vertex `a`
/// (in [0, valence)), used to pair cell transitions when gluing.
struct GraphEdge {
  int a;
  int b;
  int port_a;
  int port_b;
};

/// Finite ball of an infinite graph. Interior vertices carry their full
/// valence inside the ball; frontier vertices form the separating layer.
class GraphBall {
 public:
  struct Neighbor {
    int vertex;
    int edge;
  };

  static GraphBall create(std::vector<std::string> labels, std::vector<GraphEdge> edges, std::vector<bool> interior,
                          int valence, std::string family_tag, int radius) {
    GraphBall g;
    g.labels_ = std::move(labels);
    g.edges_ = std::move(edges);
    g.interior_ = std::move(interior);
    g.valence_ = valence;
    g.tag_ = std::move(family_tag);
    g.radius_ = radius;
    g.validate();
    return g;
  }

  /// One vertex, no edges, no interior: the degenerate ball whose gluing is
  /// a single cell.
  static GraphBall single_vertex(int valence) { return create({"0"}, {}, {false}, valence, "single-vertex", 0); }

  int vertex_count() const noexcept { return static_cast<int>(labels_.size()); }
  int edge_count() const noexcept { return static_cast<int>(edges_.size()); }
  int valence() const noexcept { return valence_; }
  int radius() const noexcept { return radius_; }
  const std::string& family_tag() const noexcept { return tag_; }
  const std::string& label(int v) const { return labels_.at(static_cast<std::size_t>(v)); }
  bool is_interior(int v) const { return interior_.at(static_cast<std::size_t>(v)); }
  const std::vector<GraphEdge>& edges() const noexcept { return edges_; }
  const std::vector<Neighbor>& neighbors(int v) const { return adj_.at(static_cast<std::size_t>(v)); }
  int degree(int v) const { return static_cast<int>(neighbors(v).size()); }

  std::vector<int> interior_vertices() const {
    std::vector<int> out;
    for (int v = 0; v < vertex_count(); ++v)
      if (interior_[v]) out.push_back(v);
    return out;
  }
  std::vector<int> frontier_vertices() const {
    std::vector<int> out;
    for (int v = 0; v < vertex_count(); ++v)
      if (!interior_[v]) out.push_back(v);
    return out;
  }
  int interior_count() const { return static_cast<int>(std::count(interior_.begin(), interior_.end(), true)); }

  std::optional<int> find(const std::string& label) const {
    for (int v = 0; v < vertex_count(); ++v)
      if (labels_[v] == label) return v;
    return std::nullopt;
  }

 private:
  void validate() {
    const int n = vertex_count();
    if (valence_ < 1) throw ValidationError("valence must be positive");
    if (static_cast<int>(interior_.size()) != n) throw ValidationError("interior mask size mismatch");
    adj_.assign(static_cast<std::size_t>(n), {});
    std::set<std::pair<int, int>> seen;
    for (int e = 0; e < edge_count(); ++e) {
      const auto& ed = edges_[e];
      if (ed.a < 0 || ed.a >= n || ed.b < 0 || ed.b >= n) throw ValidationError("edge endpoint out of range");
      if (ed.a == ed.b) throw ValidationError("self-loop at vertex " + labels_[ed.a]);
      if (!seen.insert({std::min(ed.a, ed.b), std::max(ed.a, ed.b)}).second)
        throw ValidationError("duplicate edge " + labels_[ed.a] + "-" + labels_[ed.b]);
      adj_[ed.a].push_back({ed.b, e});
      adj_[ed.b].push_back({ed.a, e});
    }
    for (int v = 0; v < n; ++v) {
      if (interior_[v] && degree(v) != valence_)
        throw ValidationError("interior vertex " + labels_[v] + " has degree " + std::to_string(degree(v)) +
                              ", expected " + std::to_string(valence_));
      if (degree(v) > valence_) throw ValidationError("vertex " + labels_[v] + " exceeds the valence");
      std::vector<bool> used(static_cast<std::size_t>(valence_), false);
      for (const auto& nb : adj_[v]) {
        const auto& ed = edges_[nb.edge];
        const int port = ed.a == v ? ed.port_a : ed.port_b;
        if (port < 0 || port >= valence_ || used[port])
          throw ValidationError("bad or repeated port at vertex " + labels_[v]);
        used[port] = true;
      }
    }
  }

  std::vector<std::string> labels_;
  std::vector<GraphEdge> edges_;
  std::vector<bool> interior_;
  std::vector<std::vector<Neighbor>> adj_;
  int valence_ = 0;
  std::string tag_;
  int radius_ = 0;
};

// ---------------------------------------------------------------- builders

/// Ball of Z^d (d = 1 or 2) of graph radius `radius`, frontier = sphere.
/// Ports: Z uses 0 = left, 1 = right; Z^2 uses 0 = +x, 1 = -x, 2 = +y, 3 = -y.
inline GraphBall build_lattice(int dimension, int radius) {
  if (dimension != 1 && dimension != 2) throw ValidationError("lattice dimension must be 1 or 2");
  if (radius < 1) throw ValidationError("radius must be at least 1");
  std::vector<std::string> labels;
  std::vector<bool> interior;
  std::vector<GraphEdge> edges;
  if (dimension == 1) {
    for (int x = -radius; x <= radius; ++x) {
      labels.push_back(std::to_string(x));
      interior.push_back(std::abs(x) < radius);
    }
    for (int i = 0; i + 1 < static_cast<int>(labels.size()); ++i) edges.push_back({i, i + 1, 1, 0});
    return GraphBall::create(std::move(labels), std::move(edges), std::move(interior), 2, "lattice", radius);
  }
  std::map<std::pair<int, int>, int> index;
  for (int x = -radius; x <= radius; ++x)
    for (int y = -radius; y <= radius; ++y)
      if (std::abs(x) + std::abs(y) <= radius) {
        index[{x, y}] = static_cast<int>(labels.size());
        labels.push_back(std::to_string(x) + "," + std::to_string(y));
        interior.push_back(std::abs(x) + std::abs(y) < radius);
      }
  for (const auto& [p, i] : index) {
    auto right = index.find({p.first + 1, p.second});
    if (right != index.end()) edges.push_back({i, right->second, 0, 1});
    auto up = index.find({p.first, p.second + 1});
    if (up != index.end()) edges.push_back({i, up->second, 2, 3});
  }
  return GraphBall::create(std::move(labels), std::move(edges), std::move(interior), 4, "lattice", radius);
}

/// Rooted ball of the v-regular tree. The root uses ports 0..v-1; every other
/// vertex reaches its parent through port 0.
inline constexpr double kMaxBallVertices = 4e6;

inline double regular_tree_size(int valence, int depth) {
  double count = 1, shell = valence;
  for (int d = 1; d <= depth; ++d, shell *= valence - 1) count += shell;
  return count;
}

inline GraphBall build_regular_tree(int valence, int depth) {
  if (valence < 3) throw ValidationError("regular tree needs valence >= 3 (use a lattice for valence 2)");
  if (depth < 1) throw ValidationError("depth must be at least 1");
  const double count = regular_tree_size(valence, depth);
  if (count > kMaxBallVertices)
    throw ValidationError("tree ball of depth " + std::to_string(depth) + " has " + std::to_string(static_cast<long long>(count)) +
                          " vertices, above the limit");
  std::vector<std::string> labels{"0"};
  std::vector<bool> interior{true};
  std::vector<GraphEdge> edges;
  std::vector<int> layer{0};
  for (int d = 1; d <= depth; ++d) {
    std::vector<int> next;
    for (int parent : layer) {
      const int first_port = parent == 0 ? 0 : 1;
      for (int port = first_port; port < valence; ++port) {
        const int child = static_cast<int>(labels.size());
        labels.push_back(std::to_string(child));
        interior.push_back(d < depth);
        edges.push_back({parent, child, port, 0});
        next.push_back(child);
      }
    }
    layer = std::move(next);
  }
  return GraphBall::create(std::move(labels), std::move(edges), std::move(interior), valence, "tree", depth);
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, const std::string& seps) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (seps.find(c) != std::string::npos) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace detail

/// Parses the edge-list format:
///   # valence=<v> frontier=<a,b,...>
///   a-b            (or "a b"; several pairs per line separated by ',' or ';')
/// Ports are assigned per vertex in order of appearance.
inline GraphBall load_edge_list(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::optional<int> valence;
  int header_line = 0;
  std::vector<std::string> frontier;
  std::vector<std::string> labels;
  std::unordered_map<std::string, int> index;
  std::vector<int> first_line;
  std::vector<GraphEdge> edges;
  std::vector<int> next_port;
  std::set<std::pair<int, int>> seen;
  auto vertex = [&](const std::string& l, int at) {
    auto it = index.find(l);
    if (it != index.end()) return it->second;
    const int id = static_cast<int>(labels.size());
    index.emplace(l, id);
    labels.push_back(l);
    first_line.push_back(at);
    next_port.push_back(0);
    return id;
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = detail::trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      std::istringstream hs(t.substr(1));
      std::string kv;
      while (hs >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
        if (key == "valence" || key == "v") {
          try {
            valence = std::stoi(value);
          } catch (const std::exception&) {
            throw ParseError("bad valence '" + value + "'", lineno);
          }
          header_line = lineno;
        } else if (key == "frontier") {
          for (auto& f : detail::split(value, ","))
            if (!f.empty()) frontier.push_back(f);
          header_line = lineno;
        }
      }
      continue;
    }
    for (const auto& item : detail::split(t, ",;")) {
      if (item.empty()) continue;
      std::string a, b;
      const auto ws = item.find_first_of(" \t");
      if (ws != std::string::npos) {
        a = detail::trim(item.substr(0, ws));
        b = detail::trim(item.substr(ws));
      } else {
        const auto dash = item.find('-', 1);
        if (dash == std::string::npos) {
          vertex(item, lineno);  // isolated vertex declaration
          continue;
        }
        a = item.substr(0, dash);
        b = item.substr(dash + 1);
      }
      if (a.empty() || b.empty()) throw ParseError("malformed edge '" + item + "'", lineno);
      if (a == b) throw ParseError("self-loop at '" + a + "'", lineno);
      const int ia = vertex(a, lineno), ib = vertex(b, lineno);
      if (!seen.insert({std::min(ia, ib), std::max(ia, ib)}).second)
        throw ParseError("duplicate edge " + a + "-" + b, lineno);
      edges.push_back({ia, ib, next_port[ia]++, next_port[ib]++});
    }
  }
  if (labels.empty()) throw ParseError("edge list declares no vertices", 0);
  std::vector<bool> interior(labels.size(), true);
  for (const auto& f : frontier) {
    auto it = index.find(f);
    if (it == index.end()) throw ParseError("frontier label '" + f + "' is not a vertex", header_line);
    interior[it->second] = false;
  }
  const int v = valence.value_or(*std::max_element(next_port.begin(), next_port.end()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (interior[i] && next_port[i] != v)
      throw ParseError("interior vertex '" + labels[i] + "' has degree " + std::to_string(next_port[i]) +
                           ", declared valence " + std::to_string(v),
                       first_line[i]);
    if (next_port[i] > v)
      throw ParseError("vertex '" + labels[i] + "' exceeds the declared valence", first_line[i]);
  }
  return GraphBall::create(std::move(labels), std::move(edges), std::move(interior), v, "edge-list", 0);
}

// ------------------------------------------------------------- Laplacian

/// (Delta f)(i) = sum over neighbours j of (f(i) - f(j)). With `dirichlet`,
/// f must vanish on the frontier and the returned frontier entries are 0.
inline std::vector<double> combinatorial_laplacian_apply(const GraphBall& g, const std::vector<double>& f,
                                                         bool dirichlet) {
  if (static_cast<int>(f.size()) != g.vertex_count()) throw ValidationError("function size does not match the graph");
  if (dirichlet)
    for (int v : g.frontier_vertices())
      if (f[v] != 0.0) throw ValidationError("Dirichlet Laplacian needs f = 0 on the frontier");
  std::vector<double> out(f.size(), 0.0);
  for (int i = 0; i < g.vertex_count(); ++i) {
    if (dirichlet && !g.is_interior(i)) continue;
    double s = 0.0;
    for (const auto& nb : g.neighbors(i)) s += f[i] - f[nb.vertex];
    out[i] = s;
  }
  return out;
}

/// Sum over unordered edges of (f(i)-f(j))^2 divided by sum f(i)^2, for f
/// vanishing on the frontier.
inline double rayleigh_quotient_comb(const GraphBall& g, const std::vector<double>& f) {
  if (static_cast<int>(f.size()) != g.vertex_count()) throw ValidationError("function size does not match the graph");
  double num = 0.0, den = 0.0;
  for (int v = 0; v < g.vertex_count(); ++v) {
    if (!g.is_interior(v) && f[v] != 0.0) throw ValidationError("f must vanish on the frontier");
    den += f[v] * f[v];
  }
  if (den == 0.0) throw ValidationError("zero function has no Rayleigh quotient");
  for (const auto& e : g.edges()) num += (f[e.a] - f[e.b]) * (f[e.a] - f[e.b]);
  return num / den;
}

/// Dirichlet-on-frontier Laplacian on the interior vertices (M = identity).
struct InteriorOperator {
  SparseOperator op;
  std::vector<int> vertex_of;  // row -> graph vertex
};

inline InteriorOperator dirichlet_laplacian(const GraphBall& g) {
  InteriorOperator out;
  std::vector<int> row(static_cast<std::size_t>(g.vertex_count()), -1);
  for (int v : g.interior_vertices()) {
    row[v] = static_cast<int>(out.vertex_of.size());
    out.vertex_of.push_back(v);
  }
  const int n = static_cast<int>(out.vertex_of.size());
  if (n == 0) throw ValidationError("ball has no interior vertex");
  std::vector<Triplet> t;
  for (int r = 0; r < n; ++r) {
    const int v = out.vertex_of[r];
    t.push_back({r, r, static_cast<double>(g.degree(v))});
    for (const auto& nb : g.neighbors(v))
      if (row[nb.vertex] >= 0) t.push_back({r, row[nb.vertex], -1.0});
  }
  out.op = {CsrMatrix::from_triplets(n, t), CsrMatrix::identity(n)};
  return out;
}

// ----------------------------------------------------- Cheeger and Folner

namespace detail {

inline int boundary_count(const GraphBall& g, const std::vector<char>& in_set, const std::vector<int>& set) {
  int b = 0;
  for (int v : set) {
    bool edge = g.degree(v) < g.valence();  // missing neighbours lie outside
    for (const auto& nb : g.neighbors(v))
      if (!in_set[nb.vertex]) edge = true;
    if (edge) ++b;
  }
  return b;
}

}  // namespace detail

/// #boundary(F)/#F where a vertex of F is in the boundary when it has a
/// neighbour outside F (frontier vertices and the unbuilt graph count as outside).
inline double folner_ratio(const GraphBall& g, const std::vector<int>& subset) {
  if (subset.empty()) throw ValidationError("Folner ratio of an empty set");
  std::vector<char> in(static_cast<std::size_t>(g.vertex_count()), 0);
  for (int v : subset) {
    if (v < 0 || v >= g.vertex_count() || !g.is_interior(v)) throw ValidationError("subset must lie in the interior");
    if (in[v]) throw ValidationError("subset lists a vertex twice");
    in[v] = 1;
  }
  return static_cast<double>(detail::boundary_count(g, in, subset)) / static_cast<double>(subset.size());
}

/// Exact minimum of the Folner ratio over connected interior subsets of at
/// most `max_subset_size` vertices (ESU enumeration).
inline double cheeger_bruteforce(const GraphBall& g, int max_subset_size) {
  if (max_subset_size < 1 || max_subset_size > 20) throw ValidationError("max_subset_size must be in [1, 20]");
  const auto interior = g.interior_vertices();
  if (interior.empty()) throw ValidationError("ball has no interior vertex");
  const int n = g.vertex_count();
  std::vector<char> in(static_cast<std::size_t>(n), 0);
  std::vector<int> current;
  double best = 1.0;  // a single vertex always has ratio 1

  auto evaluate = [&]() {
    const double r = static_cast<double>(detail::boundary_count(g, in, current)) / current.size();
    best = std::min(best, r);
  };
  // ESU: extend with vertices of larger id than the root, each taken from
  // the exclusive neighbourhood of the current set.
  std::vector<int> mark(static_cast<std::size_t>(n), 0);  // counts of closed-neighbourhood membership
  auto extend = [&](auto&& self, int root, std::vector<int> ext) -> void {
    evaluate();
    if (static_cast<int>(current.size()) == max_subset_size) return;
    while (!ext.empty()) {
      const int w = ext.back();
      ext.pop_back();
      std::vector<int> next = ext;
      std::vector<int> added;
      for (const auto& nb : g.neighbors(w)) {
        const int u = nb.vertex;
        if (u <= root || !g.is_interior(u) || in[u] || mark[u] > 0) continue;
        if (std::find(next.begin(), next.end(), u) != next.end()) continue;
        next.push_back(u);
        added.push_back(u);
      }
      in[w] = 1;
      current.push_back(w);
      for (const auto& nb : g.neighbors(w)) ++mark[nb.vertex];
      self(self, root, next);
      for (const auto& nb : g.neighbors(w)) --mark[nb.vertex];
      current.pop_back();
      in[w] = 0;
    }
  };
  for (int root : interior) {
    in[root] = 1;
    current.push_back(root);
    for (const auto& nb : g.neighbors(root)) ++mark[nb.vertex];
    ++mark[root];
    std::vector<int> ext;
    for (const auto& nb : g.neighbors(root))
      if (nb.vertex > root && g.is_interior(nb.vertex)) ext.push_back(nb.vertex);
    extend(extend, root, ext);
    --mark[root];
    for (const auto& nb : g.neighbors(root)) --mark[nb.vertex];
    current.pop_back();
    in[root] = 0;
  }
  return best;
}

struct SweepCut {
  double value = 0.0;
  std::vector<int> subset;
};

/// Orders interior vertices by decreasing `ordering` value and returns the
/// best Folner ratio over all prefixes.
inline SweepCut cheeger_sweep(const GraphBall& g, const std::vector<double>& ordering) {
  const auto interior = g.interior_vertices();
  if (interior.size() < 2) throw ValidationError("sweep needs at least two interior vertices");
  if (static_cast<int>(ordering.size()) != g.vertex_count()) throw ValidationError("ordering size mismatch");
  std::vector<int> order = interior;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return ordering[a] > ordering[b]; });
  const int n = g.vertex_count();
  std::vector<char> in(static_cast<std::size_t>(n), 0);
  std::vector<int> outside(static_cast<std::size_t>(n), 0);  // neighbours not in F (incl. missing ones)
  int boundary = 0;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_len = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const int u = order[k];
    in[u] = 1;
    outside[u] = g.valence() - g.degree(u);
    for (const auto& nb : g.neighbors(u)) {
      if (in[nb.vertex]) {
        if (--outside[nb.vertex] == 0) --boundary;
      } else {
        ++outside[u];
      }
    }
    if (outside[u] > 0) ++boundary;
    const double r = static_cast<double>(boundary) / static_cast<double>(k + 1);
    if (r < best) {
      best = r;
      best_len = k + 1;
    }
  }
  return {best, std::vector<int>(order.begin(), order.begin() + static_cast<long>(best_len))};
}

/// Sweep over the first Dirichlet eigenvector of the ball.
inline SweepCut cheeger_sweep(const GraphBall& g) {
  auto lap = dirichlet_laplacian(g);
  auto r = smallest_eigenpairs_or_throw(lap.op, {.count = 1, .tol = 1e-10});
  std::vector<double> f(static_cast<std::size_t>(g.vertex_count()), 0.0);
  double sign = 0.0;
  for (double x : r.pairs[0].vector) sign += x;
  for (std::size_t i = 0; i < lap.vertex_of.size(); ++i)
    f[lap.vertex_of[i]] = sign < 0 ? -r.pairs[0].vector[i] : r.pairs[0].vector[i];
  return cheeger_sweep(g, f);
}

// ---------------------------------------------------------- mu0 estimation

struct GraphFamily {
  enum class Kind { Lattice, Tree };
  Kind kind = Kind::Lattice;
  int dimension = 1;  // lattices
  int valence = 3;    // trees

  int graph_valence() const { return kind == Kind::Lattice ? 2 * dimension : valence; }
  GraphBall ball(int depth) const {
    return kind == Kind::Lattice ? build_lattice(dimension, depth) : build_regular_tree(valence, depth);
  }
  std::string name() const {
    return kind == Kind::Lattice ? "Z" + (dimension == 2 ? std::string("^2") : std::string())
                                 : std::to_string(valence) + "-tree";
  }
};

struct Mu0Options {
  double tol = 1e-3;
  int min_depth = 2;
  int max_depth = 12;
  double eigen_tol = 1e-10;
  std::uint64_t seed = 42;
};

struct GraphConstants {
  std::string family;
  int valence = 0;
  std::vector<int> depths;
  std::vector<double> mu0_estimates;
  std::vector<double> cheeger_estimates;  // sweep values per depth
  std::vector<double> folner_ratio;       // whole-interior ratio per depth
  double mu0_extrapolated = 0.0;
  double converged_mu0 = 0.0;
  double converged_h = 0.0;
  bool mu0_converged = false;   // successive difference fell below tol
  bool amenable_consistent = false;
};

/// Two-point tail estimate assuming mu_p = mu + c/(p+1)^2, clamped to [0, mu_p].
inline double richardson_tail(int p_prev, double mu_prev, int p, double mu) {
  const double a = static_cast<double>(p + 1) * (p + 1), b = static_cast<double>(p_prev + 1) * (p_prev + 1);
  const double est = (a * mu - b * mu_prev) / (a - b);
  return std::clamp(est, 0.0, mu);
}

inline GraphConstants mu0_estimate(const GraphFamily& family, const Mu0Options& opt = {}) {
  if (opt.max_depth < opt.min_depth) throw ValidationError("max_depth below min_depth");
  if (opt.min_depth < 1) throw ValidationError("min_depth must be at least 1");
  GraphConstants gc;
  gc.family = family.name();
  gc.valence = family.graph_valence();
  for (int p = opt.min_depth; p <= opt.max_depth; ++p) {
    const GraphBall g = family.ball(p);
    auto lap = dirichlet_laplacian(g);
    auto r = smallest_eigenpairs_or_throw(lap.op, {.count = 1, .tol = opt.eigen_tol, .seed = opt.seed});
    const double mu = r.pairs[0].value;
    if (!gc.mu0_estimates.empty() && mu > gc.mu0_estimates.back() + 1e-9)
      throw InvariantViolation("mu0 estimates increased with depth at p=" + std::to_string(p));
    std::vector<double> f(static_cast<std::size_t>(g.vertex_count()), 0.0);
    double sign = 0.0;
    for (double x : r.pairs[0].vector) sign += x;
    for (std::size_t i = 0; i < lap.vertex_of.size(); ++i)
      f[lap.vertex_of[i]] = sign < 0 ? -r.pairs[0].vector[i] : r.pairs[0].vector[i];
    gc.depths.push_back(p);
    gc.mu0_estimates.push_back(mu);
    gc.cheeger_estimates.push_back(g.interior_count() >= 2 ? cheeger_sweep(g, f).value : 1.0);
    gc.folner_ratio.push_back(folner_ratio(g, g.interior_vertices()));
    const std::size_t k = gc.mu0_estimates.size();
    if (k >= 2 && std::abs(mu - gc.mu0_estimates[k - 2]) < opt.tol) {
      gc.mu0_converged = true;
      break;
    }
  }
  const std::size_t k = gc.mu0_estimates.size();
  gc.mu0_extrapolated = k >= 2 ? richardson_tail(gc.depths[k - 2], gc.mu0_estimates[k - 2], gc.depths[k - 1],
                                                 gc.mu0_estimates[k - 1])
                               : gc.mu0_estimates.back();
  gc.converged_mu0 = gc.mu0_extrapolated;
  gc.converged_h = *std::min_element(gc.cheeger_estimates.begin(), gc.cheeger_estimates.end());
  gc.amenable_consistent = gc.converged_mu0 < 1e-6;
  return gc;
}

inline void to_json(nlohmann::json& j, const GraphConstants& gc) {
  j = nlohmann::json{{"family", gc.family},
                     {"valence", gc.valence},
                     {"depths", gc.depths},
                     {"mu0_estimates", gc.mu0_estimates},
                     {"cheeger_estimates", gc.cheeger_estimates},
                     {"folner_ratio", gc.folner_ratio},
                     {"mu0_extrapolated", gc.mu0_extrapolated},
                     {"converged_mu0", gc.converged_mu0},
                     {"converged_h", gc.converged_h},
                     {"mu0_converged", gc.mu0_converged},
                     {"amenable_consistent", gc.amenable_consistent}};
}

}  // namespace gperiodic

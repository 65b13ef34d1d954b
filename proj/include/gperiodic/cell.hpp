#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gperiodic/eigensolver.hpp"
#include "gperiodic/error.hpp"
#include "gperiodic/sparse.hpp"
#include "gperiodic/tube.hpp"
#include "json.hpp"

namespace gperiodic {

/// Positive density w(r) along a segment, r measured from the segment's
/// `from` node.
struct WeightSpec {
  enum class Family { Constant, Exp, CoshPower, Linear, Sampled };
  Family family = Family::Constant;
  double scale = 1.0;   // constant value / prefactor / intercept for linear
  double rate = 0.0;    // exp rate, cosh power, or linear slope
  double offset = 0.0;  // cosh_power: cosh(r - offset)^rate
  std::vector<double> values;  // sampled, uniform on [0, length]

  static WeightSpec constant(double c) { return {Family::Constant, c}; }
  static WeightSpec exp(double rate, double scale = 1.0) { return {Family::Exp, scale, rate}; }
  static WeightSpec cosh_power(double power, double offset = 0.0, double scale = 1.0) {
    return {Family::CoshPower, scale, power, offset};
  }
  static WeightSpec linear(double a, double b) { return {Family::Linear, a, b}; }
  static WeightSpec sampled(std::vector<double> v) {
    WeightSpec w;
    w.family = Family::Sampled;
    w.values = std::move(v);
    return w;
  }

  double operator()(double r, double length) const {
    switch (family) {
      case Family::Constant:
        return scale;
      case Family::Exp:
        return scale * std::exp(rate * r);
      case Family::CoshPower:
        return scale * std::pow(std::cosh(r - offset), rate);
      case Family::Linear:
        return scale + rate * r;
      case Family::Sampled: {
        if (values.size() < 2) throw ValidationError("sampled weight needs at least 2 values");
        const double s = std::clamp(r / length, 0.0, 1.0) * (values.size() - 1);
        const std::size_t k = std::min(static_cast<std::size_t>(s), values.size() - 2);
        const double t = s - k;
        return (1 - t) * values[k] + t * values[k + 1];
      }
    }
    return 0.0;
  }

  bool operator==(const WeightSpec&) const = default;
};

enum class NodeRole { Free, Transition, Dirichlet };

struct NodeSpec {
  std::string name;
  NodeRole role = NodeRole::Free;
  int port = -1;  // transitions only
};

struct SegmentSpec {
  std::string name;
  std::string from;
  std::string to;
  std::optional<double> length;
  std::optional<WeightSpec> weight;
};

/// Cell description: a metric graph of weighted segments. Segments listed in
/// one symmetry group are built from the group's first member.
struct CellSpec {
  double mesh_step = 0.01;
  std::vector<NodeSpec> nodes;
  std::vector<SegmentSpec> segments;
  std::vector<std::vector<std::string>> symmetry;

  struct Escape {
    double length = 1.0;
    WeightSpec weight = WeightSpec::constant(1.0);
    bool dirichlet = true;
  };

  /// v legs from transition nodes t0..t{v-1} (weights measured from the
  /// transition) to a centre c, plus an optional escape leg from c.
  static CellSpec star(int legs, double leg_length, WeightSpec leg_weight, double mesh_step,
                       std::optional<Escape> escape = std::nullopt) {
    if (legs < 1) throw ValidationError("a star cell needs at least one leg");
    CellSpec s;
    s.mesh_step = mesh_step;
    s.nodes.push_back({"c", NodeRole::Free, -1});
    std::vector<std::string> group;
    for (int i = 0; i < legs; ++i) {
      const std::string t = "t" + std::to_string(i);
      s.nodes.push_back({t, NodeRole::Transition, i});
      const std::string name = "leg" + std::to_string(i);
      if (i == 0)
        s.segments.push_back({name, t, "c", leg_length, leg_weight});
      else
        s.segments.push_back({name, t, "c", std::nullopt, std::nullopt});
      group.push_back(name);
    }
    s.symmetry.push_back(group);
    if (escape) {
      s.nodes.push_back({"e", escape->dirichlet ? NodeRole::Dirichlet : NodeRole::Free, -1});
      s.segments.push_back({"escape", "c", "e", escape->length, escape->weight});
    }
    return s;
  }

  /// Single segment [0, length] with the given end roles. Transitions get
  /// ports in left-to-right order.
  static CellSpec interval(double length, WeightSpec weight, double mesh_step, NodeRole left, NodeRole right) {
    CellSpec s;
    s.mesh_step = mesh_step;
    int port = 0;
    s.nodes.push_back({"left", left, left == NodeRole::Transition ? port++ : -1});
    s.nodes.push_back({"right", right, right == NodeRole::Transition ? port++ : -1});
    s.segments.push_back({"body", "left", "right", length, weight});
    return s;
  }
};

struct MeshSegment {
  std::string name;
  int from = -1;  // spec node indices
  int to = -1;
  double length = 0.0;
  WeightSpec weight;
  std::vector<int> mesh_nodes;     // from -> to
  std::vector<double> positions;  // distance from `from`
  std::vector<double> weights;     // w at each mesh node
};

struct MeshElement {
  int a;
  int b;
  double length;
  double wa;
  double wb;
};

/// P1 finite-element mesh of a cell. Stiffness per element is mean(w)/length,
/// mass is lumped: length*w_a/2 and length*w_b/2.
class CellMesh {
 public:
  int node_count() const noexcept { return node_count_; }
  int valence() const noexcept { return static_cast<int>(transitions_.size()); }
  double mesh_step() const noexcept { return h_; }
  const std::vector<MeshElement>& elements() const noexcept { return elements_; }
  const std::vector<MeshSegment>& segments() const noexcept { return segments_; }
  const std::vector<NodeSpec>& spec_nodes() const noexcept { return spec_nodes_; }
  const std::vector<std::vector<int>>& symmetry() const noexcept { return symmetry_; }
  int transition_node(int port) const { return transitions_.at(static_cast<std::size_t>(port)); }
  const std::vector<int>& transition_nodes() const noexcept { return transitions_; }
  bool is_dirichlet(int node) const { return dirichlet_.at(static_cast<std::size_t>(node)) != 0; }
  bool has_dirichlet() const { return std::any_of(dirichlet_.begin(), dirichlet_.end(), [](char c) { return c != 0; }); }
  int spec_node_mesh_index(int spec_node) const { return spec_mesh_.at(static_cast<std::size_t>(spec_node)); }

  /// Full stiffness and lumped mass over every mesh node (Dirichlet nodes included).
  SparseOperator local_operator() const {
    std::vector<Triplet> k;
    std::vector<double> m(static_cast<std::size_t>(node_count_), 0.0);
    for (const auto& e : elements_) {
      const double c = 0.5 * (e.wa + e.wb) / e.length;
      k.push_back({e.a, e.a, c});
      k.push_back({e.b, e.b, c});
      k.push_back({e.a, e.b, -c});
      k.push_back({e.b, e.a, -c});
      m[e.a] += 0.5 * e.length * e.wa;
      m[e.b] += 0.5 * e.length * e.wb;
    }
    return {CsrMatrix::from_triplets(node_count_, k), CsrMatrix::diagonal(m)};
  }

  double volume() const {
    double v = 0.0;
    for (const auto& e : elements_) v += 0.5 * e.length * (e.wa + e.wb);
    return v;
  }

 private:
  friend CellMesh build_cell(const CellSpec& spec);
  int node_count_ = 0;
  double h_ = 0.0;
  std::vector<MeshElement> elements_;
  std::vector<MeshSegment> segments_;
  std::vector<NodeSpec> spec_nodes_;
  std::vector<int> spec_mesh_;
  std::vector<int> transitions_;
  std::vector<char> dirichlet_;
  std::vector<std::vector<int>> symmetry_;
};

inline CellMesh build_cell(const CellSpec& spec) {
  if (!(spec.mesh_step > 0.0)) throw ValidationError("mesh step must be positive");
  if (spec.nodes.empty() || spec.segments.empty()) throw ValidationError("cell needs nodes and segments");
  CellMesh c;
  c.h_ = spec.mesh_step;
  c.spec_nodes_ = spec.nodes;
  std::map<std::string, int> node_index;
  for (std::size_t i = 0; i < spec.nodes.size(); ++i)
    if (!node_index.emplace(spec.nodes[i].name, static_cast<int>(i)).second)
      throw ValidationError("duplicate node name '" + spec.nodes[i].name + "'");
  std::map<std::string, int> seg_index;
  for (std::size_t i = 0; i < spec.segments.size(); ++i)
    if (!seg_index.emplace(spec.segments[i].name, static_cast<int>(i)).second)
      throw ValidationError("duplicate segment name '" + spec.segments[i].name + "'");

  // resolve symmetry: members inherit the first member's length and weight
  std::vector<SegmentSpec> segs = spec.segments;
  for (const auto& group : spec.symmetry) {
    if (group.empty()) continue;
    std::vector<int> ids;
    for (const auto& name : group) {
      auto it = seg_index.find(name);
      if (it == seg_index.end()) throw ValidationError("symmetry names unknown segment '" + name + "'");
      ids.push_back(it->second);
    }
    const auto& proto = segs[ids[0]];
    if (!proto.length || !proto.weight) throw ValidationError("symmetry prototype '" + proto.name + "' needs length and weight");
    for (std::size_t k = 1; k < ids.size(); ++k) {
      auto& s = segs[ids[k]];
      if ((s.length && *s.length != *proto.length) || (s.weight && !(*s.weight == *proto.weight)))
        throw ValidationError("segment '" + s.name + "' conflicts with its symmetry prototype");
      s.length = proto.length;
      s.weight = proto.weight;
    }
    c.symmetry_.push_back(ids);
  }

  // spec nodes first, then interior mesh nodes segment by segment
  c.node_count_ = static_cast<int>(spec.nodes.size());
  c.spec_mesh_.resize(spec.nodes.size());
  std::iota(c.spec_mesh_.begin(), c.spec_mesh_.end(), 0);
  std::vector<int> seg_degree(spec.nodes.size(), 0);
  for (const auto& s : segs) {
    auto fi = node_index.find(s.from), ti = node_index.find(s.to);
    if (fi == node_index.end() || ti == node_index.end()) throw ValidationError("segment '" + s.name + "' names an unknown node");
    if (fi->second == ti->second) throw ValidationError("segment '" + s.name + "' is a loop");
    if (!s.length || !(*s.length > 0.0)) throw ValidationError("segment '" + s.name + "' needs a positive length");
    if (!s.weight) throw ValidationError("segment '" + s.name + "' needs a weight");
    ++seg_degree[fi->second];
    ++seg_degree[ti->second];
    MeshSegment ms;
    ms.name = s.name;
    ms.from = fi->second;
    ms.to = ti->second;
    ms.length = *s.length;
    ms.weight = *s.weight;
    const int m = std::max(1, static_cast<int>(std::lround(ms.length / spec.mesh_step)));
    const double ell = ms.length / m;
    for (int k = 0; k <= m; ++k) {
      int node;
      if (k == 0)
        node = ms.from;
      else if (k == m)
        node = ms.to;
      else
        node = c.node_count_++;
      const double r = k == m ? ms.length : k * ell;
      const double w = ms.weight(r, ms.length);
      if (!(w > 0.0) || !std::isfinite(w)) throw ValidationError("segment '" + s.name + "' has a nonpositive weight");
      ms.mesh_nodes.push_back(node);
      ms.positions.push_back(r);
      ms.weights.push_back(w);
    }
    for (int k = 0; k < m; ++k)
      c.elements_.push_back({ms.mesh_nodes[k], ms.mesh_nodes[k + 1], ell, ms.weights[k], ms.weights[k + 1]});
    c.segments_.push_back(std::move(ms));
  }

  // roles
  c.dirichlet_.assign(static_cast<std::size_t>(c.node_count_), 0);
  std::map<int, int> ports;
  for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
    const auto& n = spec.nodes[i];
    if (n.role == NodeRole::Dirichlet) c.dirichlet_[i] = 1;
    if (n.role == NodeRole::Transition) {
      if (seg_degree[i] != 1) throw ValidationError("transition node '" + n.name + "' must end exactly one segment");
      if (!ports.emplace(n.port, static_cast<int>(i)).second) throw ValidationError("duplicate transition port");
    }
  }
  for (std::size_t i = 0; i < ports.size(); ++i)
    if (!ports.count(static_cast<int>(i))) throw ValidationError("transition ports must be 0..v-1");
  for (const auto& [p, node] : ports) c.transitions_.push_back(node);

  // connectivity
  std::vector<int> parent(static_cast<std::size_t>(c.node_count_));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : c.elements_) parent[find(e.a)] = find(e.b);
  for (int i = 0; i < c.node_count_; ++i)
    if (find(i) != find(0)) throw ValidationError("cell is not connected");
  return c;
}

/// Same as build_cell but insists on a Dirichlet end, which makes
/// lambda0(C) > 0 with a positive first eigenfunction.
inline CellMesh cell_with_positive_lambda0(const CellSpec& spec) {
  bool dir = false;
  for (const auto& n : spec.nodes) dir = dir || n.role == NodeRole::Dirichlet;
  if (!dir) throw ValidationError("cell needs an escape leg with a Dirichlet end");
  return build_cell(spec);
}

// ---------------------------------------------------------------- spectrum

struct FreeOperator {
  SparseOperator op;
  std::vector<int> node_of;  // row -> mesh node
  std::vector<int> row_of;   // mesh node -> row or -1
};

inline FreeOperator free_operator(const CellMesh& c) {
  const auto full = c.local_operator();
  FreeOperator f;
  f.row_of.assign(static_cast<std::size_t>(c.node_count()), -1);
  for (int i = 0; i < c.node_count(); ++i)
    if (!c.is_dirichlet(i)) {
      f.row_of[i] = static_cast<int>(f.node_of.size());
      f.node_of.push_back(i);
    }
  const int n = static_cast<int>(f.node_of.size());
  std::vector<Triplet> kt, mt;
  for (const auto& t : full.stiffness.triplets())
    if (f.row_of[t.row] >= 0 && f.row_of[t.col] >= 0) kt.push_back({f.row_of[t.row], f.row_of[t.col], t.value});
  for (const auto& t : full.mass.triplets())
    if (f.row_of[t.row] >= 0) mt.push_back({f.row_of[t.row], f.row_of[t.col], t.value});
  f.op = {CsrMatrix::from_triplets(n, kt), CsrMatrix::from_triplets(n, mt)};
  return f;
}

struct CellSpectrum {
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  double eta = 0.0;
  std::vector<double> phi0;  // per mesh node, 0 on Dirichlet nodes, unit mass norm, positive
  std::vector<double> phi1;
  std::vector<double> phi0_at_transitions;
  std::vector<double> values;  // all computed eigenvalues
  bool usable_gap = false;
  double max_residual = 0.0;
};

/// Smallest k >= 2 eigenpairs of the cell with natural conditions at free
/// ends and junctions, Dirichlet at Dirichlet nodes.
inline CellSpectrum neumann_spectrum(const CellMesh& c, int k = 2, double tol = 1e-9) {
  if (k < 2) throw ValidationError("need at least two eigenpairs for the gap");
  const auto f = free_operator(c);
  EigenOptions opt;
  opt.count = k;
  opt.tol = tol;
  const auto r = smallest_eigenpairs(f.op, opt);
  if (!r.converged) throw SolverError("cell eigensolver did not converge", r.max_residual);
  CellSpectrum s;
  s.lambda0 = r.pairs[0].value;
  s.lambda1 = r.pairs[1].value;
  s.eta = s.lambda1 - s.lambda0;
  for (const auto& p : r.pairs) s.values.push_back(p.value);
  s.max_residual = r.max_residual;
  s.usable_gap = s.eta > std::max(tol, 1e-8) * std::max(1.0, s.lambda1);
  auto expand = [&](const std::vector<double>& v) {
    std::vector<double> out(static_cast<std::size_t>(c.node_count()), 0.0);
    for (std::size_t i = 0; i < f.node_of.size(); ++i) out[f.node_of[i]] = v[i];
    return out;
  };
  s.phi0 = expand(r.pairs[0].vector);
  s.phi1 = expand(r.pairs[1].vector);
  if (std::accumulate(s.phi0.begin(), s.phi0.end(), 0.0) < 0.0)
    for (auto& x : s.phi0) x = -x;
  for (int node : f.node_of)
    if (!(s.phi0[node] > 0.0)) throw InvariantViolation("first eigenfunction changes sign");
  for (int node : c.transition_nodes()) s.phi0_at_transitions.push_back(s.phi0[node]);
  return s;
}

struct RecollementReport {
  bool ok = true;
  struct Pair {
    int port_a;
    int port_b;
    double deviation;
  };
  std::vector<Pair> pairs;
  double max_deviation = 0.0;
};

/// phi0 must agree at every pair of transitions the gluing may identify
/// (all pairs by default).
inline RecollementReport check_recollement(const CellMesh& c, const CellSpectrum& s, double tol,
                                           std::vector<std::pair<int, int>> identified = {}) {
  if (identified.empty())
    for (int a = 0; a < c.valence(); ++a)
      for (int b = a + 1; b < c.valence(); ++b) identified.push_back({a, b});
  RecollementReport rep;
  for (auto [a, b] : identified) {
    const double d = std::abs(s.phi0[c.transition_node(a)] - s.phi0[c.transition_node(b)]);
    rep.pairs.push_back({a, b, d});
    rep.max_deviation = std::max(rep.max_deviation, d);
    if (d > tol) rep.ok = false;
  }
  return rep;
}

// ------------------------------------------------------------- transitions

struct TransitionTube {
  TubeProfile profile;
  double vol_tube_plus = 0.0;  // integral of w over the leg up to R
  double phi0 = 0.0;           // phi0 at the transition node
};

/// The tube of a transition at 1-D fidelity: a single cross-section sample
/// with Vol(alpha) = w(0), theta^{n-1}(r) = w(r)/w(0) along the leg.
inline TransitionTube transition_tube(const CellMesh& c, const CellSpectrum& s, int port, int n = 2,
                                      std::optional<double> R = std::nullopt) {
  const int node = c.transition_node(port);
  const MeshSegment* seg = nullptr;
  for (const auto& sg : c.segments())
    if (sg.mesh_nodes.front() == node || sg.mesh_nodes.back() == node) seg = &sg;
  if (seg == nullptr) throw ValidationError("transition has no leg");
  std::vector<double> pos, w;
  if (seg->mesh_nodes.front() == node) {
    pos = seg->positions;
    w = seg->weights;
  } else {
    for (std::size_t k = seg->positions.size(); k-- > 0;) {
      pos.push_back(seg->length - seg->positions[k]);
      w.push_back(seg->weights[k]);
    }
  }
  const double width = R.value_or(seg->length);
  if (!(width > 0.0) || width > seg->length * (1 + 1e-12)) throw ValidationError("tube width exceeds the transition leg");
  std::size_t nr = 0;
  while (nr < pos.size() && pos[nr] <= width * (1 + 1e-12)) ++nr;
  if (nr < 2) throw ValidationError("tube width below one mesh step");
  std::vector<double> theta(nr);
  double vol = 0.0;
  for (std::size_t j = 0; j < nr; ++j) {
    theta[j] = std::pow(w[j] / w[0], 1.0 / (n - 1));
    if (j > 0) vol += 0.5 * (pos[j] - pos[j - 1]) * (w[j] + w[j - 1]);
  }
  theta[0] = 1.0;
  TransitionTube t{TubeProfile::create(n, pos[nr - 1], w[0], 1, static_cast<int>(nr), theta), vol,
                   s.phi0.at(static_cast<std::size_t>(node))};
  return t;
}

// -------------------------------------------------------------------- JSON

inline WeightSpec weight_from_json(const nlohmann::json& j) {
  if (j.is_number()) return WeightSpec::constant(j.get<double>());
  const std::string fam = j.value("family", "constant");
  if (fam == "constant") return WeightSpec::constant(j.value("value", 1.0));
  if (fam == "exp") return WeightSpec::exp(j.value("rate", 0.0), j.value("scale", 1.0));
  if (fam == "cosh_power") return WeightSpec::cosh_power(j.value("power", 1.0), j.value("offset", 0.0), j.value("scale", 1.0));
  if (fam == "linear") return WeightSpec::linear(j.value("a", 1.0), j.value("b", 0.0));
  if (fam == "sampled") return WeightSpec::sampled(j.at("values").get<std::vector<double>>());
  throw ValidationError("unknown weight family '" + fam + "'");
}

inline nlohmann::json weight_to_json(const WeightSpec& w) {
  switch (w.family) {
    case WeightSpec::Family::Constant:
      return {{"family", "constant"}, {"value", w.scale}};
    case WeightSpec::Family::Exp:
      return {{"family", "exp"}, {"rate", w.rate}, {"scale", w.scale}};
    case WeightSpec::Family::CoshPower:
      return {{"family", "cosh_power"}, {"power", w.rate}, {"offset", w.offset}, {"scale", w.scale}};
    case WeightSpec::Family::Linear:
      return {{"family", "linear"}, {"a", w.scale}, {"b", w.rate}};
    case WeightSpec::Family::Sampled:
      return {{"family", "sampled"}, {"values", w.values}};
  }
  return {};
}

inline NodeRole role_from_string(const std::string& s) {
  if (s == "free" || s == "neumann") return NodeRole::Free;
  if (s == "transition") return NodeRole::Transition;
  if (s == "dirichlet") return NodeRole::Dirichlet;
  throw ValidationError("unknown node role '" + s + "'");
}

/// Cell spec from a config table. `type` is "star", "interval" or "graph".
inline CellSpec cell_spec_from_json(const nlohmann::json& j) {
  try {
    const std::string type = j.value("type", "graph");
    const double h = j.value("mesh_step", 0.01);
    if (type == "star") {
      std::optional<CellSpec::Escape> esc;
      if (j.contains("escape")) {
        const auto& e = j.at("escape");
        esc = CellSpec::Escape{e.value("length", 1.0),
                               e.contains("weight") ? weight_from_json(e.at("weight")) : WeightSpec::constant(1.0),
                               e.value("dirichlet", true)};
      }
      return CellSpec::star(j.at("legs").get<int>(), j.at("leg_length").get<double>(),
                            j.contains("leg_weight") ? weight_from_json(j.at("leg_weight")) : WeightSpec::constant(1.0),
                            h, esc);
    }
    if (type == "interval") {
      return CellSpec::interval(j.at("length").get<double>(),
                                j.contains("weight") ? weight_from_json(j.at("weight")) : WeightSpec::constant(1.0), h,
                                role_from_string(j.value("left", "transition")),
                                role_from_string(j.value("right", "transition")));
    }
    if (type != "graph") throw ValidationError("unknown cell type '" + type + "'");
    CellSpec s;
    s.mesh_step = h;
    for (const auto& n : j.at("nodes"))
      s.nodes.push_back({n.at("name").get<std::string>(), role_from_string(n.value("role", "free")), n.value("port", -1)});
    for (const auto& g : j.at("segments")) {
      SegmentSpec seg{g.at("name").get<std::string>(), g.at("from").get<std::string>(), g.at("to").get<std::string>(),
                      std::nullopt, std::nullopt};
      if (g.contains("length")) seg.length = g.at("length").get<double>();
      if (g.contains("weight")) seg.weight = weight_from_json(g.at("weight"));
      s.segments.push_back(seg);
    }
    if (j.contains("symmetry"))
      for (const auto& grp : j.at("symmetry")) s.symmetry.push_back(grp.get<std::vector<std::string>>());
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("cell spec: ") + e.what());
  }
}

inline nlohmann::json spectrum_to_json(const CellMesh& c, const CellSpectrum& s) {
  return {{"lambda0", s.lambda0},         {"lambda1", s.lambda1},         {"eta", s.eta},
          {"eigenvalues", s.values},      {"usable_gap", s.usable_gap},   {"max_residual", s.max_residual},
          {"phi0_at_transitions", s.phi0_at_transitions}, {"volume", c.volume()}, {"nodes", c.node_count()},
          {"valence", c.valence()}};
}

}  // namespace gperiodic

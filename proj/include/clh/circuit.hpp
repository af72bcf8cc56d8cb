#pragma once

// Depth-2 state preparation read off a finished isolation run.
//
// Every qudit q is split into slots: the factor-0 spaces handed to isolated
// terms, in step order, followed by whatever is left at the end.  Layer 2
// prepares an eigenstate of each kept piece on its slots; layer 1 maps the
// slots of each qudit back into H_q with the adjoint of the composed
// isometry chain.

#include <clh/isolation.hpp>

#include <vector>

namespace clh {

struct Slot {
  QuditId qudit = 0;
  int index = 0;  // position in the qudit's slot list
  bool operator==(const Slot&) const = default;
};

/// Single-qudit gate: `map` is (slot space) x d_q with map * map^dagger = I.
struct QuditGate {
  QuditId qudit = 0;
  std::vector<int> slot_dims;
  Mat map;
};

/// Unitary on a group of slots; column 0 is the prepared eigenstate.
struct ComponentGate {
  TermId term = 0;
  bool isolated = false;  // from an isolated term, else a final remaining term
  std::vector<Slot> slots;
  std::vector<int> dims;
  Mat unitary;
  double energy = 0.0;  // eigenvalue of the prepared column
};

struct DepthTwoCircuit {
  std::vector<QuditGate> layer1;
  std::vector<ComponentGate> layer2;

  static constexpr int depth() { return 2; }

  bool layer2_disjoint() const {
    std::vector<Slot> seen;
    for (const auto& g : layer2)
      for (const auto& s : g.slots) {
        if (std::find(seen.begin(), seen.end(), s) != seen.end()) return false;
        seen.push_back(s);
      }
    return true;
  }
};

namespace detail {

// Unitary whose first column is the eigenvector of index `level` (ascending).
inline std::pair<Mat, double> eigen_gate(const Mat& h, int level) {
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  const auto n = h.rows();
  if (level < 0 || level >= n) throw Error("eigen_gate: level " + std::to_string(level) + " out of range");
  Mat u(n, n);
  u.col(0) = es.eigenvectors().col(level);
  Eigen::Index c = 1;
  for (Eigen::Index j = 0; j < n; ++j)
    if (j != level) u.col(c++) = es.eigenvectors().col(j);
  return {u, es.eigenvalues()(level)};
}

}  // namespace detail

/// `levels` optionally selects an eigenvector per layer-2 gate (default: ground).
inline DepthTwoCircuit build_circuit(const IsolationState& st, const std::map<TermId, int>& levels = {}) {
  DepthTwoCircuit c;
  const auto& dims0 = st.original_dims();
  for (std::size_t q = 0; q < dims0.size(); ++q) {
    const auto& chain = st.chains()[q];
    QuditGate g;
    g.qudit = static_cast<QuditId>(q);
    Mat u = Mat::Identity(dims0[q], dims0[q]);
    int prefix = 1;
    for (std::size_t s = 0; s < chain.isometries.size(); ++s) {
      u = kron(Mat::Identity(prefix, prefix), chain.isometries[s]) * u;
      prefix *= chain.slot_dims[s];
      g.slot_dims.push_back(chain.slot_dims[s]);
    }
    g.slot_dims.push_back(st.system().dims[q]);
    g.map = std::move(u);
    c.layer1.push_back(std::move(g));
  }
  auto level_of = [&](TermId id) {
    auto it = levels.find(id);
    return it == levels.end() ? 0 : it->second;
  };
  for (const auto& gt : st.good()) {
    ComponentGate g;
    g.term = gt.id;
    g.isolated = true;
    for (std::size_t i = 0; i < gt.qudits.size(); ++i) g.slots.push_back({gt.qudits[i], gt.slots[i]});
    g.dims = gt.dims;
    std::tie(g.unitary, g.energy) = detail::eigen_gate(gt.matrix, level_of(gt.id));
    c.layer2.push_back(std::move(g));
  }
  for (const auto& [id, t] : st.system().terms) {
    ComponentGate g;
    g.term = id;
    for (QuditId q : t.support)
      g.slots.push_back({q, static_cast<int>(st.chains()[static_cast<std::size_t>(q)].slot_dims.size())});
    g.dims = st.system().dims_of(t.support);
    std::tie(g.unitary, g.energy) = detail::eigen_gate(t.matrix, level_of(id));
    c.layer2.push_back(std::move(g));
  }
  return c;
}

/// Explicit state: layer 2 on |0...0> over all slots, then layer 1 per qudit.
inline StateVector apply_circuit(const DepthTwoCircuit& c, const CLHInstance& inst, std::size_t budget = std::size_t{1} << 14) {
  if (inst.total_dimension() > budget)
    throw BudgetExceeded("apply_circuit: dimension " + std::to_string(inst.total_dimension()) + " exceeds budget");
  if (c.layer1.size() != inst.qudits.size()) throw Error("apply_circuit: circuit has the wrong number of qudits");

  // Slot sites, qudit-major.
  std::vector<int> site_dims;
  std::vector<int> first_site;
  for (const auto& g : c.layer1) {
    first_site.push_back(static_cast<int>(site_dims.size()));
    site_dims.insert(site_dims.end(), g.slot_dims.begin(), g.slot_dims.end());
  }
  Vec psi = Vec::Zero(static_cast<Eigen::Index>(dim_product(site_dims)));
  psi(0) = 1.0;

  for (const auto& g : c.layer2) {
    std::vector<int> sites;
    for (const auto& s : g.slots) sites.push_back(first_site[static_cast<std::size_t>(s.qudit)] + s.index);
    Vec y = Vec::Zero(psi.size());
    apply_local(psi, y, site_dims, sites, g.unitary);
    psi = std::move(y);
  }

  // Merge each qudit's slots into one site, then map it back into H_q.
  std::vector<int> merged;
  for (const auto& g : c.layer1) merged.push_back(static_cast<int>(dim_product(g.slot_dims)));
  for (std::size_t q = 0; q < c.layer1.size(); ++q) {
    psi = apply_site_map(psi, merged, q, c.layer1[q].map.adjoint());
    merged[q] = static_cast<int>(c.layer1[q].map.cols());
  }
  return StateVector{psi};
}

}  // namespace clh

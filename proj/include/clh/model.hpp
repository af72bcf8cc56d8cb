#pragma once

// Commuting k-local projection Hamiltonians on qudits of mixed dimension.

#include <clh/linalg.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace clh {

using QuditId = int;
using TermId = int;

class StructuralError : public Error {
 public:
  using Error::Error;
};

struct QuditInfo {
  QuditId id = 0;
  int dim = 2;
};

/// A local term; `matrix` is row-major over the tensor basis in `support` order.
struct LocalTerm {
  TermId id = 0;
  std::vector<QuditId> support;
  Mat matrix;
};

struct CLHInstance {
  std::vector<QuditInfo> qudits;
  std::vector<LocalTerm> terms;
  /// Declared locality bound, if any; otherwise the largest support size.
  std::optional<int> declared_k;

  int n() const { return static_cast<int>(qudits.size()); }
  int m() const { return static_cast<int>(terms.size()); }

  int k() const {
    if (declared_k) return *declared_k;
    std::size_t k = 0;
    for (const auto& t : terms) k = std::max(k, t.support.size());
    return static_cast<int>(k);
  }

  /// The bound's d: the largest local dimension.
  int d() const {
    int d = 0;
    for (const auto& q : qudits) d = std::max(d, q.dim);
    return d;
  }

  std::vector<int> dims() const {
    std::vector<int> out;
    for (const auto& q : qudits) out.push_back(q.dim);
    return out;
  }

  std::vector<int> dims_of(const std::vector<QuditId>& support) const {
    std::vector<int> out;
    for (QuditId q : support) out.push_back(qudits.at(static_cast<std::size_t>(q)).dim);
    return out;
  }

  std::size_t total_dimension() const { return dim_product(dims()); }

  const LocalTerm& term(TermId id) const {
    for (const auto& t : terms)
      if (t.id == id) return t;
    throw StructuralError("no term with id " + std::to_string(id));
  }
};

struct StateVector {
  Vec amplitudes;
};

struct CommutatorViolation {
  TermId a = 0;
  TermId b = 0;
  double norm = 0.0;
};

struct TrivialFactor {
  TermId term = 0;
  QuditId qudit = 0;
};

struct ValidationReport {
  bool commuting = true;
  bool projective = true;
  bool locality_ok = true;
  std::vector<CommutatorViolation> offending_pairs;
  std::vector<TrivialFactor> trivial_factors;
  std::vector<TermId> non_projective_terms;

  bool accepted() const { return commuting && projective && locality_ok && trivial_factors.empty(); }
};

namespace detail {
inline bool sorted_unique(const std::vector<QuditId>& s) {
  return std::adjacent_find(s.begin(), s.end(), std::greater_equal<>()) == s.end();
}
inline bool supports_overlap(const std::vector<QuditId>& a, const std::vector<QuditId>& b) {
  for (QuditId q : a)
    if (std::find(b.begin(), b.end(), q) != b.end()) return true;
  return false;
}
// Copy of `t` with its support sorted ascending and the matrix permuted to match.
inline LocalTerm sorted_term(const CLHInstance& inst, const LocalTerm& t) {
  if (sorted_unique(t.support)) return t;
  std::vector<int> order(t.support.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return t.support[static_cast<std::size_t>(x)] < t.support[static_cast<std::size_t>(y)]; });
  LocalTerm out = t;
  out.matrix = permute_sites(t.matrix, inst.dims_of(t.support), order);
  for (std::size_t i = 0; i < order.size(); ++i) out.support[i] = t.support[static_cast<std::size_t>(order[i])];
  return out;
}
}  // namespace detail

/// True iff `term` equals identity-on-`qudit` tensored with an operator on the rest.
inline bool detect_trivial_factor(const LocalTerm& term, std::span<const int> support_dims, QuditId qudit) {
  auto it = std::find(term.support.begin(), term.support.end(), qudit);
  if (it == term.support.end()) throw StructuralError("qudit " + std::to_string(qudit) + " not in support of term " + std::to_string(term.id));
  const auto pos = static_cast<std::size_t>(it - term.support.begin());
  return trivial_residual(term.matrix, support_dims, pos) <= tol::kTrivial;
}

inline bool detect_trivial_factor(const CLHInstance& inst, const LocalTerm& term, QuditId qudit) {
  const auto dims = inst.dims_of(term.support);
  return detect_trivial_factor(term, dims, qudit);
}

/// Checks ids, dimensions and matrix shapes; throws StructuralError naming the offender.
inline void check_structure(const CLHInstance& inst) {
  for (std::size_t i = 0; i < inst.qudits.size(); ++i) {
    if (inst.qudits[i].id != static_cast<QuditId>(i))
      throw StructuralError("qudit ids must be contiguous from 0 (position " + std::to_string(i) + ")");
    if (inst.qudits[i].dim < 2) throw StructuralError("qudit " + std::to_string(i) + " has dimension < 2");
  }
  std::set<TermId> ids;
  for (const auto& t : inst.terms) {
    const std::string name = "term " + std::to_string(t.id);
    if (!ids.insert(t.id).second) throw StructuralError(name + ": duplicate id");
    std::set<QuditId> seen;
    for (QuditId q : t.support) {
      if (q < 0 || q >= inst.n()) throw StructuralError(name + ": support references unknown qudit " + std::to_string(q));
      if (!seen.insert(q).second) throw StructuralError(name + ": repeated qudit " + std::to_string(q));
    }
    const auto side = static_cast<Eigen::Index>(dim_product(inst.dims_of(t.support)));
    if (t.matrix.rows() != side || t.matrix.cols() != side)
      throw StructuralError(name + ": matrix is " + std::to_string(t.matrix.rows()) + "x" +
                            std::to_string(t.matrix.cols()) + ", expected side " + std::to_string(side));
  }
}

/// Sorts each support ascending (re-permuting the matrix), drops identity
/// factors, and orders terms by id.  Returns the dropped (term, qudit) pairs.
inline std::vector<TrivialFactor> canonicalize(CLHInstance& inst) {
  check_structure(inst);
  std::vector<TrivialFactor> pruned;
  for (auto& t : inst.terms) {
    t = detail::sorted_term(inst, t);

    for (std::size_t pos = 0; pos < t.support.size();) {
      auto d = inst.dims_of(t.support);
      if (trivial_residual(t.matrix, d, pos) <= tol::kTrivial) {
        pruned.push_back({t.id, t.support[pos]});
        t.matrix = partial_trace_site(t.matrix, d, pos) / static_cast<double>(d[pos]);
        t.support.erase(t.support.begin() + static_cast<std::ptrdiff_t>(pos));
      } else {
        ++pos;
      }
    }
  }
  std::sort(inst.terms.begin(), inst.terms.end(), [](const LocalTerm& a, const LocalTerm& b) { return a.id < b.id; });
  return pruned;
}

inline double commutator_norm(const CLHInstance& inst, const LocalTerm& a, const LocalTerm& b) {
  std::vector<int> joint;
  std::set_union(a.support.begin(), a.support.end(), b.support.begin(), b.support.end(), std::back_inserter(joint));
  const auto jd = inst.dims_of(joint);
  const Mat ea = embed_operator(a.matrix, a.support, inst.dims_of(a.support), joint, jd);
  const Mat eb = embed_operator(b.matrix, b.support, inst.dims_of(b.support), joint, jd);
  return (ea * eb - eb * ea).norm();
}


inline ValidationReport validate_instance(const CLHInstance& inst) {
  check_structure(inst);
  ValidationReport rep;
  for (const auto& t : inst.terms) {
    const auto dims = inst.dims_of(t.support);
    const double side = static_cast<double>(t.matrix.rows());
    const double herm = (t.matrix - t.matrix.adjoint()).norm();
    const double proj = (t.matrix * t.matrix - t.matrix).norm();
    if (herm > tol::kBase * side || proj > tol::kBase * side) {
      rep.projective = false;
      rep.non_projective_terms.push_back(t.id);
    }
    if (inst.declared_k && static_cast<int>(t.support.size()) > *inst.declared_k) rep.locality_ok = false;
    for (std::size_t p = 0; p < t.support.size(); ++p)
      if (trivial_residual(t.matrix, dims, p) <= tol::kTrivial) rep.trivial_factors.push_back({t.id, t.support[p]});
  }
  std::vector<LocalTerm> sorted;
  for (const auto& t : inst.terms) sorted.push_back(detail::sorted_term(inst, t));
  for (std::size_t i = 0; i < sorted.size(); ++i)
    for (std::size_t j = i + 1; j < sorted.size(); ++j) {
      const auto& a = sorted[i];
      const auto& b = sorted[j];
      if (!detail::supports_overlap(a.support, b.support)) continue;
      std::vector<int> joint;
      std::set_union(a.support.begin(), a.support.end(), b.support.begin(), b.support.end(), std::back_inserter(joint));
      const double c = commutator_norm(inst, a, b);
      if (c > tol::kBase * static_cast<double>(dim_product(inst.dims_of(joint)))) {
        rep.commuting = false;
        rep.offending_pairs.push_back({a.id, b.id, c});
      }
    }
  return rep;
}

inline double energy_of_state(const CLHInstance& inst, const StateVector& psi) {
  const auto dims = inst.dims();
  if (static_cast<std::size_t>(psi.amplitudes.size()) != dim_product(dims))
    throw StructuralError("state dimension " + std::to_string(psi.amplitudes.size()) + " does not match instance dimension " +
                          std::to_string(dim_product(dims)));
  double e = 0.0;
  Vec y(psi.amplitudes.size());
  for (const auto& t : inst.terms) {
    y.setZero();
    apply_local(psi.amplitudes, y, dims, t.support, t.matrix);
    e += psi.amplitudes.dot(y).real();
  }
  return e;
}

/// The working Hamiltonian during isolation: qudits keep their ids, their
/// dimensions shrink (0 = gone), and terms act on current dimensions.
struct ReducedSystem {
  std::vector<int> dims;
  std::map<TermId, LocalTerm> terms;

  static ReducedSystem from_instance(const CLHInstance& inst) {
    ReducedSystem s;
    s.dims = inst.dims();
    for (const auto& t : inst.terms) s.terms.emplace(t.id, t);
    return s;
  }

  std::vector<int> dims_of(const std::vector<QuditId>& support) const {
    std::vector<int> out;
    for (QuditId q : support) out.push_back(dims.at(static_cast<std::size_t>(q)));
    return out;
  }

  std::vector<TermId> terms_on(QuditId q) const {
    std::vector<TermId> out;
    for (const auto& [id, t] : terms)
      if (std::find(t.support.begin(), t.support.end(), q) != t.support.end()) out.push_back(id);
    return out;
  }

  /// Compact instance over the qudits touched by `ids` (relabelled 0..), for oracles.
  CLHInstance subinstance(const std::vector<TermId>& ids) const {
    std::set<QuditId> touched;
    for (TermId id : ids)
      for (QuditId q : terms.at(id).support) touched.insert(q);
    std::map<QuditId, QuditId> relabel;
    CLHInstance inst;
    for (QuditId q : touched) {
      relabel[q] = static_cast<QuditId>(inst.qudits.size());
      inst.qudits.push_back({relabel[q], dims.at(static_cast<std::size_t>(q))});
    }
    for (TermId id : ids) {
      LocalTerm t = terms.at(id);
      for (auto& q : t.support) q = relabel.at(q);
      inst.terms.push_back(std::move(t));
    }
    return inst;
  }
};

}  // namespace clh

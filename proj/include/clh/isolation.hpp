#pragma once

// Iterative term isolation.
//
// Each step picks a remaining term v, drops every term sharing two or more
// qudits with it, splits each qudit of v into (factor 0) (x) (factor 1)
// inside a chosen central block, hands factor 0 to v and factor 1 to the rest,
// and prunes identity factors and scalar terms.  The loop stops once no two
// remaining terms share a qudit.

#include <clh/algebra.hpp>
#include <clh/graph.hpp>
#include <clh/model.hpp>
#include <clh/oracle.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

namespace clh {

class IsolationError : public Error {
 public:
  using Error::Error;
};

/// The block picked on one qudit of the isolated term.
struct QuditChoice {
  QuditId qudit = 0;
  int alpha = 0;
  Mat projector;
  Mat isometry;  // (d1*d2) x current dim
  int d1 = 1;
  int d2 = 1;
};

/// The isolated term restricted to its chosen factor-0 spaces.
struct GoodTerm {
  TermId id = 0;
  int step = 0;
  std::vector<QuditId> qudits;
  std::vector<int> slots;  // position of the factor-0 slot in each qudit's chain
  std::vector<int> dims;   // d1 per qudit
  Mat matrix;
};

/// A term that collapsed to a scalar (0 or 1) during pruning.
struct PrunedTerm {
  TermId id = 0;
  int step = 0;
  int value = 0;
};

struct DimensionChange {
  int step = 0;
  int from = 0;
  int to = 0;
};

/// Everything a qudit has been through: the factor-0 slots handed out, the
/// isometry applied at each of those steps, and its current dimension.
struct QuditChain {
  std::vector<int> steps;
  std::vector<int> slot_dims;
  std::vector<Mat> isometries;
};

struct StepResidue {
  double block_residual = 0.0;
  double factor_residual = 0.0;
};

struct IsolationRecord {
  int t = 0;
  TermId term = 0;
  std::vector<QuditId> neighborhood;  // S_t, the current support of the term
  std::vector<TermId> removed;
  std::vector<QuditDecomposition> decompositions;
  std::vector<int> chosen_alpha;
  std::vector<TermId> pruned_terms;
  std::vector<QuditId> pruned_qudits;
  StepResidue residue;
};

namespace detail {

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline double min_eigenvalue(const Mat& h) {
  if (h.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace detail

/// Mutable working state shared by the prover loop and the verifier replay.
class IsolationState {
 public:
  IsolationState() = default;

  explicit IsolationState(const CLHInstance& inst) : IsolationState(ReducedSystem::from_instance(inst)) {}

  explicit IsolationState(ReducedSystem sys) : sys_(std::move(sys)) {
    original_dims_ = sys_.dims;
    chains_.resize(sys_.dims.size());
    ledger_.resize(sys_.dims.size());
    std::vector<TermId> ids;
    for (const auto& [id, t] : sys_.terms) ids.push_back(id);
    prune(ids, 0, nullptr);
  }

  const ReducedSystem& system() const { return sys_; }
  int steps_taken() const { return steps_; }
  const std::vector<TermId>& bad() const { return bad_; }
  const std::vector<GoodTerm>& good() const { return good_; }
  const std::vector<PrunedTerm>& pruned() const { return pruned_; }
  const std::vector<QuditChain>& chains() const { return chains_; }
  const std::vector<std::vector<DimensionChange>>& dimension_ledger() const { return ledger_; }
  const std::vector<int>& original_dims() const { return original_dims_; }

  /// No qudit is shared by two remaining terms.
  bool finished() const {
    std::set<QuditId> used;
    for (const auto& [id, t] : sys_.terms)
      for (QuditId q : t.support)
        if (!used.insert(q).second) return false;
    return true;
  }

  std::optional<TermId> next_term() const {
    if (sys_.terms.empty()) return std::nullopt;
    return sys_.terms.begin()->first;
  }

  std::vector<TermId> removal_set(TermId v) const {
    return isolation_penalty(build_interaction_graph(sys_), v).removal_set;
  }

  void remove_terms(const std::vector<TermId>& ids) {
    for (TermId id : ids) {
      if (!sys_.terms.erase(id)) throw IsolationError("cannot remove term " + std::to_string(id) + ": not remaining");
      bad_.push_back(id);
    }
  }

  /// Applies one isolation step with the given per-qudit blocks (aligned
  /// with the term's current support).  Residuals describe how well the
  /// blocks fit the current terms; callers decide whether to trust them.
  StepResidue isolate(TermId v, const std::vector<QuditChoice>& choices, IsolationRecord* record = nullptr) {
    auto it = sys_.terms.find(v);
    if (it == sys_.terms.end()) throw IsolationError("term " + std::to_string(v) + " is not remaining");
    const LocalTerm vterm = it->second;
    const auto& s = vterm.support;
    if (choices.size() != s.size()) throw IsolationError("step needs one block choice per qudit of term " + std::to_string(v));
    const int t = ++steps_;
    StepResidue res;
    std::set<TermId> modified;

    for (std::size_t i = 0; i < s.size(); ++i) {
      const QuditId q = s[i];
      const auto& c = choices[i];
      const int d = sys_.dims[static_cast<std::size_t>(q)];
      if (c.qudit != q) throw IsolationError("block choice " + std::to_string(i) + " names qudit " + std::to_string(c.qudit) + ", expected " + std::to_string(q));
      if (c.projector.rows() != d || c.projector.cols() != d || c.isometry.cols() != d ||
          c.isometry.rows() != static_cast<Eigen::Index>(c.d1) * c.d2 || c.d1 < 1 || c.d2 < 1)
        throw IsolationError("block on qudit " + std::to_string(q) + " has inconsistent shape");

      for (TermId id : sys_.terms_on(q)) {
        if (id == v) continue;
        auto& term = sys_.terms.at(id);
        const std::size_t pos = detail::position_in(term, q);
        auto dims = sys_.dims_of(term.support);
        for (const auto& comp : site_compressions(term.matrix, dims, pos))
          res.block_residual = std::max(res.block_residual, (c.projector * comp - comp * c.projector).norm());
        Mat m = conjugate_site(term.matrix, dims, pos, c.isometry);
        dims[pos] = c.d2;
        dims.insert(dims.begin() + static_cast<std::ptrdiff_t>(pos), c.d1);
        res.factor_residual = std::max(res.factor_residual, trivial_residual(m, dims, pos));
        term.matrix = partial_trace_site(m, dims, pos) / static_cast<double>(c.d1);
        if (c.d2 == 1) term.support.erase(term.support.begin() + static_cast<std::ptrdiff_t>(pos));
        modified.insert(id);
      }
    }

    // The isolated term: conjugate every qudit, then trace out the factor-1 halves.
    Mat m = vterm.matrix;
    std::vector<int> cur = sys_.dims_of(s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto& c = choices[i];
      for (const auto& comp : site_compressions(vterm.matrix, sys_.dims_of(s), i))
        res.block_residual = std::max(res.block_residual, (c.projector * comp - comp * c.projector).norm());
      m = conjugate_site(m, cur, 2 * i, c.isometry);
      cur[2 * i] = c.d2;
      cur.insert(cur.begin() + static_cast<std::ptrdiff_t>(2 * i), c.d1);
    }
    for (std::size_t i = s.size(); i-- > 0;) {
      res.factor_residual = std::max(res.factor_residual, trivial_residual(m, cur, 2 * i + 1));
      m = partial_trace_site(m, cur, 2 * i + 1) / static_cast<double>(choices[i].d2);
      cur.erase(cur.begin() + static_cast<std::ptrdiff_t>(2 * i + 1));
    }

    GoodTerm g;
    g.id = v;
    g.step = t;
    g.qudits = s;
    g.dims = cur;
    g.matrix = std::move(m);
    std::vector<QuditId> exhausted;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const QuditId q = s[i];
      const auto& c = choices[i];
      auto& chain = chains_[static_cast<std::size_t>(q)];
      chain.steps.push_back(t);
      chain.slot_dims.push_back(c.d1);
      chain.isometries.push_back(c.isometry);
      g.slots.push_back(static_cast<int>(chain.slot_dims.size()) - 1);
      ledger_[static_cast<std::size_t>(q)].push_back({t, sys_.dims[static_cast<std::size_t>(q)], c.d2});
      sys_.dims[static_cast<std::size_t>(q)] = c.d2;
      if (c.d2 == 1) exhausted.push_back(q);
    }
    sys_.terms.erase(v);
    good_.push_back(std::move(g));

    std::vector<TermId> dropped;
    prune({modified.begin(), modified.end()}, t, &dropped);
    if (record) {
      record->t = t;
      record->term = v;
      record->neighborhood = s;
      record->pruned_terms = dropped;
      record->pruned_qudits = exhausted;
      record->residue = res;
      record->chosen_alpha.clear();
      for (const auto& c : choices) record->chosen_alpha.push_back(c.alpha);
    }
    return res;
  }

  /// Sum of the minimal energies of every kept piece: isolated terms, the
  /// final non-overlapping terms, and terms that collapsed to the identity.
  double kept_energy() const {
    double e = 0.0;
    for (const auto& g : good_) e += detail::min_eigenvalue(g.matrix);
    for (const auto& [id, t] : sys_.terms) e += detail::min_eigenvalue(t.matrix);
    for (const auto& p : pruned_) e += p.value;
    return e;
  }

 private:
  // Drops identity factors; terms left without support become pruned scalars.
  void prune(const std::vector<TermId>& ids, int step, std::vector<TermId>* dropped) {
    for (TermId id : ids) {
      auto it = sys_.terms.find(id);
      if (it == sys_.terms.end()) continue;
      auto& term = it->second;
      for (std::size_t pos = 0; pos < term.support.size();) {
        const auto dims = sys_.dims_of(term.support);
        if (trivial_residual(term.matrix, dims, pos) <= tol::kTrivial * std::max<double>(1.0, static_cast<double>(term.matrix.rows()))) {
          term.matrix = partial_trace_site(term.matrix, dims, pos) / static_cast<double>(dims[pos]);
          term.support.erase(term.support.begin() + static_cast<std::ptrdiff_t>(pos));
        } else {
          ++pos;
        }
      }
      if (!term.support.empty()) continue;
      const double v = term.matrix.size() ? term.matrix(0, 0).real() : 0.0;
      const int rounded = static_cast<int>(std::lround(v));
      if (std::abs(v - rounded) > 1e-6 || (rounded != 0 && rounded != 1))
        throw IsolationError("term " + std::to_string(id) + " collapsed to non-projective scalar " + std::to_string(v));
      pruned_.push_back({id, step, rounded});
      if (dropped) dropped->push_back(id);
      sys_.terms.erase(it);
    }
  }

  ReducedSystem sys_;
  std::vector<int> original_dims_;
  int steps_ = 0;
  std::vector<TermId> bad_;
  std::vector<GoodTerm> good_;
  std::vector<PrunedTerm> pruned_;
  std::vector<QuditChain> chains_;
  std::vector<std::vector<DimensionChange>> ledger_;
};

inline std::vector<QuditChoice> choices_from(const std::vector<QuditDecomposition>& decs, const std::vector<int>& alphas) {
  if (alphas.size() != decs.size()) throw IsolationError("one block index per qudit required");
  std::vector<QuditChoice> out;
  for (std::size_t i = 0; i < decs.size(); ++i) {
    const auto& d = decs[i];
    const int a = alphas[i];
    if (a < 0 || a >= static_cast<int>(d.blocks.size()))
      throw IsolationError("block index " + std::to_string(a) + " out of range on qudit " + std::to_string(d.qudit));
    const auto& b = d.blocks[static_cast<std::size_t>(a)];
    out.push_back({d.qudit, a, b.projector, b.factorization.isometry, b.factorization.d1, b.factorization.d2});
  }
  return out;
}

/// Chooses one block per qudit of the isolated term, given the state after
/// the removal set has been dropped.
using SubspaceOracle =
    std::function<std::vector<int>(const IsolationState&, TermId, const std::vector<QuditDecomposition>&)>;

struct ProverOptions {
  enum class Method { Auto, ProjectorOverlap, SectorEnergy };
  Method method = Method::Auto;
  OracleOptions oracle;
};

namespace detail {

// Odometer over block-index tuples, first qudit most significant.
inline bool next_tuple(std::vector<int>& a, const std::vector<QuditDecomposition>& decs) {
  for (std::size_t i = a.size(); i-- > 0;) {
    if (++a[i] < static_cast<int>(decs[i].blocks.size())) return true;
    a[i] = 0;
  }
  return false;
}

inline std::vector<TermId> component_of(const ReducedSystem& sys, TermId v) {
  std::vector<TermId> all;
  for (const auto& [id, t] : sys.terms) all.push_back(id);
  for (auto& comp : term_components(sys, all))
    if (std::find(comp.begin(), comp.end(), v) != comp.end()) return comp;
  return {v};
}

}  // namespace detail

/// Honest prover: the lexicographically first block tuple whose sector
/// contains a ground state of the current Hamiltonian.  The Hamiltonian is
/// block diagonal in the sectors, so "nonzero overlap with the ground space"
/// and "sector ground energy equals the global one" pick the same tuples;
/// both routes are available.
inline std::vector<int> prove_subspace_choices(const IsolationState& st, TermId v, const std::vector<QuditDecomposition>& decs,
                                               const ProverOptions& opt = {}) {
  const auto& sys = st.system();
  const auto comp = detail::component_of(sys, v);
  ReducedSystem sub;
  sub.dims = sys.dims;
  for (TermId id : comp) sub.terms.emplace(id, sys.terms.at(id));
  const CLHInstance inst = sub.subinstance(comp);
  const std::size_t dim = inst.total_dimension();
  if (dim > opt.oracle.budget)
    throw BudgetExceeded("prover: component of term " + std::to_string(v) + " has dimension " + std::to_string(dim) +
                         "; supply an external witness");

  auto method = opt.method;
  if (method == ProverOptions::Method::Auto)
    method = dim <= 256 ? ProverOptions::Method::ProjectorOverlap : ProverOptions::Method::SectorEnergy;

  // qudit ids in `inst` are the touched qudits relabelled in increasing order
  std::set<QuditId> touched;
  for (TermId id : comp)
    for (QuditId q : sys.terms.at(id).support) touched.insert(q);
  const std::vector<QuditId> order(touched.begin(), touched.end());
  auto local = [&](QuditId q) { return static_cast<int>(std::lower_bound(order.begin(), order.end(), q) - order.begin()); };
  const auto dims = inst.dims();

  std::vector<int> alpha(decs.size(), 0);
  if (method == ProverOptions::Method::ProjectorOverlap) {
    const Mat ground = ground_space(inst, opt.oracle);
    do {
      Mat g = ground;
      for (std::size_t i = 0; i < decs.size(); ++i) {
        const Mat& p = decs[i].blocks[static_cast<std::size_t>(alpha[i])].projector;
        const std::vector<int> site{local(decs[i].qudit)};
        for (Eigen::Index c = 0; c < g.cols(); ++c) {
          Vec y = Vec::Zero(g.rows());
          apply_local(g.col(c), y, dims, site, p);
          g.col(c) = y;
        }
      }
      if (g.squaredNorm() > 1e-6) return alpha;
    } while (detail::next_tuple(alpha, decs));
  } else {
    // Sector ground energy: H + c (I - P_sector) with c above the spectral range.
    OracleOptions fast = opt.oracle;
    fast.dense_limit = std::min<std::size_t>(fast.dense_limit, 128);
    const double target = ground_energy(inst, fast);
    const double c = static_cast<double>(inst.m() + 1);
    std::vector<int> vsites;
    for (const auto& dec : decs) vsites.push_back(local(dec.qudit));
    do {
      Mat p = Mat::Identity(1, 1);
      for (std::size_t i = 0; i < decs.size(); ++i) p = kron(p, decs[i].blocks[static_cast<std::size_t>(alpha[i])].projector);
      CLHInstance penalized = inst;
      penalized.terms.push_back({-1, vsites, c * (Mat::Identity(p.rows(), p.cols()) - p)});
      if (std::abs(ground_energy(penalized, fast) - target) <= tol::kEnergy) return alpha;
    } while (detail::next_tuple(alpha, decs));
  }
  throw IsolationError("prover: no block tuple for term " + std::to_string(v) + " at step " +
                       std::to_string(st.steps_taken() + 1) + " overlaps the ground space");
}

inline SubspaceOracle ground_sector_prover(ProverOptions opt = {}) {
  return [opt](const IsolationState& st, TermId v, const std::vector<QuditDecomposition>& decs) {
    return prove_subspace_choices(st, v, decs, opt);
  };
}

/// Always the first block on every qudit.  Valid for the combinatorial
/// bound, but carries no ground-space guarantee.
inline SubspaceOracle first_block_oracle() {
  return [](const IsolationState&, TermId, const std::vector<QuditDecomposition>& decs) {
    return std::vector<int>(decs.size(), 0);
  };
}

struct PenaltyEntry {
  int t = 0;
  QuditId qudit = 0;
  std::int64_t removed = 0;     // terms removed at step t
  std::int64_t degree = 0;      // D_q in the initial graph
  std::int64_t degree_sum = 0;  // sum of D over S_t in the initial graph

  /// p(t, q) = removed * D_q / sum D
  double share() const { return degree_sum ? static_cast<double>(removed * degree) / static_cast<double>(degree_sum) : 0.0; }

  /// p(t, q) <= 2 eps D_q, exactly.
  bool within(const Rational& eps) const {
    return static_cast<__int128>(removed) * degree * eps.den <= static_cast<__int128>(2) * eps.num * degree * degree_sum;
  }
};

struct PenaltyLedger {
  std::vector<PenaltyEntry> entries;
  Rational epsilon;
  int k = 0;
  int d = 0;
  int m = 0;
  std::int64_t removed_total = 0;

  double gamma() const { return 2.0 * k * d * epsilon.value(); }
  bool bound_applicable() const { return epsilon.below_half(); }

  /// |R_bad| / m <= 2 k d eps, in integers.
  bool bound_holds() const {
    return static_cast<__int128>(removed_total) * epsilon.den <= static_cast<__int128>(2) * k * d * m * epsilon.num;
  }

  double share_sum() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.share();
    return s;
  }
};

inline PenaltyLedger build_penalty_ledger(const BipartiteGraph& initial, const std::vector<IsolationRecord>& records,
                                          const Rational& eps, int k, int d, int m) {
  PenaltyLedger led;
  led.epsilon = eps;
  led.k = k;
  led.d = d;
  led.m = m;
  for (const auto& r : records) {
    std::int64_t sum = 0;
    for (QuditId q : r.neighborhood) sum += initial.degree(q);
    for (QuditId q : r.neighborhood)
      led.entries.push_back({r.t, q, static_cast<std::int64_t>(r.removed.size()), initial.degree(q), sum});
    led.removed_total += static_cast<std::int64_t>(r.removed.size());
  }
  return led;
}

struct RunOptions {
  std::uint64_t seed = 1;
  ExpansionOptions expansion;
};

/// Full trace of one isolation run.
struct IsolationRun {
  std::uint64_t seed = 0;
  IsolationState state;
  std::vector<IsolationRecord> records;
  double kept_energy = 0.0;

  int T() const { return static_cast<int>(records.size()); }
  const std::vector<TermId>& R_bad() const { return state.bad(); }
  const std::vector<GoodTerm>& R_good() const { return state.good(); }
  std::vector<TermId> R_rem_final() const {
    std::vector<TermId> out;
    for (const auto& [id, t] : state.system().terms) out.push_back(id);
    return out;
  }
};

inline std::uint64_t decomposition_seed(std::uint64_t seed, int step, QuditId q) {
  return detail::splitmix(seed ^ detail::splitmix(static_cast<std::uint64_t>(step) * 1000003ull + static_cast<std::uint64_t>(q)));
}

/// Runs the loop to completion.  `oracle` picks blocks at every step.
inline IsolationRun run_isolation_loop(const CLHInstance& inst, const SubspaceOracle& oracle, std::uint64_t seed) {
  IsolationRun run;
  run.seed = seed;
  run.state = IsolationState(inst);
  while (!run.state.finished()) {
    const TermId v = *run.state.next_term();
    IsolationRecord rec;
    rec.removed = run.state.removal_set(v);
    run.state.remove_terms(rec.removed);
    const int t = run.state.steps_taken() + 1;
    for (QuditId q : run.state.system().terms.at(v).support)
      rec.decompositions.push_back(bv_decompose_qudit(run.state.system(), v, q, decomposition_seed(seed, t, q)));
    std::vector<int> alpha;
    try {
      alpha = oracle(run.state, v, rec.decompositions);
    } catch (const BudgetExceeded&) {
      throw;
    } catch (const Error& e) {
      throw IsolationError("step " + std::to_string(t) + ": oracle refused: " + e.what());
    }
    run.state.isolate(v, choices_from(rec.decompositions, alpha), &rec);
    run.records.push_back(std::move(rec));
  }
  run.kept_energy = run.state.kept_energy();
  return run;
}

}  // namespace clh

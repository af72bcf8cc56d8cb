#pragma once

// Bipartite interaction graph (qudits on the left, terms on the right) and
// the local-expansion audit over small qudit sets.

#include <clh/model.hpp>

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <vector>

namespace clh {

/// Exact non-negative fraction num/den.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }

  friend bool operator<(const Rational& a, const Rational& b) {
    return static_cast<__int128>(a.num) * b.den < static_cast<__int128>(b.num) * a.den;
  }
  friend bool operator==(const Rational& a, const Rational& b) {
    return static_cast<__int128>(a.num) * b.den == static_cast<__int128>(b.num) * a.den;
  }
  /// this < 1/2
  bool below_half() const { return 2 * num < den; }
};

class BipartiteGraph {
 public:
  BipartiteGraph() = default;

  explicit BipartiteGraph(int num_left) : left_(static_cast<std::size_t>(num_left)) {}

  void add_edge(QuditId q, TermId t) {
    check_left(q);
    auto& r = right_[t];
    if (std::find(r.begin(), r.end(), q) != r.end()) return;
    r.insert(std::upper_bound(r.begin(), r.end(), q), q);
    auto& l = left_[static_cast<std::size_t>(q)];
    l.insert(std::upper_bound(l.begin(), l.end(), t), t);
  }

  void add_right(TermId t) { right_[t]; }

  void remove_edge(QuditId q, TermId t) {
    check_left(q);
    auto& r = right_.at(t);
    r.erase(std::remove(r.begin(), r.end(), q), r.end());
    auto& l = left_[static_cast<std::size_t>(q)];
    l.erase(std::remove(l.begin(), l.end(), t), l.end());
  }

  void remove_right(TermId t) {
    auto it = right_.find(t);
    if (it == right_.end()) return;
    for (QuditId q : it->second) {
      auto& l = left_[static_cast<std::size_t>(q)];
      l.erase(std::remove(l.begin(), l.end(), t), l.end());
    }
    right_.erase(it);
  }

  int num_left() const { return static_cast<int>(left_.size()); }
  int num_right() const { return static_cast<int>(right_.size()); }
  int degree(QuditId q) const { check_left(q); return static_cast<int>(left_[static_cast<std::size_t>(q)].size()); }
  bool has_right(TermId t) const { return right_.count(t) != 0; }

  const std::vector<TermId>& terms_of(QuditId q) const { check_left(q); return left_[static_cast<std::size_t>(q)]; }

  const std::vector<QuditId>& qudits_of(TermId t) const {
    auto it = right_.find(t);
    if (it == right_.end()) throw Error("unknown term node " + std::to_string(t));
    return it->second;
  }

  const std::map<TermId, std::vector<QuditId>>& right() const { return right_; }

  void check_left(QuditId q) const {
    if (q < 0 || q >= num_left()) throw Error("unknown qudit node " + std::to_string(q));
  }

  std::size_t edge_count() const {
    std::size_t e = 0;
    for (const auto& [t, qs] : right_) e += qs.size();
    return e;
  }

 private:
  std::vector<std::vector<TermId>> left_;
  std::map<TermId, std::vector<QuditId>> right_;
};

/// Graph over explicit (term, support) pairs; supports are taken as given.
inline BipartiteGraph graph_from_supports(int num_left, const std::map<TermId, std::vector<QuditId>>& supports) {
  BipartiteGraph g(num_left);
  for (const auto& [t, sup] : supports) {
    g.add_right(t);
    for (QuditId q : sup) g.add_edge(q, t);
  }
  return g;
}

/// One right node per term; an edge only where the term acts non-trivially.
inline BipartiteGraph build_interaction_graph(const CLHInstance& inst) {
  BipartiteGraph g(inst.n());
  for (const auto& t : inst.terms) {
    g.add_right(t.id);
    const auto dims = inst.dims_of(t.support);
    for (std::size_t p = 0; p < t.support.size(); ++p)
      if (trivial_residual(t.matrix, dims, p) > tol::kTrivial) g.add_edge(t.support[p], t.id);
  }
  return g;
}

inline BipartiteGraph build_interaction_graph(const ReducedSystem& sys) {
  BipartiteGraph g(static_cast<int>(sys.dims.size()));
  for (const auto& [id, t] : sys.terms) {
    g.add_right(id);
    for (QuditId q : t.support) g.add_edge(q, id);
  }
  return g;
}

/// Gamma(S): sorted union of the neighbours of S.
inline std::vector<TermId> neighbor_set(const BipartiteGraph& g, const std::vector<QuditId>& s) {
  std::set<TermId> out;
  for (QuditId q : s)
    for (TermId t : g.terms_of(q)) out.insert(t);
  return {out.begin(), out.end()};
}

struct SubsetStats {
  std::int64_t sum_degree = 0;  // sum_{v in S} D_v
  std::int64_t gamma = 0;       // |Gamma(S)|
  std::int64_t gamma1 = 0;      // neighbours with exactly one edge into S

  /// 1 - |Gamma(S)| / sum D  (0 when S has no edges)
  Rational epsilon() const {
    if (sum_degree == 0) return {0, 1};
    return {sum_degree - gamma, sum_degree};
  }
  /// |Gamma_1(S)| / |Gamma(S)|  (1 when Gamma(S) is empty)
  Rational alpha1() const {
    if (gamma == 0) return {1, 1};
    return {gamma1, gamma};
  }
};

inline SubsetStats subset_stats(const BipartiteGraph& g, const std::vector<QuditId>& s) {
  SubsetStats st;
  std::map<TermId, int> hits;
  for (QuditId q : s) {
    st.sum_degree += g.degree(q);
    for (TermId t : g.terms_of(q)) ++hits[t];
  }
  st.gamma = static_cast<std::int64_t>(hits.size());
  for (const auto& [t, c] : hits)
    if (c == 1) ++st.gamma1;
  return st;
}

inline double degree_one_fraction(const BipartiteGraph& g, const std::vector<QuditId>& s) {
  if (s.empty()) throw Error("degree_one_fraction: empty set");
  return subset_stats(g, s).alpha1().value();
}

struct IsolationPenalty {
  int count = 0;
  std::vector<TermId> removal_set;
};

/// Terms sharing at least two qudits with `term`: the unique minimal set whose
/// removal leaves `term` isolated.
inline IsolationPenalty isolation_penalty(const BipartiteGraph& g, TermId term) {
  const auto& mine = g.qudits_of(term);
  std::map<TermId, int> shared;
  for (QuditId q : mine)
    for (TermId t : g.terms_of(q))
      if (t != term) ++shared[t];
  IsolationPenalty p;
  for (const auto& [t, c] : shared)
    if (c >= 2) p.removal_set.push_back(t);
  p.count = static_cast<int>(p.removal_set.size());
  return p;
}

/// Number of nonempty subsets of size <= kmax of an n-set, saturating at uint64 max.
inline std::uint64_t count_subsets(std::uint64_t n, int kmax) {
  std::uint64_t total = 0;
  std::uint64_t c = 1;
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  for (int s = 1; s <= kmax && static_cast<std::uint64_t>(s) <= n; ++s) {
    // c = C(n, s) = C(n, s-1) * (n - s + 1) / s
    const unsigned __int128 next = static_cast<unsigned __int128>(c) * (n - static_cast<std::uint64_t>(s) + 1) / static_cast<unsigned>(s);
    if (next > kMax) return kMax;
    c = static_cast<std::uint64_t>(next);
    if (total > kMax - c) return kMax;
    total += c;
  }
  return total;
}

/// Visits every nonempty subset of {0..n-1} of size <= kmax in lexicographic order.
inline void for_each_subset(int n, int kmax, const std::function<void(const std::vector<QuditId>&)>& fn) {
  std::vector<QuditId> cur;
  std::function<void(int)> rec = [&](int start) {
    for (int q = start; q < n; ++q) {
      cur.push_back(q);
      fn(cur);
      if (static_cast<int>(cur.size()) < kmax) rec(q + 1);
      cur.pop_back();
    }
  };
  rec(0);
}

struct TermAudit {
  TermId term = 0;
  Rational epsilon;  // expansion error of S = Gamma(term)
  int penalty = 0;
};

struct ExpansionReport {
  Rational epsilon;                // max over audited sets
  std::vector<QuditId> worst_set;  // lexicographically first maximizer
  Rational alpha1_min{1, 1};       // min degree-one fraction over audited sets
  std::vector<TermAudit> per_term;
  Rational per_term_epsilon;       // max over subsets of term neighbourhoods
  bool exhaustive = true;
  std::uint64_t sets_audited = 0;
};

struct ExpansionOptions {
  std::uint64_t budget = 10'000'000;
};

/// Exact maximum of 1 - |Gamma(S)| / sum D over nonempty S with |S| <= kmax.
/// Above the subset budget only subsets of term neighbourhoods are audited
/// (these contain every set the isolation loop can encounter) and the report
/// is flagged non-exhaustive.
inline ExpansionReport local_expansion_error(const BipartiteGraph& g, int kmax, ExpansionOptions opt = {}) {
  if (kmax < 1) throw Error("local_expansion_error: kmax must be >= 1");
  ExpansionReport rep;
  bool have_worst = false;
  auto audit = [&](const std::vector<QuditId>& s) {
    const auto st = subset_stats(g, s);
    ++rep.sets_audited;
    if (st.sum_degree == 0) return;
    const Rational e = st.epsilon();
    if (!have_worst || rep.epsilon < e) {
      rep.epsilon = e;
      rep.worst_set = s;
      have_worst = true;
    }
    const Rational a = st.alpha1();
    if (a < rep.alpha1_min) rep.alpha1_min = a;
  };

  // Subsets of every term's neighbourhood.
  std::set<std::vector<QuditId>> seen;
  for (const auto& [t, qs] : g.right()) {
    TermAudit ta;
    ta.term = t;
    ta.epsilon = subset_stats(g, qs).epsilon();
    ta.penalty = isolation_penalty(g, t).count;
    rep.per_term.push_back(ta);
    const int k = static_cast<int>(qs.size());
    for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
      std::vector<QuditId> s;
      for (int i = 0; i < k; ++i)
        if (mask & (1u << i)) s.push_back(qs[static_cast<std::size_t>(i)]);
      if (static_cast<int>(s.size()) <= kmax) seen.insert(s);
    }
  }
  for (const auto& s : seen) {
    const Rational e = subset_stats(g, s).epsilon();
    if (rep.per_term_epsilon < e) rep.per_term_epsilon = e;
  }

  if (count_subsets(static_cast<std::uint64_t>(g.num_left()), kmax) <= opt.budget) {
    for_each_subset(g.num_left(), kmax, audit);
  } else {
    rep.exhaustive = false;
    for (const auto& s : seen) audit(s);
  }
  return rep;
}

}  // namespace clh

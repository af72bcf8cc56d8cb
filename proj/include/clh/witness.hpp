#pragma once

// Witness documents and the polynomial-time verifier.
//
//   { "version": 1, "seed": int, "target": "ground",
//     "steps": [{ "term": int, "removed": [int],
//                 "qudits": [{ "id", "alpha", "projector", "isometry", "d1", "d2" }] }],
//     "E_kept": real, "R_bad_count": int, "claimed_interval": [lo, hi] }

#include <clh/io.hpp>
#include <clh/isolation.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace clh {

struct WitnessQudit {
  QuditId id = 0;
  int alpha = 0;
  Mat projector;
  Mat isometry;
  int d1 = 1;
  int d2 = 1;
};

struct WitnessStep {
  TermId term = 0;
  std::vector<TermId> removed;
  std::vector<WitnessQudit> qudits;
};

struct Witness {
  std::uint64_t seed = 0;
  std::string target = "ground";
  std::vector<WitnessStep> steps;
  double E_kept = 0.0;
  long long R_bad_count = 0;

  std::pair<double, double> claimed_interval() const {
    return {E_kept, E_kept + static_cast<double>(R_bad_count)};
  }
};

inline Witness make_witness(const IsolationRun& run) {
  Witness w;
  w.seed = run.seed;
  for (const auto& r : run.records) {
    WitnessStep s;
    s.term = r.term;
    s.removed = r.removed;
    for (std::size_t i = 0; i < r.decompositions.size(); ++i) {
      const auto& dec = r.decompositions[i];
      const int a = r.chosen_alpha[i];
      const auto& b = dec.blocks[static_cast<std::size_t>(a)];
      s.qudits.push_back({dec.qudit, a, b.projector, b.factorization.isometry, b.factorization.d1, b.factorization.d2});
    }
    w.steps.push_back(std::move(s));
  }
  w.E_kept = run.kept_energy;
  w.R_bad_count = static_cast<long long>(run.R_bad().size());
  return w;
}

inline json witness_to_json(const Witness& w) {
  json doc;
  doc["version"] = 1;
  doc["seed"] = w.seed;
  doc["target"] = w.target;
  doc["steps"] = json::array();
  for (const auto& s : w.steps) {
    json js{{"term", s.term}, {"removed", s.removed}, {"qudits", json::array()}};
    for (const auto& q : s.qudits)
      js["qudits"].push_back({{"id", q.id},
                              {"alpha", q.alpha},
                              {"projector", io::matrix_to_json(q.projector)},
                              {"isometry", io::matrix_to_json(q.isometry)},
                              {"d1", q.d1},
                              {"d2", q.d2}});
    doc["steps"].push_back(std::move(js));
  }
  doc["E_kept"] = w.E_kept;
  doc["R_bad_count"] = w.R_bad_count;
  const auto [lo, hi] = w.claimed_interval();
  doc["claimed_interval"] = {lo, hi};
  return doc;
}

inline std::string save_witness(const Witness& w) { return witness_to_json(w).dump() + "\n"; }

/// Structural parse only; matrix shapes are taken from d1, d2 and the
/// projector's own entry count.  Content is left to the verifier.
inline Witness witness_from_json(const json& doc) {
  const std::string root;
  if (io::as_int(io::field(doc, "version", root), "/version") != 1) throw SchemaError("/version", "unsupported version");
  Witness w;
  const auto seed = io::as_int(io::field(doc, "seed", root), "/seed");
  if (seed < 0) throw SchemaError("/seed", "must be non-negative");
  w.seed = static_cast<std::uint64_t>(seed);
  if (doc.contains("target")) {
    if (!doc["target"].is_string()) throw SchemaError("/target", "expected a string");
    w.target = doc["target"].get<std::string>();
  }
  const json& steps = io::as_array(io::field(doc, "steps", root), "/steps");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string p = "/steps/" + std::to_string(i);
    WitnessStep s;
    s.term = static_cast<TermId>(io::as_int(io::field(steps[i], "term", p), p + "/term"));
    const json& rem = io::as_array(io::field(steps[i], "removed", p), p + "/removed");
    for (std::size_t j = 0; j < rem.size(); ++j)
      s.removed.push_back(static_cast<TermId>(io::as_int(rem[j], p + "/removed/" + std::to_string(j))));
    const json& qs = io::as_array(io::field(steps[i], "qudits", p), p + "/qudits");
    for (std::size_t j = 0; j < qs.size(); ++j) {
      const std::string pq = p + "/qudits/" + std::to_string(j);
      WitnessQudit q;
      q.id = static_cast<QuditId>(io::as_int(io::field(qs[j], "id", pq), pq + "/id"));
      q.alpha = static_cast<int>(io::as_int(io::field(qs[j], "alpha", pq), pq + "/alpha"));
      q.d1 = static_cast<int>(io::as_int(io::field(qs[j], "d1", pq), pq + "/d1"));
      q.d2 = static_cast<int>(io::as_int(io::field(qs[j], "d2", pq), pq + "/d2"));
      if (q.d1 < 1 || q.d2 < 1) throw SchemaError(pq, "d1 and d2 must be positive");
      q.projector = io::square_matrix_from_json(io::field(qs[j], "projector", pq), pq + "/projector");
      q.isometry = io::matrix_from_json(io::field(qs[j], "isometry", pq), static_cast<Eigen::Index>(q.d1) * q.d2,
                                        q.projector.rows(), pq + "/isometry");
      s.qudits.push_back(std::move(q));
    }
    w.steps.push_back(std::move(s));
  }
  w.E_kept = io::as_double(io::field(doc, "E_kept", root), "/E_kept");
  w.R_bad_count = io::as_int(io::field(doc, "R_bad_count", root), "/R_bad_count");
  return w;
}

inline Witness load_witness(std::string_view bytes) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("not valid JSON: ") + e.what());
  }
  return witness_from_json(doc);
}

enum class Check { None, Isolation, Invariance, Factorization, Energy };

inline const char* check_name(Check c) {
  switch (c) {
    case Check::None: return "none";
    case Check::Isolation: return "isolation";
    case Check::Invariance: return "invariance";
    case Check::Factorization: return "factorization";
    case Check::Energy: return "energy";
  }
  return "?";
}

struct Verdict {
  bool accepted = false;
  Check failed = Check::None;
  int failed_step = -1;  // 1-based, -1 for final checks
  std::string message;
  double E_kept = 0.0;
  std::pair<double, double> interval{0.0, 0.0};
  IsolationState state;  // replayed state, valid when accepted
};

namespace detail {

inline Verdict reject(Check c, int step, std::string msg) {
  Verdict v;
  v.failed = c;
  v.failed_step = step;
  v.message = std::move(msg);
  return v;
}

}  // namespace detail

/// Replays the witness against the instance.  Checks, in order per step:
/// isolation (removed set is exactly the >= 2 overlap set), invariance
/// (projector is the claimed minimal central projector and commutes with
/// every term on the qudit), factorization (isometry contract, strict
/// decrease).  Then the run must be finished and the claimed energy and
/// removal count must match.
inline Verdict verify_witness(const CLHInstance& inst, const Witness& w) {
  if (w.target != "ground") return detail::reject(Check::Energy, -1, "unsupported target '" + w.target + "'");
  IsolationState st(inst);
  for (std::size_t i = 0; i < w.steps.size(); ++i) {
    const int t = static_cast<int>(i) + 1;
    const auto& step = w.steps[i];
    const auto& sys = st.system();
    auto vt = sys.terms.find(step.term);
    if (vt == sys.terms.end())
      return detail::reject(Check::Isolation, t, "term " + std::to_string(step.term) + " is not remaining");

    auto claimed = step.removed;
    std::sort(claimed.begin(), claimed.end());
    if (std::adjacent_find(claimed.begin(), claimed.end()) != claimed.end())
      return detail::reject(Check::Isolation, t, "removed set lists a term twice");
    if (claimed != st.removal_set(step.term))
      return detail::reject(Check::Isolation, t, "removed set is not the set of terms sharing two or more qudits");
    st.remove_terms(claimed);

    const auto& v = st.system().terms.at(step.term);
    if (step.qudits.size() != v.support.size())
      return detail::reject(Check::Invariance, t, "qudit list does not match the term's support");
    std::vector<QuditChoice> choices;
    for (std::size_t j = 0; j < step.qudits.size(); ++j) {
      const auto& wq = step.qudits[j];
      const QuditId q = v.support[j];
      if (wq.id != q) return detail::reject(Check::Invariance, t, "qudit " + std::to_string(wq.id) + " out of order or not in support");
      const int d = st.system().dims[static_cast<std::size_t>(q)];
      const double tv = tol::kVerify * d;
      const Mat& p = wq.projector;
      if (p.rows() != d)
        return detail::reject(Check::Invariance, t, "projector on qudit " + std::to_string(q) + " has wrong side");
      if ((p - p.adjoint()).norm() > tv || (p * p - p).norm() > tv)
        return detail::reject(Check::Invariance, t, "projector on qudit " + std::to_string(q) + " is not an orthogonal projector");
      for (TermId id : st.system().terms_on(q)) {
        const auto& term = st.system().terms.at(id);
        for (const auto& c : site_compressions(term.matrix, st.system().dims_of(term.support), detail::position_in(term, q)))
          if ((p * c - c * p).norm() > tv)
            return detail::reject(Check::Invariance, t, "projector on qudit " + std::to_string(q) + " does not commute with term " + std::to_string(id));
      }
      const bool sole = st.system().terms_on(q).size() == 1;
      if (sole) {
        if (wq.alpha != 0 || (p - Mat::Identity(d, d)).norm() > tv)
          return detail::reject(Check::Invariance, t, "qudit " + std::to_string(q) + " carries only the isolated term; expected the single full block");
      } else {
        const auto alg = induced_algebra(v.matrix, st.system().dims_of(v.support), j);
        const auto cd = central_projectors(alg, decomposition_seed(w.seed, t, q));
        if (wq.alpha < 0 || wq.alpha >= static_cast<int>(cd.projectors.size()))
          return detail::reject(Check::Invariance, t, "alpha " + std::to_string(wq.alpha) + " out of range on qudit " + std::to_string(q));
        if ((cd.projectors[static_cast<std::size_t>(wq.alpha)] - p).norm() > 1e-6)
          return detail::reject(Check::Invariance, t, "projector on qudit " + std::to_string(q) + " is not central block " + std::to_string(wq.alpha));
      }

      const Mat& iso = wq.isometry;
      const int r = wq.d1 * wq.d2;
      if (iso.cols() != d || iso.rows() != r)
        return detail::reject(Check::Factorization, t, "isometry on qudit " + std::to_string(q) + " has wrong shape");
      if ((iso * iso.adjoint() - Mat::Identity(r, r)).norm() > tv || (iso.adjoint() * iso - p).norm() > tv)
        return detail::reject(Check::Factorization, t, "isometry on qudit " + std::to_string(q) + " is not a partial isometry onto the block");
      if (!sole && (wq.d1 >= d || wq.d2 >= d))
        return detail::reject(Check::Factorization, t, "no strict dimension decrease on qudit " + std::to_string(q));
      choices.push_back({q, wq.alpha, p, iso, wq.d1, wq.d2});
    }

    StepResidue res;
    try {
      res = st.isolate(step.term, choices);
    } catch (const Error& e) {
      return detail::reject(Check::Factorization, t, e.what());
    }
    if (res.block_residual > tol::kVerify * inst.d())
      return detail::reject(Check::Invariance, t, "block residual " + std::to_string(res.block_residual));
    if (res.factor_residual > tol::kVerify * inst.d())
      return detail::reject(Check::Factorization, t, "factor residual " + std::to_string(res.factor_residual));
  }

  if (!st.finished()) return detail::reject(Check::Energy, -1, "remaining terms still overlap after the last step");
  const double e = st.kept_energy();
  if (std::abs(e - w.E_kept) > tol::kEnergy)
    return detail::reject(Check::Energy, -1, "claimed E_kept " + std::to_string(w.E_kept) + " but kept terms give " + std::to_string(e));
  if (w.R_bad_count != static_cast<long long>(st.bad().size()))
    return detail::reject(Check::Energy, -1, "claimed R_bad_count " + std::to_string(w.R_bad_count) + " but " + std::to_string(st.bad().size()) + " terms were removed");

  Verdict ok;
  ok.accepted = true;
  ok.E_kept = e;
  ok.interval = {e, e + static_cast<double>(st.bad().size())};
  ok.state = std::move(st);
  return ok;
}

struct IsolationOutcome {
  ExpansionReport audit;  // on the initial graph, kmax = k
  IsolationRun run;
  PenaltyLedger ledger;
  Witness witness;
};

/// Audit, loop, ledger and witness in one call.
inline IsolationOutcome run_isolation(const CLHInstance& inst, const SubspaceOracle& oracle, const RunOptions& opt = {}) {
  IsolationOutcome out;
  const auto g1 = build_interaction_graph(inst);
  out.audit = local_expansion_error(g1, std::max(1, inst.k()), opt.expansion);
  out.run = run_isolation_loop(inst, oracle, opt.seed);
  out.ledger = build_penalty_ledger(g1, out.run.records, out.audit.epsilon, inst.k(), inst.d(), inst.m());
  out.witness = make_witness(out.run);
  return out;
}

}  // namespace clh

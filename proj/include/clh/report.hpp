#pragma once

// End-to-end pipeline and its report.

#include <clh/circuit.hpp>
#include <clh/generators.hpp>
#include <clh/witness.hpp>

#include <iomanip>
#include <optional>
#include <sstream>
#include <string>

namespace clh {

struct PipelineOptions {
  std::uint64_t seed = 1;
  ExpansionOptions expansion;
  ProverOptions prover;
  bool first_block = false;  // skip the ground-space prover
  OracleOptions oracle;      // for the final lambda cross-check
};

struct RunReport {
  int n = 0, m = 0, k = 0, d = 0;
  std::uint64_t seed = 0;
  Rational epsilon;
  bool epsilon_exhaustive = true;
  Rational per_term_epsilon;
  Rational alpha1_min;
  double gamma = 0.0;
  long long r_bad = 0;
  double ratio = 0.0;
  bool bound_applicable = false;
  bool bound_holds = false;
  bool fact2_holds = false;
  double ledger_sum = 0.0;
  int T = 0;
  double E_kept = 0.0;
  std::pair<double, double> interval{0.0, 0.0};
  bool verified = false;
  std::optional<double> lambda;
  bool circuit_emitted = false;
  std::optional<double> state_energy;
};

struct PipelineResult {
  IsolationOutcome outcome;
  Verdict verdict;
  std::optional<DepthTwoCircuit> circuit;
  RunReport report;
};

inline PipelineResult run_pipeline(const CLHInstance& inst, const PipelineOptions& opt = {}) {
  PipelineResult res;
  const SubspaceOracle oracle = opt.first_block ? first_block_oracle() : ground_sector_prover(opt.prover);
  res.outcome = run_isolation(inst, oracle, {opt.seed, opt.expansion});
  res.verdict = verify_witness(inst, res.outcome.witness);

  auto& r = res.report;
  const auto& led = res.outcome.ledger;
  r.n = inst.n();
  r.m = inst.m();
  r.k = inst.k();
  r.d = inst.d();
  r.seed = opt.seed;
  r.epsilon = res.outcome.audit.epsilon;
  r.epsilon_exhaustive = res.outcome.audit.exhaustive;
  r.per_term_epsilon = res.outcome.audit.per_term_epsilon;
  r.alpha1_min = res.outcome.audit.alpha1_min;
  r.gamma = led.gamma();
  r.r_bad = led.removed_total;
  r.ratio = r.m ? static_cast<double>(r.r_bad) / r.m : 0.0;
  r.bound_applicable = led.bound_applicable();
  r.bound_holds = led.bound_holds();
  r.fact2_holds = std::all_of(led.entries.begin(), led.entries.end(), [&](const PenaltyEntry& e) { return e.within(led.epsilon); });
  r.ledger_sum = led.share_sum();
  r.T = res.outcome.run.T();
  r.E_kept = res.outcome.run.kept_energy;
  r.interval = res.outcome.witness.claimed_interval();
  r.verified = res.verdict.accepted;

  if (res.verdict.accepted) {
    res.circuit = build_circuit(res.verdict.state);
    r.circuit_emitted = true;
  }
  if (inst.total_dimension() <= opt.oracle.budget) {
    r.lambda = ground_energy(inst, opt.oracle);
    if (res.circuit) r.state_energy = energy_of_state(inst, apply_circuit(*res.circuit, inst, opt.oracle.budget));
  }
  return res;
}

namespace detail {

inline json rational_json(const Rational& q) { return {{"num", q.num}, {"den", q.den}, {"value", q.value()}}; }

}  // namespace detail

inline json report_to_json(const RunReport& r) {
  json j;
  j["instance"] = {{"n", r.n}, {"m", r.m}, {"k", r.k}, {"d", r.d}};
  j["seed"] = r.seed;
  j["epsilon"] = detail::rational_json(r.epsilon);
  j["epsilon_exhaustive"] = r.epsilon_exhaustive;
  j["per_term_epsilon"] = detail::rational_json(r.per_term_epsilon);
  j["alpha1_min"] = detail::rational_json(r.alpha1_min);
  j["gamma"] = r.gamma;
  j["R_bad"] = r.r_bad;
  j["ratio"] = r.ratio;
  j["bound"] = {{"applicable", r.bound_applicable}, {"holds", r.bound_holds}, {"fact2", r.fact2_holds}};
  j["ledger_sum"] = r.ledger_sum;
  j["T"] = r.T;
  j["E_kept"] = r.E_kept;
  j["interval"] = {r.interval.first, r.interval.second};
  j["verified"] = r.verified;
  j["lambda"] = r.lambda ? json(*r.lambda) : json(nullptr);
  j["circuit_emitted"] = r.circuit_emitted;
  j["state_energy"] = r.state_energy ? json(*r.state_energy) : json(nullptr);
  return j;
}

/// Two aligned columns, one field per row.
inline std::string report_to_text(const RunReport& r) {
  auto frac = [](const Rational& q) {
    std::ostringstream s;
    s << q.num << "/" << q.den << " (" << std::setprecision(6) << q.value() << ")";
    return s.str();
  };
  auto num = [](double v) {
    std::ostringstream s;
    s << std::setprecision(10) << v;
    return s.str();
  };
  std::vector<std::pair<std::string, std::string>> rows{
      {"n m k d", std::to_string(r.n) + " " + std::to_string(r.m) + " " + std::to_string(r.k) + " " + std::to_string(r.d)},
      {"seed", std::to_string(r.seed)},
      {r.epsilon_exhaustive ? "epsilon (exhaustive)" : "epsilon (neighbourhoods only)", frac(r.epsilon)},
      {"epsilon (term neighbourhoods)", frac(r.per_term_epsilon)},
      {"alpha1 min", frac(r.alpha1_min)},
      {"gamma = 2kd*eps", num(r.gamma)},
      {"|R_bad| / m", std::to_string(r.r_bad) + "/" + std::to_string(r.m) + " (" + num(r.ratio) + ")"},
      {"bound", !r.bound_applicable ? "not applicable (eps >= 1/2)" : (r.bound_holds ? "holds" : "VIOLATED")},
      {"penalty shares", num(r.ledger_sum) + (r.fact2_holds ? "  (all within 2*eps*D_q)" : "  (share above 2*eps*D_q)")},
      {"iterations", std::to_string(r.T)},
      {"E_kept", num(r.E_kept)},
      {"certified interval", "[" + num(r.interval.first) + ", " + num(r.interval.second) + "]"},
      {"witness", r.verified ? "accepted" : "rejected"},
      {"oracle lambda", r.lambda ? num(*r.lambda) : "-"},
      {"circuit", r.circuit_emitted ? "emitted" : "-"},
      {"<psi|H|psi>", r.state_energy ? num(*r.state_energy) : "-"},
  };
  std::size_t w = 0;
  for (const auto& [k, v] : rows) w = std::max(w, k.size());
  std::ostringstream out;
  for (const auto& [k, v] : rows) out << std::left << std::setw(static_cast<int>(w) + 2) << k << v << "\n";
  return out.str();
}

}  // namespace clh

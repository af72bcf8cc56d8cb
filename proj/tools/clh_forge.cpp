// clh-forge: command-line front end.
//
// Exit codes: 0 success / accept, 1 reject or violation, 2 malformed input.

#include <clh/clh.hpp>

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>

namespace {

constexpr int kOk = 0;
constexpr int kReject = 1;
constexpr int kMalformed = 2;

struct Malformed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

clh::CLHInstance load(const std::string& path) {
  std::string bytes;
  try {
    bytes = clh::read_file(path);
  } catch (const clh::Error& e) {
    throw Malformed(e.what());
  }
  try {
    auto loaded = clh::load_instance(bytes);
    for (const auto& p : loaded.pruned)
      std::cerr << "note: term " << p.term << " acts trivially on qudit " << p.qudit << "; dropped from its support\n";
    return std::move(loaded.instance);
  } catch (const clh::SchemaError& e) {
    throw Malformed(path + ": " + e.what());
  }
}

clh::Witness load_w(const std::string& path) {
  try {
    return clh::load_witness(clh::read_file(path));
  } catch (const clh::Error& e) {
    throw Malformed(path + ": " + e.what());
  }
}

std::string fmt(double v, int prec = 10) {
  if (std::abs(v) < 1e-12) v = 0.0;  // print rounding noise around zero as 0
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

int cmd_validate(const std::string& file) {
  const auto inst = load(file);
  const auto rep = clh::validate_instance(inst);
  std::cout << "qudits " << inst.n() << "  terms " << inst.m() << "  k " << inst.k() << "  d " << inst.d() << "\n";
  std::cout << "commuting    " << (rep.commuting ? "yes" : "no") << "\n";
  std::cout << "projective   " << (rep.projective ? "yes" : "no") << "\n";
  std::cout << "locality     " << (rep.locality_ok ? "ok" : "exceeds k") << "\n";
  for (const auto& v : rep.offending_pairs)
    std::cout << "  [" << v.a << ", " << v.b << "] commutator norm " << fmt(v.norm, 6) << "\n";
  for (auto id : rep.non_projective_terms) std::cout << "  term " << id << " is not a Hermitian projection\n";
  for (const auto& t : rep.trivial_factors) std::cout << "  term " << t.term << " acts trivially on qudit " << t.qudit << "\n";
  std::cout << (rep.accepted() ? "accepted" : "rejected") << "\n";
  return rep.accepted() ? kOk : kReject;
}

clh::CLHInstance load_valid(const std::string& file) {
  auto inst = load(file);
  if (!clh::validate_instance(inst).accepted()) throw clh::Error(file + ": instance fails validation (run `validate` for details)");
  return inst;
}

int cmd_expansion(const std::string& file, int k, std::uint64_t budget, const std::string& json_out) {
  const auto inst = load_valid(file);
  const auto g = clh::build_interaction_graph(inst);
  const auto rep = clh::local_expansion_error(g, k > 0 ? k : std::max(1, inst.k()), {budget});
  clh::json j;
  j["epsilon"] = rep.epsilon.value();
  j["epsilon_exact"] = {rep.epsilon.num, rep.epsilon.den};
  j["exhaustive"] = rep.exhaustive;
  j["worst_set"] = rep.worst_set;
  j["alpha1_min"] = rep.alpha1_min.value();
  j["per_term_epsilon"] = rep.per_term_epsilon.value();
  j["sets_audited"] = rep.sets_audited;
  j["per_term"] = clh::json::array();
  for (const auto& t : rep.per_term) j["per_term"].push_back({{"term", t.term}, {"epsilon", t.epsilon.value()}, {"penalty", t.penalty}});

  std::cout << "epsilon " << rep.epsilon.num << "/" << rep.epsilon.den << " = " << fmt(rep.epsilon.value(), 6)
            << (rep.exhaustive ? "  (exhaustive)" : "  (term neighbourhoods only)") << "\n";
  std::cout << "worst set {";
  for (std::size_t i = 0; i < rep.worst_set.size(); ++i) std::cout << (i ? ", " : "") << rep.worst_set[i];
  std::cout << "}\nalpha1 min " << fmt(rep.alpha1_min.value(), 6) << "\n\n";
  std::cout << std::left << std::setw(8) << "term" << std::setw(12) << "epsilon" << "penalty\n";
  for (const auto& t : rep.per_term)
    std::cout << std::left << std::setw(8) << t.term << std::setw(12) << fmt(t.epsilon.value(), 6) << t.penalty << "\n";
  if (!json_out.empty()) clh::write_file(json_out, j.dump(2) + "\n");
  return kOk;
}

clh::PipelineOptions pipeline_options(std::uint64_t seed, const std::string& method) {
  clh::PipelineOptions opt;
  opt.seed = seed;
  if (method == "first-block") opt.first_block = true;
  else if (method == "overlap") opt.prover.method = clh::ProverOptions::Method::ProjectorOverlap;
  else if (method == "sector") opt.prover.method = clh::ProverOptions::Method::SectorEnergy;
  else if (method != "auto") throw Malformed("unknown --method '" + method + "'");
  return opt;
}

int cmd_isolate(const std::string& file, const std::string& out, std::uint64_t seed, const std::string& method) {
  const auto inst = load_valid(file);
  const auto opt = pipeline_options(seed, method);
  const auto oracle = opt.first_block ? clh::first_block_oracle() : clh::ground_sector_prover(opt.prover);
  const auto res = clh::run_isolation(inst, oracle, {seed, opt.expansion});
  clh::write_file(out, clh::save_witness(res.witness));
  const auto& led = res.ledger;
  std::cout << "steps " << res.run.T() << "  removed " << led.removed_total << "/" << inst.m() << "  E_kept " << fmt(res.run.kept_energy) << "\n";
  std::cout << "epsilon " << fmt(led.epsilon.value(), 6) << "  gamma " << fmt(led.gamma(), 6) << "  bound "
            << (!led.bound_applicable() ? "not applicable" : led.bound_holds() ? "holds" : "VIOLATED") << "\n";
  return led.bound_applicable() && !led.bound_holds() ? kReject : kOk;
}

int cmd_verify(const std::string& file, const std::string& wfile) {
  const auto w = load_w(wfile);
  const auto inst = load_valid(file);
  const auto v = clh::verify_witness(inst, w);
  if (!v.accepted) {
    std::cout << "reject: check " << clh::check_name(v.failed);
    if (v.failed_step > 0) std::cout << " at step " << v.failed_step;
    std::cout << ": " << v.message << "\n";
    return kReject;
  }
  std::cout << "accept\ninterval [" << fmt(v.interval.first) << ", " << fmt(v.interval.second) << "]\n";
  return kOk;
}

int cmd_oracle(const std::string& file) {
  const auto inst = load_valid(file);
  clh::OracleOptions opt;
  std::cout << "dimension " << inst.total_dimension() << "\n";
  if (inst.total_dimension() <= opt.dense_limit) {
    const auto s = clh::full_spectrum(inst, opt);
    std::cout << "lambda " << fmt(s.ground_energy) << "\ndegeneracy " << s.ground_degeneracy << "\neigenvalues";
    for (std::size_t i = 0; i < std::min<std::size_t>(16, s.eigenvalues.size()); ++i) std::cout << " " << fmt(s.eigenvalues[i], 8);
    const bool integral = clh::integrality_check(s, inst.m());
    std::cout << "\nintegrality " << (integral ? "ok" : "FAILED") << "\n";
    return integral ? kOk : kReject;
  }
  std::cout << "lambda " << fmt(clh::ground_energy(inst, opt)) << "\n(degeneracy and spectrum need dimension <= "
            << opt.dense_limit << ")\n";
  return kOk;
}

int cmd_circuit(const std::string& file, const std::string& wfile, const std::string& state_out) {
  const auto w = load_w(wfile);
  const auto inst = load_valid(file);
  const auto v = clh::verify_witness(inst, w);
  if (!v.accepted) {
    std::cout << "reject: " << v.message << "\n";
    return kReject;
  }
  const auto c = clh::build_circuit(v.state);
  std::cout << "depth " << c.depth() << "\nlayer 1:";
  for (const auto& g : c.layer1) {
    std::cout << "\n  qudit " << g.qudit << ": slots [";
    for (std::size_t i = 0; i < g.slot_dims.size(); ++i) std::cout << (i ? " " : "") << g.slot_dims[i];
    std::cout << "]";
  }
  std::cout << "\nlayer 2:";
  for (const auto& g : c.layer2) {
    std::cout << "\n  term " << g.term << (g.isolated ? " (isolated)" : " (final)") << " on";
    for (const auto& s : g.slots) std::cout << " " << s.qudit << "." << s.index;
    std::cout << "  energy " << fmt(g.energy, 8);
  }
  std::cout << "\n";
  if (!state_out.empty()) {
    const auto psi = clh::apply_circuit(c, inst);
    const double e = clh::energy_of_state(inst, psi);
    std::cout << "<psi|H|psi> " << fmt(e) << "\n";
    clh::json j;
    j["dims"] = inst.dims();
    j["energy"] = e;
    j["amplitudes"] = clh::json::array();
    for (Eigen::Index i = 0; i < psi.amplitudes.size(); ++i)
      j["amplitudes"].push_back({psi.amplitudes(i).real(), psi.amplitudes(i).imag()});
    clh::write_file(state_out, j.dump() + "\n");
  }
  return kOk;
}

int cmd_report(const std::string& file, std::uint64_t seed, const std::string& method, const std::string& json_out) {
  const auto inst = load_valid(file);
  const auto res = clh::run_pipeline(inst, pipeline_options(seed, method));
  std::cout << clh::report_to_text(res.report);
  if (!json_out.empty()) clh::write_file(json_out, clh::report_to_json(res.report).dump(2) + "\n");
  const auto& r = res.report;
  const bool bad = !r.verified || (r.bound_applicable && !r.bound_holds);
  return bad ? kReject : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Commuting local Hamiltonian toolkit: expansion audit, term isolation, witnesses, depth-2 circuits."};
  app.require_subcommand(1);

  std::string file, wfile, out, json_out, method = "auto";
  std::uint64_t seed = 1;
  int k = 0;
  std::uint64_t budget = 10'000'000;

  auto* validate = app.add_subcommand("validate", "Check commutation, projectivity and locality");
  validate->add_option("file", file, "instance document")->required();

  auto* expansion = app.add_subcommand("expansion", "Audit local expansion of the interaction graph");
  expansion->add_option("file", file)->required();
  expansion->add_option("--k", k, "largest subset size (default: instance k)");
  expansion->add_option("--budget", budget, "subset budget for exhaustive enumeration");
  expansion->add_option("--json", json_out, "write the structured report here");

  auto* isolate = app.add_subcommand("isolate", "Run term isolation and write a witness");
  isolate->add_option("file", file)->required();
  isolate->add_option("--witness", out, "witness output")->required();
  isolate->add_option("--seed", seed);
  isolate->add_option("--method", method, "auto | overlap | sector | first-block");

  auto* verify = app.add_subcommand("verify", "Verify a witness; prints the certified interval");
  verify->add_option("file", file)->required();
  verify->add_option("witness", wfile)->required();

  auto* oracle = app.add_subcommand("oracle", "Exact ground energy and low spectrum");
  oracle->add_option("file", file)->required();

  auto* circuit = app.add_subcommand("circuit", "Emit the depth-2 circuit of a verified witness");
  circuit->add_option("file", file)->required();
  circuit->add_option("witness", wfile)->required();
  circuit->add_option("--state", out, "write the prepared state here");

  auto* gen = app.add_subcommand("gen", "Generate an instance");
  std::string kind;
  clh::json params = clh::json::object();
  int L = 2, n = 0, gk = 0, m = 0, count = 0, degree = 0, cap = 0, d = 0, forbidden = 0;
  std::string mode, base;
  int drop = 0, extra = 0;
  bool planted = false;
  gen->add_option("kind", kind, "toric | csp | pauli | design")->required();
  gen->add_option("--L", L);
  gen->add_option("--n", n);
  gen->add_option("--k", gk);
  gen->add_option("--m", m, "clauses (csp)");
  gen->add_option("--count", count, "terms (pauli)");
  gen->add_option("--degree", degree);
  gen->add_option("--overlap-cap", cap);
  gen->add_option("--d", d);
  gen->add_option("--mode", mode, "diag | pauli (design)");
  gen->add_option("--max-forbidden", forbidden, "forbidden assignments per term (design, diag mode)");
  gen->add_option("--base", base, "random | projective (design)");
  gen->add_option("--drop", drop, "projective lines to remove (design)");
  gen->add_option("--extra", extra, "random supports added to a projective base (design)");
  gen->add_flag("--planted", planted, "every clause accepts a hidden assignment (design, diag mode)");
  gen->add_option("--seed", seed);
  gen->add_option("--out", out)->required();

  auto* report = app.add_subcommand("report", "Full pipeline with a run report");
  report->add_option("file", file)->required();
  report->add_option("--seed", seed);
  report->add_option("--method", method, "auto | overlap | sector | first-block");
  report->add_option("--json", json_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kMalformed;
  }

  try {
    if (*validate) return cmd_validate(file);
    if (*expansion) return cmd_expansion(file, k, budget, json_out);
    if (*isolate) return cmd_isolate(file, out, seed, method);
    if (*verify) return cmd_verify(file, wfile);
    if (*oracle) return cmd_oracle(file);
    if (*circuit) return cmd_circuit(file, wfile, out);
    if (*report) return cmd_report(file, seed, method, json_out);
    if (*gen) {
      auto set = [&](const char* key, auto v, bool given) {
        if (given) params[key] = v;
      };
      set("L", L, gen->count("--L") > 0);
      set("n", n, gen->count("--n") > 0);
      set("k", gk, gen->count("--k") > 0);
      set("m", m, gen->count("--m") > 0);
      set("count", count, gen->count("--count") > 0);
      set("degree", degree, gen->count("--degree") > 0);
      set("overlap_cap", cap, gen->count("--overlap-cap") > 0);
      set("d", d, gen->count("--d") > 0);
      set("mode", mode, gen->count("--mode") > 0);
      set("max_forbidden", forbidden, gen->count("--max-forbidden") > 0);
      set("planted", planted, planted);
      set("base", base, gen->count("--base") > 0);
      set("drop", drop, gen->count("--drop") > 0);
      set("extra", extra, gen->count("--extra") > 0);
      const auto inst = clh::generate({kind, params, seed});
      clh::write_file(out, clh::save_instance(inst));
      std::cout << "wrote " << out << ": " << inst.n() << " qudits, " << inst.m() << " terms\n";
      return kOk;
    }
  } catch (const Malformed& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMalformed;
  } catch (const clh::GeneratorError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMalformed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kReject;
  }
  return kOk;
}

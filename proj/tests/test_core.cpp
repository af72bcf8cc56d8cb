#include <clh/clh.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace clh;

namespace {

Mat pauli_x() {
  Mat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
Mat pauli_z() {
  Mat m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}
Mat ket_proj(int d, int i) {
  Mat m = Mat::Zero(d, d);
  m(i, i) = 1;
  return m;
}
Mat random_matrix(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = cplx(g(rng), g(rng));
  return m;
}

CLHInstance qubits(int n) {
  CLHInstance inst;
  for (int q = 0; q < n; ++q) inst.qudits.push_back({q, 2});
  return inst;
}

// (I - XX)/2 on (0,1) and (I - ZZ)/2 on (1,2)
CLHInstance xz_overlap() {
  CLHInstance inst = qubits(3);
  const Mat i4 = Mat::Identity(4, 4);
  inst.terms.push_back({0, {0, 1}, 0.5 * (i4 - kron(pauli_x(), pauli_x()))});
  inst.terms.push_back({1, {1, 2}, 0.5 * (i4 - kron(pauli_z(), pauli_z()))});
  return inst;
}

}  // namespace

// ---------------------------------------------------------------- linalg

TEST(Linalg, PartialTraceOfProductIsScaledFactor) {
  std::mt19937_64 rng(3);
  const Mat a = random_matrix(2, rng), b = random_matrix(3, rng);
  const std::vector<int> dims{2, 3};
  EXPECT_LT((partial_trace_site(kron(a, b), dims, 0) - a.trace() * b).norm(), 1e-12);
  EXPECT_LT((partial_trace_site(kron(a, b), dims, 1) - b.trace() * a).norm(), 1e-12);
}

TEST(Linalg, PermuteSitesSwapsKroneckerFactors) {
  std::mt19937_64 rng(4);
  const Mat a = random_matrix(2, rng), b = random_matrix(3, rng), c = random_matrix(2, rng);
  const std::vector<int> dims{2, 3, 2}, perm{2, 0, 1};
  EXPECT_LT((permute_sites(kron(kron(a, b), c), dims, perm) - kron(kron(c, a), b)).norm(), 1e-12);
}

TEST(Linalg, ConjugateSiteWithRectangularMap) {
  std::mt19937_64 rng(5);
  const Mat m = random_matrix(6, rng);
  const Mat v = random_matrix(3, rng).topRows(2);  // 2 x 3
  const std::vector<int> dims{2, 3};
  const Mat full = kron(Mat::Identity(2, 2), v);
  EXPECT_LT((conjugate_site(m, dims, 1, v) - full * m * full.adjoint()).norm(), 1e-11);
}

TEST(Linalg, ApplyLocalMatchesEmbeddedOperator) {
  std::mt19937_64 rng(6);
  const std::vector<int> dims{2, 3, 2};
  const std::vector<int> support{0, 2}, sdims{2, 2};
  const Mat m = random_matrix(4, rng);
  Vec x = Vec::Random(12);
  Vec y = Vec::Zero(12);
  apply_local(x, y, dims, support, m);
  const std::vector<int> all{0, 1, 2};
  const Mat big = embed_operator(m, support, sdims, all, dims);
  EXPECT_LT((y - big * x).norm(), 1e-12);
}

TEST(Linalg, ApplySiteMapMatchesKron) {
  std::mt19937_64 rng(7);
  const std::vector<int> dims{3, 2};
  const Mat v = random_matrix(4, rng).leftCols(2);  // 4 x 2
  Vec x = Vec::Random(6);
  EXPECT_LT((apply_site_map(x, dims, 1, v) - kron(Mat::Identity(3, 3), v) * x).norm(), 1e-12);
}

// ---------------------------------------------------------------- model

TEST(Model, DisjointSupportsCommute) {
  CLHInstance inst = qubits(2);
  inst.terms.push_back({0, {0}, ket_proj(2, 0)});
  inst.terms.push_back({1, {1}, ket_proj(2, 1)});
  EXPECT_TRUE(validate_instance(inst).commuting);
}

TEST(Model, DiagonalProjectorsCommute) {
  CLHInstance inst = qubits(3);
  inst.terms.push_back({0, {0, 1}, ket_proj(4, 0)});
  inst.terms.push_back({1, {1, 2}, ket_proj(4, 0)});
  const auto rep = validate_instance(inst);
  EXPECT_TRUE(rep.commuting);
  EXPECT_TRUE(rep.accepted());
}

TEST(Model, XZOverlapDoesNotCommute) {
  const auto rep = validate_instance(xz_overlap());
  EXPECT_FALSE(rep.commuting);
  ASSERT_EQ(rep.offending_pairs.size(), 1u);
  EXPECT_EQ(rep.offending_pairs[0].a, 0);
  EXPECT_EQ(rep.offending_pairs[0].b, 1);
  // numpy: ||[A, B]||_F = sqrt(2)
  EXPECT_NEAR(rep.offending_pairs[0].norm, std::sqrt(2.0), 1e-12);
}

TEST(Model, MalformedMatrixNamesTerm) {
  CLHInstance inst = qubits(2);
  inst.terms.push_back({7, {0, 1}, Mat::Identity(2, 2)});
  try {
    validate_instance(inst);
    FAIL() << "expected StructuralError";
  } catch (const StructuralError& e) {
    EXPECT_NE(std::string(e.what()).find("term 7"), std::string::npos);
  }
}

TEST(Model, NonProjectiveFlagged) {
  CLHInstance inst = qubits(1);
  inst.terms.push_back({0, {0}, 0.5 * Mat::Identity(2, 2) + 0.1 * pauli_x()});
  const auto rep = validate_instance(inst);
  EXPECT_FALSE(rep.projective);
  EXPECT_FALSE(rep.accepted());
}

TEST(Model, EnergyOfBasisStates) {
  CLHInstance inst = qubits(1);
  inst.terms.push_back({0, {0}, ket_proj(2, 0)});
  Vec one(2), zero(2);
  one << 0, 1;
  zero << 1, 0;
  EXPECT_NEAR(energy_of_state(inst, {one}), 0.0, 1e-15);
  EXPECT_NEAR(energy_of_state(inst, {zero}), 1.0, 1e-15);
}

TEST(Model, EnergyCountsViolatedClauses) {
  // forbid 00 on (0,1), 11 on (1,2), 1 on (2)
  CLHInstance inst = qubits(3);
  inst.terms.push_back({0, {0, 1}, ket_proj(4, 0)});
  inst.terms.push_back({1, {1, 2}, ket_proj(4, 3)});
  inst.terms.push_back({2, {2}, ket_proj(2, 1)});
  const int expected[8] = {1, 2, 0, 2, 0, 1, 0, 2};  // enumerated by hand (tests/oracle_values.py)
  for (int s = 0; s < 8; ++s) {
    Vec psi = Vec::Zero(8);
    psi(s) = 1;
    EXPECT_NEAR(energy_of_state(inst, {psi}), expected[s], 1e-14) << "state " << s;
  }
}

TEST(Model, EnergyDimensionMismatchThrows) {
  CLHInstance inst = qubits(2);
  inst.terms.push_back({0, {0}, ket_proj(2, 0)});
  EXPECT_THROW(energy_of_state(inst, {Vec::Zero(3)}), Error);
}

TEST(Model, EnergyIndependentOfTermOrder) {
  auto inst = gen_commuting_pauli(6, 3, 8, 11);
  std::mt19937_64 rng(2);
  Vec psi = Vec::Zero(64);
  std::normal_distribution<double> g;
  for (Eigen::Index i = 0; i < 64; ++i) psi(i) = cplx(g(rng), g(rng));
  psi.normalize();
  const double e1 = energy_of_state(inst, {psi});
  std::reverse(inst.terms.begin(), inst.terms.end());
  EXPECT_NEAR(energy_of_state(inst, {psi}), e1, 1e-12);
  EXPECT_GE(e1, 0.0);
  EXPECT_LE(e1, inst.m());
}

TEST(Model, DetectTrivialFactor) {
  LocalTerm t{0, {0, 1}, kron(Mat::Identity(2, 2), ket_proj(2, 0))};
  const std::vector<int> dims{2, 2};
  EXPECT_TRUE(detect_trivial_factor(t, dims, 0));
  EXPECT_FALSE(detect_trivial_factor(t, dims, 1));

  LocalTerm p{1, {0, 1}, ket_proj(4, 0)};
  EXPECT_FALSE(detect_trivial_factor(p, dims, 0));

  const Mat zz = 0.5 * (Mat::Identity(4, 4) - kron(pauli_z(), pauli_z()));
  LocalTerm z{2, {3, 5}, zz};
  EXPECT_FALSE(detect_trivial_factor(z, dims, 3));
  EXPECT_FALSE(detect_trivial_factor(z, dims, 5));
  // numpy: residual of (I - ZZ)/2 against Tr/2 (x) I is exactly 1
  EXPECT_NEAR(trivial_residual(zz, dims, 0), 1.0, 1e-12);
}

// ---------------------------------------------------------------- io

TEST(Io, MinimalDocument) {
  const auto inst = load_instance(R"({"version":1,"qudits":[{"id":0,"dim":2}],
      "terms":[{"id":0,"support":[0],"matrix":[[1,0],[0,0],[0,0],[0,0]]}]})").instance;
  EXPECT_EQ(inst.n(), 1);
  EXPECT_EQ(inst.m(), 1);
}

TEST(Io, NonHermitianLoadsButFailsValidation) {
  const auto inst = load_instance(R"({"version":1,"qudits":[{"id":0,"dim":2}],
      "terms":[{"id":0,"support":[0],"matrix":[[1,0],[1,0],[0,0],[0,0]]}]})").instance;
  EXPECT_FALSE(validate_instance(inst).projective);
}

TEST(Io, SchemaErrorsCarryPaths) {
  auto path_of = [](const std::string& doc) {
    try {
      load_instance(doc);
    } catch (const SchemaError& e) {
      return e.path();
    }
    return std::string("<none>");
  };
  EXPECT_EQ(path_of(R"({"version":1,"qudits":[{"id":0}],"terms":[]})"), "/qudits/0/dim");
  EXPECT_EQ(path_of(R"({"version":1,"qudits":[{"id":0,"dim":2}],"terms":[{"id":0,"support":[3],"matrix":[]}]})"),
            "/terms/0/support/0");
  EXPECT_EQ(path_of(R"({"version":1,"qudits":[{"id":0,"dim":2}],"terms":[{"id":0,"support":[0],"matrix":[[1,0]]}]})"),
            "/terms/0/matrix");
  EXPECT_EQ(path_of(R"({"version":2,"qudits":[],"terms":[]})"), "/version");
  EXPECT_EQ(path_of("{not json"), "");
}

TEST(Io, LoadSortsSupportAndPrunesIdentityFactors) {
  // |0><0| on qudit 1 (x) I on qudit 0, listed with support [1, 0]
  CLHInstance raw = qubits(2);
  raw.terms.push_back({0, {1, 0}, kron(ket_proj(2, 0), Mat::Identity(2, 2))});
  const auto loaded = load_instance(save_instance(raw));
  ASSERT_EQ(loaded.pruned.size(), 1u);
  EXPECT_EQ(loaded.pruned[0].qudit, 0);
  EXPECT_EQ(loaded.instance.terms[0].support, std::vector<QuditId>{1});
  EXPECT_LT((loaded.instance.terms[0].matrix - ket_proj(2, 0)).norm(), 1e-15);
}

TEST(Io, SaveLoadSaveIsFixedPoint) {
  const auto inst = gen_commuting_pauli(5, 3, 6, 9);
  const auto once = save_instance(inst);
  const auto twice = save_instance(load_instance(once).instance);
  EXPECT_EQ(once, twice);
}

TEST(Io, ToricRoundTrip) {
  const auto inst = load_instance(save_instance(gen_toric(2))).instance;
  EXPECT_EQ(inst.n(), 8);
  EXPECT_EQ(inst.m(), 8);
}

// ---------------------------------------------------------------- graph

TEST(Graph, SingleTerm) {
  CLHInstance inst = qubits(3);
  inst.terms.push_back({0, {0, 1, 2}, ket_proj(8, 0)});
  const auto g = build_interaction_graph(inst);
  for (int q = 0; q < 3; ++q) EXPECT_EQ(g.degree(q), 1);
  EXPECT_EQ(g.qudits_of(0).size(), 3u);
}

TEST(Graph, ToricL2Degrees) {
  const auto g = build_interaction_graph(gen_toric(2));
  EXPECT_EQ(g.num_left(), 8);
  EXPECT_EQ(g.num_right(), 8);
  for (int q = 0; q < 8; ++q) EXPECT_EQ(g.degree(q), 4);
  for (const auto& [t, qs] : g.right()) EXPECT_EQ(qs.size(), 4u);
}

TEST(Graph, IdentityFactorHasNoEdge) {
  CLHInstance inst = qubits(2);
  inst.terms.push_back({0, {0, 1}, kron(Mat::Identity(2, 2), ket_proj(2, 0))});
  const auto g = build_interaction_graph(inst);
  EXPECT_EQ(g.degree(0), 0);
  EXPECT_EQ(g.degree(1), 1);
}

TEST(Graph, NeighborSets) {
  const auto inst = gen_toric(3);
  const auto g = build_interaction_graph(inst);
  EXPECT_TRUE(neighbor_set(g, {}).empty());
  EXPECT_EQ(neighbor_set(g, {4}), g.terms_of(4));
  // plaquette 9 (first plaquette): itself + 4 stars + 4 adjacent plaquettes
  EXPECT_EQ(neighbor_set(g, g.qudits_of(9)).size(), 9u);
  EXPECT_THROW(neighbor_set(g, {18}), Error);
}

TEST(Graph, ExpansionDisjointTerms) {
  CLHInstance inst = qubits(4);
  inst.terms.push_back({0, {0, 1}, ket_proj(4, 0)});
  inst.terms.push_back({1, {2, 3}, ket_proj(4, 0)});
  const auto g = build_interaction_graph(inst);
  const auto one = local_expansion_error(g, 1);
  EXPECT_EQ(one.epsilon.num, 0);
  EXPECT_TRUE(one.exhaustive);
  // {0, 1} has degree sum 2 and a single neighbour
  const auto two = local_expansion_error(g, 2);
  EXPECT_EQ(two.epsilon, (Rational{1, 2}));
  EXPECT_EQ(two.worst_set, (std::vector<QuditId>{0, 1}));
}

TEST(Graph, ExpansionIdenticalSupports) {
  for (int k = 2; k <= 4; ++k) {
    CLHInstance inst = qubits(k);
    std::vector<QuditId> sup(static_cast<std::size_t>(k));
    std::iota(sup.begin(), sup.end(), 0);
    const auto side = 1 << k;
    inst.terms.push_back({0, sup, ket_proj(side, 0)});
    inst.terms.push_back({1, sup, ket_proj(side, 1)});
    const auto g = build_interaction_graph(inst);
    const auto rep = local_expansion_error(g, k);
    EXPECT_EQ(rep.epsilon, (Rational{k - 1, k}));
    EXPECT_EQ(rep.worst_set, sup);
    EXPECT_DOUBLE_EQ(degree_one_fraction(g, sup), 0.0);
    EXPECT_EQ(isolation_penalty(g, 0).count, 1);
    EXPECT_EQ(isolation_penalty(g, 1).removal_set, std::vector<TermId>{0});
  }
}

TEST(Graph, ToricL3BruteForce) {
  const auto g = build_interaction_graph(gen_toric(3));
  const auto rep = local_expansion_error(g, 4);
  // itertools enumeration of all 4047 subsets (tests/oracle_values.py)
  EXPECT_EQ(rep.epsilon, (Rational{7, 16}));
  EXPECT_EQ(rep.worst_set, (std::vector<QuditId>{0, 1, 10, 16}));
  EXPECT_EQ(rep.alpha1_min, (Rational{4, 10}));
  EXPECT_EQ(rep.sets_audited, 4047u);
  for (TermId t = 9; t < 18; ++t) EXPECT_EQ(isolation_penalty(g, t).count, 4);
}

TEST(Graph, SingletonFractionIsOne) {
  const auto g = build_interaction_graph(gen_toric(2));
  EXPECT_DOUBLE_EQ(degree_one_fraction(g, {3}), 1.0);
  const auto rep = local_expansion_error(g, 1);
  EXPECT_EQ(rep.epsilon.num, 0);
}

TEST(Graph, BudgetFallbackAuditsNeighbourhoods) {
  const auto g = build_interaction_graph(gen_toric(3));
  const auto rep = local_expansion_error(g, 4, {100});
  EXPECT_FALSE(rep.exhaustive);
  EXPECT_EQ(rep.epsilon, rep.per_term_epsilon);
  EXPECT_FALSE(rep.epsilon < (Rational{1, 4}));
}

TEST(Graph, FactOneOnRandomDesigns) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    DesignSpec s;
    s.n = 12;
    s.k = 3;
    s.degree = 3;
    s.overlap_cap = 2;
    s.seed = seed;
    const auto g = build_interaction_graph(gen_design_expander(s));
    for_each_subset(g.num_left(), 3, [&](const std::vector<QuditId>& S) {
      const auto st = subset_stats(g, S);
      ASSERT_LE(st.gamma, st.sum_degree);
      const Rational e = st.epsilon();
      if (!e.below_half()) return;
      // alpha1 >= 1 - 2 eps  <=>  g1 * D >= g * (D - 2 (D - g))
      EXPECT_GE(st.gamma1 * e.den, st.gamma * (e.den - 2 * e.num));
    });
  }
}

TEST(Graph, PenaltyMonotoneUnderDeletion) {
  std::mt19937_64 rng(17);
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    DesignSpec s;
    s.n = 10;
    s.k = 3;
    s.degree = 3;
    s.overlap_cap = 2;
    s.seed = seed;
    auto g = build_interaction_graph(gen_design_expander(s));
    while (g.num_right() > 1) {
      std::map<TermId, int> before;
      for (const auto& [t, qs] : g.right()) before[t] = isolation_penalty(g, t).count;
      std::vector<TermId> ids;
      for (const auto& [t, qs] : g.right()) ids.push_back(t);
      const TermId victim = ids[rng() % ids.size()];
      if (rng() % 2 && !g.qudits_of(victim).empty()) g.remove_edge(g.qudits_of(victim).front(), victim);
      else g.remove_right(victim);
      for (const auto& [t, qs] : g.right()) EXPECT_LE(isolation_penalty(g, t).count, before[t]);
    }
  }
}

TEST(Graph, CountSubsets) {
  EXPECT_EQ(count_subsets(18, 4), 4047u);
  EXPECT_EQ(count_subsets(3, 5), 7u);
  EXPECT_EQ(count_subsets(1'000'000, 6), std::numeric_limits<std::uint64_t>::max());
}

// ---------------------------------------------------------------- oracle

TEST(Oracle, AssembleSingleProjector) {
  CLHInstance inst = qubits(1);
  inst.terms.push_back({0, {0}, ket_proj(2, 0)});
  const Mat h = assemble(inst).dense();
  EXPECT_LT((h - ket_proj(2, 0)).norm(), 1e-15);
}

TEST(Oracle, DiagonalClausesCountViolations) {
  CLHInstance inst = qubits(3);
  inst.terms.push_back({0, {0, 1}, ket_proj(4, 0)});
  inst.terms.push_back({1, {1, 2}, ket_proj(4, 3)});
  inst.terms.push_back({2, {2}, ket_proj(2, 1)});
  const Mat h = assemble(inst).dense();
  const int expected[8] = {1, 2, 0, 2, 0, 1, 0, 2};
  for (int s = 0; s < 8; ++s) EXPECT_NEAR(h(s, s).real(), expected[s], 1e-15);
  EXPECT_LT((h - Mat(h.diagonal().asDiagonal())).norm(), 1e-15);
}

TEST(Oracle, ToricL2) {
  const auto inst = gen_toric(2);
  EXPECT_EQ(assemble(inst).dimension(), 256u);
  const auto s = full_spectrum(inst);
  EXPECT_NEAR(s.ground_energy, 0.0, 1e-9);
  EXPECT_EQ(s.ground_degeneracy, 4);
  EXPECT_TRUE(integrality_check(s, inst.m()));
  const Mat p = ground_projector(inst);
  EXPECT_NEAR(p.trace().real(), 4.0, 1e-9);
}

TEST(Oracle, ContradictoryProjectors) {
  CLHInstance inst = qubits(1);
  inst.terms.push_back({0, {0}, ket_proj(2, 0)});
  inst.terms.push_back({1, {0}, ket_proj(2, 1)});
  inst.terms.push_back({2, {0}, ket_proj(2, 0)});
  EXPECT_NEAR(ground_energy(inst), 1.0, 1e-12);
}

TEST(Oracle, NonCommutingSpectrumIsNotIntegral) {
  const auto s = full_spectrum(xz_overlap());
  // numpy: eigenvalues 1 -/+ 1/sqrt(2), each four-fold
  EXPECT_NEAR(s.ground_energy, 1.0 - 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_FALSE(integrality_check(s, 2));
}

TEST(Oracle, EmptyInstance) {
  CLHInstance inst;
  const auto s = full_spectrum(inst);
  ASSERT_EQ(s.eigenvalues.size(), 1u);
  EXPECT_EQ(s.eigenvalues[0], 0.0);
  EXPECT_TRUE(integrality_check(s, 0));
}

TEST(Oracle, BudgetEnforced) {
  CLHInstance inst = qubits(15);
  OracleOptions opt;
  EXPECT_THROW(assemble(inst, opt), BudgetExceeded);
  opt.budget = 1 << 15;
  EXPECT_NO_THROW(assemble(inst, opt));
}

TEST(Oracle, LanczosAgreesWithDense) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    DesignSpec s;
    s.n = 10;
    s.k = 3;
    s.degree = 3;
    s.overlap_cap = 2;
    s.max_forbidden = 4;
    s.seed = seed;
    const auto inst = gen_design_expander(s);
    OracleOptions dense, iter;
    dense.dense_limit = 1 << 11;
    iter.dense_limit = 2;
    EXPECT_NEAR(ground_energy(inst, dense), ground_energy(inst, iter), 1e-8);
  }
}

TEST(Oracle, SubsetMonotonicity) {
  std::mt19937_64 rng(23);
  const auto inst = gen_commuting_pauli(8, 4, 12, 5);
  const double full = ground_energy(inst);
  for (int trial = 0; trial < 10; ++trial) {
    CLHInstance sub = inst;
    sub.terms.clear();
    for (const auto& t : inst.terms)
      if (rng() % 2) sub.terms.push_back(t);
    EXPECT_LE(ground_energy(sub), full + 1e-9);
  }
}

TEST(Oracle, IntegralityOnGeneratedCorpus) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inst = gen_commuting_pauli(8, 4, 10, seed);
    ASSERT_TRUE(validate_instance(inst).accepted());
    EXPECT_TRUE(integrality_check(full_spectrum(inst), inst.m()));
  }
}

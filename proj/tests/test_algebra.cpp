#include <clh/clh.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace clh;

namespace {

Mat px() {
  Mat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
Mat pz() {
  Mat m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

Mat random_hermitian(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = cplx(g(rng), g(rng));
  return m + m.adjoint();
}

Mat random_unitary_matrix(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = cplx(g(rng), g(rng));
  Eigen::HouseholderQR<Mat> qr(m);
  return qr.householderQ();
}

// rank-r spectral projector of a random Hermitian matrix
Mat random_projector(int n, int r, std::mt19937_64& rng) {
  Eigen::SelfAdjointEigenSolver<Mat> es(random_hermitian(n, rng));
  const Mat v = es.eigenvectors().leftCols(r);
  return v * v.adjoint();
}

void expect_contract(const OperatorAlgebra& alg, const Mat& block, const TensorFactorization& f) {
  const int r = f.d1 * f.d2;
  EXPECT_LT((f.isometry * f.isometry.adjoint() - Mat::Identity(r, r)).norm(), 1e-9);
  EXPECT_LT((f.isometry.adjoint() * f.isometry - block).norm(), 1e-9);
  const std::vector<int> fd{f.d1, f.d2};
  for (const auto& b : alg.basis) EXPECT_LT(trivial_residual(f.isometry * b * f.isometry.adjoint(), fd, 1), 1e-8);
}

}  // namespace

TEST(Closure, Identity) {
  const std::vector<Mat> gens{Mat::Identity(3, 3)};
  EXPECT_EQ(algebra_closure(gens).dimension(), 1);
}

TEST(Closure, SinglePauli) {
  const std::vector<Mat> gens{px()};
  EXPECT_EQ(algebra_closure(gens).dimension(), 2);
}

TEST(Closure, XAndZGenerateFullMatrixAlgebra) {
  const std::vector<Mat> gens{px(), pz()};
  const auto alg = algebra_closure(gens);
  EXPECT_EQ(alg.dimension(), 4);
  EXPECT_LT(alg.residual(px() * pz()), 1e-12);
}

TEST(Closure, IsIdempotentAndOrthonormal) {
  std::mt19937_64 rng(1);
  const Mat p = random_projector(5, 2, rng);
  const std::vector<Mat> gens{p, p * random_hermitian(5, rng) * p};
  const auto alg = algebra_closure(gens);
  const auto again = algebra_closure(alg.basis);
  EXPECT_EQ(again.dimension(), alg.dimension());
  for (std::size_t i = 0; i < alg.basis.size(); ++i)
    for (std::size_t j = 0; j < alg.basis.size(); ++j)
      EXPECT_NEAR(std::abs(detail::hs_inner(alg.basis[i], alg.basis[j])), i == j ? 1.0 : 0.0, 1e-10);
  for (const auto& a : alg.basis)
    for (const auto& b : alg.basis) EXPECT_LT(alg.residual(a * b), 1e-8);
}

TEST(Induced, ProductTermGivesIAndB) {
  std::mt19937_64 rng(2);
  const Mat a = random_projector(2, 1, rng), b = random_projector(3, 1, rng);
  const std::vector<int> dims{2, 3};
  const auto alg = induced_algebra(kron(a, b), dims, 1);
  EXPECT_EQ(alg.dimension(), 2);
  EXPECT_LT(alg.residual(b), 1e-10);
  EXPECT_LT(alg.residual(Mat::Identity(3, 3)), 1e-10);
}

TEST(Induced, DiagonalTermGivesDiagonalAlgebra) {
  Mat m = Mat::Zero(9, 9);
  m(0, 0) = m(4, 4) = m(5, 5) = 1;
  const std::vector<int> dims{3, 3};
  const auto alg = induced_algebra(m, dims, 1);
  for (const auto& b : alg.basis) EXPECT_LT((b - Mat(b.diagonal().asDiagonal())).norm(), 1e-12);
  for (const auto& a : alg.basis)
    for (const auto& b : alg.basis) EXPECT_LT((a * b - b * a).norm(), 1e-10);
  // compressions diag(1,0,0) and diag(0,1,1) plus identity: dimension 2
  EXPECT_EQ(alg.dimension(), 2);
}

TEST(Induced, IdentityActionGivesScalars) {
  std::mt19937_64 rng(3);
  const std::vector<int> dims{2, 3};
  const auto alg = induced_algebra(kron(random_projector(2, 1, rng), Mat::Identity(3, 3)), dims, 1);
  EXPECT_EQ(alg.dimension(), 1);
}

TEST(Induced, QuditNotInSupportThrows) {
  CLHInstance inst;
  inst.qudits = {{0, 2}, {1, 2}};
  LocalTerm t{0, {0}, Mat::Identity(2, 2)};
  EXPECT_THROW(induced_algebra(inst, t, 1), Error);
}

TEST(Center, FullMatrixAlgebraHasScalarCenter) {
  const std::vector<Mat> gens{px(), pz()};
  EXPECT_EQ(algebra_center(algebra_closure(gens)).dimension(), 1);
}

TEST(Center, CommutativeAlgebraIsItsOwnCenter) {
  std::vector<Mat> gens;
  for (int i = 0; i < 3; ++i) {
    Mat e = Mat::Zero(4, 4);
    e(i, i) = 1;
    gens.push_back(e);
  }
  const auto alg = algebra_closure(gens);
  EXPECT_EQ(algebra_center(alg).dimension(), alg.dimension());
}

TEST(Center, M2PlusM1) {
  std::vector<Mat> gens;
  Mat e01 = Mat::Zero(3, 3), e22 = Mat::Zero(3, 3);
  e01(0, 1) = 1;
  e22(2, 2) = 1;
  gens = {e01, e22};
  const auto alg = algebra_closure(gens);
  EXPECT_EQ(alg.dimension(), 5);
  // SVD null space of the commutator system (tests/oracle_values.py)
  EXPECT_EQ(algebra_center(alg).dimension(), 2);

  const auto cd = central_projectors(alg, 1);
  ASSERT_EQ(cd.projectors.size(), 2u);
  std::vector<int> ranks = cd.ranks;
  std::sort(ranks.begin(), ranks.end());
  EXPECT_EQ(ranks, (std::vector<int>{1, 2}));
  Mat sum = Mat::Zero(3, 3);
  for (const auto& p : cd.projectors) sum += p;
  EXPECT_LT((sum - Mat::Identity(3, 3)).norm(), 1e-10);
  EXPECT_LT((cd.projectors[0] * cd.projectors[1]).norm(), 1e-10);
}

TEST(CentralProjectors, ScalarCenterGivesIdentity) {
  const std::vector<Mat> gens{px(), pz()};
  const auto cd = central_projectors(algebra_closure(gens), 5);
  ASSERT_EQ(cd.projectors.size(), 1u);
  EXPECT_LT((cd.projectors[0] - Mat::Identity(2, 2)).norm(), 1e-10);
}

TEST(CentralProjectors, DiagonalAlgebraGivesRankOneBlocks) {
  std::vector<Mat> gens;
  for (int i = 0; i < 4; ++i) {
    Mat e = Mat::Zero(4, 4);
    e(i, i) = 1;
    gens.push_back(e);
  }
  const auto cd = central_projectors(algebra_closure(gens), 2);
  ASSERT_EQ(cd.projectors.size(), 4u);
  for (int r : cd.ranks) EXPECT_EQ(r, 1);
}

TEST(CentralProjectors, OrderIndependentOfSeed) {
  std::mt19937_64 rng(9);
  const Mat u = random_unitary_matrix(5, rng);
  Mat e01 = Mat::Zero(5, 5), e33 = Mat::Zero(5, 5), e44 = Mat::Zero(5, 5);
  e01(0, 1) = 1;
  e33(3, 3) = 1;
  e44(4, 4) = 1;
  std::vector<Mat> gens{u * e01 * u.adjoint(), u * e33 * u.adjoint(), u * e44 * u.adjoint()};
  const auto alg = algebra_closure(gens);
  const auto a = central_projectors(alg, 1), b = central_projectors(alg, 99);
  ASSERT_EQ(a.projectors.size(), b.projectors.size());
  for (std::size_t i = 0; i < a.projectors.size(); ++i) EXPECT_LT((a.projectors[i] - b.projectors[i]).norm(), 1e-8);
}

TEST(Factorization, M2TensorIdentity) {
  std::mt19937_64 rng(4);
  const Mat u = random_unitary_matrix(4, rng);
  const std::vector<Mat> gens{u * kron(px(), Mat::Identity(2, 2)) * u.adjoint(), u * kron(pz(), Mat::Identity(2, 2)) * u.adjoint()};
  const auto alg = algebra_closure(gens);
  EXPECT_EQ(alg.dimension(), 4);
  const auto f = block_tensor_factorization(alg, Mat::Identity(4, 4), 1);
  EXPECT_EQ(f.d1, 2);
  EXPECT_EQ(f.d2, 2);
  expect_contract(alg, Mat::Identity(4, 4), f);
}

TEST(Factorization, ScalarAlgebra) {
  const std::vector<Mat> gens{Mat::Identity(3, 3)};
  const auto alg = algebra_closure(gens);
  const auto f = block_tensor_factorization(alg, Mat::Identity(3, 3), 1);
  EXPECT_EQ(f.d1, 1);
  EXPECT_EQ(f.d2, 3);
}

TEST(Factorization, FullMatrixAlgebra) {
  std::vector<Mat> gens;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Mat e = Mat::Zero(3, 3);
      e(i, j) = 1;
      gens.push_back(e);
    }
  const auto alg = algebra_closure(gens);
  const auto f = block_tensor_factorization(alg, Mat::Identity(3, 3), 1);
  EXPECT_EQ(f.d1, 3);
  EXPECT_EQ(f.d2, 1);
  expect_contract(alg, Mat::Identity(3, 3), f);
}

TEST(Factorization, NonCentralBlockRejected) {
  const std::vector<Mat> gens{px(), pz()};
  Mat half = Mat::Zero(2, 2);
  half(0, 0) = 1;
  EXPECT_THROW(block_tensor_factorization(algebra_closure(gens), half, 1), DecompositionError);
}

TEST(Factorization, RandomBlockAlgebras) {
  // A = U (M_a (x) I_b  (+)  M_c (x) I_e) U^dagger with random U
  std::mt19937_64 rng(8);
  const int shapes[][4] = {{2, 1, 1, 2}, {2, 2, 1, 1}, {1, 3, 2, 1}, {3, 1, 1, 1}};
  for (const auto& s : shapes) {
    const int da = s[0] * s[1], dc = s[2] * s[3], n = da + dc;
    const Mat u = random_unitary_matrix(n, rng);
    std::vector<Mat> gens;
    for (int t = 0; t < 2; ++t) {
      Mat g = Mat::Zero(n, n);
      g.topLeftCorner(da, da) = kron(random_hermitian(s[0], rng), Mat::Identity(s[1], s[1]));
      g.bottomRightCorner(dc, dc) = kron(random_hermitian(s[2], rng), Mat::Identity(s[3], s[3]));
      gens.push_back(u * g * u.adjoint());
    }
    Mat split = Mat::Zero(n, n);
    split.topLeftCorner(da, da).setIdentity();
    gens.push_back(u * split * u.adjoint());
    const auto alg = algebra_closure(gens);
    EXPECT_EQ(alg.dimension(), s[0] * s[0] + s[2] * s[2]);
    const auto cd = central_projectors(alg, 3);
    ASSERT_EQ(cd.projectors.size(), 2u);
    int total = 0;
    for (const auto& p : cd.projectors) {
      const auto f = block_tensor_factorization(alg, p, 4);
      expect_contract(alg, p, f);
      total += f.d1 * f.d2;
    }
    EXPECT_EQ(total, n);
  }
}

namespace {

// One shared qudit of dimension 4 = 2 (x) 2 after a hidden unitary U:
// term 0 acts on (q0, shared) as M (x) I on the shared split, term 1 on
// (shared, q2) as I (x) N.
CLHInstance split_qudit_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Mat u = random_unitary_matrix(4, rng);
  const Mat i2 = Mat::Identity(2, 2);
  Vec phi = Vec::Zero(4);
  phi(0) = phi(3) = 1.0 / std::sqrt(2.0);
  const Mat bell = phi * phi.adjoint();  // compressions span all of M_2
  const Mat a = kron(i2, u);  // on (q0, shared)
  const Mat t0 = a * kron(bell, i2) * a.adjoint();
  const Mat b = kron(u, i2);  // on (shared, q2)
  const Mat t1 = b * kron(i2, bell) * b.adjoint();
  CLHInstance inst;
  inst.qudits = {{0, 2}, {1, 4}, {2, 2}};
  inst.terms.push_back({0, {0, 1}, t0});
  inst.terms.push_back({1, {1, 2}, t1});
  return inst;
}

}  // namespace

TEST(BvDecompose, SoleTermQudit) {
  CLHInstance inst;
  inst.qudits = {{0, 3}};
  Mat p = Mat::Zero(3, 3);
  p(1, 1) = 1;
  inst.terms.push_back({0, {0}, p});
  const auto dec = bv_decompose_qudit(inst, 0, 0, 1);
  EXPECT_TRUE(dec.sole_term);
  ASSERT_EQ(dec.blocks.size(), 1u);
  EXPECT_EQ(dec.blocks[0].factorization.d1, 3);
  EXPECT_EQ(dec.blocks[0].factorization.d2, 1);
}

TEST(BvDecompose, RecoversHiddenSplitting) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inst = split_qudit_instance(seed);
    ASSERT_TRUE(validate_instance(inst).accepted());
    const auto dec = bv_decompose_qudit(inst, 0, 1, seed);
    ASSERT_EQ(dec.blocks.size(), 1u);
    EXPECT_EQ(dec.blocks[0].factorization.d1, 2);
    EXPECT_EQ(dec.blocks[0].factorization.d2, 2);
    EXPECT_LT(dec.block_residual, 1e-8);
    EXPECT_LT(dec.factor_residual, 1e-8);
    EXPECT_EQ(dec.dimension_sum(), 4);
  }
}

TEST(BvDecompose, DiagonalTermsRefine) {
  DesignSpec s;
  s.n = 8;
  s.k = 3;
  s.d = 3;
  s.degree = 2;
  s.overlap_cap = 1;
  s.max_forbidden = 3;
  s.seed = 4;
  const auto inst = gen_design_expander(s);
  const auto sys = ReducedSystem::from_instance(inst);
  for (QuditId q : inst.terms[0].support) {
    const auto dec = bv_decompose_qudit(sys, inst.terms[0].id, q, 7);
    EXPECT_EQ(dec.dimension_sum(), 3);
    for (const auto& b : dec.blocks) {
      const auto& f = b.factorization;
      EXPECT_TRUE(f.d1 == 1 || f.d2 == 1);
      if (!dec.sole_term) {
        EXPECT_LT(f.d1, 3);
        EXPECT_LT(f.d2, 3);
      }
    }
  }
}

TEST(BvDecompose, IsolationViolationNamesTerm) {
  CLHInstance inst;
  inst.qudits = {{0, 2}, {1, 2}};
  Mat a = Mat::Zero(4, 4), b = Mat::Zero(4, 4);
  a(0, 0) = 1;
  b(3, 3) = 1;
  inst.terms.push_back({0, {0, 1}, a});
  inst.terms.push_back({5, {0, 1}, b});
  try {
    bv_decompose_qudit(inst, 0, 0, 1);
    FAIL() << "expected IsolationViolation";
  } catch (const IsolationViolation& e) {
    EXPECT_EQ(e.overlapping_term, 5);
  }
}

TEST(BvDecompose, ReconstructionAndCommutationTransport) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto inst = split_qudit_instance(seed);
    const auto dec = bv_decompose_qudit(inst, 0, 1, seed);
    for (const auto& t : inst.terms) {
      const std::size_t pos = t.support[0] == 1 ? 0 : 1;
      Mat rebuilt = Mat::Zero(t.matrix.rows(), t.matrix.cols());
      for (const auto& b : dec.blocks) {
        const Mat p = pos == 0 ? kron(b.projector, Mat::Identity(2, 2)) : kron(Mat::Identity(2, 2), b.projector);
        rebuilt += p * t.matrix * p;
      }
      EXPECT_LT((rebuilt - t.matrix).norm(), 1e-8);
    }
    // conjugate both terms by W on the shared qudit, over the joint space (q0, shared, q2)
    const Mat& w = dec.blocks[0].factorization.isometry;
    const std::vector<int> joint{2, 4, 2};
    const std::vector<int> all{0, 1, 2};
    const Mat e0 = embed_operator(inst.terms[0].matrix, std::vector<int>{0, 1}, std::vector<int>{2, 4}, all, joint);
    const Mat e1 = embed_operator(inst.terms[1].matrix, std::vector<int>{1, 2}, std::vector<int>{4, 2}, all, joint);
    const Mat c0 = conjugate_site(e0, joint, 1, w), c1 = conjugate_site(e1, joint, 1, w);
    EXPECT_LT((c0 * c1 - c1 * c0).norm(), 1e-8);
  }
}

TEST(BvDecompose, DimensionLawOnPauliDesigns) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    DesignSpec s;
    s.n = 9;
    s.k = 3;
    s.degree = 2;
    s.overlap_cap = 1;
    s.mode = DesignSpec::Mode::Pauli;
    s.seed = seed;
    const auto inst = gen_design_expander(s);
    const auto sys = ReducedSystem::from_instance(inst);
    for (const auto& t : inst.terms) {
      for (QuditId q : t.support) {
        const auto dec = bv_decompose_qudit(sys, t.id, q, seed);
        EXPECT_EQ(dec.dimension_sum(), 2);
        EXPECT_LT(dec.block_residual, 1e-8);
        EXPECT_LT(dec.factor_residual, 1e-8);
      }
    }
  }
}

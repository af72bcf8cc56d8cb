#pragma once

// Finite-dimensional *-algebras on a single qudit, their centers, and the
// block / tensor-factor structure used to separate an isolated term from its
// neighbours on a shared qudit.
//
// For a term v and a qudit q in its support, the induced algebra A is
// generated by the compressions <a|v|b> over the other qudits of v.  Every
// term meeting v only at q has compressions in the commutant A'.  The
// minimal central projectors P_a of A split H_q into invariant blocks, and
// within each block A acts as M_{d1} (x) I_{d2} while A' acts as I_{d1} (x) M_{d2}.

#include <clh/model.hpp>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace clh {

class DecompositionError : public Error {
 public:
  using Error::Error;
};

class IsolationViolation : public Error {
 public:
  IsolationViolation(TermId isolated, TermId overlapping)
      : Error("term " + std::to_string(overlapping) + " shares two or more qudits with isolated term " +
              std::to_string(isolated)),
        overlapping_term(overlapping) {}
  TermId overlapping_term;
};

struct OperatorAlgebra {
  int ambient_dim = 0;
  std::vector<Mat> basis;  // Hilbert-Schmidt orthonormal

  int dimension() const { return static_cast<int>(basis.size()); }

  /// Norm of the component of `m` orthogonal to the algebra.
  double residual(const Mat& m) const {
    Mat r = m;
    for (const auto& b : basis) r -= (b.adjoint() * r).trace() * b;
    return r.norm();
  }
};

namespace detail {

inline cplx hs_inner(const Mat& a, const Mat& b) { return (a.conjugate().cwiseProduct(b)).sum(); }

// Gram-Schmidt step (two passes).  When `fix_phase` is set, the first entry
// above 1e-9 in row-major order is rotated to the positive real axis so the
// basis is reproducible.
inline bool hs_insert(std::vector<Mat>& basis, Mat m, double tolerance, bool fix_phase) {
  const double scale = std::max(1.0, m.norm());
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& b : basis) m -= hs_inner(b, m) * b;
  const double n = m.norm();
  if (n <= tolerance * scale) return false;
  m /= n;
  if (fix_phase) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      bool done = false;
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        if (std::abs(m(i, j)) > 1e-9) {
          m *= std::conj(m(i, j)) / std::abs(m(i, j));
          done = true;
          break;
        }
      if (done) break;
    }
  }
  basis.push_back(std::move(m));
  return true;
}

inline double algebra_tol(int dim) { return tol::kAlgebra * std::max(1, dim); }

// Orthonormal Hermitian basis of the real span of the Hermitian parts of `ms`.
inline std::vector<Mat> hermitian_basis(const std::vector<Mat>& ms, double tolerance) {
  std::vector<Mat> out;
  for (const auto& m : ms) {
    hs_insert(out, 0.5 * (m + m.adjoint()), tolerance, false);
    hs_insert(out, cplx(0.0, -0.5) * (m - m.adjoint()), tolerance, false);
  }
  return out;
}

template <class Rng>
Mat random_real_combination(const std::vector<Mat>& basis, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat c = Mat::Zero(basis.front().rows(), basis.front().cols());
  for (const auto& b : basis) c += u(rng) * b;
  return c;
}

// Orders projectors by their entries in row-major order, larger values first.
inline bool canonical_less(const Mat& a, const Mat& b) {
  constexpr double eps = 1e-6;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const cplx d = a(i, j) - b(i, j);
      if (std::abs(d.real()) > eps) return a(i, j).real() > b(i, j).real();
      if (std::abs(d.imag()) > eps) return a(i, j).imag() > b(i, j).imag();
    }
  return false;
}

}  // namespace detail

/// Smallest adjoint- and product-closed unital linear space containing `generators`.
inline OperatorAlgebra algebra_closure(std::span<const Mat> generators, int dim) {
  OperatorAlgebra alg;
  alg.ambient_dim = dim;
  const double t = detail::algebra_tol(dim);
  detail::hs_insert(alg.basis, Mat::Identity(dim, dim), t, true);
  for (const auto& g : generators) {
    if (g.rows() != dim || g.cols() != dim) throw Error("algebra_closure: generator has wrong side");
    detail::hs_insert(alg.basis, g, t, true);
    detail::hs_insert(alg.basis, g.adjoint(), t, true);
  }
  for (bool grew = true; grew;) {
    grew = false;
    const std::size_t n = alg.basis.size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) grew |= detail::hs_insert(alg.basis, alg.basis[i] * alg.basis[j], t, true);
  }
  return alg;
}

inline OperatorAlgebra algebra_closure(const std::vector<Mat>& generators) {
  if (generators.empty()) throw Error("algebra_closure: need the carrier dimension for an empty generator list");
  return algebra_closure(std::span<const Mat>(generators), static_cast<int>(generators.front().rows()));
}

/// Algebra on the qudit at site `pos` generated by the term's compressions over its other sites.
inline OperatorAlgebra induced_algebra(const Mat& term, std::span<const int> dims, std::size_t pos) {
  const auto gens = site_compressions(term, dims, pos);
  return algebra_closure(std::span<const Mat>(gens), dims[pos]);
}

inline OperatorAlgebra induced_algebra(const CLHInstance& inst, const LocalTerm& term, QuditId q) {
  auto it = std::find(term.support.begin(), term.support.end(), q);
  if (it == term.support.end())
    throw Error("induced_algebra: qudit " + std::to_string(q) + " not in support of term " + std::to_string(term.id));
  const auto dims = inst.dims_of(term.support);
  return induced_algebra(term.matrix, dims, static_cast<std::size_t>(it - term.support.begin()));
}

/// { Z in A : ZA = AZ for all A in A }, as a Hermitian orthonormal basis.
inline OperatorAlgebra algebra_center(const OperatorAlgebra& alg) {
  const int d = alg.ambient_dim;
  const auto r = static_cast<Eigen::Index>(alg.basis.size());
  const Eigen::Index block = static_cast<Eigen::Index>(d) * d;
  Mat k(block * r, r);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) {
      const Mat& bi = alg.basis[static_cast<std::size_t>(i)];
      const Mat& bj = alg.basis[static_cast<std::size_t>(j)];
      Mat c = bi * bj - bj * bi;
      k.block(j * block, i, block, 1) = Eigen::Map<Vec>(c.data(), block);
    }
  Eigen::JacobiSVD<Mat> svd(k, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double cut = detail::algebra_tol(d);
  std::vector<Mat> center_elems;
  for (Eigen::Index c = 0; c < r; ++c) {
    const double sv = c < s.size() ? s(c) : 0.0;
    if (sv > cut) continue;
    Mat z = Mat::Zero(d, d);
    for (Eigen::Index i = 0; i < r; ++i) z += svd.matrixV()(i, c) * alg.basis[static_cast<std::size_t>(i)];
    center_elems.push_back(z);
  }
  OperatorAlgebra center;
  center.ambient_dim = d;
  center.basis = detail::hermitian_basis(center_elems, cut);
  return center;
}

struct CentralDecomposition {
  std::vector<Mat> projectors;  // canonical order; index = block label alpha
  std::vector<int> ranks;
};

/// Minimal central projectors of `alg`, from the spectral projectors of a
/// random Hermitian element of the center.
inline CentralDecomposition central_projectors(const OperatorAlgebra& alg, std::uint64_t seed) {
  const OperatorAlgebra center = algebra_center(alg);
  const int d = alg.ambient_dim;
  const double t = detail::algebra_tol(d);
  std::mt19937_64 rng(seed);
  constexpr int kRetries = 8;
  for (int attempt = 0; attempt < kRetries; ++attempt) {
    const Mat c = detail::random_real_combination(center.basis, rng);
    const auto groups = grouped_eigenspaces(c, tol::kGap);
    if (static_cast<int>(groups.size()) != center.dimension()) continue;
    CentralDecomposition out;
    bool ok = true;
    for (const auto& g : groups) {
      Mat p = g.basis * g.basis.adjoint();
      for (const auto& b : alg.basis)
        if ((p * b - b * p).norm() > t) ok = false;
      out.projectors.push_back(std::move(p));
    }
    if (!ok) continue;
    std::sort(out.projectors.begin(), out.projectors.end(), detail::canonical_less);
    for (const auto& p : out.projectors) out.ranks.push_back(static_cast<int>(std::lround(p.trace().real())));
    return out;
  }
  throw DecompositionError("central_projectors: could not separate " + std::to_string(center.dimension()) +
                           " central components after " + std::to_string(kRetries) + " attempts");
}

/// Isometry from range(P) onto C^{d1} (x) C^{d2}, stored as a (d1*d2) x d
/// matrix V with V V^dagger = I and V^dagger V = P.
struct TensorFactorization {
  Mat isometry;
  int d1 = 1;
  int d2 = 1;
  double residual = 0.0;
};

namespace detail {

// Partial isometry of the polar decomposition of y (support on nonzero singular values).
inline Mat polar_isometry(const Mat& y) {
  Eigen::JacobiSVD<Mat> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  Eigen::Index k = 0;
  while (k < s.size() && s(k) > tol::kRank * std::max(1.0, s(0))) ++k;
  return svd.matrixU().leftCols(k) * svd.matrixV().leftCols(k).adjoint();
}

}  // namespace detail

/// Matrix-unit construction for the compressed algebra P A P, which is a full
/// matrix algebra M_{d1} acting with multiplicity d2 on range(P).
inline TensorFactorization block_tensor_factorization(const OperatorAlgebra& alg, const Mat& block, std::uint64_t seed) {
  const int d = alg.ambient_dim;
  const double t = detail::algebra_tol(d);
  const Mat q = range_basis(block);
  const auto r = static_cast<int>(q.cols());
  if (r == 0) throw DecompositionError("block_tensor_factorization: empty block");
  for (const auto& b : alg.basis)
    if ((block * b - b * block).norm() > t) throw DecompositionError("block_tensor_factorization: block is not central");

  std::vector<Mat> comp;
  for (const auto& b : alg.basis) detail::hs_insert(comp, q.adjoint() * b * q, t, true);
  const int d1 = static_cast<int>(std::lround(std::sqrt(static_cast<double>(comp.size()))));
  if (d1 * d1 != static_cast<int>(comp.size()) || r % d1 != 0)
    throw DecompositionError("block_tensor_factorization: compressed algebra of dimension " + std::to_string(comp.size()) +
                             " is not a full matrix algebra on a rank-" + std::to_string(r) + " block");
  const int d2 = r / d1;

  const auto herm = detail::hermitian_basis(comp, t);
  std::mt19937_64 rng(seed);
  constexpr int kRetries = 8;
  for (int attempt = 0; attempt < kRetries; ++attempt) {
    const auto groups = grouped_eigenspaces(detail::random_real_combination(herm, rng), tol::kGap);
    if (static_cast<int>(groups.size()) != d1) continue;
    bool ranks_ok = true;
    for (const auto& g : groups) ranks_ok &= (g.basis.cols() == d2);
    if (!ranks_ok) continue;

    const Mat e11 = groups[0].basis * groups[0].basis.adjoint();
    const Mat& f = groups[0].basis;  // r x d2, orthonormal basis of range(E11)
    Mat wr(static_cast<Eigen::Index>(d1) * d2, r);
    for (int i = 0; i < d1; ++i) {
      Mat ei1;
      if (i == 0) {
        ei1 = e11;
      } else {
        const Mat eii = groups[static_cast<std::size_t>(i)].basis * groups[static_cast<std::size_t>(i)].basis.adjoint();
        Mat best;
        double best_norm = -1.0;
        for (const auto& x : comp) {
          Mat y = eii * x * e11;
          const double nrm = y.norm();
          if (nrm > best_norm) {
            best_norm = nrm;
            best = std::move(y);
          }
        }
        ei1 = detail::polar_isometry(best);
      }
      const Mat cols = ei1 * f;  // r x d2: basis vectors |i> (x) |j>
      for (int j = 0; j < d2; ++j) wr.row(static_cast<Eigen::Index>(i) * d2 + j) = cols.col(j).adjoint();
    }

    TensorFactorization out;
    out.d1 = d1;
    out.d2 = d2;
    out.isometry = wr * q.adjoint();
    const std::vector<int> fd{d1, d2};
    double res = (out.isometry * out.isometry.adjoint() - Mat::Identity(d1 * d2, d1 * d2)).norm();
    res = std::max(res, (out.isometry.adjoint() * out.isometry - block).norm());
    for (const auto& b : alg.basis) res = std::max(res, trivial_residual(out.isometry * b * out.isometry.adjoint(), fd, 1));
    out.residual = res;
    if (res > t) continue;
    return out;
  }
  throw DecompositionError("block_tensor_factorization: matrix-unit construction failed (rank " + std::to_string(r) + ")");
}

struct DecompositionBlock {
  Mat projector;
  TensorFactorization factorization;
};

/// Per-qudit split: factor 0 carries the isolated term, factor 1 everything else.
struct QuditDecomposition {
  QuditId qudit = 0;
  int dim = 0;
  bool sole_term = false;  // only the isolated term acts on the qudit
  std::vector<DecompositionBlock> blocks;
  double block_residual = 0.0;   // max ||[P_a, compression]|| over all terms on the qudit
  double factor_residual = 0.0;  // max deviation from A'(x)I resp. I(x)B' inside blocks

  int dimension_sum() const {
    int s = 0;
    for (const auto& b : blocks) s += b.factorization.d1 * b.factorization.d2;
    return s;
  }
};

namespace detail {

inline std::size_t position_in(const LocalTerm& t, QuditId q) {
  auto it = std::find(t.support.begin(), t.support.end(), q);
  if (it == t.support.end()) throw Error("qudit " + std::to_string(q) + " not in support of term " + std::to_string(t.id));
  return static_cast<std::size_t>(it - t.support.begin());
}

inline std::size_t overlap_count(const std::vector<QuditId>& a, const std::vector<QuditId>& b) {
  std::size_t c = 0;
  for (QuditId q : a)
    if (std::find(b.begin(), b.end(), q) != b.end()) ++c;
  return c;
}

}  // namespace detail

/// Residuals of a block structure against the terms on qudit q: block
/// diagonality for all of them, factor-0 action for `isolated`, factor-1
/// action for the rest.
inline std::pair<double, double> decomposition_residuals(const ReducedSystem& sys, TermId isolated, QuditId q,
                                                         const std::vector<DecompositionBlock>& blocks) {
  double block_res = 0.0, factor_res = 0.0;
  for (TermId id : sys.terms_on(q)) {
    const auto& t = sys.terms.at(id);
    const auto comps = site_compressions(t.matrix, sys.dims_of(t.support), detail::position_in(t, q));
    for (const auto& blk : blocks) {
      const auto& f = blk.factorization;
      const std::vector<int> fd{f.d1, f.d2};
      for (const auto& c : comps) {
        block_res = std::max(block_res, (blk.projector * c - c * blk.projector).norm());
        const Mat conj = f.isometry * c * f.isometry.adjoint();
        factor_res = std::max(factor_res, trivial_residual(conj, fd, id == isolated ? 1 : 0));
      }
    }
  }
  return {block_res, factor_res};
}

/// Decomposes qudit q for the isolated term.  Requires every other term to
/// share at most one qudit with it.
inline QuditDecomposition bv_decompose_qudit(const ReducedSystem& sys, TermId isolated, QuditId q, std::uint64_t seed) {
  const auto& v = sys.terms.at(isolated);
  const std::size_t pos = detail::position_in(v, q);
  for (const auto& [id, t] : sys.terms)
    if (id != isolated && detail::overlap_count(t.support, v.support) >= 2) throw IsolationViolation(isolated, id);

  QuditDecomposition dec;
  dec.qudit = q;
  dec.dim = sys.dims.at(static_cast<std::size_t>(q));
  const auto on_q = sys.terms_on(q);
  dec.sole_term = on_q.size() == 1;
  if (dec.sole_term) {
    TensorFactorization f;
    f.isometry = Mat::Identity(dec.dim, dec.dim);
    f.d1 = dec.dim;
    f.d2 = 1;
    dec.blocks.push_back({Mat::Identity(dec.dim, dec.dim), f});
    return dec;
  }

  const auto alg = induced_algebra(v.matrix, sys.dims_of(v.support), pos);
  const auto cd = central_projectors(alg, seed);
  for (std::size_t a = 0; a < cd.projectors.size(); ++a)
    dec.blocks.push_back({cd.projectors[a], block_tensor_factorization(alg, cd.projectors[a], seed + 1 + a)});
  std::tie(dec.block_residual, dec.factor_residual) = decomposition_residuals(sys, isolated, q, dec.blocks);
  for (const auto& b : dec.blocks) dec.factor_residual = std::max(dec.factor_residual, b.factorization.residual);
  const double t = detail::algebra_tol(dec.dim);
  if (dec.block_residual > t || dec.factor_residual > t)
    throw DecompositionError("bv_decompose_qudit: residuals " + std::to_string(dec.block_residual) + " / " +
                             std::to_string(dec.factor_residual) + " on qudit " + std::to_string(q));
  return dec;
}

inline QuditDecomposition bv_decompose_qudit(const CLHInstance& inst, TermId isolated, QuditId q, std::uint64_t seed) {
  return bv_decompose_qudit(ReducedSystem::from_instance(inst), isolated, q, seed);
}

}  // namespace clh

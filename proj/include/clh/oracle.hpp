#pragma once

// Exact ground truth for small instances.

#include <clh/model.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

namespace clh {

class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

struct OracleOptions {
  std::size_t budget = std::size_t{1} << 14;      // largest dimension handled at all
  std::size_t dense_limit = std::size_t{1} << 10;  // dense diagonalization at or below this
  std::uint64_t seed = 7;                         // Lanczos start vector
};

/// Matrix-free H = sum_i H_i over the full tensor-product space.
class DenseHamiltonian {
 public:
  DenseHamiltonian(std::vector<int> dims, std::vector<LocalTerm> terms)
      : dims_(std::move(dims)), terms_(std::move(terms)), dimension_(dim_product(dims_)) {}

  std::size_t dimension() const { return dimension_; }
  const std::vector<int>& dims() const { return dims_; }

  Vec apply(const Vec& x) const {
    Vec y = Vec::Zero(x.size());
    for (const auto& t : terms_) apply_local(x, y, dims_, t.support, t.matrix);
    return y;
  }

  Mat dense() const {
    const auto n = static_cast<Eigen::Index>(dimension_);
    Mat h = Mat::Zero(n, n);
    Vec e = Vec::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      e(j) = 1.0;
      h.col(j) = apply(e);
      e(j) = 0.0;
    }
    return h;
  }

 private:
  std::vector<int> dims_;
  std::vector<LocalTerm> terms_;
  std::size_t dimension_;
};

inline DenseHamiltonian assemble(const CLHInstance& inst, const OracleOptions& opt = {}) {
  const auto dim = inst.total_dimension();
  if (dim > opt.budget)
    throw BudgetExceeded("assemble: dimension " + std::to_string(dim) + " exceeds budget " + std::to_string(opt.budget));
  return DenseHamiltonian(inst.dims(), inst.terms);
}

struct Spectrum {
  std::vector<double> eigenvalues;  // ascending
  double ground_energy = 0.0;
  int ground_degeneracy = 0;
};

namespace detail {

// Lowest eigenvalue by Lanczos with full reorthogonalization.
inline std::optional<double> lanczos_ground(const DenseHamiltonian& h, std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(h.dimension());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = cplx(g(rng), g(rng));
  v.normalize();

  const Eigen::Index max_steps = std::min<Eigen::Index>(n, 400);
  std::vector<Vec> basis{v};
  std::vector<double> alpha, beta;
  double last = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < max_steps; ++j) {
    Vec w = h.apply(basis.back());
    const double a = basis.back().dot(w).real();
    alpha.push_back(a);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) w -= b.dot(w) * b;
    const double bnorm = w.norm();

    const auto m = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      tri(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < m) tri(i, i + 1) = tri(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);
    const double theta = es.eigenvalues()(0);
    const double resid = bnorm * std::abs(es.eigenvectors()(m - 1, 0));
    if (resid < 1e-10 || bnorm < 1e-12) return theta;
    if (j > 20 && std::abs(theta - last) < 1e-13 && resid < 1e-8) return theta;
    last = theta;
    beta.push_back(bnorm);
    basis.push_back(w / bnorm);
  }
  return std::nullopt;
}

}  // namespace detail

inline Spectrum full_spectrum(const CLHInstance& inst, const OracleOptions& opt = {}) {
  const auto h = assemble(inst, opt);
  if (h.dimension() > opt.dense_limit)
    throw BudgetExceeded("full_spectrum: dimension " + std::to_string(h.dimension()) + " above dense limit " +
                         std::to_string(opt.dense_limit));
  Eigen::SelfAdjointEigenSolver<Mat> es(h.dense(), Eigen::EigenvaluesOnly);
  Spectrum s;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) s.eigenvalues.push_back(es.eigenvalues()(i));
  s.ground_energy = s.eigenvalues.front();
  for (double e : s.eigenvalues)
    if (e - s.ground_energy <= tol::kGap) ++s.ground_degeneracy;
  return s;
}

inline double ground_energy(const CLHInstance& inst, const OracleOptions& opt = {}) {
  const auto h = assemble(inst, opt);
  if (h.dimension() < opt.dense_limit) {
    Eigen::SelfAdjointEigenSolver<Mat> es(h.dense(), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
  }
  if (auto e = detail::lanczos_ground(h, opt.seed)) return *e;
  if (h.dimension() <= std::size_t{1} << 12) {
    Eigen::SelfAdjointEigenSolver<Mat> es(h.dense(), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
  }
  throw Error("ground_energy: Lanczos did not converge at dimension " + std::to_string(h.dimension()));
}

/// Orthonormal basis (columns) of the eigenspace within tau_gap of the ground energy.
inline Mat ground_space(const CLHInstance& inst, const OracleOptions& opt = {}) {
  const auto h = assemble(inst, opt);
  if (h.dimension() > opt.dense_limit)
    throw BudgetExceeded("ground_space: dimension " + std::to_string(h.dimension()) + " above dense limit " +
                         std::to_string(opt.dense_limit));
  Eigen::SelfAdjointEigenSolver<Mat> es(h.dense());
  const auto& vals = es.eigenvalues();
  Eigen::Index g = 0;
  while (g < vals.size() && vals(g) - vals(0) <= tol::kGap) ++g;
  return es.eigenvectors().leftCols(g);
}

inline Mat ground_projector(const CLHInstance& inst, const OracleOptions& opt = {}) {
  const Mat g = ground_space(inst, opt);
  return g * g.adjoint();
}

/// Every eigenvalue within 1e-7 of an integer in [0, m].
inline bool integrality_check(const Spectrum& s, int m) {
  for (double e : s.eigenvalues) {
    const double r = std::round(e);
    if (std::abs(e - r) > 1e-7 || r < 0 || r > m) return false;
  }
  return true;
}

/// Connected components of a set of terms (terms sharing a qudit are linked).
inline std::vector<std::vector<TermId>> term_components(const ReducedSystem& sys, const std::vector<TermId>& ids) {
  std::map<TermId, TermId> parent;
  for (TermId id : ids) parent[id] = id;
  std::function<TermId(TermId)> find = [&](TermId x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  std::map<QuditId, TermId> owner;
  for (TermId id : ids)
    for (QuditId q : sys.terms.at(id).support) {
      auto [it, fresh] = owner.emplace(q, id);
      if (!fresh) parent[find(id)] = find(it->second);
    }
  std::map<TermId, std::vector<TermId>> groups;
  for (TermId id : ids) groups[find(id)].push_back(id);
  std::vector<std::vector<TermId>> out;
  for (auto& [r, g] : groups) out.push_back(std::move(g));
  return out;
}

/// Ground energy of sum of `ids`, solved component by component.
inline double ground_energy_of_terms(const ReducedSystem& sys, const std::vector<TermId>& ids, const OracleOptions& opt = {}) {
  double e = 0.0;
  for (const auto& comp : term_components(sys, ids)) e += ground_energy(sys.subinstance(comp), opt);
  return e;
}

}  // namespace clh

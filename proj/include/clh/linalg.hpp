#pragma once

// Dense complex linear algebra over small tensor-product spaces.
//
// A local operator is a square matrix over the ordered tensor product of its
// sites.  Basis index = sum_i digit_i * stride_i, with the FIRST site most
// significant (stride of the last site is 1).

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace clh {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace tol {
// Tolerances scale with the matrix side where noted.
inline constexpr double kBase = 1e-9;        // comm / proj / herm, x side
inline constexpr double kTrivial = 1e-9;     // identity-factor detection
inline constexpr double kAlgebra = 1e-8;     // closure / factorization, x carrier dim
inline constexpr double kGap = 1e-6;         // eigenvalue grouping
inline constexpr double kRank = 1e-8;        // relative singular-value cutoff
inline constexpr double kVerify = 1e-8;      // verifier residuals
inline constexpr double kEnergy = 1e-7;      // energy comparisons
}  // namespace tol

inline std::size_t dim_product(std::span<const int> dims) {
  std::size_t p = 1;
  for (int d : dims) p *= static_cast<std::size_t>(d);
  return p;
}

inline std::vector<std::size_t> strides_of(std::span<const int> dims) {
  std::vector<std::size_t> s(dims.size(), 1);
  for (std::size_t i = dims.size(); i-- > 1;) s[i - 1] = s[i] * static_cast<std::size_t>(dims[i]);
  return s;
}

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Vec kron(const Vec& a, const Vec& b) {
  Vec out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

/// Index map for a site permutation: new site i holds old site perm[i].
/// Returns, for every new basis index, the corresponding old basis index.
inline std::vector<std::size_t> permutation_index_map(std::span<const int> dims,
                                                      std::span<const int> perm) {
  const std::size_t n = dims.size();
  std::vector<int> new_dims(n);
  for (std::size_t i = 0; i < n; ++i) new_dims[i] = dims[static_cast<std::size_t>(perm[i])];
  const auto old_strides = strides_of(dims);
  const std::size_t total = dim_product(dims);
  std::vector<std::size_t> map(total);
  std::vector<int> digit(n, 0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t old = 0;
    for (std::size_t i = 0; i < n; ++i) old += static_cast<std::size_t>(digit[i]) * old_strides[static_cast<std::size_t>(perm[i])];
    map[idx] = old;
    for (std::size_t i = n; i-- > 0;) {
      if (++digit[i] < new_dims[i]) break;
      digit[i] = 0;
    }
  }
  return map;
}

inline Mat permute_sites(const Mat& m, std::span<const int> dims, std::span<const int> perm) {
  const auto map = permutation_index_map(dims, perm);
  const auto n = static_cast<Eigen::Index>(map.size());
  Mat out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      out(i, j) = m(static_cast<Eigen::Index>(map[static_cast<std::size_t>(i)]),
                    static_cast<Eigen::Index>(map[static_cast<std::size_t>(j)]));
  return out;
}

inline Vec permute_sites(const Vec& v, std::span<const int> dims, std::span<const int> perm) {
  const auto map = permutation_index_map(dims, perm);
  Vec out(static_cast<Eigen::Index>(map.size()));
  for (std::size_t i = 0; i < map.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(map[i]));
  return out;
}

namespace detail {

// perm that moves site `pos` to the front, keeping the others in order.
inline std::vector<int> to_front(std::size_t n, std::size_t pos) {
  std::vector<int> p;
  p.reserve(n);
  p.push_back(static_cast<int>(pos));
  for (std::size_t i = 0; i < n; ++i)
    if (i != pos) p.push_back(static_cast<int>(i));
  return p;
}

// inverse of to_front: site 0 goes back to `pos`.
inline std::vector<int> from_front(std::size_t n, std::size_t pos) {
  std::vector<int> p(n);
  for (std::size_t i = 0, k = 1; i < n; ++i) p[i] = (i == pos) ? 0 : static_cast<int>(k++);
  return p;
}

inline std::vector<int> to_back(std::size_t n, std::size_t pos) {
  std::vector<int> p;
  p.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (i != pos) p.push_back(static_cast<int>(i));
  p.push_back(static_cast<int>(pos));
  return p;
}

inline std::vector<int> front_dims(std::span<const int> dims, std::size_t pos) {
  std::vector<int> d;
  d.push_back(dims[pos]);
  for (std::size_t i = 0; i < dims.size(); ++i)
    if (i != pos) d.push_back(dims[i]);
  return d;
}

}  // namespace detail

/// Tr over site `pos`; the result acts on the remaining sites in order.
inline Mat partial_trace_site(const Mat& m, std::span<const int> dims, std::size_t pos) {
  const auto front = permute_sites(m, dims, detail::to_front(dims.size(), pos));
  const int d = dims[pos];
  const Eigen::Index rest = front.rows() / d;
  Mat out = Mat::Zero(rest, rest);
  for (int a = 0; a < d; ++a) out += front.block(a * rest, a * rest, rest, rest);
  return out;
}

/// Inserts an identity factor of dimension d at site `pos` of an operator on `dims`.
inline Mat insert_identity_site(const Mat& m, std::span<const int> dims, std::size_t pos, int d) {
  Mat front = kron(Mat::Identity(d, d), m);
  std::vector<int> fdims;
  fdims.push_back(d);
  fdims.insert(fdims.end(), dims.begin(), dims.end());
  return permute_sites(front, fdims, detail::from_front(dims.size() + 1, pos));
}

/// ||M - (Tr_pos M / d) (x) I_pos||_F: zero iff M acts as the identity on site `pos`.
inline double trivial_residual(const Mat& m, std::span<const int> dims, std::size_t pos) {
  std::vector<int> rest(dims.begin(), dims.end());
  rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(pos));
  const Mat reduced = partial_trace_site(m, dims, pos) / static_cast<double>(dims[pos]);
  return (m - insert_identity_site(reduced, rest, pos, dims[pos])).norm();
}

/// (V at pos) M (V^dagger at pos) for a possibly rectangular V; site `pos`
/// changes dimension from dims[pos] to V.rows().
inline Mat conjugate_site(const Mat& m, std::span<const int> dims, std::size_t pos, const Mat& v) {
  if (v.cols() != dims[pos]) throw Error("conjugate_site: map does not match site dimension");
  const auto front = permute_sites(m, dims, detail::to_front(dims.size(), pos));
  const Eigen::Index rest = front.rows() / dims[pos];
  const Mat big = kron(v, Mat::Identity(rest, rest));
  const Mat conj = big * front * big.adjoint();
  auto fdims = detail::front_dims(dims, pos);
  fdims[0] = static_cast<int>(v.rows());
  return permute_sites(conj, fdims, detail::from_front(dims.size(), pos));
}

/// Applies a (possibly rectangular) single-site map to a state vector.
inline Vec apply_site_map(const Vec& x, std::span<const int> dims, std::size_t pos, const Mat& v) {
  if (v.cols() != dims[pos]) throw Error("apply_site_map: map does not match site dimension");
  const auto front = permute_sites(x, dims, detail::to_front(dims.size(), pos));
  const Eigen::Index rest = front.size() / dims[pos];
  Eigen::Map<const Mat> as_mat(front.data(), rest, dims[pos]);  // column-major: (rest, site)
  Mat out = as_mat * v.transpose();
  auto fdims = detail::front_dims(dims, pos);
  fdims[0] = static_cast<int>(v.rows());
  Vec flat = Eigen::Map<Vec>(out.data(), out.size());
  return permute_sites(flat, fdims, detail::from_front(dims.size(), pos));
}

/// Compressions <a|M|b> over a basis of every site except `pos`; each is dims[pos] x dims[pos].
inline std::vector<Mat> site_compressions(const Mat& m, std::span<const int> dims, std::size_t pos) {
  const auto back = permute_sites(m, dims, detail::to_back(dims.size(), pos));
  const int d = dims[pos];
  const Eigen::Index rest = back.rows() / d;
  std::vector<Mat> out;
  out.reserve(static_cast<std::size_t>(rest * rest));
  for (Eigen::Index a = 0; a < rest; ++a)
    for (Eigen::Index b = 0; b < rest; ++b) out.push_back(back.block(a * d, b * d, d, d));
  return out;
}

/// Embeds an operator on `support` into `target` (a superset), identity elsewhere.
/// Both supports must be sorted ascending; dims are per-site.
inline Mat embed_operator(const Mat& m, std::span<const int> support, std::span<const int> dims,
                          std::span<const int> target, std::span<const int> target_dims) {
  Mat cur = m;
  std::vector<int> cur_support(support.begin(), support.end());
  std::vector<int> cur_dims(dims.begin(), dims.end());
  for (std::size_t i = 0; i < target.size(); ++i) {
    auto it = std::find(cur_support.begin(), cur_support.end(), target[i]);
    if (it != cur_support.end()) continue;
    auto pos = static_cast<std::size_t>(
        std::lower_bound(cur_support.begin(), cur_support.end(), target[i]) - cur_support.begin());
    cur = insert_identity_site(cur, cur_dims, pos, target_dims[i]);
    cur_support.insert(cur_support.begin() + static_cast<std::ptrdiff_t>(pos), target[i]);
    cur_dims.insert(cur_dims.begin() + static_cast<std::ptrdiff_t>(pos), target_dims[i]);
  }
  if (cur_support.size() != target.size()) throw Error("embed_operator: support is not a subset of target");
  return cur;
}

/// y += (M on `support`) x, for a state over all qudits with `global_dims`.
inline void apply_local(const Vec& x, Vec& y, std::span<const int> global_dims,
                        std::span<const int> support, const Mat& m) {
  const auto gstrides = strides_of(global_dims);
  std::vector<int> ldims;
  for (int q : support) ldims.push_back(global_dims[static_cast<std::size_t>(q)]);
  const std::size_t side = dim_product(ldims);
  const auto lstrides = strides_of(ldims);
  std::vector<std::size_t> off(side, 0);
  for (std::size_t l = 0; l < side; ++l)
    for (std::size_t i = 0; i < support.size(); ++i)
      off[l] += ((l / lstrides[i]) % static_cast<std::size_t>(ldims[i])) * gstrides[static_cast<std::size_t>(support[i])];

  std::vector<std::size_t> free_sites;
  std::size_t bases = 1;
  for (std::size_t q = 0; q < global_dims.size(); ++q)
    if (std::find(support.begin(), support.end(), static_cast<int>(q)) == support.end()) {
      free_sites.push_back(q);
      bases *= static_cast<std::size_t>(global_dims[q]);
    }
  std::vector<int> digit(free_sites.size(), 0);
  Vec local(static_cast<Eigen::Index>(side));
  for (std::size_t b = 0; b < bases; ++b) {
    std::size_t base = 0;
    for (std::size_t i = 0; i < free_sites.size(); ++i) base += static_cast<std::size_t>(digit[i]) * gstrides[free_sites[i]];
    for (std::size_t l = 0; l < side; ++l) local(static_cast<Eigen::Index>(l)) = x(static_cast<Eigen::Index>(base + off[l]));
    const Vec out = m * local;
    for (std::size_t l = 0; l < side; ++l) y(static_cast<Eigen::Index>(base + off[l])) += out(static_cast<Eigen::Index>(l));
    for (std::size_t i = free_sites.size(); i-- > 0;) {
      if (++digit[i] < global_dims[free_sites[i]]) break;
      digit[i] = 0;
    }
  }
}

/// Orthonormal basis of the column range, by SVD with a relative cutoff.
inline Mat range_basis(const Mat& m, double rel_cut = tol::kRank) {
  if (m.size() == 0) return Mat(m.rows(), 0);
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  const double top = s.size() ? s(0) : 0.0;
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > rel_cut * std::max(1.0, top)) ++r;
  return svd.matrixU().leftCols(r);
}

inline int numerical_rank(const Mat& m, double rel_cut = tol::kRank) {
  return static_cast<int>(range_basis(m, rel_cut).cols());
}

/// Hermitian eigendecomposition grouped into eigenspaces separated by more than `gap`.
struct Eigenspace {
  double value;
  Mat basis;  // orthonormal columns
};

inline std::vector<Eigenspace> grouped_eigenspaces(const Mat& h, double gap = tol::kGap) {
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  const auto& vals = es.eigenvalues();
  const auto& vecs = es.eigenvectors();
  std::vector<Eigenspace> out;
  Eigen::Index start = 0;
  for (Eigen::Index i = 1; i <= vals.size(); ++i) {
    if (i == vals.size() || vals(i) - vals(i - 1) > gap) {
      out.push_back({vals.segment(start, i - start).mean(), vecs.middleCols(start, i - start)});
      start = i;
    }
  }
  return out;
}

/// Smallest separation between consecutive distinct eigenvalue groups (infinity for one group).
inline double min_group_gap(const std::vector<Eigenspace>& groups) {
  double g = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < groups.size(); ++i) g = std::min(g, groups[i].value - groups[i - 1].value);
  return g;
}

inline bool is_scalar_multiple_of_identity(const Mat& m, double tolerance, cplx* scalar = nullptr) {
  const cplx s = m.trace() / static_cast<double>(m.rows());
  if (scalar) *scalar = s;
  return (m - s * Mat::Identity(m.rows(), m.cols())).norm() <= tolerance;
}

/// Haar-ish random unitary via QR of a complex Gaussian matrix.
template <class Rng>
Mat random_unitary(int d, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = cplx(g(rng), g(rng));
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ() * Mat::Identity(d, d);
  return q;
}

}  // namespace clh

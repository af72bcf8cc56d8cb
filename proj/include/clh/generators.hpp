#pragma once

// Seeded instance generators: toric code, diagonal CSP embeddings, random
// commuting Pauli sets, and bounded-overlap designs.

#include <clh/io.hpp>
#include <clh/model.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <vector>

namespace clh {

class GeneratorError : public Error {
 public:
  using Error::Error;
};

/// Generalized Pauli X^a Z^b per site (qubits get the Hermitian phase i^{ab}).
struct WeylString {
  int d = 2;
  std::vector<QuditId> support;  // ascending
  std::vector<int> a, b;

  Mat site_matrix(std::size_t i) const {
    const double pi = std::acos(-1.0);
    const cplx w = std::polar(1.0, 2.0 * pi / d);
    Mat x = Mat::Zero(d, d), z = Mat::Zero(d, d);
    for (int j = 0; j < d; ++j) {
      x((j + 1) % d, j) = 1.0;
      z(j, j) = std::pow(w, j);
    }
    Mat m = Mat::Identity(d, d);
    for (int r = 0; r < a[i]; ++r) m = m * x;
    for (int r = 0; r < b[i]; ++r) m = m * z;
    if (d == 2 && a[i] == 1 && b[i] == 1) m *= cplx(0.0, 1.0);  // i X Z = Y
    return m;
  }

  Mat matrix() const {
    Mat m = Mat::Identity(1, 1);
    for (std::size_t i = 0; i < support.size(); ++i) m = kron(m, site_matrix(i));
    return m;
  }

  /// Symplectic form: X^aZ^b and X^cZ^e commute iff sum(a e - b c) = 0 mod d.
  bool commutes_with(const WeylString& o) const {
    long s = 0;
    for (std::size_t i = 0; i < support.size(); ++i)
      for (std::size_t j = 0; j < o.support.size(); ++j)
        if (support[i] == o.support[j]) s += static_cast<long>(a[i]) * o.b[j] - static_cast<long>(b[i]) * o.a[j];
    return ((s % d) + d) % d == 0;
  }

  bool operator==(const WeylString& o) const { return support == o.support && a == o.a && b == o.b; }
};

/// Projector violated unless the string takes eigenvalue omega^c:
/// (I - P)/2 for a qubit Pauli with c = 0 (P = +1), generally I - Pi_c.
inline Mat weyl_constraint(const WeylString& p, int c) {
  const Mat w = p.matrix();
  const auto n = w.rows();
  if (p.d == 2) return 0.5 * (Mat::Identity(n, n) - (c == 0 ? 1.0 : -1.0) * w);
  const double pi = std::acos(-1.0);
  Mat proj = Mat::Zero(n, n);
  Mat pw = Mat::Identity(n, n);
  for (int j = 0; j < p.d; ++j) {
    proj += std::polar(1.0, -2.0 * pi * c * j / p.d) * pw;
    pw = pw * w;
  }
  proj /= static_cast<double>(p.d);
  return Mat::Identity(n, n) - proj;
}

namespace detail {

inline CLHInstance uniform_instance(int n, int d) {
  CLHInstance inst;
  for (int q = 0; q < n; ++q) inst.qudits.push_back({q, d});
  return inst;
}

inline void finish(CLHInstance& inst) {
  canonicalize(inst);
  if (!validate_instance(inst).accepted()) throw GeneratorError("generator produced an instance that fails validation");
}

}  // namespace detail

/// Kitaev's toric code on an L x L torus: 2L^2 edge qubits, L^2 stars and L^2 plaquettes.
inline CLHInstance gen_toric(int L) {
  if (L < 2) throw GeneratorError("toric: L must be >= 2");
  auto h = [L](int x, int y) { return ((y + L) % L) * L + (x + L) % L; };
  auto v = [L](int x, int y) { return L * L + ((y + L) % L) * L + (x + L) % L; };
  CLHInstance inst = detail::uniform_instance(2 * L * L, 2);
  TermId id = 0;
  auto add = [&](std::vector<QuditId> sup, int pauli_a, int pauli_b) {
    std::sort(sup.begin(), sup.end());
    WeylString p{2, sup, std::vector<int>(4, pauli_a), std::vector<int>(4, pauli_b)};
    inst.terms.push_back({id++, sup, weyl_constraint(p, 0)});
  };
  for (int y = 0; y < L; ++y)
    for (int x = 0; x < L; ++x) add({h(x, y), h(x - 1, y), v(x, y), v(x, y - 1)}, 1, 0);
  for (int y = 0; y < L; ++y)
    for (int x = 0; x < L; ++x) add({h(x, y), h(x, y + 1), v(x, y), v(x + 1, y)}, 0, 1);
  detail::finish(inst);
  return inst;
}

/// A constraint: the projector onto the listed forbidden assignments of `support`.
struct Clause {
  std::vector<QuditId> support;
  std::vector<std::vector<int>> forbidden;
};

inline CLHInstance gen_csp_embed(const std::vector<Clause>& clauses, const std::vector<int>& dims) {
  CLHInstance inst;
  for (std::size_t q = 0; q < dims.size(); ++q) inst.qudits.push_back({static_cast<QuditId>(q), dims[q]});
  TermId id = 0;
  for (const auto& c : clauses) {
    const auto cd = inst.dims_of(c.support);
    const auto side = static_cast<Eigen::Index>(dim_product(cd));
    const auto strides = strides_of(cd);
    Mat m = Mat::Zero(side, side);
    std::set<std::vector<int>> seen;
    for (const auto& f : c.forbidden) {
      if (f.size() != c.support.size()) throw GeneratorError("csp: assignment length does not match clause support");
      if (!seen.insert(f).second) throw GeneratorError("csp: duplicate forbidden assignment in clause " + std::to_string(id));
      std::size_t idx = 0;
      for (std::size_t i = 0; i < f.size(); ++i) {
        if (f[i] < 0 || f[i] >= cd[i]) throw GeneratorError("csp: assignment value out of range");
        idx += static_cast<std::size_t>(f[i]) * strides[i];
      }
      m(static_cast<Eigen::Index>(idx), static_cast<Eigen::Index>(idx)) = 1.0;
    }
    inst.terms.push_back({id++, c.support, m});
  }
  detail::finish(inst);
  return inst;
}

struct PlantedSat {
  std::vector<Clause> clauses;
  std::vector<int> assignment;
};

/// Random 3-SAT over n bits whose clauses all accept a hidden assignment.
inline PlantedSat gen_random_3sat(int n, int m, std::uint64_t seed) {
  if (n < 3) throw GeneratorError("3sat: need at least 3 variables");
  std::mt19937_64 rng(seed);
  PlantedSat out;
  std::uniform_int_distribution<int> bit(0, 1);
  for (int i = 0; i < n; ++i) out.assignment.push_back(bit(rng));
  std::vector<QuditId> vars(static_cast<std::size_t>(n));
  std::iota(vars.begin(), vars.end(), 0);
  while (static_cast<int>(out.clauses.size()) < m) {
    std::shuffle(vars.begin(), vars.end(), rng);
    std::vector<QuditId> sup(vars.begin(), vars.begin() + 3);
    std::sort(sup.begin(), sup.end());
    std::vector<int> bad{bit(rng), bit(rng), bit(rng)};
    bool hits = true;
    for (int i = 0; i < 3; ++i) hits &= out.assignment[static_cast<std::size_t>(sup[static_cast<std::size_t>(i)])] == bad[static_cast<std::size_t>(i)];
    if (hits) continue;
    out.clauses.push_back({sup, {bad}});
  }
  return out;
}

/// `count` pairwise commuting qubit Pauli constraints of weight <= k.
inline CLHInstance gen_commuting_pauli(int n, int k, int count, std::uint64_t seed) {
  if (n < 1 || k < 1 || k > n || count < 0) throw GeneratorError("pauli: infeasible parameters");
  std::mt19937_64 rng(seed);
  std::vector<WeylString> picked;
  std::vector<QuditId> qs(static_cast<std::size_t>(n));
  std::iota(qs.begin(), qs.end(), 0);
  std::uniform_int_distribution<int> weight(1, k), letter(1, 3), sign(0, 1);
  const long budget = 1000L * std::max(count, 1);
  CLHInstance inst = detail::uniform_instance(n, 2);
  for (long tries = 0; static_cast<int>(picked.size()) < count; ++tries) {
    if (tries >= budget) throw GeneratorError("pauli: sampling budget exhausted after " + std::to_string(budget) + " draws");
    std::shuffle(qs.begin(), qs.end(), rng);
    WeylString p;
    p.support.assign(qs.begin(), qs.begin() + weight(rng));
    std::sort(p.support.begin(), p.support.end());
    for (std::size_t i = 0; i < p.support.size(); ++i) {
      const int l = letter(rng);  // 1 = X, 2 = Z, 3 = Y
      p.a.push_back(l != 2);
      p.b.push_back(l != 1);
    }
    if (std::find(picked.begin(), picked.end(), p) != picked.end()) continue;
    if (!std::all_of(picked.begin(), picked.end(), [&](const WeylString& o) { return p.commutes_with(o); })) continue;
    picked.push_back(p);
    inst.terms.push_back({static_cast<TermId>(inst.terms.size()), p.support, weyl_constraint(p, sign(rng))});
  }
  detail::finish(inst);
  return inst;
}

struct DesignSpec {
  enum class Mode { Diag, Pauli };
  enum class Base { Random, Projective };
  int n = 12;
  int k = 3;
  int degree = 2;       // target minimum degree D
  int overlap_cap = 1;  // max |support(a) & support(b)|
  int d = 2;
  Mode mode = Mode::Diag;
  bool planted = false;  // diag mode: every clause accepts a hidden assignment
  int max_forbidden = 2; // diag mode: forbidden assignments per term, 1..max
  std::uint64_t seed = 1;
  int restarts = 200;
  // Projective base: supports start as the lines of PG(2, k-1), relabelled at
  // random; n must be k^2 - k + 1.  `drop_lines` lines are removed and `extra`
  // random k-sets are added under overlap_cap.
  Base base = Base::Random;
  int drop_lines = 0;
  int extra = 0;
};

namespace detail {

// Bounded-overlap support family reaching minimum degree spec.degree.
inline std::vector<std::vector<QuditId>> design_supports(const DesignSpec& spec, std::mt19937_64& rng) {
  const int n = spec.n, k = spec.k;
  for (int restart = 0; restart < spec.restarts; ++restart) {
    std::vector<std::vector<QuditId>> sups;
    std::vector<int> deg(static_cast<std::size_t>(n), 0);
    auto ok_with = [&](const std::vector<QuditId>& s) {
      for (const auto& t : sups) {
        int c = 0;
        for (QuditId q : s) c += std::binary_search(t.begin(), t.end(), q);
        if (c > spec.overlap_cap) return false;
      }
      return true;
    };
    bool stuck = false;
    while (!stuck && *std::min_element(deg.begin(), deg.end()) < spec.degree) {
      const int lo = *std::min_element(deg.begin(), deg.end());
      std::vector<QuditId> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      std::stable_sort(order.begin(), order.end(), [&](QuditId x, QuditId y) { return deg[static_cast<std::size_t>(x)] < deg[static_cast<std::size_t>(y)]; });
      const QuditId q0 = order.front();
      if (deg[static_cast<std::size_t>(q0)] != lo) throw GeneratorError("design: internal ordering error");

      // Depth-first search for a k-set containing q0, lowest degrees first.
      std::vector<QuditId> cur{q0};
      std::vector<QuditId> found;
      long nodes = 0;
      std::function<bool(std::size_t)> dfs = [&](std::size_t from) {
        if (++nodes > 5000) return false;
        if (static_cast<int>(cur.size()) == k) {
          auto s = cur;
          std::sort(s.begin(), s.end());
          if (!ok_with(s)) return false;
          found = s;
          return true;
        }
        for (std::size_t i = from; i < order.size(); ++i) {
          if (order[i] == q0) continue;
          cur.push_back(order[i]);
          auto s = cur;
          std::sort(s.begin(), s.end());
          if (ok_with(s) && dfs(i + 1)) return true;
          cur.pop_back();
        }
        return false;
      };
      if (!dfs(0)) {
        stuck = true;
        break;
      }
      for (QuditId q : found) ++deg[static_cast<std::size_t>(q)];
      sups.push_back(found);
    }
    if (!stuck) return sups;
  }
  throw GeneratorError("design: rejection budget exhausted before reaching degree " + std::to_string(spec.degree));
}

// Lines of the projective plane over F_q (q prime), by point index.
inline std::vector<std::vector<QuditId>> projective_lines(int q) {
  std::vector<std::array<int, 3>> pts;
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b)
      for (int c = 0; c < q; ++c) {
        const std::array<int, 3> v{a, b, c};
        const auto first = std::find_if(v.begin(), v.end(), [](int x) { return x != 0; });
        if (first != v.end() && *first == 1) pts.push_back(v);
      }
  std::vector<std::vector<QuditId>> lines;
  for (const auto& l : pts) {
    std::vector<QuditId> line;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if ((l[0] * pts[i][0] + l[1] * pts[i][1] + l[2] * pts[i][2]) % q == 0) line.push_back(static_cast<QuditId>(i));
    lines.push_back(std::move(line));
  }
  return lines;
}

inline std::vector<std::vector<QuditId>> projective_supports(const DesignSpec& spec, std::mt19937_64& rng) {
  const int q = spec.k - 1, n = spec.n, k = spec.k;
  bool prime = q >= 2;
  for (int f = 2; f * f <= q; ++f) prime &= (q % f != 0);
  if (!prime) throw GeneratorError("design: projective base needs k - 1 prime");
  if (n != q * q + q + 1) throw GeneratorError("design: projective base needs n = " + std::to_string(q * q + q + 1));

  std::vector<QuditId> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto lines = projective_lines(q);
  for (auto& l : lines) {
    for (auto& p : l) p = perm[static_cast<std::size_t>(p)];
    std::sort(l.begin(), l.end());
  }
  std::shuffle(lines.begin(), lines.end(), rng);
  if (spec.drop_lines < 0 || spec.drop_lines >= static_cast<int>(lines.size()))
    throw GeneratorError("design: drop_lines out of range");
  lines.erase(lines.begin(), lines.begin() + spec.drop_lines);

  std::vector<QuditId> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  for (int added = 0, tries = 0; added < spec.extra; ++tries) {
    if (tries > 1000 * spec.extra) throw GeneratorError("design: rejection budget exhausted placing extra supports");
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<QuditId> s(all.begin(), all.begin() + k);
    std::sort(s.begin(), s.end());
    const bool ok = std::all_of(lines.begin(), lines.end(), [&](const std::vector<QuditId>& t) {
      std::vector<QuditId> both;
      std::set_intersection(s.begin(), s.end(), t.begin(), t.end(), std::back_inserter(both));
      return static_cast<int>(both.size()) <= spec.overlap_cap;
    });
    if (!ok) continue;
    lines.push_back(std::move(s));
    ++added;
  }

  std::vector<int> deg(static_cast<std::size_t>(n), 0);
  for (const auto& l : lines)
    for (QuditId p : l) ++deg[static_cast<std::size_t>(p)];
  if (*std::min_element(deg.begin(), deg.end()) < spec.degree)
    throw GeneratorError("design: dropped lines leave a qudit below degree " + std::to_string(spec.degree));
  return lines;
}

inline bool acts_on_every_site(const Mat& m, const std::vector<int>& dims) {
  for (std::size_t p = 0; p < dims.size(); ++p)
    if (trivial_residual(m, dims, p) <= 1e-6) return false;
  return true;
}

}  // namespace detail

inline CLHInstance gen_design_expander(const DesignSpec& spec) {
  if (spec.k < 2 || spec.k > spec.n || spec.d < 2 || spec.degree < 1 || spec.overlap_cap < 1 || spec.overlap_cap >= spec.k)
    throw GeneratorError("design: infeasible parameters");
  if (spec.mode == DesignSpec::Mode::Pauli && spec.d > 3) throw GeneratorError("design: pauli mode supports d = 2 or 3");
  std::mt19937_64 rng(spec.seed);
  const auto sups = spec.base == DesignSpec::Base::Projective ? detail::projective_supports(spec, rng)
                                                              : detail::design_supports(spec, rng);
  CLHInstance inst = detail::uniform_instance(spec.n, spec.d);
  const std::vector<int> local(static_cast<std::size_t>(spec.k), spec.d);
  const auto side = static_cast<Eigen::Index>(dim_product(local));

  if (spec.mode == DesignSpec::Mode::Diag) {
    std::uniform_int_distribution<int> val(0, spec.d - 1), count(1, std::max(1, spec.max_forbidden));
    std::vector<int> hidden;
    for (int q = 0; q < spec.n; ++q) hidden.push_back(val(rng));
    const auto strides = strides_of(local);
    for (const auto& s : sups) {
      for (int tries = 0;; ++tries) {
        if (tries > 1000) throw GeneratorError("design: could not draw a non-trivial diagonal term");
        Mat m = Mat::Zero(side, side);
        const int c = count(rng);
        for (int f = 0; f < c; ++f) {
          std::size_t idx = 0;
          bool hit = true;
          for (std::size_t i = 0; i < s.size(); ++i) {
            const int v = val(rng);
            hit &= v == hidden[static_cast<std::size_t>(s[i])];
            idx += static_cast<std::size_t>(v) * strides[i];
          }
          if (!(spec.planted && hit)) m(static_cast<Eigen::Index>(idx), static_cast<Eigen::Index>(idx)) = 1.0;
        }
        if (!detail::acts_on_every_site(m, local)) continue;
        inst.terms.push_back({static_cast<TermId>(inst.terms.size()), s, m});
        break;
      }
    }
  } else {
    std::uniform_int_distribution<int> digit(0, spec.d - 1), phase(0, spec.d - 1);
    bool done = false;
    for (int restart = 0; restart < spec.restarts && !done; ++restart) {
      std::vector<WeylString> picked;
      inst.terms.clear();
      done = true;
      for (const auto& s : sups) {
        bool placed = false;
        for (int tries = 0; tries < 400 && !placed; ++tries) {
          WeylString p{spec.d, s, {}, {}};
          bool full = true;
          for (std::size_t i = 0; i < s.size(); ++i) {
            p.a.push_back(digit(rng));
            p.b.push_back(digit(rng));
            full &= p.a.back() != 0 || p.b.back() != 0;
          }
          if (!full) continue;
          if (!std::all_of(picked.begin(), picked.end(), [&](const WeylString& o) { return p.commutes_with(o); })) continue;
          picked.push_back(p);
          inst.terms.push_back({static_cast<TermId>(inst.terms.size()), s, weyl_constraint(p, phase(rng))});
          placed = true;
        }
        if (!placed) {
          done = false;
          break;
        }
      }
    }
    if (!done) throw GeneratorError("design: could not draw commuting Pauli terms on the chosen supports");
  }
  inst.declared_k = spec.k;
  detail::finish(inst);
  return inst;
}

/// Tagged generator request, as read from the command line.
struct GeneratorSpec {
  std::string kind;  // toric | csp | pauli | design
  json params = json::object();
  std::uint64_t seed = 1;
};

inline CLHInstance generate(const GeneratorSpec& g) {
  auto get = [&](const char* key, auto fallback) {
    return g.params.contains(key) ? g.params[key].get<decltype(fallback)>() : fallback;
  };
  if (g.kind == "toric") return gen_toric(get("L", 2));
  if (g.kind == "csp") {
    const auto sat = gen_random_3sat(get("n", 8), get("m", 12), g.seed);
    return gen_csp_embed(sat.clauses, std::vector<int>(static_cast<std::size_t>(get("n", 8)), 2));
  }
  if (g.kind == "pauli") return gen_commuting_pauli(get("n", 10), get("k", 4), get("count", 12), g.seed);
  if (g.kind == "design") {
    DesignSpec s;
    s.n = get("n", s.n);
    s.k = get("k", s.k);
    s.degree = get("degree", s.degree);
    s.overlap_cap = get("overlap_cap", s.overlap_cap);
    s.d = get("d", s.d);
    s.mode = get("mode", std::string("diag")) == "pauli" ? DesignSpec::Mode::Pauli : DesignSpec::Mode::Diag;
    s.planted = get("planted", false);
    s.max_forbidden = get("max_forbidden", s.max_forbidden);
    const auto base = get("base", std::string("random"));
    if (base != "random" && base != "projective") throw GeneratorError("design: unknown base '" + base + "'");
    s.base = base == "projective" ? DesignSpec::Base::Projective : DesignSpec::Base::Random;
    s.drop_lines = get("drop", s.drop_lines);
    s.extra = get("extra", s.extra);
    s.seed = g.seed;
    return gen_design_expander(s);
  }
  throw GeneratorError("unknown generator kind '" + g.kind + "'");
}

}  // namespace clh

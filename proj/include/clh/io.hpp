#pragma once

// Instance documents:
//   { "version": 1,
//     "qudits": [{"id": int, "dim": int}],
//     "terms":  [{"id": int, "support": [int], "matrix": [[re, im], ...]}] }
// Matrices are row-major; doubles are written with round-trip precision.

#include <clh/model.hpp>

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

namespace clh {

using json = nlohmann::json;

class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& what) : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

namespace io {

inline const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path + "/" + key, "missing field");
  return *it;
}

inline long long as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw SchemaError(path, "expected an integer");
  return v.get<long long>();
}

inline double as_double(const json& v, const std::string& path) {
  if (!v.is_number()) throw SchemaError(path, "expected a number");
  return v.get<double>();
}

inline const json& as_array(const json& v, const std::string& path) {
  if (!v.is_array()) throw SchemaError(path, "expected an array");
  return v;
}

/// Flat row-major list of [re, im] pairs.
inline json matrix_to_json(const Mat& m) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) arr.push_back(json::array({m(i, j).real(), m(i, j).imag()}));
  return arr;
}

/// Parses a flat [re, im] list into a rows x cols matrix.
inline Mat matrix_from_json(const json& v, Eigen::Index rows, Eigen::Index cols, const std::string& path) {
  as_array(v, path);
  if (static_cast<Eigen::Index>(v.size()) != rows * cols)
    throw SchemaError(path, "expected " + std::to_string(rows * cols) + " entries, found " + std::to_string(v.size()));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      const std::string p = path + "/" + std::to_string(i * cols + j);
      const json& e = v[static_cast<std::size_t>(i * cols + j)];
      if (!e.is_array() || e.size() != 2) throw SchemaError(p, "expected [re, im]");
      m(i, j) = cplx(as_double(e[0], p + "/0"), as_double(e[1], p + "/1"));
    }
  return m;
}

/// Square matrix whose side is inferred from the entry count.
inline Mat square_matrix_from_json(const json& v, const std::string& path) {
  as_array(v, path);
  const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (n * n != static_cast<Eigen::Index>(v.size())) throw SchemaError(path, "entry count is not a perfect square");
  return matrix_from_json(v, n, n, path);
}

}  // namespace io

struct LoadedInstance {
  CLHInstance instance;
  std::vector<TrivialFactor> pruned;  // identity factors removed while canonicalizing
};

inline LoadedInstance instance_from_json(const json& doc) {
  const std::string root;
  if (io::as_int(io::field(doc, "version", root), "/version") != 1) throw SchemaError("/version", "unsupported version");
  CLHInstance inst;
  const json& qs = io::as_array(io::field(doc, "qudits", root), "/qudits");
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const std::string p = "/qudits/" + std::to_string(i);
    QuditInfo q;
    q.id = static_cast<QuditId>(io::as_int(io::field(qs[i], "id", p), p + "/id"));
    q.dim = static_cast<int>(io::as_int(io::field(qs[i], "dim", p), p + "/dim"));
    if (q.dim < 2) throw SchemaError(p + "/dim", "dimension must be >= 2");
    inst.qudits.push_back(q);
  }
  std::sort(inst.qudits.begin(), inst.qudits.end(), [](auto& a, auto& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < inst.qudits.size(); ++i)
    if (inst.qudits[i].id != static_cast<QuditId>(i)) throw SchemaError("/qudits", "ids must be unique and contiguous from 0");

  if (doc.contains("k")) inst.declared_k = static_cast<int>(io::as_int(doc["k"], "/k"));

  const json& ts = io::as_array(io::field(doc, "terms", root), "/terms");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const std::string p = "/terms/" + std::to_string(i);
    LocalTerm t;
    t.id = static_cast<TermId>(io::as_int(io::field(ts[i], "id", p), p + "/id"));
    const json& sup = io::as_array(io::field(ts[i], "support", p), p + "/support");
    for (std::size_t j = 0; j < sup.size(); ++j) {
      const auto q = io::as_int(sup[j], p + "/support/" + std::to_string(j));
      if (q < 0 || q >= inst.n()) throw SchemaError(p + "/support/" + std::to_string(j), "unknown qudit");
      t.support.push_back(static_cast<QuditId>(q));
    }
    const auto side = static_cast<Eigen::Index>(dim_product(inst.dims_of(t.support)));
    t.matrix = io::matrix_from_json(io::field(ts[i], "matrix", p), side, side, p + "/matrix");
    inst.terms.push_back(std::move(t));
  }
  LoadedInstance out{std::move(inst), {}};
  try {
    out.pruned = canonicalize(out.instance);
  } catch (const StructuralError& e) {
    throw SchemaError("/terms", e.what());
  }
  return out;
}

inline json instance_to_json(const CLHInstance& inst) {
  json doc;
  doc["version"] = 1;
  doc["qudits"] = json::array();
  for (const auto& q : inst.qudits) doc["qudits"].push_back({{"id", q.id}, {"dim", q.dim}});
  if (inst.declared_k) doc["k"] = *inst.declared_k;
  doc["terms"] = json::array();
  for (const auto& t : inst.terms)
    doc["terms"].push_back({{"id", t.id}, {"support", t.support}, {"matrix", io::matrix_to_json(t.matrix)}});
  return doc;
}

inline LoadedInstance load_instance(std::string_view bytes) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("not valid JSON: ") + e.what());
  }
  return instance_from_json(doc);
}

inline std::string save_instance(const CLHInstance& inst) { return instance_to_json(inst).dump() + "\n"; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << bytes;
}

}  // namespace clh

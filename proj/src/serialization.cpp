#include "sppm/serialization.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <variant>

#include <json.hpp>

#include "sppm/rng.hpp"

namespace sppm {

namespace {

using nlohmann::json;

void append_array(std::string& out, const double* data, Index count) {
  out += '[';
  for (Index i = 0; i < count; ++i) {
    if (i > 0) out += ',';
    out += format_double(data[i]);
  }
  out += ']';
}

void append_vector(std::string& out, const Vector& v) { append_array(out, v.data(), v.size()); }

void append_row_major(std::string& out, const Matrix& m) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  append_array(out, rm.data(), rm.size());
}

void append_member(std::string& out, const Operator& op) {
  std::visit(
      [&out](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, AffineOperator>) {
          out += "{\"kind\":\"affine\",\"linear\":";
          append_row_major(out, m.linear());
          out += ",\"offset\":";
          append_vector(out, m.offset());
          out += '}';
        } else if constexpr (std::is_same_v<T, PiecewiseScalarOperator>) {
          out += "{\"kind\":\"piecewise_scalar\",\"breakpoints\":";
          append_array(out, m.breakpoints().data(), static_cast<Index>(m.breakpoints().size()));
          out += ",\"segments\":[";
          for (std::size_t j = 0; j < m.segments().size(); ++j) {
            if (j > 0) out += ',';
            out += '[' + format_double(m.segments()[j].slope) + ',' +
                   format_double(m.segments()[j].intercept) + ']';
          }
          out += "]}";
        } else {
          out += "{\"kind\":\"shifted_scaling\",\"mu\":" + format_double(m.mu()) + ",\"center\":";
          append_vector(out, m.center());
          out += ",\"offset\":";
          append_vector(out, m.offset());
          out += '}';
        }
      },
      op);
}

double number(const json& j) {
  if (j.is_number()) return j.get<double>();
  // non-finite values are written as strings
  if (j.is_string()) return std::strtod(j.get<std::string>().c_str(), nullptr);
  throw InvalidArgument("ensemble document: expected a number");
}

Vector vector_of(const json& j, Index expected, const char* what) {
  if (!j.is_array()) throw InvalidArgument(std::string("ensemble document: ") + what + " must be an array");
  if (static_cast<Index>(j.size()) != expected) {
    throw DimensionMismatch(std::string("ensemble document: ") + what + " has wrong length");
  }
  Vector v(expected);
  for (Index i = 0; i < expected; ++i) v(i) = number(j[static_cast<std::size_t>(i)]);
  return v;
}

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw InvalidArgument(std::string("ensemble document: missing field '") + key + "'");
  return *it;
}

Operator member_of(const json& j, Index d) {
  const std::string kind = field(j, "kind").get<std::string>();
  if (kind == "affine") {
    const Vector flat = vector_of(field(j, "linear"), d * d, "linear");
    Matrix b(d, d);
    for (Index r = 0; r < d; ++r) {
      for (Index c = 0; c < d; ++c) b(r, c) = flat(r * d + c);
    }
    return AffineOperator(std::move(b), vector_of(field(j, "offset"), d, "offset"));
  }
  if (kind == "piecewise_scalar") {
    if (d != 1) throw DimensionMismatch("ensemble document: piecewise members are scalar");
    std::vector<double> bps;
    for (const auto& b : field(j, "breakpoints")) bps.push_back(number(b));
    std::vector<ScalarSegment> segs;
    for (const auto& s : field(j, "segments")) {
      if (!s.is_array() || s.size() != 2) throw InvalidArgument("ensemble document: bad segment");
      segs.push_back({number(s[0]), number(s[1])});
    }
    return PiecewiseScalarOperator(std::move(bps), std::move(segs));
  }
  if (kind == "shifted_scaling") {
    return ShiftedScalingOperator(number(field(j, "mu")), vector_of(field(j, "center"), d, "center"),
                                  vector_of(field(j, "offset"), d, "offset"));
  }
  throw InvalidArgument("ensemble document: unknown member kind '" + kind + "'");
}

std::string body(const OperatorEnsemble& ens) {
  std::string out = "{\"format\":\"";
  out += kEnsembleFormat;
  out += "\",\"dimension\":" + std::to_string(ens.dim()) + ",\"n\":" + std::to_string(ens.size());
  out += ",\n\"weights\":";
  append_array(out, ens.weights().data(), static_cast<Index>(ens.size()));
  out += ",\n\"members\":[";
  for (std::size_t i = 0; i < ens.size(); ++i) {
    out += i == 0 ? "\n" : ",\n";
    append_member(out, ens.member(i));
  }
  out += "],\n\"root\":";
  if (ens.root()) {
    append_vector(out, *ens.root());
  } else {
    out += "null";
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "\"nan\"";
  if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string serialize_ensemble(const OperatorEnsemble& ens, const std::string& metadata_json) {
  const json meta = json::parse(metadata_json);
  if (!meta.is_object()) throw InvalidArgument("ensemble metadata must be a JSON object");
  return body(ens) + ",\n\"metadata\":" + meta.dump() + "}\n";
}

OperatorEnsemble parse_ensemble(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("ensemble document: ") + e.what());
  }
  try {
    if (field(doc, "format").get<std::string>() != kEnsembleFormat) {
      throw InvalidArgument("ensemble document: unsupported format tag");
    }
    const Index d = field(doc, "dimension").get<Index>();
    const auto n = field(doc, "n").get<std::size_t>();
    if (d < 1 || n < 1) throw InvalidArgument("ensemble document: empty ensemble");
    const Vector w = vector_of(field(doc, "weights"), static_cast<Index>(n), "weights");
    const json& ms = field(doc, "members");
    if (!ms.is_array() || ms.size() != n) throw InvalidArgument("ensemble document: member count != n");
    std::vector<Operator> members;
    members.reserve(n);
    for (const auto& m : ms) members.push_back(member_of(m, d));
    std::optional<Vector> root;
    if (auto it = doc.find("root"); it != doc.end() && !it->is_null()) root = vector_of(*it, d, "root");
    return OperatorEnsemble(std::move(members), std::vector<double>(w.data(), w.data() + n),
                            std::move(root));
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("ensemble document: ") + e.what());
  }
}

std::string ensemble_metadata(const std::string& text) {
  const json doc = json::parse(text);
  auto it = doc.find("metadata");
  return it == doc.end() ? "{}" : it->dump();
}

OperatorEnsemble load_ensemble(const std::string& path) { return parse_ensemble(read_file(path)); }

void save_ensemble(const std::string& path, const OperatorEnsemble& ens,
                   const std::string& metadata_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  out << serialize_ensemble(ens, metadata_json);
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ensemble_hash(const OperatorEnsemble& ens) { return fnv1a_hex(body(ens)); }

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << kTraceHeader << '\n';
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%lld,%lld,%lld,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(r.k), static_cast<long long>(r.member_calls),
                  static_cast<long long>(r.full_calls), r.sq_error, r.lyapunov, r.bound_value);
    out << buf;
  }
}

std::vector<TraceRow> parse_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw InvalidArgument("trace csv: missing or unexpected header");
  }
  std::vector<TraceRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) {
      throw InvalidArgument("trace csv: line " + std::to_string(lineno) + " needs 6 fields");
    }
    try {
      TraceRow r;
      r.k = std::stoll(cells[0]);
      r.member_calls = std::stoll(cells[1]);
      r.full_calls = std::stoll(cells[2]);
      r.sq_error = std::strtod(cells[3].c_str(), nullptr);
      r.lyapunov = std::strtod(cells[4].c_str(), nullptr);
      r.bound_value = std::strtod(cells[5].c_str(), nullptr);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw InvalidArgument("trace csv: bad integer on line " + std::to_string(lineno));
    }
  }
  return rows;
}

bool same_rows(const std::vector<TraceRow>& a, const std::vector<TraceRow>& b) {
  auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i];
    const auto& y = b[i];
    if (x.k != y.k || x.member_calls != y.member_calls || x.full_calls != y.full_calls ||
        !same(x.sq_error, y.sq_error) || !same(x.lyapunov, y.lyapunov) ||
        !same(x.bound_value, y.bound_value)) {
      return false;
    }
  }
  return true;
}

std::string trace_metadata(const Trace& trace, const std::string& hash) {
  json j;
  j["algorithm"] = std::string(to_string(trace.algorithm));
  j["gamma"] = trace.gamma;
  j["p"] = trace.p;
  j["seed"] = trace.seed;
  j["n"] = trace.n;
  j["ensemble_hash"] = hash;
  j["rng"] = std::string(Rng::kName);
  j["normal_method"] = std::string(Rng::kNormalMethod);
  j["warnings"] = trace.warnings;
  return j.dump(2) + "\n";
}

}  // namespace sppm

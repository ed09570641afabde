#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sppm/ensemble.hpp"
#include "sppm/runner.hpp"

namespace sppm {

inline constexpr const char* kEnsembleFormat = "sppm-ensemble/1";

/// JSON document: format tag, dimension, n, weights, members (kind tag plus
/// row-major payloads), optional root and a free-form metadata object given
/// as serialized JSON. Numbers are written with 17 significant digits so the
/// round trip is exact.
std::string serialize_ensemble(const OperatorEnsemble& ens, const std::string& metadata_json = "{}");

/// Throws InvalidArgument on malformed documents.
OperatorEnsemble parse_ensemble(const std::string& text);

/// Metadata object of a serialized ensemble, as JSON text.
std::string ensemble_metadata(const std::string& text);

OperatorEnsemble load_ensemble(const std::string& path);
void save_ensemble(const std::string& path, const OperatorEnsemble& ens,
                   const std::string& metadata_json = "{}");

/// 64-bit FNV-1a of the metadata-free serialization, as 16 hex digits.
std::string ensemble_hash(const OperatorEnsemble& ens);

std::string fnv1a_hex(const std::string& bytes);

inline constexpr const char* kTraceHeader = "k,member_calls,full_calls,sq_error,lyapunov,bound_value";

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows);
std::vector<TraceRow> parse_trace_csv(std::istream& in);

/// Rows equal field by field, with NaN equal to NaN.
bool same_rows(const std::vector<TraceRow>& a, const std::vector<TraceRow>& b);

/// Sidecar JSON: algorithm, gamma, p, seed, n, ensemble hash, generator names
/// and warnings.
std::string trace_metadata(const Trace& trace, const std::string& ensemble_hash);

/// printf("%.17g").
std::string format_double(double v);

}  // namespace sppm

// json_io.hpp — JSON codecs for the wire formats shared by the library, the
// scenario files and the CLI.
//
// Matrix encoding: {"dim_rows": n, "dim_cols": m, "entries": [[re, im], ...]}
// with the entries flattened row-major. Numbers serialize with full
// round-trip precision, so encode/decode is bit exact.

#pragma once

#include <json.hpp>

#include "classical.hpp"
#include "linops.hpp"
#include "measurement.hpp"
#include "qsolver.hpp"

namespace qme::json_io {

// ordered_json keeps insertion order, which makes reports byte-reproducible.
using Json = nlohmann::ordered_json;

Json matrix_to_json(const linops::ComplexMatrix& m);
linops::ComplexMatrix matrix_from_json(const Json& j, const std::string& what);

Json distribution_to_json(const classical::Distribution& d);
classical::Distribution distribution_from_json(const Json& j, const std::string& what);

Json joint_to_json(const classical::JointDistribution& d);
classical::JointDistribution joint_from_json(const Json& j, const std::string& what);

Json kraus_to_json(const measurement::KrausSet& k);
measurement::KrausSet kraus_from_json(const Json& j, const std::string& what);

Json constraints_to_json(const std::vector<qsolver::QuantumConstraint>& constraints);
std::vector<qsolver::QuantumConstraint> constraints_from_json(const Json& j,
                                                              const std::string& what);

Json solution_to_json(const qsolver::MaxEntSolution& s);

// Field access that reports the missing/ill-typed path in the error message.
const Json& require_field(const Json& j, const std::string& key, const std::string& what);
double require_number(const Json& j, const std::string& key, const std::string& what);

Json parse(const std::string& text, const std::string& what);
Json load_file(const std::string& path);

}  // namespace qme::json_io

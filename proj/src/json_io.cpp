#include "json_io.hpp"

#include <fstream>
#include <sstream>

namespace qme::json_io {

using linops::Complex;
using linops::ComplexMatrix;

Json matrix_to_json(const ComplexMatrix& m) {
    Json entries = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            entries.push_back(Json::array({m(i, j).real(), m(i, j).imag()}));
        }
    }
    Json out;
    out["dim_rows"] = m.rows();
    out["dim_cols"] = m.cols();
    out["entries"] = std::move(entries);
    return out;
}

ComplexMatrix matrix_from_json(const Json& j, const std::string& what) {
    if (!j.is_object()) throw ParseError(what + ": matrix must be an object");
    const auto rows = require_field(j, "dim_rows", what).get<Eigen::Index>();
    const auto cols = require_field(j, "dim_cols", what).get<Eigen::Index>();
    if (rows <= 0 || cols <= 0) {
        throw ValidationError(what + ": matrix dimensions must be positive");
    }
    const Json& entries = require_field(j, "entries", what);
    if (!entries.is_array() || static_cast<Eigen::Index>(entries.size()) != rows * cols) {
        std::ostringstream os;
        os << what << ": expected " << rows * cols << " entries, got " << entries.size();
        throw ParseError(os.str());
    }
    ComplexMatrix m(rows, cols);
    Eigen::Index flat = 0;
    for (const auto& entry : entries) {
        if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number() ||
            !entry[1].is_number()) {
            throw ParseError(what + ": each entry must be a [re, im] pair");
        }
        m(flat / cols, flat % cols) = Complex(entry[0].get<double>(), entry[1].get<double>());
        ++flat;
    }
    linops::require_finite(m, what);
    return m;
}

Json distribution_to_json(const classical::Distribution& d) {
    Json out;
    out["labels"] = d.labels;
    out["probs"] = std::vector<double>(d.probs.data(), d.probs.data() + d.probs.size());
    return out;
}

classical::Distribution distribution_from_json(const Json& j, const std::string& what) {
    classical::Distribution d;
    if (j.is_array()) {
        // Bare probability arrays are accepted as shorthand.
        d.probs.resize(static_cast<Eigen::Index>(j.size()));
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (!j[i].is_number()) throw ParseError(what + ": probabilities must be numbers");
            d.probs(static_cast<Eigen::Index>(i)) = j[i].get<double>();
        }
    } else if (j.is_object()) {
        const Json& probs = require_field(j, "probs", what);
        if (!probs.is_array()) throw ParseError(what + ": probs must be an array");
        d.probs.resize(static_cast<Eigen::Index>(probs.size()));
        for (std::size_t i = 0; i < probs.size(); ++i) {
            d.probs(static_cast<Eigen::Index>(i)) = probs[i].get<double>();
        }
        if (j.contains("labels")) {
            d.labels = j["labels"].get<std::vector<std::string>>();
        }
    } else {
        throw ParseError(what + ": distribution must be an object or array");
    }
    d.validate();
    return d;
}

Json joint_to_json(const classical::JointDistribution& d) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < d.probs.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < d.probs.cols(); ++j) row.push_back(d.probs(i, j));
        rows.push_back(std::move(row));
    }
    Json out;
    out["x_labels"] = d.x_labels;
    out["theta_labels"] = d.theta_labels;
    out["probs"] = std::move(rows);
    return out;
}

classical::JointDistribution joint_from_json(const Json& j, const std::string& what) {
    classical::JointDistribution d;
    const Json& probs = j.is_object() ? require_field(j, "probs", what) : j;
    if (!probs.is_array() || probs.empty() || !probs[0].is_array()) {
        throw ParseError(what + ": joint probs must be an array of rows");
    }
    const auto nx = static_cast<Eigen::Index>(probs.size());
    const auto nt = static_cast<Eigen::Index>(probs[0].size());
    d.probs.resize(nx, nt);
    for (Eigen::Index x = 0; x < nx; ++x) {
        const auto& row = probs[static_cast<std::size_t>(x)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != nt) {
            throw ParseError(what + ": joint rows must have equal length");
        }
        for (Eigen::Index t = 0; t < nt; ++t) {
            d.probs(x, t) = row[static_cast<std::size_t>(t)].get<double>();
        }
    }
    if (j.is_object() && j.contains("x_labels")) {
        d.x_labels = j["x_labels"].get<std::vector<std::string>>();
    }
    if (j.is_object() && j.contains("theta_labels")) {
        d.theta_labels = j["theta_labels"].get<std::vector<std::string>>();
    }
    d.validate();
    return d;
}

Json kraus_to_json(const measurement::KrausSet& k) {
    Json operators = Json::array();
    for (const auto& a : k.operators()) operators.push_back(matrix_to_json(a));
    Json out;
    out["labels"] = k.labels();
    out["operators"] = std::move(operators);
    return out;
}

measurement::KrausSet kraus_from_json(const Json& j, const std::string& what) {
    if (!j.is_object()) throw ParseError(what + ": kraus set must be an object");
    const Json& operators = require_field(j, "operators", what);
    if (!operators.is_array() || operators.empty()) {
        throw ParseError(what + ": operators must be a nonempty array");
    }
    std::vector<ComplexMatrix> mats;
    for (std::size_t x = 0; x < operators.size(); ++x) {
        mats.push_back(matrix_from_json(operators[x], what + ".operators"));
    }
    std::vector<std::string> labels;
    if (j.contains("labels")) labels = j["labels"].get<std::vector<std::string>>();
    return measurement::KrausSet(std::move(mats), std::move(labels));
}

Json constraints_to_json(const std::vector<qsolver::QuantumConstraint>& constraints) {
    Json out = Json::array();
    for (const auto& c : constraints) {
        Json item;
        item["observable"] = matrix_to_json(c.observable.matrix());
        item["target"] = c.target;
        out.push_back(std::move(item));
    }
    return out;
}

std::vector<qsolver::QuantumConstraint> constraints_from_json(const Json& j,
                                                              const std::string& what) {
    if (!j.is_array()) throw ParseError(what + ": constraints must be an array");
    std::vector<qsolver::QuantumConstraint> out;
    for (std::size_t k = 0; k < j.size(); ++k) {
        const Json& item = j[k];
        std::ostringstream name;
        name << what << "[" << k << "]";
        out.push_back(qsolver::QuantumConstraint{
            linops::HermitianOperator(
                matrix_from_json(require_field(item, "observable", name.str()), name.str())),
            require_number(item, "target", name.str())});
    }
    return out;
}

Json solution_to_json(const qsolver::MaxEntSolution& s) {
    Json out;
    out["posterior"] = matrix_to_json(s.posterior.matrix());
    out["alphas"] = std::vector<double>(s.alphas.data(), s.alphas.data() + s.alphas.size());
    out["lnZ"] = s.ln_z;
    out["exponent"] = matrix_to_json(s.exponent.matrix());
    out["iterations"] = s.iterations;
    out["residuals"] =
        std::vector<double>(s.residuals.data(), s.residuals.data() + s.residuals.size());
    out["near_singular_hessian"] = s.near_singular_hessian;
    return out;
}

const Json& require_field(const Json& j, const std::string& key, const std::string& what) {
    if (!j.is_object() || !j.contains(key)) {
        throw ParseError(what + ": missing field '" + key + "'");
    }
    return j.at(key);
}

double require_number(const Json& j, const std::string& key, const std::string& what) {
    const Json& field = require_field(j, key, what);
    if (!field.is_number()) throw ParseError(what + ": field '" + key + "' must be a number");
    return field.get<double>();
}

Json parse(const std::string& text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(what + ": " + e.what());
    }
}

Json load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str(), path);
}

}  // namespace qme::json_io

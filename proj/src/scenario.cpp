#include "scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "measurement.hpp"

namespace qme::scenario {

using checks::CheckList;
using checks::CheckResult;
using classical::Distribution;
using classical::JointDistribution;
using linops::ComplexMatrix;
using linops::DensityMatrix;
using linops::HermitianOperator;
using linops::RealVector;
using measurement::KrausSet;

namespace {

struct KindEntry {
    Kind kind;
    const char* name;
};

constexpr KindEntry kKindTable[] = {
    {Kind::kClassicalMaxent, "classical_maxent"},
    {Kind::kClassicalBayes, "classical_bayes"},
    {Kind::kClassicalJeffrey, "classical_jeffrey"},
    {Kind::kQMaxent, "qmaxent"},
    {Kind::kPdmtSweep, "pdmt_sweep"},
    {Kind::kQbr, "qbr"},
    {Kind::kQjr, "qjr"},
    {Kind::kCollapse, "collapse"},
    {Kind::kWeakCollapse, "weak_collapse"},
    {Kind::kThermal, "thermal"},
    {Kind::kReprior, "reprior"},
};

}  // namespace

const char* kind_name(Kind kind) {
    for (const auto& entry : kKindTable) {
        if (entry.kind == kind) return entry.name;
    }
    return "unknown";
}

Kind kind_from_name(const std::string& name) {
    for (const auto& entry : kKindTable) {
        if (name == entry.name) return entry.kind;
    }
    throw ValidationError("unknown scenario kind '" + name + "'");
}

Scenario parse_scenario(const Json& document) {
    if (!document.is_object()) throw ParseError("scenario: document must be a JSON object");
    Scenario s;
    s.raw = document;
    const Json& kind = json_io::require_field(document, "kind", "scenario");
    if (!kind.is_string()) throw ParseError("scenario: 'kind' must be a string");
    s.kind = kind_from_name(kind.get<std::string>());
    s.inputs = json_io::require_field(document, "inputs", "scenario");
    if (!s.inputs.is_object()) throw ParseError("scenario: 'inputs' must be an object");
    if (document.contains("seed")) {
        if (!document["seed"].is_number_integer()) {
            throw ParseError("scenario: 'seed' must be an integer");
        }
        s.seed = document["seed"].get<std::uint64_t>();
    }
    return s;
}

Scenario load_scenario(const std::string& path) {
    return parse_scenario(json_io::load_file(path));
}

namespace {

// ---------------------------------------------------------------- utilities

Eigen::Index resolve_outcome(const Json& j, const std::vector<std::string>& labels,
                             const std::string& what) {
    if (j.is_number_integer()) {
        const auto idx = j.get<Eigen::Index>();
        if (idx < 0 || idx >= static_cast<Eigen::Index>(labels.size())) {
            throw ValidationError(what + ": outcome index out of range");
        }
        return idx;
    }
    if (j.is_string()) {
        const std::string label = j.get<std::string>();
        const auto it = std::find(labels.begin(), labels.end(), label);
        if (it == labels.end()) {
            throw ValidationError(what + ": unknown outcome label '" + label + "'");
        }
        return static_cast<Eigen::Index>(it - labels.begin());
    }
    throw ParseError(what + ": outcome must be an index or a label");
}

qsolver::SolveOptions quantum_options(const Json& inputs, const Overrides& overrides) {
    qsolver::SolveOptions opts;
    if (inputs.contains("options")) {
        const Json& o = inputs["options"];
        if (o.contains("max_iter")) opts.max_iter = o["max_iter"].get<int>();
        if (o.contains("dual_tol")) opts.dual_tol = o["dual_tol"].get<double>();
        if (o.contains("damping")) opts.damping = o["damping"].get<double>();
        if (o.contains("fd_step")) opts.fd_step = o["fd_step"].get<double>();
        if (o.contains("hessian")) {
            const std::string h = o["hessian"].get<std::string>();
            if (h == "kubo_mori") opts.hessian = qsolver::HessianScheme::kKuboMori;
            else if (h == "finite_difference") opts.hessian = qsolver::HessianScheme::kFiniteDifference;
            else throw ValidationError("options.hessian must be finite_difference or kubo_mori");
        }
    }
    if (overrides.dual_tol) opts.dual_tol = *overrides.dual_tol;
    if (overrides.max_iter) opts.max_iter = *overrides.max_iter;
    if (overrides.damping) opts.damping = *overrides.damping;
    return opts;
}

classical::SolveOptions classical_options(const Json& inputs, const Overrides& overrides) {
    classical::SolveOptions opts;
    if (inputs.contains("options")) {
        const Json& o = inputs["options"];
        if (o.contains("max_iter")) opts.max_iter = o["max_iter"].get<int>();
        if (o.contains("dual_tol")) opts.dual_tol = o["dual_tol"].get<double>();
        if (o.contains("damping")) opts.damping = o["damping"].get<double>();
    }
    if (overrides.dual_tol) opts.dual_tol = *overrides.dual_tol;
    if (overrides.max_iter) opts.max_iter = *overrides.max_iter;
    if (overrides.damping) opts.damping = *overrides.damping;
    return opts;
}

Json vector_to_json(const RealVector& v) {
    return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

Json checks_to_json(const CheckList& checks) {
    Json out = Json::array();
    for (const auto& c : checks) {
        Json item;
        item["name"] = c.name;
        item["tolerance"] = c.tolerance;
        item["measured"] = c.measured;
        item["pass"] = c.pass;
        if (!c.detail.empty()) item["detail"] = c.detail;
        out.push_back(std::move(item));
    }
    return out;
}

std::vector<classical::Constraint> classical_constraints_from_json(const Json& j,
                                                                   Eigen::Index n) {
    if (!j.is_array()) throw ParseError("constraints must be an array");
    std::vector<classical::Constraint> out;
    for (std::size_t k = 0; k < j.size(); ++k) {
        const Json& item = j[k];
        const Json& obs = json_io::require_field(item, "observable", "constraint");
        if (!obs.is_array() || static_cast<Eigen::Index>(obs.size()) != n) {
            throw ValidationError("constraint observable length must match the outcome count");
        }
        classical::Constraint c;
        c.observable.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            c.observable(i) = obs[static_cast<std::size_t>(i)].get<double>();
        }
        c.target = json_io::require_number(item, "target", "constraint");
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<ComplexMatrix> projector_family_from_json(const Json& inputs,
                                                      Eigen::Index dim) {
    if (inputs.contains("projectors")) {
        const Json& arr = inputs["projectors"];
        if (!arr.is_array() || arr.empty()) {
            throw ParseError("collapse: 'projectors' must be a nonempty array of matrices");
        }
        std::vector<ComplexMatrix> out;
        for (const auto& p : arr) out.push_back(json_io::matrix_from_json(p, "projector"));
        return out;
    }
    if (inputs.contains("basis")) {
        const ComplexMatrix basis = json_io::matrix_from_json(inputs["basis"], "basis");
        if (basis.rows() != dim || basis.cols() != dim) {
            throw ValidationError("collapse: basis must be square and match the prior dimension");
        }
        return measurement::basis_projectors(basis);
    }
    // Default: the computational basis.
    return measurement::basis_projectors(ComplexMatrix::Identity(dim, dim));
}

// ------------------------------------------------------------ kind handlers

struct KindOutcome {
    Json result;
    Json diagnostics;
    CheckList checks;
};

KindOutcome run_classical_maxent(const Json& inputs, const Overrides& overrides) {
    Distribution prior =
        json_io::distribution_from_json(json_io::require_field(inputs, "prior", "inputs"),
                                        "prior");
    std::vector<classical::Constraint> constraints;
    if (inputs.contains("constraints")) {
        constraints = classical_constraints_from_json(inputs["constraints"],
                                                      prior.probs.size());
    }
    const classical::SolveOptions opts = classical_options(inputs, overrides);
    classical::MaxEntResult r = classical::solve_maxent(prior, constraints, opts);

    KindOutcome out;
    out.result["posterior"] = json_io::distribution_to_json(r.posterior);
    out.result["alphas"] = vector_to_json(r.alphas);
    out.result["lnZ"] = r.ln_z;
    out.diagnostics["iterations"] = r.iterations;
    out.diagnostics["residuals"] = vector_to_json(r.residuals);
    out.diagnostics["near_singular_hessian"] = r.near_singular_hessian;
    out.checks = checks::classical_solution_checks(prior, constraints, r, opts.dual_tol);
    return out;
}

KindOutcome run_classical_bayes(const Json& inputs, const Overrides&) {
    JointDistribution joint =
        json_io::joint_from_json(json_io::require_field(inputs, "joint", "inputs"), "joint");
    const Eigen::Index observed = resolve_outcome(
        json_io::require_field(inputs, "observed_x", "inputs"), joint.x_labels, "observed_x");
    Distribution posterior = classical::bayes_update(joint, observed);

    KindOutcome out;
    out.result["posterior"] = json_io::distribution_to_json(posterior);
    out.result["observed_x"] = joint.x_labels[static_cast<std::size_t>(observed)];
    out.checks = checks::bayes_checks(joint, observed, posterior);
    return out;
}

KindOutcome run_classical_jeffrey(const Json& inputs, const Overrides&) {
    JointDistribution joint =
        json_io::joint_from_json(json_io::require_field(inputs, "joint", "inputs"), "joint");
    Distribution data = json_io::distribution_from_json(
        json_io::require_field(inputs, "outcome_dist", "inputs"), "outcome_dist");
    Distribution posterior = classical::jeffrey_update(joint, data);

    KindOutcome out;
    out.result["posterior"] = json_io::distribution_to_json(posterior);
    out.checks.push_back(checks::check_le("posterior.normalized",
                                          std::abs(posterior.probs.sum() - 1.0), 1e-12));
    // Delta reduction: a point-mass data distribution must reproduce Bayes.
    Eigen::Index point = -1;
    for (Eigen::Index x = 0; x < data.probs.size(); ++x) {
        if (data.probs(x) == 1.0) point = x;
    }
    if (point >= 0) {
        Distribution bayes = classical::bayes_update(joint, point);
        out.checks.push_back(checks::check_le(
            "point_mass_reduces_to_bayes",
            (posterior.probs - bayes.probs).cwiseAbs().maxCoeff(), 1e-12));
    }
    const RealVector marginal = joint.x_marginal();
    if ((data.probs - marginal).cwiseAbs().maxCoeff() <= 1e-15) {
        out.checks.push_back(checks::check_le(
            "marginal_data_is_no_update",
            (posterior.probs - joint.theta_marginal()).cwiseAbs().maxCoeff(), 1e-12));
    }
    return out;
}

KindOutcome run_qmaxent(const Json& inputs, const Overrides& overrides) {
    DensityMatrix prior = DensityMatrix::from_matrix(
        json_io::matrix_from_json(json_io::require_field(inputs, "prior", "inputs"), "prior"));
    std::vector<qsolver::QuantumConstraint> constraints;
    if (inputs.contains("constraints")) {
        constraints = json_io::constraints_from_json(inputs["constraints"], "constraints");
    }
    const qsolver::SolveOptions opts = quantum_options(inputs, overrides);
    qsolver::MaxEntSolution solution = qsolver::solve_maxent(prior, constraints, opts);

    KindOutcome out;
    out.result = json_io::solution_to_json(solution);
    out.diagnostics["iterations"] = solution.iterations;
    out.diagnostics["residuals"] = vector_to_json(solution.residuals);
    out.checks = checks::quantum_solution_checks(prior, constraints, solution, opts.dual_tol);
    return out;
}

KindOutcome run_pdmt_sweep(const Json& inputs, const Overrides& overrides) {
    DensityMatrix prior = DensityMatrix::from_matrix(
        json_io::matrix_from_json(json_io::require_field(inputs, "prior", "inputs"), "prior"));
    std::vector<qsolver::QuantumConstraint> constraints = json_io::constraints_from_json(
        json_io::require_field(inputs, "constraints", "inputs"), "constraints");

    std::vector<double> epsilons;
    if (inputs.contains("epsilons")) {
        for (const auto& e : inputs["epsilons"]) epsilons.push_back(e.get<double>());
    } else {
        for (int k = 2; k <= 10; ++k) epsilons.push_back(std::pow(10.0, -k));
    }
    auto scheme = qsolver::RegularizationScheme::kBlockFill;
    if (inputs.contains("scheme")) {
        const std::string s = inputs["scheme"].get<std::string>();
        if (s == "convex_mix") scheme = qsolver::RegularizationScheme::kConvexMix;
        else if (s != "block_fill") throw ValidationError("scheme must be block_fill or convex_mix");
    }
    const qsolver::SolveOptions opts = quantum_options(inputs, overrides);
    qsolver::PdmtStudy study =
        qsolver::pdmt_limit_study(prior, constraints, epsilons, scheme, opts);

    KindOutcome out;
    Json points = Json::array();
    for (const auto& p : study.points) {
        Json item;
        item["epsilon"] = p.epsilon;
        item["solved"] = p.solved;
        if (p.solved) {
            item["kernel_weight"] = p.kernel_weight;
            item["support_block_distance"] = p.support_block_distance;
            item["prior_distance"] = p.prior_distance;
            item["lnZ"] = p.ln_z;
            item["alphas"] = vector_to_json(p.alphas);
        } else {
            item["error"] = p.error;
        }
        points.push_back(std::move(item));
    }
    out.result["rank"] = study.rank;
    out.result["dim"] = study.dim;
    out.result["points"] = std::move(points);
    out.result["projected_solution"] = json_io::solution_to_json(*study.projected_solution);
    Json ranges = Json::array();
    for (const auto& pc : study.projected_constraints) {
        ranges.push_back(Json::array({pc.achievable_min, pc.achievable_max}));
    }
    out.result["projected_target_ranges"] = std::move(ranges);
    out.diagnostics["fitted_linear_coefficient"] = study.fitted_linear_coefficient;
    out.checks = checks::pdmt_checks(study);
    checks::append(out.checks, checks::density_checks("projected_posterior",
                                                      study.projected_solution->posterior));
    return out;
}

KindOutcome run_qbr(const Json& inputs, const Overrides& overrides) {
    DensityMatrix prior = DensityMatrix::from_matrix(
        json_io::matrix_from_json(json_io::require_field(inputs, "prior", "inputs"), "prior"));
    KrausSet kraus =
        json_io::kraus_from_json(json_io::require_field(inputs, "kraus", "inputs"), "kraus");
    const Eigen::Index outcome = resolve_outcome(
        json_io::require_field(inputs, "outcome", "inputs"), kraus.labels(), "outcome");

    DensityMatrix entropic = measurement::qbr_entropic(prior, kraus, outcome);
    DensityMatrix direct = measurement::qbr_direct(prior, kraus, outcome);

    KindOutcome out;
    out.result["posterior"] = json_io::matrix_to_json(entropic.matrix());
    out.result["outcome"] = kraus.labels()[static_cast<std::size_t>(outcome)];
    out.result["evidence"] =
        vector_to_json(measurement::evidence_distribution(prior, kraus));
    out.checks = checks::qbr_checks(prior, kraus, outcome, entropic, direct);

    if (inputs.contains("cross_validate_generic") &&
        inputs["cross_validate_generic"].get<bool>()) {
        measurement::EntropicOptions gopts;
        gopts.via_generic_solver = true;
        gopts.solver = quantum_options(inputs, overrides);
        DensityMatrix generic = measurement::qbr_entropic(prior, kraus, outcome, gopts);
        out.checks.push_back(checks::check_le(
            "generic_solver_route", linops::max_abs(generic.matrix() - direct.matrix()),
            1e-4));
    }
    return out;
}

KindOutcome run_qjr(const Json& inputs, const Overrides&) {
    DensityMatrix prior = DensityMatrix::from_matrix(
        json_io::matrix_from_json(json_io::require_field(inputs, "prior", "inputs"), "prior"));
    KrausSet kraus =
        json_io::kraus_from_json(json_io::require_field(inputs, "kraus", "inputs"), "kraus");
    Distribution data = json_io::distribution_from_json(
        json_io::require_field(inputs, "outcome_dist", "inputs"), "outcome_dist");
    DensityMatrix posterior = measurement::quantum_jeffrey(prior, kraus, data);

    KindOutcome out;
    out.result["posterior"] = json_io::matrix_to_json(posterior.matrix());
    out.checks = checks::density_checks("posterior", posterior);
    out.checks.push_back(
        checks::check_le("kraus_completeness", kraus.completeness_defect(), 1e-10));

    Eigen::Index point = -1;
    for (Eigen::Index x = 0; x < data.probs.size(); ++x) {
        if (data.probs(x) == 1.0) point = x;
    }
    if (point >= 0) {
        out.checks.push_back(checks::check_le(
            "point_mass_reduces_to_qbr",
            linops::max_abs(posterior.matrix() -
                            measurement::qbr_direct(prior, kraus, point).matrix()),
            1e-12));
    }
    const RealVector evidence = measurement::evidence_distribution(prior, kraus);
    if ((data.probs - evidence).cwiseAbs().maxCoeff() <= 1e-12) {
        ComplexMatrix nonselective = ComplexMatrix::Zero(prior.dim(), prior.dim());
        for (Eigen::Index x = 0; x < kraus.size(); ++x) {
            nonselective += kraus[x] * prior.matrix() * kraus[x].adjoint();
        }
        out.checks.push_back(checks::check_le(
            "marginal_data_is_nonselective_update",
            linops::max_abs(posterior.matrix() - nonselective), 1e-12));
    }
    return out;
}

KindOutcome run_collapse(const Json& inputs, const Overrides& overrides) {
    DensityMatrix prior = DensityMatrix::from_matrix(
        json_io::matrix_from_json(json_io::require_field(inputs, "prior", "inputs"), "prior"));
    std::vector<ComplexMatrix> projectors = projector_family_from_json(inputs, prior.dim());

    KindOutcome out;
    if (!inputs.contains("outcome")) {
        // Non-selective Lueders map.
        DensityMatrix mixed = measurement::decohere(prior, projectors);
        out.result["posterior"] = json_io::matrix_to_json(mixed.matrix());
        out.checks = checks::density_checks("posterior", mixed);
        DensityMatrix twice = measurement::decohere(mixed, projectors);
        out.checks.push_back(checks::check_le(
            "decohere_idempotent", linops::max_abs(twice.matrix() - mixed.matrix()), 1e-12));
        out.checks.push_back(checks::check_le(
            "trace_preserved",
            std::abs(mixed.matrix().trace().real() - prior.matrix().trace().real()), 1e-14));
        double block_change = 0.0;
        for (const auto& p : projectors) {
            block_change = std::max(block_change,
                                    linops::max_abs(p * (mixed.matrix() - prior.matrix()) * p));
        }
        out.checks.push_back(checks::check_le("diagonal_blocks_preserved", block_change, 1e-12));
        return out;
    }

    // Selective projective collapse: a projector family is a Kraus set, so
    // the entropic route and the closed form must agree.
    KrausSet kraus(projectors,
                   inputs.contains("labels")
                       ? inputs["labels"].get<std::vector<std::string>>()
                       : std::vector<std::string>{});
    const Eigen::Index outcome =
        resolve_outcome(inputs["outcome"], kraus.labels(), "outcome");
    DensityMatrix entropic = measurement::qbr_entropic(prior, kraus, outcome);
    DensityMatrix direct = measurement::qbr_direct(prior, kraus, outcome);
    out.result["posterior"] = json_io::matrix_to_json(entropic.matrix());
    out.result["outcome"] = kraus.labels()[static_cast<std::size_t>(outcome)];
    out.result["evidence"] = vector_to_json(measurement::evidence_distribution(prior, kraus));
    out.checks = checks::qbr_checks(prior, kraus, outcome, entropic, direct);
    (void)overrides;
    return out;
}

KindOutcome run_weak_collapse(const Json& inputs, const Overrides&) {
    DensityMatrix prior = DensityMatrix::from_matrix(
        json_io::matrix_from_json(json_io::require_field(inputs, "prior", "inputs"), "prior"));
    std::vector<ComplexMatrix> projectors = projector_family_from_json(inputs, prior.dim());
    KrausSet kraus(projectors);
    Distribution data = json_io::distribution_from_json(
        json_io::require_field(inputs, "outcome_dist", "inputs"), "outcome_dist");
    DensityMatrix posterior = measurement::quantum_jeffrey(prior, kraus, data);

    KindOutcome out;
    out.result["posterior"] = json_io::matrix_to_json(posterior.matrix());
    out.checks = checks::density_checks("posterior", posterior);
    // The weak-collapse posterior of a projective family is block diagonal
    // with block weights equal to the data distribution.
    double weight_error = 0.0;
    for (Eigen::Index x = 0; x < kraus.size(); ++x) {
        const double w =
            (kraus[x] * posterior.matrix() * kraus[x].adjoint()).trace().real();
        weight_error = std::max(weight_error, std::abs(w - data.probs(x)));
    }
    out.checks.push_back(checks::check_le("posterior_weights_match_data", weight_error, 1e-10));
    return out;
}

KindOutcome run_thermal(const Json& inputs, const Overrides&) {
    DensityMatrix prior = DensityMatrix::from_matrix(
        json_io::matrix_from_json(json_io::require_field(inputs, "prior", "inputs"), "prior"));
    KrausSet kraus =
        json_io::kraus_from_json(json_io::require_field(inputs, "kraus", "inputs"), "kraus");
    const Json& energies_json = json_io::require_field(inputs, "energies", "inputs");
    if (!energies_json.is_array()) throw ParseError("thermal: 'energies' must be an array");
    RealVector energies(static_cast<Eigen::Index>(energies_json.size()));
    for (std::size_t i = 0; i < energies_json.size(); ++i) {
        energies(static_cast<Eigen::Index>(i)) = energies_json[i].get<double>();
    }
    const double target = json_io::require_number(inputs, "target", "inputs");

    measurement::ThermalResult result =
        measurement::thermal_weak_collapse(prior, kraus, energies, target);

    KindOutcome out;
    out.result["posterior"] = json_io::matrix_to_json(result.posterior.matrix());
    out.result["beta"] = result.beta;
    out.result["outcome_dist"] = json_io::distribution_to_json(result.outcome_dist);
    out.result["lnZ"] = result.ln_z;
    out.checks = checks::thermal_checks(prior, kraus, energies, target, result);
    return out;
}

KindOutcome run_reprior(const Json& inputs, const Overrides&) {
    DensityMatrix prior = DensityMatrix::from_matrix(
        json_io::matrix_from_json(json_io::require_field(inputs, "prior", "inputs"), "prior"));
    DensityMatrix next = DensityMatrix::from_matrix(json_io::matrix_from_json(
        json_io::require_field(inputs, "new_prior", "inputs"), "new_prior"));
    qsolver::RepriorResult result = qsolver::reprior_transform(prior, next);

    KindOutcome out;
    out.result["state"] = json_io::matrix_to_json(result.state.matrix());
    out.result["trace_before_normalization"] = result.trace_before_normalization;
    out.result["disjoint_support_warning"] = result.disjoint_support_warning;
    out.checks = checks::density_checks("state", result.state);
    if (prior.min_eigenvalue() > linops::kSupportTol) {
        // Invertible starting prior: the transform must return the new prior.
        out.checks.push_back(checks::check_le(
            "invertible_prior_returns_new_prior",
            linops::max_abs(result.state.matrix() - next.matrix()), 1e-10));
    }
    return out;
}

KindOutcome dispatch(const Scenario& scenario, const Overrides& overrides) {
    switch (scenario.kind) {
        case Kind::kClassicalMaxent: return run_classical_maxent(scenario.inputs, overrides);
        case Kind::kClassicalBayes: return run_classical_bayes(scenario.inputs, overrides);
        case Kind::kClassicalJeffrey: return run_classical_jeffrey(scenario.inputs, overrides);
        case Kind::kQMaxent: return run_qmaxent(scenario.inputs, overrides);
        case Kind::kPdmtSweep: return run_pdmt_sweep(scenario.inputs, overrides);
        case Kind::kQbr: return run_qbr(scenario.inputs, overrides);
        case Kind::kQjr: return run_qjr(scenario.inputs, overrides);
        case Kind::kCollapse: return run_collapse(scenario.inputs, overrides);
        case Kind::kWeakCollapse: return run_weak_collapse(scenario.inputs, overrides);
        case Kind::kThermal: return run_thermal(scenario.inputs, overrides);
        case Kind::kReprior: return run_reprior(scenario.inputs, overrides);
    }
    throw ValidationError("scenario kind not dispatchable");
}

}  // namespace

RunReport run_scenario(const Scenario& scenario, const Overrides& overrides) {
    const auto start = std::chrono::steady_clock::now();
    KindOutcome outcome = dispatch(scenario, overrides);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    RunReport report;
    report.all_checks_passed = checks::all_passed(outcome.checks);
    report.json["scenario"] = scenario.raw;
    report.json["result"] = std::move(outcome.result);
    Json diagnostics = std::move(outcome.diagnostics);
    diagnostics["checks"] = checks_to_json(outcome.checks);
    report.json["diagnostics"] = std::move(diagnostics);
    report.json["all_checks_passed"] = report.all_checks_passed;
    report.json["wall_time"] = elapsed;
    return report;
}

RunReport run_scenario_file(const std::string& path, const Overrides& overrides) {
    return run_scenario(load_scenario(path), overrides);
}

Json validate_scenario(const Json& document) {
    Scenario scenario = parse_scenario(document);
    // Build every typed payload without solving anything heavier than the
    // constructors' own validation.
    const Json& inputs = scenario.inputs;
    switch (scenario.kind) {
        case Kind::kClassicalMaxent: {
            Distribution prior = json_io::distribution_from_json(
                json_io::require_field(inputs, "prior", "inputs"), "prior");
            if (inputs.contains("constraints")) {
                classical_constraints_from_json(inputs["constraints"], prior.probs.size());
            }
            break;
        }
        case Kind::kClassicalBayes: {
            JointDistribution joint = json_io::joint_from_json(
                json_io::require_field(inputs, "joint", "inputs"), "joint");
            resolve_outcome(json_io::require_field(inputs, "observed_x", "inputs"),
                            joint.x_labels, "observed_x");
            break;
        }
        case Kind::kClassicalJeffrey: {
            JointDistribution joint = json_io::joint_from_json(
                json_io::require_field(inputs, "joint", "inputs"), "joint");
            Distribution data = json_io::distribution_from_json(
                json_io::require_field(inputs, "outcome_dist", "inputs"), "outcome_dist");
            if (data.probs.size() != joint.probs.rows()) {
                throw ValidationError("outcome_dist length must match |x|");
            }
            break;
        }
        case Kind::kQMaxent:
        case Kind::kPdmtSweep: {
            DensityMatrix prior = DensityMatrix::from_matrix(json_io::matrix_from_json(
                json_io::require_field(inputs, "prior", "inputs"), "prior"));
            if (inputs.contains("constraints")) {
                for (const auto& c :
                     json_io::constraints_from_json(inputs["constraints"], "constraints")) {
                    if (c.observable.dim() != prior.dim()) {
                        throw ValidationError("constraint observable dimension mismatch");
                    }
                }
            }
            break;
        }
        case Kind::kQbr:
        case Kind::kQjr:
        case Kind::kThermal: {
            DensityMatrix prior = DensityMatrix::from_matrix(json_io::matrix_from_json(
                json_io::require_field(inputs, "prior", "inputs"), "prior"));
            KrausSet kraus = json_io::kraus_from_json(
                json_io::require_field(inputs, "kraus", "inputs"), "kraus");
            if (kraus.dim_theta() != prior.dim()) {
                throw ValidationError("kraus dimension does not match the prior");
            }
            if (scenario.kind == Kind::kQbr) {
                resolve_outcome(json_io::require_field(inputs, "outcome", "inputs"),
                                kraus.labels(), "outcome");
            }
            if (scenario.kind == Kind::kThermal) {
                const Json& e = json_io::require_field(inputs, "energies", "inputs");
                if (!e.is_array() || static_cast<Eigen::Index>(e.size()) != kraus.size()) {
                    throw ValidationError("energies must list one value per Kraus outcome");
                }
                json_io::require_number(inputs, "target", "inputs");
            }
            if (scenario.kind == Kind::kQjr) {
                Distribution data = json_io::distribution_from_json(
                    json_io::require_field(inputs, "outcome_dist", "inputs"), "outcome_dist");
                if (data.probs.size() != kraus.size()) {
                    throw ValidationError("outcome_dist length must match the Kraus set");
                }
            }
            break;
        }
        case Kind::kCollapse:
        case Kind::kWeakCollapse: {
            DensityMatrix prior = DensityMatrix::from_matrix(json_io::matrix_from_json(
                json_io::require_field(inputs, "prior", "inputs"), "prior"));
            projector_family_from_json(inputs, prior.dim());
            if (scenario.kind == Kind::kWeakCollapse) {
                json_io::require_field(inputs, "outcome_dist", "inputs");
            }
            break;
        }
        case Kind::kReprior: {
            DensityMatrix prior = DensityMatrix::from_matrix(json_io::matrix_from_json(
                json_io::require_field(inputs, "prior", "inputs"), "prior"));
            DensityMatrix next = DensityMatrix::from_matrix(json_io::matrix_from_json(
                json_io::require_field(inputs, "new_prior", "inputs"), "new_prior"));
            if (prior.dim() != next.dim()) {
                throw ValidationError("reprior states must share a dimension");
            }
            break;
        }
    }
    Json out;
    out["valid"] = true;
    out["kind"] = kind_name(scenario.kind);
    return out;
}

RunReport run_selftest(const SelftestOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    checks::SelftestOptions opts;
    opts.dims = options.dims;
    opts.trials = options.trials;
    opts.seed = options.seed;
    CheckList results = checks::selftest_suite(opts);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    RunReport report;
    report.all_checks_passed = checks::all_passed(results);
    Json echo;
    echo["dims"] = options.dims;
    echo["trials"] = options.trials;
    echo["seed"] = options.seed;
    report.json["selftest"] = std::move(echo);
    Json diagnostics;
    diagnostics["checks"] = checks_to_json(results);
    report.json["diagnostics"] = std::move(diagnostics);
    report.json["all_checks_passed"] = report.all_checks_passed;
    report.json["wall_time"] = elapsed;
    return report;
}

RunReport run_solve_request(const Json& request, const Overrides& overrides) {
    Json document;
    document["kind"] = "qmaxent";
    document["inputs"] = request;
    return run_scenario(parse_scenario(document), overrides);
}

namespace {

std::string format_number(double x) {
    std::ostringstream os;
    os << std::setprecision(6) << x;
    return os.str();
}

void render_matrix(std::ostream& os, const Json& m, const std::string& indent) {
    const auto rows = m["dim_rows"].get<Eigen::Index>();
    const auto cols = m["dim_cols"].get<Eigen::Index>();
    const Json& entries = m["entries"];
    for (Eigen::Index i = 0; i < rows; ++i) {
        os << indent << "[";
        for (Eigen::Index j = 0; j < cols; ++j) {
            const auto& e = entries[static_cast<std::size_t>(i * cols + j)];
            const double re = e[0].get<double>();
            const double im = e[1].get<double>();
            os << " " << format_number(re);
            if (std::abs(im) > 0.0) os << (im < 0 ? "-" : "+") << format_number(std::abs(im)) << "i";
        }
        os << " ]\n";
    }
}

void render_result_entry(std::ostream& os, const std::string& key, const Json& value) {
    if (value.is_object() && value.contains("dim_rows")) {
        os << "  " << key << ":\n";
        render_matrix(os, value, "    ");
    } else if (value.is_object() && value.contains("probs")) {
        os << "  " << key << ": probs = [";
        for (const auto& p : value["probs"]) os << " " << format_number(p.get<double>());
        os << " ]\n";
    } else if (value.is_number_float()) {
        os << "  " << key << ": " << format_number(value.get<double>()) << "\n";
    } else if (value.is_array() &&
               std::all_of(value.begin(), value.end(),
                           [](const Json& v) { return v.is_number(); })) {
        os << "  " << key << ": [";
        for (const auto& a : value) os << " " << format_number(a.get<double>());
        os << " ]\n";
    } else if (!value.is_structured()) {
        os << "  " << key << ": " << value.dump() << "\n";
    }
}

}  // namespace

std::string render_text(const Json& report) {
    std::ostringstream os;
    if (report.contains("scenario")) {
        os << "scenario: " << report["scenario"]["kind"].get<std::string>() << "\n";
    } else if (report.contains("selftest")) {
        const Json& st = report["selftest"];
        os << "selftest: dims=" << st["dims"].dump() << " trials=" << st["trials"].get<int>()
           << " seed=" << st["seed"].get<std::uint64_t>() << "\n";
    }
    if (report.contains("result")) {
        os << "result:\n";
        for (const auto& [key, value] : report["result"].items()) {
            render_result_entry(os, key, value);
        }
        if (report["result"].contains("points")) {
            os << "  sweep:\n";
            for (const auto& p : report["result"]["points"]) {
                os << "    eps=" << format_number(p["epsilon"].get<double>());
                if (p["solved"].get<bool>()) {
                    os << " kernel_weight=" << format_number(p["kernel_weight"].get<double>())
                       << " support_distance="
                       << format_number(p["support_block_distance"].get<double>());
                } else {
                    os << " error=" << p["error"].get<std::string>();
                }
                os << "\n";
            }
        }
    }
    if (report.contains("diagnostics") && report["diagnostics"].contains("checks")) {
        os << "checks:\n";
        for (const auto& c : report["diagnostics"]["checks"]) {
            os << "  [" << (c["pass"].get<bool>() ? "PASS" : "FAIL") << "] "
               << c["name"].get<std::string>()
               << " measured=" << format_number(c["measured"].get<double>())
               << " tol=" << format_number(c["tolerance"].get<double>());
            if (c.contains("detail")) os << "  (" << c["detail"].get<std::string>() << ")";
            os << "\n";
        }
    }
    os << (report["all_checks_passed"].get<bool>() ? "ALL CHECKS PASSED" : "CHECK FAILURES")
       << " (wall_time " << format_number(report["wall_time"].get<double>()) << " s)\n";
    return os.str();
}

}  // namespace qme::scenario

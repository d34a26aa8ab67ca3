#include "measurement.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <tuple>

namespace qme::measurement {

using linops::max_abs;
using linops::Subsystem;

KrausSet::KrausSet(std::vector<ComplexMatrix> operators, std::vector<std::string> labels,
                   double completeness_tol)
    : operators_(std::move(operators)), labels_(std::move(labels)) {
    if (operators_.empty()) throw ValidationError("KrausSet: no operators");
    const Eigen::Index d = operators_.front().rows();
    for (const auto& a : operators_) {
        if (a.rows() != d || a.cols() != d) {
            throw DimensionMismatch("KrausSet: all operators must be d_theta x d_theta");
        }
        linops::require_finite(a, "KrausSet");
    }
    ComplexMatrix total = ComplexMatrix::Zero(d, d);
    for (const auto& a : operators_) total += a.adjoint() * a;
    completeness_defect_ = max_abs(total - ComplexMatrix::Identity(d, d));
    if (completeness_defect_ > completeness_tol) {
        std::ostringstream os;
        os << "KrausSet: |sum A'A - 1| = " << completeness_defect_
           << " exceeds completeness tolerance " << completeness_tol;
        throw ValidationError(os.str());
    }
    if (labels_.empty()) {
        for (std::size_t x = 0; x < operators_.size(); ++x) labels_.push_back(std::to_string(x));
    }
    if (labels_.size() != operators_.size()) {
        throw ValidationError("KrausSet: labels and operators must have equal length");
    }
}

KrausSet KrausSet::projective(const ComplexMatrix& basis, std::vector<std::string> labels) {
    if (basis.rows() != basis.cols()) {
        throw DimensionMismatch("KrausSet::projective: basis must be square");
    }
    std::vector<ComplexMatrix> projectors;
    for (Eigen::Index i = 0; i < basis.cols(); ++i) {
        projectors.push_back(basis.col(i) * basis.col(i).adjoint());
    }
    return KrausSet(std::move(projectors), std::move(labels));
}

std::vector<ComplexMatrix> basis_projectors(const ComplexMatrix& basis) {
    std::vector<ComplexMatrix> projectors;
    for (Eigen::Index i = 0; i < basis.cols(); ++i) {
        projectors.push_back(basis.col(i) * basis.col(i).adjoint());
    }
    return projectors;
}

DensityMatrix decohere(const DensityMatrix& rho, const std::vector<ComplexMatrix>& projectors) {
    const Eigen::Index n = rho.dim();
    if (projectors.empty()) throw BadProjectorFamily("decohere: empty projector family");
    ComplexMatrix sum = ComplexMatrix::Zero(n, n);
    for (const auto& p : projectors) {
        if (p.rows() != n || p.cols() != n) {
            throw BadProjectorFamily("decohere: projector dimension mismatch");
        }
        sum += p;
    }
    if (max_abs(sum - ComplexMatrix::Identity(n, n)) > 1e-10) {
        throw BadProjectorFamily("decohere: projectors do not resolve the identity");
    }
    for (std::size_t i = 0; i < projectors.size(); ++i) {
        for (std::size_t j = 0; j < projectors.size(); ++j) {
            const ComplexMatrix product = projectors[i] * projectors[j];
            const ComplexMatrix expected = (i == j) ? projectors[i] : ComplexMatrix::Zero(n, n);
            if (max_abs(product - expected) > 1e-10) {
                throw BadProjectorFamily("decohere: family is not orthogonal-idempotent");
            }
        }
    }
    ComplexMatrix out = ComplexMatrix::Zero(n, n);
    for (const auto& p : projectors) out += p * rho.matrix() * p;
    return DensityMatrix::from_matrix(std::move(out));
}

DensityMatrix entangle_prior(const DensityMatrix& phi_theta, const KrausSet& kraus) {
    const Eigen::Index d = phi_theta.dim();
    if (kraus.dim_theta() != d) {
        throw DimensionMismatch("entangle_prior: Kraus operators do not match the prior dimension");
    }
    const Eigen::Index nx = kraus.size();
    ComplexMatrix joint = ComplexMatrix::Zero(nx * d, nx * d);
    for (Eigen::Index x = 0; x < nx; ++x) {
        for (Eigen::Index xp = 0; xp < nx; ++xp) {
            joint.block(x * d, xp * d, d, d) =
                kraus[x] * phi_theta.matrix() * kraus[xp].adjoint();
        }
    }
    return DensityMatrix::from_matrix(std::move(joint));
}

DilationModel dilation_from_kraus(const KrausSet& kraus) {
    const Eigen::Index d = kraus.dim_theta();
    const Eigen::Index nx = kraus.size();
    const Eigen::Index total = nx * d;

    // First block column: A_x stacked. Completeness makes its columns
    // orthonormal, so a full QR supplies the orthogonal complement.
    ComplexMatrix first(total, d);
    for (Eigen::Index x = 0; x < nx; ++x) first.block(x * d, 0, d, d) = kraus[x];

    Eigen::HouseholderQR<ComplexMatrix> qr(first);
    ComplexMatrix q = qr.householderQ();
    for (Eigen::Index i = 0; i < d; ++i) {
        if (std::abs(qr.matrixQR()(i, i)) < 1e-8) {
            throw CompletionFailure(
                "dilation_from_kraus: stacked Kraus columns are numerically rank deficient");
        }
    }

    ComplexMatrix unitary(total, total);
    unitary.leftCols(d) = first;
    unitary.rightCols(total - d) = q.rightCols(total - d);

    DilationModel model;
    model.ancilla_dim = nx;
    model.ancilla_ready_index = 0;
    model.unitary = std::move(unitary);
    model.unitarity_defect = max_abs(model.unitary.adjoint() * model.unitary -
                                     ComplexMatrix::Identity(total, total));
    double block_defect = 0.0;
    for (Eigen::Index x = 0; x < nx; ++x) {
        block_defect = std::max(block_defect,
                                max_abs(model.unitary.block(x * d, 0, d, d) - kraus[x]));
    }
    model.block_defect = block_defect;
    if (model.unitarity_defect > 1e-10) {
        throw CompletionFailure("dilation_from_kraus: completed matrix is not unitary; "
                                "completeness tolerance too loose");
    }
    return model;
}

DensityMatrix appropriate_prior(const DensityMatrix& phi_theta, const KrausSet& kraus) {
    const Eigen::Index d = phi_theta.dim();
    if (kraus.dim_theta() != d) {
        throw DimensionMismatch("appropriate_prior: Kraus operators do not match the prior");
    }
    const Eigen::Index nx = kraus.size();
    ComplexMatrix joint = ComplexMatrix::Zero(nx * d, nx * d);
    for (Eigen::Index x = 0; x < nx; ++x) {
        joint.block(x * d, x * d, d, d) = kraus[x] * phi_theta.matrix() * kraus[x].adjoint();
    }
    return DensityMatrix::from_matrix(std::move(joint));
}

RealVector evidence_distribution(const DensityMatrix& phi_theta, const KrausSet& kraus) {
    RealVector evidence(kraus.size());
    for (Eigen::Index x = 0; x < kraus.size(); ++x) {
        evidence(x) = (kraus[x] * phi_theta.matrix() * kraus[x].adjoint()).trace().real();
    }
    return evidence;
}

DensityMatrix qbr_direct(const DensityMatrix& phi_theta, const KrausSet& kraus,
                         Eigen::Index outcome) {
    if (outcome < 0 || outcome >= kraus.size()) {
        throw ValidationError("qbr_direct: outcome index out of range");
    }
    ComplexMatrix updated = kraus[outcome] * phi_theta.matrix() * kraus[outcome].adjoint();
    const double evidence = updated.trace().real();
    if (evidence <= kEvidenceTol) {
        std::ostringstream os;
        os << "qbr_direct: outcome '" << kraus.labels()[static_cast<std::size_t>(outcome)]
           << "' has evidence " << evidence << " below " << kEvidenceTol;
        throw ZeroEvidence(os.str());
    }
    updated /= evidence;
    return DensityMatrix::from_matrix(std::move(updated));
}

namespace {

// Per-x data targets softened off the spectral boundary for the generic
// solver: (1 - eta) on the observed outcome, eta spread over the rest.
RealVector softened_delta(Eigen::Index n, Eigen::Index observed, double eta) {
    RealVector t = RealVector::Constant(n, n > 1 ? eta / static_cast<double>(n - 1) : 0.0);
    t(observed) = 1.0 - eta;
    return t;
}

DensityMatrix qbr_entropic_generic(const DensityMatrix& phi_theta, const KrausSet& kraus,
                                   Eigen::Index outcome, const EntropicOptions& options) {
    const Eigen::Index d = phi_theta.dim();
    const Eigen::Index nx = kraus.size();
    DensityMatrix prior = appropriate_prior(phi_theta, kraus);
    // The blocks A_x phi A_x† need not be full rank; lift the joint prior
    // just enough for the generic dual (the lift scale tracks the softening).
    qsolver::RegularizedPrior lifted = qsolver::regularize_prior(
        prior, std::min(options.delta_softening * 1e-2, 1e-10),
        qsolver::RegularizationScheme::kConvexMix);

    // sum_x P_x = 1 makes the full constraint family linearly dependent with
    // normalization; one redundant member is dropped. A single-outcome set
    // leaves nothing to constrain at all.
    std::vector<qsolver::QuantumConstraint> constraints;
    const RealVector targets = softened_delta(nx, outcome, options.delta_softening);
    const Eigen::Index skip = (outcome == nx - 1) ? 0 : nx - 1;
    for (Eigen::Index x = 0; nx > 1 && x < nx; ++x) {
        if (x == skip) continue;
        ComplexMatrix projector = ComplexMatrix::Zero(nx * d, nx * d);
        projector.block(x * d, x * d, d, d) = ComplexMatrix::Identity(d, d);
        constraints.push_back({HermitianOperator(std::move(projector)), targets(x)});
    }
    qsolver::MaxEntSolution solution =
        qsolver::solve_maxent(lifted.regularized, constraints, options.solver);
    return linops::partial_trace(solution.posterior, nx, d, Subsystem::kFirst);
}

}  // namespace

DensityMatrix qbr_entropic(const DensityMatrix& phi_theta, const KrausSet& kraus,
                           Eigen::Index outcome, const EntropicOptions& options) {
    if (outcome < 0 || outcome >= kraus.size()) {
        throw ValidationError("qbr_entropic: outcome index out of range");
    }
    if (options.via_generic_solver) {
        return qbr_entropic_generic(phi_theta, kraus, outcome, options);
    }

    const Eigen::Index d = phi_theta.dim();
    const Eigen::Index nx = kraus.size();
    DensityMatrix prior = appropriate_prior(phi_theta, kraus);
    const RealVector evidence = evidence_distribution(phi_theta, kraus);
    if (evidence(outcome) <= kEvidenceTol) {
        std::ostringstream os;
        os << "qbr_entropic: delta constraint targets outcome '"
           << kraus.labels()[static_cast<std::size_t>(outcome)] << "' with evidence "
           << evidence(outcome);
        throw ZeroEvidence(os.str());
    }

    // The prior is block diagonal and commutes with the constraint projectors,
    // so the multipliers close: exp(a_x)/Z = delta_{x,outcome}/phi~(x). Rows
    // with zero target drop out; the observed block is rescaled by its own
    // evidence and the joint posterior is marginalized over the ancilla.
    ComplexMatrix joint_posterior = ComplexMatrix::Zero(nx * d, nx * d);
    joint_posterior.block(outcome * d, outcome * d, d, d) =
        prior.matrix().block(outcome * d, outcome * d, d, d) / evidence(outcome);
    DensityMatrix joint = DensityMatrix::from_matrix(std::move(joint_posterior));
    return linops::partial_trace(joint, nx, d, Subsystem::kFirst);
}

DensityMatrix quantum_jeffrey(const DensityMatrix& phi_theta, const KrausSet& kraus,
                              const classical::Distribution& outcome_dist) {
    classical::Distribution data = outcome_dist;
    data.validate();
    if (data.probs.size() != kraus.size()) {
        throw DimensionMismatch("quantum_jeffrey: outcome distribution length differs from the "
                                "number of Kraus operators");
    }
    const RealVector evidence = evidence_distribution(phi_theta, kraus);
    const Eigen::Index d = phi_theta.dim();
    ComplexMatrix out = ComplexMatrix::Zero(d, d);
    for (Eigen::Index x = 0; x < kraus.size(); ++x) {
        const double w = data.probs(x);
        if (w <= 0.0) continue;
        if (evidence(x) <= kEvidenceTol) {
            std::ostringstream os;
            os << "quantum_jeffrey: weight " << w << " on outcome '"
               << kraus.labels()[static_cast<std::size_t>(x)] << "' with evidence "
               << evidence(x);
            throw SupportViolation(os.str());
        }
        out += (w / evidence(x)) * (kraus[x] * phi_theta.matrix() * kraus[x].adjoint());
    }
    return DensityMatrix::from_matrix(std::move(out));
}

DensityMatrix ancilla_decohere(const DensityMatrix& joint, Eigen::Index dim_x,
                               Eigen::Index dim_theta) {
    if (joint.dim() != dim_x * dim_theta) {
        throw DimensionMismatch("ancilla_decohere: joint dimension is not d_x * d_theta");
    }
    ComplexMatrix out = ComplexMatrix::Zero(joint.dim(), joint.dim());
    for (Eigen::Index x = 0; x < dim_x; ++x) {
        out.block(x * dim_theta, x * dim_theta, dim_theta, dim_theta) =
            joint.matrix().block(x * dim_theta, x * dim_theta, dim_theta, dim_theta);
    }
    return DensityMatrix::from_matrix(std::move(out));
}

DensityMatrix complementary_prior(const DensityMatrix& joint, Eigen::Index dim_x,
                                  Eigen::Index dim_theta) {
    if (joint.dim() != dim_x * dim_theta) {
        throw DimensionMismatch("complementary_prior: joint dimension is not d_x * d_theta");
    }
    // Keep, for every theta, the x-x' lattice of entries at that theta;
    // zero everything that couples distinct theta values.
    ComplexMatrix out = ComplexMatrix::Zero(joint.dim(), joint.dim());
    for (Eigen::Index x = 0; x < dim_x; ++x) {
        for (Eigen::Index xp = 0; xp < dim_x; ++xp) {
            for (Eigen::Index t = 0; t < dim_theta; ++t) {
                out(x * dim_theta + t, xp * dim_theta + t) =
                    joint.matrix()(x * dim_theta + t, xp * dim_theta + t);
            }
        }
    }
    return DensityMatrix::from_matrix(std::move(out));
}

ThermalResult thermal_weak_collapse(const DensityMatrix& phi_theta, const KrausSet& kraus,
                                    const RealVector& energies, double target) {
    if (energies.size() != kraus.size()) {
        throw DimensionMismatch("thermal_weak_collapse: one energy per Kraus outcome required");
    }
    const RealVector evidence = evidence_distribution(phi_theta, kraus);

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (Eigen::Index x = 0; x < energies.size(); ++x) {
        if (evidence(x) > kEvidenceTol) {
            lo = std::min(lo, energies(x));
            hi = std::max(hi, energies(x));
        }
    }
    const double scale = std::max({1.0, std::abs(lo), std::abs(hi)});
    if (!(target > lo + 1e-12 * scale) || !(target < hi - 1e-12 * scale)) {
        std::ostringstream os;
        os << "thermal_weak_collapse: target " << target
           << " not strictly inside the achievable energy range (" << lo << ", " << hi << ")";
        throw InfeasibleTarget(os.str());
    }

    // <H>(beta) = sum eps_n e^{beta eps_n} phi~(eps_n) / Z is strictly
    // increasing in beta (its derivative is an energy variance), so the
    // inversion is a bracketed scalar Newton solve.
    auto stats = [&](double beta) {
        RealVector w(energies.size());
        double shift = -std::numeric_limits<double>::infinity();
        for (Eigen::Index x = 0; x < energies.size(); ++x) {
            if (evidence(x) > kEvidenceTol) {
                shift = std::max(shift, beta * energies(x) + std::log(evidence(x)));
            }
        }
        double z = 0.0, mean = 0.0;
        for (Eigen::Index x = 0; x < energies.size(); ++x) {
            if (evidence(x) <= kEvidenceTol) {
                w(x) = 0.0;
                continue;
            }
            w(x) = std::exp(beta * energies(x) + std::log(evidence(x)) - shift);
            z += w(x);
        }
        w /= z;
        for (Eigen::Index x = 0; x < energies.size(); ++x) mean += w(x) * energies(x);
        double var = 0.0;
        for (Eigen::Index x = 0; x < energies.size(); ++x) {
            var += w(x) * (energies(x) - mean) * (energies(x) - mean);
        }
        return std::tuple<double, double, RealVector, double>(mean, var, w,
                                                              shift + std::log(z));
    };

    double beta = 0.0;
    double bracket_lo = -1.0, bracket_hi = 1.0;
    for (int k = 0; k < 200 && std::get<0>(stats(bracket_lo)) > target; ++k) bracket_lo *= 2.0;
    for (int k = 0; k < 200 && std::get<0>(stats(bracket_hi)) < target; ++k) bracket_hi *= 2.0;
    if (std::get<0>(stats(bracket_lo)) > target || std::get<0>(stats(bracket_hi)) < target) {
        throw NonConvergence("thermal_weak_collapse: could not bracket beta");
    }
    bool converged = false;
    for (int iter = 0; iter < 200; ++iter) {
        auto [mean, var, w, lnz] = stats(beta);
        const double residual = mean - target;
        if (std::abs(residual) <= 1e-13 * scale) {
            converged = true;
            break;
        }
        if (residual > 0.0) bracket_hi = std::min(bracket_hi, beta);
        else bracket_lo = std::max(bracket_lo, beta);
        double next = var > 0.0 ? beta - residual / var : beta;
        if (!(next > bracket_lo) || !(next < bracket_hi)) {
            next = 0.5 * (bracket_lo + bracket_hi);
        }
        beta = next;
    }
    auto [mean, var, weights, lnz] = stats(beta);
    if (!converged && std::abs(mean - target) > 1e-10 * scale) {
        throw NonConvergence("thermal_weak_collapse: beta iteration did not converge");
    }

    ThermalResult result{
        quantum_jeffrey(phi_theta, kraus, classical::Distribution::from_probs(weights)),
        beta,
        classical::Distribution{kraus.labels(), weights},
        lnz,
    };
    result.outcome_dist.validate();
    return result;
}

}  // namespace qme::measurement

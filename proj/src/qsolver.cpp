#include "qsolver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "log.hpp"

namespace qme::qsolver {

using linops::EigResult;
using linops::eig_hermitian;
using linops::max_abs;

namespace {

// Shared state for one dual problem: the prior's log and the raw constraint
// matrices, all validated against a common dimension.
struct DualContext {
    Eigen::Index dim = 0;
    ComplexMatrix ln_prior;
    std::vector<ComplexMatrix> observables;
    RealVector targets;
};

DualContext make_context(const DensityMatrix& prior,
                         const std::vector<QuantumConstraint>& constraints,
                         double rank_tol) {
    if (prior.min_eigenvalue() <= rank_tol) {
        std::ostringstream os;
        os << "prior has smallest eigenvalue " << prior.min_eigenvalue()
           << " <= rank_tol " << rank_tol
           << "; regularize_prior or project the constraints onto the support first";
        throw RankDeficientPrior(os.str());
    }
    DualContext ctx;
    ctx.dim = prior.dim();
    ctx.ln_prior = linops::matrix_log(prior.op()).matrix();
    ctx.targets.resize(static_cast<Eigen::Index>(constraints.size()));
    for (std::size_t k = 0; k < constraints.size(); ++k) {
        const auto& c = constraints[k];
        if (c.observable.dim() != ctx.dim) {
            throw DimensionMismatch("quantum constraint observable dimension differs from prior");
        }
        ctx.observables.push_back(c.observable.matrix());
        ctx.targets(static_cast<Eigen::Index>(k)) = c.target;
    }
    return ctx;
}

struct DualEval {
    double ln_z = 0.0;
    RealVector moments;       // Tr(A_i rho)
    ComplexMatrix rho;
    RealVector eigenvalues;   // of the exponent C, ascending
    ComplexMatrix eigenvectors;
    RealVector weights;       // exp(lambda - max) / Z', i.e. rho's spectrum
};

ComplexMatrix exponent_matrix(const DualContext& ctx, const RealVector& alphas) {
    ComplexMatrix c = ctx.ln_prior;
    for (std::size_t k = 0; k < ctx.observables.size(); ++k) {
        c += alphas(static_cast<Eigen::Index>(k)) * ctx.observables[k];
    }
    return c;
}

DualEval evaluate_dual(const DualContext& ctx, const RealVector& alphas) {
    EigResult eig = eig_hermitian(linops::HermitianOperator(exponent_matrix(ctx, alphas)));
    const double shift = eig.eigenvalues.maxCoeff();
    RealVector e = (eig.eigenvalues.array() - shift).exp();
    const double z = e.sum();

    DualEval out;
    out.ln_z = shift + std::log(z);
    out.eigenvalues = eig.eigenvalues;
    out.eigenvectors = eig.eigenvectors;
    out.weights = e / z;
    out.rho = eig.eigenvectors * out.weights.asDiagonal() * eig.eigenvectors.adjoint();
    out.moments.resize(static_cast<Eigen::Index>(ctx.observables.size()));
    for (std::size_t k = 0; k < ctx.observables.size(); ++k) {
        out.moments(static_cast<Eigen::Index>(k)) =
            (ctx.observables[k] * out.rho).trace().real();
    }
    return out;
}

// Divided-difference kernel of exp on the shifted spectrum:
// (e^a - e^b)/(a - b) with the e^shift factored out, stabilized near a == b.
double exp_divided_difference(double a, double b, double shift) {
    const double diff = a - b;
    if (std::abs(diff) < 1e-7) {
        return std::exp(0.5 * (a + b) - shift);
    }
    return (std::exp(a - shift) - std::exp(b - shift)) / diff;
}

RealMatrix hessian_kubo_mori(const DualContext& ctx, const DualEval& eval) {
    const Eigen::Index m = static_cast<Eigen::Index>(ctx.observables.size());
    const Eigen::Index n = ctx.dim;
    const double shift = eval.eigenvalues.maxCoeff();
    const double z = std::exp(eval.ln_z - shift);

    std::vector<ComplexMatrix> tilted(static_cast<std::size_t>(m));
    for (Eigen::Index k = 0; k < m; ++k) {
        tilted[static_cast<std::size_t>(k)] =
            eval.eigenvectors.adjoint() * ctx.observables[static_cast<std::size_t>(k)] *
            eval.eigenvectors;
    }
    RealMatrix phi(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = 0; b < n; ++b) {
            phi(a, b) = exp_divided_difference(eval.eigenvalues(a), eval.eigenvalues(b), shift);
        }
    }

    RealMatrix hess(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i; j < m; ++j) {
            std::complex<double> acc = 0.0;
            const ComplexMatrix& ai = tilted[static_cast<std::size_t>(i)];
            const ComplexMatrix& aj = tilted[static_cast<std::size_t>(j)];
            for (Eigen::Index a = 0; a < n; ++a) {
                for (Eigen::Index b = 0; b < n; ++b) {
                    acc += ai(a, b) * aj(b, a) * phi(b, a);
                }
            }
            const double value = acc.real() / z - eval.moments(i) * eval.moments(j);
            hess(i, j) = value;
            hess(j, i) = value;
        }
    }
    return hess;
}

RealMatrix hessian_finite_difference(const DualContext& ctx, const RealVector& alphas,
                                     double step) {
    const Eigen::Index m = alphas.size();
    RealMatrix hess(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        RealVector up = alphas, down = alphas;
        up(j) += step;
        down(j) -= step;
        const RealVector diff =
            (evaluate_dual(ctx, up).moments - evaluate_dual(ctx, down).moments) / (2.0 * step);
        hess.col(j) = diff;
    }
    return 0.5 * (hess + hess.transpose());
}

// A target is admissible when it lies strictly inside the spectral range of
// its observable; boundary targets require diverging multipliers. Constant
// observables are accepted only when already satisfied (free multiplier -> 0).
void check_target_in_spectrum(const ComplexMatrix& observable, double target, double margin,
                              Eigen::Index index) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(observable, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw DecompositionFailure("constraint feasibility: eigensolve failed");
    }
    const double lo = solver.eigenvalues().minCoeff();
    const double hi = solver.eigenvalues().maxCoeff();
    const double width = hi - lo;
    const double scale = std::max({1.0, std::abs(lo), std::abs(hi)});
    if (width <= 1e-12 * scale) {
        if (std::abs(target - 0.5 * (lo + hi)) > 1e-9 * scale) {
            std::ostringstream os;
            os << "constraint " << index << ": observable is a multiple of the identity ("
               << 0.5 * (lo + hi) << ") but target is " << target;
            throw InfeasibleConstraint(os.str());
        }
        return;
    }
    if (target <= lo + margin * width || target >= hi - margin * width) {
        std::ostringstream os;
        os << "constraint " << index << ": target " << target
           << " is outside the open spectral range (" << lo << ", " << hi << ")";
        throw InfeasibleConstraint(os.str());
    }
}

}  // namespace

double relative_entropy(const DensityMatrix& rho, const DensityMatrix& phi,
                        double support_tol) {
    if (rho.dim() != phi.dim()) {
        throw DimensionMismatch("relative_entropy: states have different dimensions");
    }
    const auto support = linops::support_of(phi, support_tol);
    if (support.rank < phi.dim()) {
        const ComplexMatrix& k = support.kernel_basis;
        const double breach = (k.adjoint() * rho.matrix() * k).trace().real();
        if (breach > support_tol) {
            std::ostringstream os;
            os << "relative_entropy: rho carries weight " << breach
               << " on phi's kernel (divergent)";
            throw SupportViolation(os.str());
        }
    }

    EigResult rho_eig = eig_hermitian(rho.op());
    double tr_rho_ln_rho = 0.0;
    for (Eigen::Index i = 0; i < rho_eig.eigenvalues.size(); ++i) {
        const double lambda = rho_eig.eigenvalues(i);
        if (lambda > support_tol) tr_rho_ln_rho += lambda * std::log(lambda);
    }
    const ComplexMatrix ln_phi = linops::matrix_log(phi.op(), /*support_only=*/true,
                                                    support_tol).matrix();
    const double tr_rho_ln_phi = (rho.matrix() * ln_phi).trace().real();
    return std::min(0.0, -(tr_rho_ln_rho - tr_rho_ln_phi));
}

double ln_partition(const DensityMatrix& prior,
                    const std::vector<QuantumConstraint>& constraints,
                    const RealVector& alphas, double rank_tol) {
    DualContext ctx = make_context(prior, constraints, rank_tol);
    return evaluate_dual(ctx, alphas).ln_z;
}

RealVector dual_gradient(const DensityMatrix& prior,
                         const std::vector<QuantumConstraint>& constraints,
                         const RealVector& alphas, double rank_tol) {
    DualContext ctx = make_context(prior, constraints, rank_tol);
    return evaluate_dual(ctx, alphas).moments;
}

RealMatrix dual_hessian_kubo_mori(const DensityMatrix& prior,
                                  const std::vector<QuantumConstraint>& constraints,
                                  const RealVector& alphas, double rank_tol) {
    DualContext ctx = make_context(prior, constraints, rank_tol);
    return hessian_kubo_mori(ctx, evaluate_dual(ctx, alphas));
}

MaxEntSolution solve_maxent(const DensityMatrix& prior,
                            const std::vector<QuantumConstraint>& constraints,
                            const SolveOptions& options) {
    const Eigen::Index m = static_cast<Eigen::Index>(constraints.size());
    if (m == 0) {
        // No information, no update: alpha is empty and Z = Tr(phi) = 1.
        return MaxEntSolution{prior,
                              RealVector(0),
                              0.0,
                              linops::matrix_log(prior.op(), /*support_only=*/true),
                              0,
                              RealVector(0),
                              false};
    }

    DualContext ctx = make_context(prior, constraints, options.rank_tol);
    for (Eigen::Index k = 0; k < m; ++k) {
        check_target_in_spectrum(ctx.observables[static_cast<std::size_t>(k)], ctx.targets(k),
                                 options.boundary_margin, k);
    }

    RealVector alphas = RealVector::Zero(m);
    DualEval eval = evaluate_dual(ctx, alphas);
    RealVector grad = eval.moments - ctx.targets;
    bool near_singular = false;
    std::vector<double> residual_trace;

    int iter = 0;
    double mu = 0.0;
    for (; iter < options.max_iter; ++iter) {
        residual_trace.push_back(grad.cwiseAbs().maxCoeff());
        if (grad.cwiseAbs().maxCoeff() <= options.dual_tol) break;

        RealMatrix hess = options.hessian == HessianScheme::kKuboMori
                              ? hessian_kubo_mori(ctx, eval)
                              : hessian_finite_difference(ctx, alphas, options.fd_step);
        {
            Eigen::SelfAdjointEigenSolver<RealMatrix> hs(hess, Eigen::EigenvaluesOnly);
            const double lo = hs.eigenvalues().minCoeff();
            const double hi = hs.eigenvalues().maxCoeff();
            if (hi <= 0.0 || lo / hi < 1e-12) near_singular = true;
        }

        RealVector step;
        for (int attempt = 0;; ++attempt) {
            RealMatrix damped = hess + mu * RealMatrix::Identity(m, m);
            Eigen::LDLT<RealMatrix> ldlt(damped);
            step = ldlt.solve(-grad);
            if (ldlt.info() == Eigen::Success && step.allFinite() && grad.dot(step) < 0.0) {
                break;
            }
            mu = std::max(mu * 10.0, 1e-10);
            if (attempt > 60) {
                throw NonConvergence("solve_maxent: no descent direction; dual Hessian degenerate");
            }
        }

        const double g0 = eval.ln_z - alphas.dot(ctx.targets);
        const double slope = grad.dot(step);
        double scale = options.damping;
        bool accepted = false;
        // Near the optimum the predicted decrease drops below the fp
        // resolution of the dual value; take the raw Newton step there.
        if (std::abs(slope) <= 1e-14 * std::max(1.0, std::abs(g0))) {
            alphas += scale * step;
            eval = evaluate_dual(ctx, alphas);
            accepted = true;
        }
        for (int bt = 0; !accepted && bt < 60; ++bt) {
            const RealVector trial_alphas = alphas + scale * step;
            DualEval trial = evaluate_dual(ctx, trial_alphas);
            const double g1 = trial.ln_z - trial_alphas.dot(ctx.targets);
            if (g1 <= g0 + 1e-4 * scale * slope) {
                alphas = trial_alphas;
                eval = std::move(trial);
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) {
            mu = std::max(mu * 10.0, 1e-10);
            continue;
        }
        mu *= 0.25;
        grad = eval.moments - ctx.targets;
    }

    if (grad.cwiseAbs().maxCoeff() > options.dual_tol) {
        std::ostringstream os;
        os << "solve_maxent: residuals after " << iter << " iterations:";
        for (Eigen::Index k = 0; k < m; ++k) os << " " << std::abs(grad(k));
        throw NonConvergence(os.str());
    }
    if (near_singular) {
        log::info("solve_maxent: near-singular dual Hessian; constraints may be linearly ",
                  "dependent on the support");
    }

    MaxEntSolution solution{
        DensityMatrix::from_matrix(eval.rho),
        alphas,
        eval.ln_z,
        linops::HermitianOperator(exponent_matrix(ctx, alphas)),
        iter,
        grad.cwiseAbs(),
        near_singular,
    };
    return solution;
}

// ---------------------------------------------------------------------------
// Regularization
// ---------------------------------------------------------------------------

RegularizedPrior regularize_prior(const DensityMatrix& phi, double epsilon,
                                  RegularizationScheme scheme, double support_tol) {
    const Eigen::Index n = phi.dim();
    if (!(epsilon > 0.0) || !(epsilon < 1.0 / static_cast<double>(n))) {
        std::ostringstream os;
        os << "regularize_prior: epsilon " << epsilon << " outside (0, 1/" << n << ")";
        throw BadEpsilon(os.str());
    }

    RegularizedPrior out{phi, epsilon, phi, scheme, 0.0, 0.0};

    if (scheme == RegularizationScheme::kConvexMix) {
        ComplexMatrix reg = (1.0 - epsilon) * phi.matrix() +
                            (epsilon / static_cast<double>(n)) *
                                ComplexMatrix::Identity(n, n);
        out.regularized = DensityMatrix::from_matrix(std::move(reg));
        out.eigenvalue_floor = epsilon / static_cast<double>(n);
        out.max_distortion = max_abs(out.regularized.matrix() - phi.matrix());
    } else {
        EigResult eig = eig_hermitian(phi.op());
        Eigen::Index rank = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double lambda = eig.eigenvalues(i);
            if (lambda > support_tol / 10.0 && lambda < support_tol * 10.0) {
                throw AmbiguousRank("regularize_prior: eigenvalue inside the support ambiguity band");
            }
            if (lambda > support_tol) ++rank;
        }
        if (rank == n) {
            // Nothing to fill: the construction only trades eps between the
            // kernel and the support, and there is no kernel.
            out.eigenvalue_floor = phi.min_eigenvalue();
            return out;
        }
        const double support_min = eig.eigenvalues(n - rank);
        if (epsilon >= 0.5 * support_min) {
            std::ostringstream os;
            os << "regularize_prior: block_fill needs epsilon < " << 0.5 * support_min
               << " (half the smallest support eigenvalue), got " << epsilon;
            throw BadEpsilon(os.str());
        }
        // Kernel levels become exactly eps; support levels give up eps each and
        // are rescaled so the total trace returns to one.
        const double rescale = (1.0 - static_cast<double>(n - rank) * epsilon) /
                               (1.0 - static_cast<double>(rank) * epsilon);
        RealVector spectrum(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double lambda = eig.eigenvalues(i);
            spectrum(i) = lambda > support_tol ? (lambda - epsilon) * rescale : epsilon;
        }
        if (spectrum.minCoeff() < epsilon * (1.0 - 1e-6)) {
            throw BadEpsilon("regularize_prior: epsilon too large for this spectrum");
        }
        ComplexMatrix reg = eig.eigenvectors * spectrum.asDiagonal() *
                            eig.eigenvectors.adjoint();
        out.regularized = DensityMatrix::from_matrix(std::move(reg));
        out.eigenvalue_floor = epsilon;
        out.max_distortion = max_abs(out.regularized.matrix() - phi.matrix());
        if (out.max_distortion > epsilon * static_cast<double>(n)) {
            std::ostringstream os;
            os << "regularize_prior: distortion " << out.max_distortion << " exceeds eps*dim = "
               << epsilon * static_cast<double>(n) << "; reduce epsilon";
            throw BadEpsilon(os.str());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Support compression and the PDMT study
// ---------------------------------------------------------------------------

ProjectedConstraint project_constraint_to_support(const linops::SupportDecomposition& support,
                                                  const HermitianOperator& observable) {
    if (observable.dim() != support.support_basis.rows()) {
        throw DimensionMismatch("project_constraint_to_support: dimensions differ");
    }
    HermitianOperator compressed(support.support_basis.adjoint() * observable.matrix() *
                                 support.support_basis);
    EigResult eig = eig_hermitian(compressed);
    ProjectedConstraint out{std::move(compressed), eig.eigenvalues.minCoeff(),
                            eig.eigenvalues.maxCoeff()};
    return out;
}

PdmtStudy pdmt_limit_study(const DensityMatrix& biased_prior,
                           const std::vector<QuantumConstraint>& constraints,
                           const std::vector<double>& epsilons,
                           RegularizationScheme scheme, const SolveOptions& options,
                           double support_tol) {
    PdmtStudy study;
    study.dim = biased_prior.dim();

    const auto support = linops::support_of(biased_prior, support_tol);
    study.rank = support.rank;
    const ComplexMatrix& s = support.support_basis;
    const ComplexMatrix& k = support.kernel_basis;

    // Independent reference: the problem posed directly on the support block.
    ComplexMatrix phi_m_raw = s.adjoint() * biased_prior.matrix() * s;
    phi_m_raw /= phi_m_raw.trace().real();
    DensityMatrix phi_m = DensityMatrix::from_matrix(std::move(phi_m_raw));

    std::vector<QuantumConstraint> projected;
    std::vector<QuantumConstraint> embedded;
    for (const auto& c : constraints) {
        ProjectedConstraint pc = project_constraint_to_support(support, c.observable);
        study.projected_constraints.push_back(pc);
        projected.push_back(QuantumConstraint{pc.observable, c.target});
        embedded.push_back(QuantumConstraint{
            HermitianOperator(s * pc.observable.matrix() * s.adjoint()), c.target});
    }
    study.projected_solution = solve_maxent(phi_m, projected, options);

    bool monotone = true;
    double previous = std::numeric_limits<double>::infinity();
    double fitted = 0.0;
    for (double eps : epsilons) {
        PdmtPoint point;
        point.epsilon = eps;
        try {
            RegularizedPrior reg = regularize_prior(biased_prior, eps, scheme, support_tol);
            MaxEntSolution sol = solve_maxent(reg.regularized, embedded, options);
            point.solved = true;
            point.ln_z = sol.ln_z;
            point.alphas = sol.alphas;
            if (k.cols() > 0) {
                point.kernel_weight =
                    (k.adjoint() * sol.posterior.matrix() * k).trace().real();
            }
            point.support_block_distance =
                max_abs(s.adjoint() * sol.posterior.matrix() * s -
                        study.projected_solution->posterior.matrix());
            point.prior_distance = max_abs(sol.posterior.matrix() - biased_prior.matrix());
            if (point.kernel_weight > previous + 1e-18) monotone = false;
            previous = point.kernel_weight;
            fitted = std::max(fitted, point.kernel_weight / eps);
            study.final_kernel_weight = point.kernel_weight;
            study.final_support_block_distance = point.support_block_distance;
        } catch (const Error& e) {
            point.solved = false;
            point.error = e.what();
            log::info("pdmt_limit_study: eps=", eps, " failed: ", e.what());
        }
        study.points.push_back(std::move(point));
    }
    study.kernel_weight_monotone = monotone;
    study.fitted_linear_coefficient = fitted;
    return study;
}

// ---------------------------------------------------------------------------
// Re-prioring
// ---------------------------------------------------------------------------

RepriorResult reprior_transform(const DensityMatrix& phi, const DensityMatrix& phi_new,
                                double support_tol) {
    if (phi.dim() != phi_new.dim()) {
        throw DimensionMismatch("reprior_transform: states have different dimensions");
    }
    const ComplexMatrix sqrt_new = linops::matrix_sqrt_support(phi_new.op(), support_tol).matrix();
    const ComplexMatrix pinv_sqrt = linops::matrix_pinv_sqrt_support(phi.op(), support_tol).matrix();
    const ComplexMatrix left = sqrt_new * pinv_sqrt;
    ComplexMatrix raw = left * phi.matrix() * left.adjoint();
    const double trace = raw.trace().real();

    RepriorResult out{phi_new, trace, false};
    if (trace <= 1e-12) {
        // The sandwich annihilated the state: supports are essentially
        // disjoint. Return the requested new prior and flag it.
        out.disjoint_support_warning = true;
        return out;
    }
    raw /= trace;
    out.state = DensityMatrix::from_matrix(std::move(raw));
    return out;
}

}  // namespace qme::qsolver

// qsolver.hpp — The quantum maximum-entropy engine: Umegaki relative
// entropy, the Lagrange dual for rho = exp(sum_i alpha_i A_i + ln phi)/Z,
// epsilon-regularization of rank-deficient priors, the support-limit study
// behind the prior-density-matrix theorem, constraint compression onto the
// prior support, and the re-prioring transform.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "linops.hpp"

namespace qme::qsolver {

using linops::ComplexMatrix;
using linops::DensityMatrix;
using linops::HermitianOperator;
using linops::RealVector;
using RealMatrix = Eigen::MatrixXd;

struct QuantumConstraint {
    HermitianOperator observable;
    double target = 0.0;
};

enum class HessianScheme {
    kFiniteDifference,  // central differences of the dual gradient (default)
    kKuboMori,          // exact, via divided differences in the exponent eigenbasis
};

struct SolveOptions {
    int max_iter = 200;
    double dual_tol = 1e-9;
    double damping = 1.0;       // scales the Newton step before line search
    double fd_step = 1e-5;      // finite-difference step for the Hessian
    HessianScheme hessian = HessianScheme::kFiniteDifference;
    double boundary_margin = 1e-12;  // relative spectral-boundary rejection margin
    double rank_tol = 1e-14;    // full-rank test threshold for the prior
};

struct MaxEntSolution {
    DensityMatrix posterior;
    RealVector alphas;
    double ln_z = 0.0;
    HermitianOperator exponent;  // C = sum alpha_i A_i + ln phi (support log)
    int iterations = 0;
    RealVector residuals;        // |Tr(A_i rho) - target_i|
    bool near_singular_hessian = false;
};

// -Tr(rho ln rho - rho ln phi), logs evaluated on the support; <= 0 with
// equality iff rho == phi. Throws SupportViolation when rho carries weight on
// phi's kernel (the infinite-divergence case).
double relative_entropy(const DensityMatrix& rho, const DensityMatrix& phi,
                        double support_tol = linops::kSupportTol);

// ln Tr exp(sum alpha_i A_i + ln phi), exponent-shifted. phi must be full rank.
double ln_partition(const DensityMatrix& prior,
                    const std::vector<QuantumConstraint>& constraints,
                    const RealVector& alphas, double rank_tol = 1e-14);

// d ln Z / d alpha_i = Tr(A_i exp(C)) / Z. Exact for non-commuting
// observables (trace cyclicity); used by the solver and exposed for testing.
RealVector dual_gradient(const DensityMatrix& prior,
                         const std::vector<QuantumConstraint>& constraints,
                         const RealVector& alphas, double rank_tol = 1e-14);

// Exact Hessian of ln Z in the Kubo-Mori sense: computed in the eigenbasis of
// C via the divided-difference kernel (e^li - e^lj)/(li - lj).
RealMatrix dual_hessian_kubo_mori(const DensityMatrix& prior,
                                  const std::vector<QuantumConstraint>& constraints,
                                  const RealVector& alphas, double rank_tol = 1e-14);

// Damped Newton on the convex dual lnZ(alpha) - alpha.t, starting from
// alpha = 0 so that already-satisfied constraints solve immediately.
// Preconditions: full-rank prior (throws RankDeficientPrior otherwise, which
// directs the caller to regularize_prior or project_constraint_to_support)
// and targets strictly inside the spectrum of each observable.
MaxEntSolution solve_maxent(const DensityMatrix& prior,
                            const std::vector<QuantumConstraint>& constraints,
                            const SolveOptions& options = {});

// ---------------------------------------------------------------------------
// Regularization of biased (rank-deficient) priors
// ---------------------------------------------------------------------------

enum class RegularizationScheme {
    kConvexMix,   // (1 - eps) phi + eps * I/dim
    kBlockFill,   // kernel eigenvalues -> eps, support eigenvalues -> phi_i - eps,
                  // support block rescaled so the trace returns to one
};

struct RegularizedPrior {
    DensityMatrix original;
    double epsilon = 0.0;
    DensityMatrix regularized;
    RegularizationScheme scheme = RegularizationScheme::kConvexMix;
    // Guaranteed eigenvalue floor: eps for block_fill, eps/dim for convex_mix.
    double eigenvalue_floor = 0.0;
    double max_distortion = 0.0;  // |regularized - original|_max
};

// Requires 0 < epsilon < 1/dim; block_fill additionally requires epsilon
// below half the smallest support eigenvalue. Throws BadEpsilon otherwise,
// or when the construction cannot keep |reg - orig|_max <= epsilon * dim.
RegularizedPrior regularize_prior(const DensityMatrix& phi, double epsilon,
                                  RegularizationScheme scheme,
                                  double support_tol = linops::kSupportTol);

// ---------------------------------------------------------------------------
// Support compression and the PDMT limit study
// ---------------------------------------------------------------------------

struct ProjectedConstraint {
    HermitianOperator observable;  // S† A S on the support basis
    double achievable_min = 0.0;
    double achievable_max = 0.0;
};

ProjectedConstraint project_constraint_to_support(const linops::SupportDecomposition& support,
                                                  const HermitianOperator& observable);

struct PdmtPoint {
    double epsilon = 0.0;
    bool solved = false;
    std::string error;  // solver error message when solved == false
    double kernel_weight = 0.0;           // Tr(P_kernel rho_eps)
    double support_block_distance = 0.0;  // |S† rho_eps S - rho_projected|_max
    double prior_distance = 0.0;          // |rho_eps - phi|_max
    double ln_z = 0.0;
    RealVector alphas;
};

struct PdmtStudy {
    Eigen::Index rank = 0;
    Eigen::Index dim = 0;
    std::vector<PdmtPoint> points;  // ordered as the input epsilons
    // The independent rank-M reference solve; always set on successful return.
    std::optional<MaxEntSolution> projected_solution;
    std::vector<ProjectedConstraint> projected_constraints;
    bool kernel_weight_monotone = false;  // nonincreasing along decreasing eps
    double fitted_linear_coefficient = 0.0;  // max kernel_weight/eps over solved points
    double final_kernel_weight = 0.0;
    double final_support_block_distance = 0.0;
};

// Sweeps the regularized problem over the given (decreasing) epsilons.
// Each run solves with the constraint compressed onto the prior support and
// embedded back into the full space: the support-external pieces of a raw
// observable would tilt the exponent eigenvectors by ~|A_off|/ln(eps), a
// contribution that dies only logarithmically and never reaches the Theta(eps)
// kernel weight this limit statement is about. Solver failures at individual
// epsilons are recorded and the sweep continues.
PdmtStudy pdmt_limit_study(const DensityMatrix& biased_prior,
                           const std::vector<QuantumConstraint>& constraints,
                           const std::vector<double>& epsilons,
                           RegularizationScheme scheme = RegularizationScheme::kBlockFill,
                           const SolveOptions& options = {},
                           double support_tol = linops::kSupportTol);

// ---------------------------------------------------------------------------
// Re-prioring
// ---------------------------------------------------------------------------

struct RepriorResult {
    DensityMatrix state;
    double trace_before_normalization = 1.0;
    bool disjoint_support_warning = false;
};

// (phi_new^{1/2} phi^{-1/2}) phi (phi^{-1/2} phi_new^{1/2}) with roots taken
// on the support, renormalized to unit trace. Equal to phi_new exactly when
// phi is invertible; warns when the supports are essentially disjoint.
RepriorResult reprior_transform(const DensityMatrix& phi, const DensityMatrix& phi_new,
                                double support_tol = linops::kSupportTol);

}  // namespace qme::qsolver

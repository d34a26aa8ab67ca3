// classical.hpp — Discrete maximum-entropy updating of probability
// distributions: canonical solutions under expectation-value constraints,
// Bayes rule recovered from a delta data constraint, and Jeffrey mixing for
// uncertain data.
//
// The entropy maximized is S(rho, phi) = -sum rho ln(rho/phi). The affine
// terms of the full functional (the |A| scale, the +rho term and the
// prior-only constant) do not move the maximizer and are dropped; |A| is
// absorbed into the multipliers.

#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "errors.hpp"

namespace qme::classical {

using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

struct Distribution {
    std::vector<std::string> labels;  // one per outcome; defaults to "0","1",...
    RealVector probs;

    // Throws ValidationError unless probs >= 0 and sum to 1 within trace_tol.
    // Negative dust above -1e-12 is clamped to zero.
    void validate(double trace_tol = 1e-9);

    static Distribution uniform(Eigen::Index n);
    static Distribution from_probs(RealVector probs);
};

struct JointDistribution {
    std::vector<std::string> x_labels;
    std::vector<std::string> theta_labels;
    RealMatrix probs;  // |x| rows, |theta| columns

    void validate(double trace_tol = 1e-9);
    static JointDistribution from_probs(RealMatrix probs);

    RealVector x_marginal() const { return probs.rowwise().sum(); }
    RealVector theta_marginal() const { return probs.colwise().sum(); }
};

struct Constraint {
    RealVector observable;  // A(x), one value per outcome
    double target = 0.0;    // <A>
};

struct SolveOptions {
    int max_iter = 200;
    double dual_tol = 1e-9;
    double damping = 1.0;            // scales the Newton step before line search
    double boundary_margin = 1e-12;  // relative margin for hull-boundary rejection
};

struct MaxEntResult {
    Distribution posterior;
    RealVector alphas;
    double ln_z = 0.0;
    int iterations = 0;
    RealVector residuals;
    bool near_singular_hessian = false;
};

// -sum rho ln(rho/phi); <= 0 with equality iff rho == phi. Throws
// SupportViolation if rho carries mass where phi vanishes.
double relative_entropy(const Distribution& rho, const Distribution& phi);

// ln sum_x phi(x) exp(alpha . A(x)), computed with an exponent shift.
// Exposed for the dual-convexity property checks.
double ln_partition(const Distribution& prior, const std::vector<Constraint>& constraints,
                    const RealVector& alphas);

// Canonical maxent solve: rho(x) = phi(x) exp(alpha . A(x)) / Z with each
// <A_i> reproduced within dual_tol. Damped Newton on the convex dual with
// analytic gradient and Hessian; single constraints fall back to bisection
// if Newton stalls. Zero constraints return the prior unchanged.
MaxEntResult solve_maxent(const Distribution& prior, const std::vector<Constraint>& constraints,
                          const SolveOptions& options = {});

// Bayes rule via the maxent route: per-x multipliers pin the marginal to
// delta_{x,observed}, the joint posterior is assembled from them and then
// marginalized over x. Throws ZeroEvidence when the observed row has no mass.
Distribution bayes_update(const JointDistribution& joint, Eigen::Index observed_x);

// The textbook conditional phi(theta | x'). Kept as the independent route the
// maxent result is checked against.
Distribution bayes_update_direct(const JointDistribution& joint, Eigen::Index observed_x);

// rho(theta) = sum_x rho_D(x) phi(theta | x). Point-mass data reduces to
// bayes_update; data equal to the x-marginal returns the theta-marginal.
Distribution jeffrey_update(const JointDistribution& joint, const Distribution& data_dist);

}  // namespace qme::classical

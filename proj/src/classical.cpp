#include "classical.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "log.hpp"

namespace qme::classical {

namespace {

std::vector<std::string> default_labels(Eigen::Index n) {
    std::vector<std::string> labels(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = std::to_string(i);
    return labels;
}

void check_probs(RealVector& probs, double trace_tol, const std::string& what) {
    if (probs.size() == 0) throw ValidationError(what + ": empty probability vector");
    if (!probs.allFinite()) throw ValidationError(what + ": probabilities must be finite");
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        if (probs(i) < -1e-12) {
            std::ostringstream os;
            os << what << ": negative probability " << probs(i) << " at index " << i;
            throw ValidationError(os.str());
        }
        if (probs(i) < 0.0) probs(i) = 0.0;
    }
    const double total = probs.sum();
    if (std::abs(total - 1.0) > trace_tol) {
        std::ostringstream os;
        os << what << ": probabilities sum to " << total << ", off by more than " << trace_tol;
        throw ValidationError(os.str());
    }
}

}  // namespace

void Distribution::validate(double trace_tol) {
    check_probs(probs, trace_tol, "Distribution");
    if (labels.empty()) labels = default_labels(probs.size());
    if (static_cast<Eigen::Index>(labels.size()) != probs.size()) {
        throw ValidationError("Distribution: labels and probs must have equal length");
    }
}

Distribution Distribution::uniform(Eigen::Index n) {
    Distribution d;
    d.probs = RealVector::Constant(n, 1.0 / static_cast<double>(n));
    d.validate();
    return d;
}

Distribution Distribution::from_probs(RealVector probs) {
    Distribution d;
    d.probs = std::move(probs);
    d.validate();
    return d;
}

void JointDistribution::validate(double trace_tol) {
    if (probs.size() == 0) throw ValidationError("JointDistribution: empty table");
    if (!probs.allFinite()) throw ValidationError("JointDistribution: entries must be finite");
    if (probs.minCoeff() < -1e-12) {
        throw ValidationError("JointDistribution: negative entry");
    }
    probs = probs.cwiseMax(0.0);
    const double total = probs.sum();
    if (std::abs(total - 1.0) > trace_tol) {
        std::ostringstream os;
        os << "JointDistribution: total mass " << total << ", off by more than " << trace_tol;
        throw ValidationError(os.str());
    }
    if (x_labels.empty()) x_labels = default_labels(probs.rows());
    if (theta_labels.empty()) theta_labels = default_labels(probs.cols());
    if (static_cast<Eigen::Index>(x_labels.size()) != probs.rows() ||
        static_cast<Eigen::Index>(theta_labels.size()) != probs.cols()) {
        throw ValidationError("JointDistribution: label counts must match the table shape");
    }
}

JointDistribution JointDistribution::from_probs(RealMatrix probs) {
    JointDistribution j;
    j.probs = std::move(probs);
    j.validate();
    return j;
}

double relative_entropy(const Distribution& rho, const Distribution& phi) {
    if (rho.probs.size() != phi.probs.size()) {
        throw DimensionMismatch("relative_entropy: distributions live on different outcome sets");
    }
    double s = 0.0;
    for (Eigen::Index i = 0; i < rho.probs.size(); ++i) {
        const double r = rho.probs(i);
        if (r <= 0.0) continue;
        const double p = phi.probs(i);
        if (p <= 0.0) {
            std::ostringstream os;
            os << "relative_entropy: rho has mass " << r << " at outcome " << i
               << " where phi vanishes";
            throw SupportViolation(os.str());
        }
        s -= r * std::log(r / p);
    }
    return std::min(s, 0.0);
}

namespace {

struct DualState {
    double ln_z = 0.0;
    RealVector moments;  // <A_i> under rho(alpha)
    RealVector probs;    // rho(alpha)
};

DualState evaluate_dual(const RealVector& log_prior, const RealMatrix& observables,
                        const RealVector& alphas) {
    RealVector w = log_prior;
    if (alphas.size() > 0) w += observables * alphas;
    const double shift = w.maxCoeff();
    RealVector e = (w.array() - shift).exp();
    const double z = e.sum();
    DualState state;
    state.ln_z = shift + std::log(z);
    state.probs = e / z;
    state.moments = observables.transpose() * state.probs;
    return state;
}

// Feasibility of one target against the hull of observed values on the prior
// support. Boundary targets need infinite multipliers and are rejected; a
// degenerate (single-point) hull is accepted only when the constraint is
// already satisfied, in which case the multiplier is free and set to zero.
void check_target_in_hull(double lo, double hi, double target, double margin,
                          Eigen::Index constraint_index) {
    const double width = hi - lo;
    const double scale = std::max({1.0, std::abs(lo), std::abs(hi)});
    if (width <= 1e-12 * scale) {
        if (std::abs(target - 0.5 * (lo + hi)) > 1e-9 * scale) {
            std::ostringstream os;
            os << "constraint " << constraint_index << ": observable is constant ("
               << 0.5 * (lo + hi) << ") on the prior support but target is " << target;
            throw InfeasibleConstraint(os.str());
        }
        return;
    }
    if (target <= lo + margin * width || target >= hi - margin * width) {
        std::ostringstream os;
        os << "constraint " << constraint_index << ": target " << target
           << " is outside the open achievable range (" << lo << ", " << hi << ")";
        throw InfeasibleConstraint(os.str());
    }
}

}  // namespace

double ln_partition(const Distribution& prior, const std::vector<Constraint>& constraints,
                    const RealVector& alphas) {
    const Eigen::Index n = prior.probs.size();
    RealVector log_prior(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        log_prior(i) = prior.probs(i) > 0.0 ? std::log(prior.probs(i))
                                            : -std::numeric_limits<double>::infinity();
    }
    RealMatrix observables(n, static_cast<Eigen::Index>(constraints.size()));
    for (std::size_t k = 0; k < constraints.size(); ++k) {
        observables.col(static_cast<Eigen::Index>(k)) = constraints[k].observable;
    }
    // Work on the support only; -inf exponents would poison the shift.
    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (prior.probs(i) > 0.0) support.push_back(i);
    }
    RealVector lp(static_cast<Eigen::Index>(support.size()));
    RealMatrix obs(static_cast<Eigen::Index>(support.size()), observables.cols());
    for (std::size_t s = 0; s < support.size(); ++s) {
        lp(static_cast<Eigen::Index>(s)) = log_prior(support[s]);
        obs.row(static_cast<Eigen::Index>(s)) = observables.row(support[s]);
    }
    return evaluate_dual(lp, obs, alphas).ln_z;
}

MaxEntResult solve_maxent(const Distribution& prior, const std::vector<Constraint>& constraints,
                          const SolveOptions& options) {
    Distribution phi = prior;
    phi.validate();
    const Eigen::Index n = phi.probs.size();
    const Eigen::Index m = static_cast<Eigen::Index>(constraints.size());

    MaxEntResult result;
    result.posterior = phi;
    result.alphas = RealVector::Zero(m);
    result.residuals = RealVector::Zero(m);
    if (m == 0) {
        // No new information: the posterior is the prior (DC1').
        result.ln_z = 0.0;
        return result;
    }

    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (phi.probs(i) > 0.0) support.push_back(i);
    }
    const Eigen::Index ns = static_cast<Eigen::Index>(support.size());

    RealVector log_prior(ns);
    RealMatrix observables(ns, m);
    RealVector targets(m);
    for (Eigen::Index s = 0; s < ns; ++s) log_prior(s) = std::log(phi.probs(support[s]));
    for (Eigen::Index k = 0; k < m; ++k) {
        if (constraints[static_cast<std::size_t>(k)].observable.size() != n) {
            throw DimensionMismatch("solve_maxent: observable length differs from outcome count");
        }
        for (Eigen::Index s = 0; s < ns; ++s) {
            observables(s, k) = constraints[static_cast<std::size_t>(k)].observable(support[s]);
        }
        targets(k) = constraints[static_cast<std::size_t>(k)].target;
        check_target_in_hull(observables.col(k).minCoeff(), observables.col(k).maxCoeff(),
                             targets(k), options.boundary_margin, k);
    }

    RealVector alphas = RealVector::Zero(m);
    DualState state = evaluate_dual(log_prior, observables, alphas);
    RealVector grad = state.moments - targets;
    std::vector<double> residual_trace;

    auto dual_value = [&](const DualState& st) { return st.ln_z - alphas.dot(targets); };

    int iter = 0;
    double mu = 0.0;  // Levenberg damping, raised only when the Hessian misbehaves
    for (; iter < options.max_iter; ++iter) {
        residual_trace.push_back(grad.cwiseAbs().maxCoeff());
        if (grad.cwiseAbs().maxCoeff() <= options.dual_tol) break;

        // Hessian of ln Z is the covariance of the observables under rho.
        RealMatrix centered = observables.rowwise() - state.moments.transpose();
        RealMatrix hess = centered.transpose() * state.probs.asDiagonal() * centered;

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
                throw NonConvergence("solve_maxent: could not produce a descent direction");
            }
        }
        const double hess_min = hess.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff();
        const double hess_max = hess.selfadjointView<Eigen::Lower>().eigenvalues().maxCoeff();
        if (hess_max > 0.0 && hess_min / hess_max < 1e-12) {
            result.near_singular_hessian = true;
        }

        // Backtracking line search on the dual objective lnZ - alpha.t.
        const double g0 = dual_value(state);
        const double slope = grad.dot(step);
        double scale = options.damping;
        RealVector trial_alphas;
        DualState trial;
        bool accepted = false;
        // Below the fp resolution of the dual value the sufficient-decrease
        // test is meaningless; take the raw Newton step.
        if (std::abs(slope) <= 1e-14 * std::max(1.0, std::abs(g0))) {
            alphas += scale * step;
            state = evaluate_dual(log_prior, observables, alphas);
            grad = state.moments - targets;
            continue;
        }
        for (int bt = 0; bt < 60; ++bt) {
            trial_alphas = alphas + scale * step;
            RealVector saved = alphas;
            alphas = trial_alphas;
            trial = evaluate_dual(log_prior, observables, alphas);
            const double g1 = trial.ln_z - alphas.dot(targets);
            if (g1 <= g0 + 1e-4 * scale * slope) {
                accepted = true;
                break;
            }
            alphas = saved;
            scale *= 0.5;
        }
        if (!accepted) {
            mu = std::max(mu * 10.0, 1e-10);
            continue;
        }
        mu *= 0.25;
        state = trial;
        grad = state.moments - targets;
    }

    if (grad.cwiseAbs().maxCoeff() > options.dual_tol && m == 1) {
        // The one-dimensional dual is monotone in alpha: bisect.
        log::info("solve_maxent: Newton stalled, falling back to bisection");
        auto moment = [&](double a) {
            RealVector v(1);
            v(0) = a;
            return evaluate_dual(log_prior, observables, v).moments(0) - targets(0);
        };
        double lo = -1.0, hi = 1.0;
        for (int k = 0; k < 80 && moment(lo) > 0.0; ++k) lo *= 2.0;
        for (int k = 0; k < 80 && moment(hi) < 0.0; ++k) hi *= 2.0;
        if (moment(lo) > 0.0 || moment(hi) < 0.0) {
            throw NonConvergence("solve_maxent: bisection bracket not found; target too close to hull boundary");
        }
        for (int k = 0; k < 200; ++k) {
            const double mid = 0.5 * (lo + hi);
            alphas(0) = mid;
            if (std::abs(moment(mid)) <= options.dual_tol) break;
            if (moment(mid) < 0.0) lo = mid; else hi = mid;
        }
        state = evaluate_dual(log_prior, observables, alphas);
        grad = state.moments - targets;
    }

    if (grad.cwiseAbs().maxCoeff() > options.dual_tol) {
        std::ostringstream os;
        os << "solve_maxent: residual " << grad.cwiseAbs().maxCoeff() << " after "
           << options.max_iter << " iterations; trace tail:";
        const std::size_t start = residual_trace.size() > 5 ? residual_trace.size() - 5 : 0;
        for (std::size_t k = start; k < residual_trace.size(); ++k) {
            os << " " << residual_trace[k];
        }
        throw NonConvergence(os.str());
    }

    RealVector posterior = RealVector::Zero(n);
    for (Eigen::Index s = 0; s < ns; ++s) posterior(support[s]) = state.probs(s);
    result.posterior.labels = phi.labels;
    result.posterior.probs = posterior;
    result.posterior.validate();
    result.alphas = alphas;
    result.ln_z = state.ln_z;
    result.iterations = iter;
    result.residuals = grad.cwiseAbs();
    return result;
}

Distribution bayes_update(const JointDistribution& joint, Eigen::Index observed_x) {
    JointDistribution phi = joint;
    phi.validate();
    if (observed_x < 0 || observed_x >= phi.probs.rows()) {
        throw ValidationError("bayes_update: observed outcome index out of range");
    }
    const RealVector marginal = phi.x_marginal();
    if (marginal(observed_x) <= 0.0) {
        std::ostringstream os;
        os << "bayes_update: observed outcome '" << phi.x_labels[static_cast<std::size_t>(observed_x)]
           << "' has zero prior probability";
        throw ZeroEvidence(os.str());
    }

    // Maxent route: the delta data constraint introduces one multiplier per x
    // with exp(alpha_x)/Z = delta_{x,x'}/phi(x); rows are rescaled by that
    // factor to form the joint posterior, which is then marginalized.
    RealMatrix joint_posterior = RealMatrix::Zero(phi.probs.rows(), phi.probs.cols());
    for (Eigen::Index x = 0; x < phi.probs.rows(); ++x) {
        const double factor = (x == observed_x) ? 1.0 / marginal(x) : 0.0;
        joint_posterior.row(x) = phi.probs.row(x) * factor;
    }
    Distribution rho;
    rho.labels = phi.theta_labels;
    rho.probs = joint_posterior.colwise().sum();
    rho.validate();
    return rho;
}

Distribution bayes_update_direct(const JointDistribution& joint, Eigen::Index observed_x) {
    JointDistribution phi = joint;
    phi.validate();
    if (observed_x < 0 || observed_x >= phi.probs.rows()) {
        throw ValidationError("bayes_update_direct: observed outcome index out of range");
    }
    const double evidence = phi.probs.row(observed_x).sum();
    if (evidence <= 0.0) {
        throw ZeroEvidence("bayes_update_direct: observed outcome has zero prior probability");
    }
    Distribution rho;
    rho.labels = phi.theta_labels;
    rho.probs = phi.probs.row(observed_x).transpose() / evidence;
    rho.validate();
    return rho;
}

Distribution jeffrey_update(const JointDistribution& joint, const Distribution& data_dist) {
    JointDistribution phi = joint;
    phi.validate();
    Distribution data = data_dist;
    data.validate();
    if (data.probs.size() != phi.probs.rows()) {
        throw DimensionMismatch("jeffrey_update: data distribution length differs from |x|");
    }
    const RealVector marginal = phi.x_marginal();
    RealVector out = RealVector::Zero(phi.probs.cols());
    for (Eigen::Index x = 0; x < phi.probs.rows(); ++x) {
        const double w = data.probs(x);
        if (w <= 0.0) continue;
        if (marginal(x) <= 0.0) {
            std::ostringstream os;
            os << "jeffrey_update: data weight " << w << " on outcome '"
               << phi.x_labels[static_cast<std::size_t>(x)] << "' outside the prior support";
            throw SupportViolation(os.str());
        }
        out += w * (phi.probs.row(x).transpose() / marginal(x));
    }
    Distribution rho;
    rho.labels = phi.theta_labels;
    rho.probs = out;
    rho.validate();
    return rho;
}

}  // namespace qme::classical

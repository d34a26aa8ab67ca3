#include "checks.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json_io.hpp"
#include "random_gen.hpp"

namespace qme::checks {

using linops::ComplexMatrix;
using linops::Complex;
using linops::DensityMatrix;
using linops::HermitianOperator;
using linops::RealVector;
using linops::max_abs;
using random_gen::Rng;

bool all_passed(const CheckList& checks) {
    return std::all_of(checks.begin(), checks.end(),
                       [](const CheckResult& c) { return c.pass; });
}

CheckResult check_le(const std::string& name, double measured, double tolerance,
                     const std::string& detail) {
    return CheckResult{name, tolerance, measured,
                       std::isfinite(measured) && measured <= tolerance, detail};
}

CheckResult check_true(const std::string& name, bool condition, const std::string& detail) {
    return CheckResult{name, 0.0, condition ? 0.0 : 1.0, condition, detail};
}

void append(CheckList& into, CheckList more) {
    for (auto& c : more) into.push_back(std::move(c));
}

// ---------------------------------------------------------------------------
// Result-level suites
// ---------------------------------------------------------------------------

CheckList density_checks(const std::string& prefix, const DensityMatrix& rho) {
    CheckList checks;
    checks.push_back(check_le(prefix + ".unit_trace", rho.trace_defect(), 1e-9));
    checks.push_back(check_le(prefix + ".psd", std::max(0.0, -rho.min_eigenvalue()), 1e-9));
    checks.push_back(check_le(prefix + ".hermitian", rho.op().hermiticity_defect(), 1e-10));
    return checks;
}

CheckList quantum_solution_checks(const DensityMatrix& prior,
                                  const std::vector<qsolver::QuantumConstraint>& constraints,
                                  const qsolver::MaxEntSolution& solution, double dual_tol) {
    CheckList checks = density_checks("posterior", solution.posterior);

    double worst_residual = 0.0;
    for (std::size_t k = 0; k < constraints.size(); ++k) {
        const double moment =
            (constraints[k].observable.matrix() * solution.posterior.matrix()).trace().real();
        worst_residual = std::max(worst_residual, std::abs(moment - constraints[k].target));
    }
    checks.push_back(check_le("constraint_residual", worst_residual, dual_tol));

    // posterior == exp(C - lnZ), evaluated spectrally to avoid overflow.
    const double ln_z = solution.ln_z;
    HermitianOperator reconstructed = linops::matrix_function(
        solution.exponent, [ln_z](double x) { return std::exp(x - ln_z); });
    checks.push_back(check_le("exponent_reconstruction",
                              max_abs(reconstructed.matrix() - solution.posterior.matrix()),
                              1e-9));

    if (constraints.empty()) {
        checks.push_back(check_le("prior_fixed_point",
                                  max_abs(solution.posterior.matrix() - prior.matrix()), 0.0));
    }
    return checks;
}

CheckList classical_solution_checks(const classical::Distribution& prior,
                                    const std::vector<classical::Constraint>& constraints,
                                    const classical::MaxEntResult& result, double dual_tol) {
    CheckList checks;
    checks.push_back(check_le("posterior.normalized",
                              std::abs(result.posterior.probs.sum() - 1.0), 1e-12));
    checks.push_back(
        check_le("posterior.nonnegative", std::max(0.0, -result.posterior.probs.minCoeff()), 0.0));

    double worst_residual = 0.0;
    for (const auto& c : constraints) {
        worst_residual = std::max(
            worst_residual, std::abs(c.observable.dot(result.posterior.probs) - c.target));
    }
    checks.push_back(check_le("constraint_residual", worst_residual, dual_tol));

    double off_support = 0.0;
    for (Eigen::Index i = 0; i < prior.probs.size(); ++i) {
        if (prior.probs(i) <= 0.0) off_support += result.posterior.probs(i);
    }
    checks.push_back(check_le("posterior_support_within_prior", off_support, 0.0));

    if (constraints.empty()) {
        checks.push_back(check_le("prior_fixed_point",
                                  (result.posterior.probs - prior.probs).cwiseAbs().maxCoeff(),
                                  0.0));
    }
    return checks;
}

CheckList bayes_checks(const classical::JointDistribution& joint, Eigen::Index observed,
                       const classical::Distribution& posterior) {
    CheckList checks;
    const classical::Distribution direct = classical::bayes_update_direct(joint, observed);
    checks.push_back(check_le("maxent_equals_conditional",
                              (posterior.probs - direct.probs).cwiseAbs().maxCoeff(), 1e-12));
    checks.push_back(check_le("posterior.normalized",
                              std::abs(posterior.probs.sum() - 1.0), 1e-12));
    return checks;
}

CheckList qbr_checks(const DensityMatrix& prior, const measurement::KrausSet& kraus,
                     Eigen::Index outcome, const DensityMatrix& entropic,
                     const DensityMatrix& direct) {
    CheckList checks = density_checks("posterior", entropic);
    checks.push_back(check_le("entropic_equals_direct",
                              max_abs(entropic.matrix() - direct.matrix()), 1e-10));
    const RealVector evidence = measurement::evidence_distribution(prior, kraus);
    checks.push_back(check_true("positive_evidence",
                                evidence(outcome) > measurement::kEvidenceTol));
    checks.push_back(check_le("kraus_completeness", kraus.completeness_defect(), 1e-10));
    return checks;
}

CheckList pdmt_checks(const qsolver::PdmtStudy& study) {
    CheckList checks;
    bool all_solved = true;
    std::string failed;
    for (const auto& p : study.points) {
        if (!p.solved) {
            all_solved = false;
            failed = p.error;
        }
    }
    checks.push_back(check_true("all_epsilons_solved", all_solved, failed));
    checks.push_back(check_true("kernel_weight_monotone", study.kernel_weight_monotone));

    double final_eps = study.points.empty() ? 1.0 : study.points.back().epsilon;
    const double kernel_tol = std::max(1e-8, 100.0 * final_eps);
    checks.push_back(check_le("final_kernel_weight", study.final_kernel_weight, kernel_tol));
    checks.push_back(check_le("final_support_block_distance",
                              study.final_support_block_distance, 1e-6));
    return checks;
}

CheckList thermal_checks(const DensityMatrix& prior, const measurement::KrausSet& kraus,
                         const RealVector& energies, double target,
                         const measurement::ThermalResult& result) {
    CheckList checks = density_checks("posterior", result.posterior);

    // Reinsert beta into <H> = d lnZ / d beta.
    const RealVector evidence = measurement::evidence_distribution(prior, kraus);
    double z = 0.0, mean = 0.0;
    for (Eigen::Index x = 0; x < energies.size(); ++x) {
        if (evidence(x) <= measurement::kEvidenceTol) continue;
        const double w = std::exp(result.beta * energies(x)) * evidence(x);
        z += w;
        mean += w * energies(x);
    }
    mean /= z;
    checks.push_back(check_le("beta_reinsertion", std::abs(mean - target), 1e-9));

    const DensityMatrix via_jeffrey =
        measurement::quantum_jeffrey(prior, kraus, result.outcome_dist);
    checks.push_back(check_le("equals_jeffrey_mixture",
                              max_abs(result.posterior.matrix() - via_jeffrey.matrix()), 1e-10));
    checks.push_back(check_le("outcome_dist.normalized",
                              std::abs(result.outcome_dist.probs.sum() - 1.0), 1e-12));
    return checks;
}

// ---------------------------------------------------------------------------
// Bloch-ball grid oracle
// ---------------------------------------------------------------------------

namespace {

ComplexMatrix pauli(int k) {
    ComplexMatrix m(2, 2);
    switch (k) {
        case 0: m << 0, 1, 1, 0; break;
        case 1: m << 0, Complex(0, -1), Complex(0, 1), 0; break;
        default: m << 1, 0, 0, -1; break;
    }
    return m;
}

Eigen::Vector3d bloch_of(const ComplexMatrix& rho) {
    Eigen::Vector3d r;
    for (int k = 0; k < 3; ++k) r(k) = (rho * pauli(k)).trace().real();
    return r;
}

double xlnx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace

double bloch_umegaki_entropy(const Eigen::Vector3d& rho_bloch,
                             const Eigen::Vector3d& prior_bloch) {
    const double nr = std::min(rho_bloch.norm(), 1.0);
    const double tr_rho_ln_rho = xlnx(0.5 * (1.0 + nr)) + xlnx(0.5 * (1.0 - nr));

    const double nf = prior_bloch.norm();
    if (nf >= 1.0) {
        throw DomainError("bloch_umegaki_entropy: prior must be full rank (|f| < 1)");
    }
    const double p_plus = 0.5 * (1.0 + nf);
    const double p_minus = 0.5 * (1.0 - nf);
    const double a = 0.5 * (std::log(p_plus) + std::log(p_minus));
    const double b = 0.5 * (std::log(p_plus) - std::log(p_minus));
    const double axis = nf > 0.0 ? rho_bloch.dot(prior_bloch) / nf : 0.0;
    const double tr_rho_ln_phi = a + b * axis;
    return -(tr_rho_ln_rho - tr_rho_ln_phi);
}

BlochGridResult bloch_grid_search(const DensityMatrix& prior,
                                  const std::vector<qsolver::QuantumConstraint>& constraints,
                                  double resolution) {
    if (prior.dim() != 2) throw DimensionMismatch("bloch_grid_search: dim-2 states only");
    const Eigen::Vector3d f = bloch_of(prior.matrix());

    // Constraint planes a_i . r = t_i - c0_i in Bloch coordinates.
    std::vector<Eigen::Vector3d> normals;
    std::vector<double> offsets;
    for (const auto& c : constraints) {
        if (c.observable.dim() != 2) {
            throw DimensionMismatch("bloch_grid_search: constraints must be dim 2");
        }
        const double c0 = 0.5 * c.observable.matrix().trace().real();
        Eigen::Vector3d a;
        for (int k = 0; k < 3; ++k) {
            a(k) = 0.5 * (c.observable.matrix() * pauli(k)).trace().real();
        }
        if (a.norm() <= 1e-12) {
            if (std::abs(c.target - c0) > 1e-9) {
                throw InfeasibleConstraint("bloch_grid_search: identity constraint with "
                                           "mismatched target");
            }
            continue;  // vacuous
        }
        normals.push_back(a);
        offsets.push_back(c.target - c0);
    }

    // Affine solution set of the plane equations: r = p + U u.
    const Eigen::Index m = static_cast<Eigen::Index>(normals.size());
    Eigen::Vector3d p = Eigen::Vector3d::Zero();
    Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(3, 3);
    Eigen::Index free_dims = 3;
    if (m > 0) {
        Eigen::MatrixXd plane(m, 3);
        Eigen::VectorXd rhs(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            plane.row(i) = normals[static_cast<std::size_t>(i)].transpose();
            rhs(i) = offsets[static_cast<std::size_t>(i)];
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(plane,
                                              Eigen::ComputeFullV | Eigen::ComputeThinU);
        svd.setThreshold(1e-10);
        p = svd.solve(rhs);
        const Eigen::Index rank = svd.rank();
        free_dims = 3 - rank;
        basis = svd.matrixV().rightCols(free_dims);
    }

    BlochGridResult result;
    result.best_entropy = -std::numeric_limits<double>::infinity();

    auto evaluate = [&](const Eigen::VectorXd& u) {
        const Eigen::Vector3d r = p + basis * u;
        if (r.squaredNorm() > 1.0) return;
        ++result.evaluations;
        const double s = bloch_umegaki_entropy(r, f);
        if (s > result.best_entropy) {
            result.best_entropy = s;
            result.best_bloch = r;
        }
    };

    // Exhaustive grid over the free coordinates, then local refinement.
    const double coarse = free_dims == 3 ? std::max(resolution, 2e-2) : resolution;
    const Eigen::Index steps = static_cast<Eigen::Index>(std::floor(2.0 / coarse)) + 1;
    Eigen::VectorXd u(free_dims);
    if (free_dims == 0) {
        evaluate(Eigen::VectorXd(0));
    } else if (free_dims == 1) {
        for (Eigen::Index i = 0; i <= steps; ++i) {
            u(0) = -1.0 + coarse * static_cast<double>(i);
            evaluate(u);
        }
    } else if (free_dims == 2) {
        for (Eigen::Index i = 0; i <= steps; ++i) {
            u(0) = -1.0 + coarse * static_cast<double>(i);
            for (Eigen::Index j = 0; j <= steps; ++j) {
                u(1) = -1.0 + coarse * static_cast<double>(j);
                evaluate(u);
            }
        }
    } else {
        for (Eigen::Index i = 0; i <= steps; ++i) {
            u(0) = -1.0 + coarse * static_cast<double>(i);
            for (Eigen::Index j = 0; j <= steps; ++j) {
                u(1) = -1.0 + coarse * static_cast<double>(j);
                for (Eigen::Index k = 0; k <= steps; ++k) {
                    u(2) = -1.0 + coarse * static_cast<double>(k);
                    evaluate(u);
                }
            }
        }
    }

    if (!std::isfinite(result.best_entropy)) {
        throw InfeasibleConstraint("bloch_grid_search: constraint planes miss the Bloch ball");
    }

    // Pattern-search refinement around the grid optimum.
    if (free_dims > 0) {
        Eigen::VectorXd center = basis.transpose() * (result.best_bloch - p);
        double h = coarse;
        for (int iter = 0; iter < 200 && h > 1e-9; ++iter) {
            bool improved = false;
            for (Eigen::Index k = 0; k < free_dims; ++k) {
                for (double sign : {-1.0, 1.0}) {
                    Eigen::VectorXd trial = center;
                    trial(k) += sign * h;
                    const double before = result.best_entropy;
                    evaluate(trial);
                    if (result.best_entropy > before) {
                        center = trial;
                        improved = true;
                    }
                }
            }
            if (!improved) h *= 0.5;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Randomized property suite
// ---------------------------------------------------------------------------

namespace {

struct Worst {
    double measured = 0.0;
    std::string detail;
};

// Runs `trials` evaluations of a property and keeps the worst measured value
// together with its reproduction seed. Exceptions count as hard failures.
template <typename Fn>
CheckResult run_property(const std::string& name, double tolerance, int dim, int trials,
                         std::uint64_t seed, Fn&& property) {
    Worst worst;
    for (int trial = 0; trial < trials; ++trial) {
        const std::uint64_t s =
            random_gen::trial_seed(seed, static_cast<std::uint64_t>(dim),
                                   static_cast<std::uint64_t>(trial));
        Rng rng(s);
        double measured;
        try {
            measured = property(rng, trial);
        } catch (const Error& e) {
            std::ostringstream os;
            os << "trial " << trial << " raised " << e.code_name() << ": " << e.what();
            return check_le(name, std::numeric_limits<double>::infinity(), tolerance, os.str());
        }
        if (measured > worst.measured || trial == 0) {
            worst.measured = measured;
            std::ostringstream os;
            os << "worst trial " << trial << " (seed " << s << ")";
            worst.detail = os.str();
        }
    }
    return check_le(name, worst.measured, tolerance, worst.detail);
}

std::string prop_name(const std::string& base, int dim) {
    return base + ".dim" + std::to_string(dim);
}

double relative_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
    return max_abs(a - b) / std::max(1.0, max_abs(b));
}

measurement::KrausSet random_kraus_set(Eigen::Index dim, Eigen::Index outcomes, Rng& rng) {
    return measurement::KrausSet(random_gen::random_kraus_operators(dim, outcomes, rng));
}

}  // namespace

CheckList selftest_suite(const SelftestOptions& options) {
    CheckList checks;
    if (options.trials <= 0 || options.dims.empty()) {
        checks.push_back(check_true("selftest.vacuous", true,
                                    "warning: no trials requested, nothing exercised"));
        return checks;
    }
    const int trials = options.trials;
    const std::uint64_t seed = options.seed;

    for (int dim : options.dims) {
        if (dim < 2) {
            checks.push_back(check_true(prop_name("selftest.dim_supported", dim), false,
                                        "dims must be >= 2"));
            continue;
        }
        const Eigen::Index d = dim;

        // ------------------------------------------------------------ linops
        checks.push_back(run_property(
            prop_name("linops.eig_reconstruct", dim), 1e-10, dim, trials, seed,
            [d](Rng& rng, int) {
                HermitianOperator h = random_gen::random_hermitian(d, rng);
                linops::EigResult eig = linops::eig_hermitian(h);
                const ComplexMatrix back = eig.eigenvectors *
                                           eig.eigenvalues.asDiagonal() *
                                           eig.eigenvectors.adjoint();
                return max_abs(back - h.matrix()) / std::max(1.0, max_abs(h.matrix()));
            }));
        checks.push_back(run_property(
            prop_name("linops.eig_unitary", dim), 1e-12, dim, trials, seed,
            [d](Rng& rng, int) {
                linops::EigResult eig =
                    linops::eig_hermitian(random_gen::random_hermitian(d, rng));
                return max_abs(eig.eigenvectors.adjoint() * eig.eigenvectors -
                               ComplexMatrix::Identity(d, d));
            }));
        checks.push_back(run_property(
            prop_name("linops.exp_log_support_roundtrip", dim), 1e-10, dim, trials, seed,
            [d](Rng& rng, int trial) {
                const Eigen::Index rank = 1 + trial % d;
                DensityMatrix rho = random_gen::random_low_rank_density(d, rank, rng);
                HermitianOperator log_rho = linops::matrix_log(rho.op(), true);
                HermitianOperator exp_log = linops::matrix_exp(log_rho);
                const ComplexMatrix proj =
                    linops::support_of(rho).projector.matrix();
                return max_abs(proj * (exp_log.matrix() - rho.matrix()) * proj);
            }));
        checks.push_back(run_property(
            prop_name("linops.kron_mixed_product", dim), 1e-12, dim, trials, seed,
            [d](Rng& rng, int) {
                const ComplexMatrix a = random_gen::random_complex_matrix(d, d, rng);
                const ComplexMatrix b = random_gen::random_complex_matrix(2, 2, rng);
                const ComplexMatrix c = random_gen::random_complex_matrix(d, d, rng);
                const ComplexMatrix e = random_gen::random_complex_matrix(2, 2, rng);
                return relative_diff(linops::kron(a, b) * linops::kron(c, e),
                                     linops::kron(a * c, b * e));
            }));
        checks.push_back(run_property(
            prop_name("linops.partial_trace", dim), 1e-12, dim, trials, seed,
            [d](Rng& rng, int) {
                DensityMatrix rho_x = random_gen::random_density(2, rng);
                DensityMatrix rho_t = random_gen::random_density(d, rng);
                const ComplexMatrix joint = linops::kron(rho_x.matrix(), rho_t.matrix());
                const ComplexMatrix reduced =
                    linops::partial_trace_raw(joint, 2, d, linops::Subsystem::kFirst);
                double err = max_abs(reduced - rho_t.matrix());
                DensityMatrix mixed = random_gen::random_density(2 * d, rng);
                const ComplexMatrix traced =
                    linops::partial_trace_raw(mixed.matrix(), 2, d,
                                              linops::Subsystem::kSecond);
                err = std::max(err, std::abs(traced.trace().real() - 1.0));
                return err;
            }));
        checks.push_back(run_property(
            prop_name("linops.support_rank", dim), 0.0, dim, trials, seed,
            [d](Rng& rng, int trial) {
                const Eigen::Index rank = 1 + trial % d;
                DensityMatrix rho = random_gen::random_low_rank_density(d, rank, rng);
                const auto support = linops::support_of(rho);
                double err = std::abs(static_cast<double>(support.rank - rank));
                const ComplexMatrix proj = support.projector.matrix();
                err = std::max(err, max_abs(proj * proj - proj) - 1e-10);
                return std::max(err, 0.0);
            }));

        // --------------------------------------------------------- classical
        checks.push_back(run_property(
            prop_name("classical.prior_fixed_point", dim), 0.0, dim, trials, seed,
            [d](Rng& rng, int) {
                classical::Distribution prior = random_gen::random_distribution(d, rng);
                classical::MaxEntResult r = classical::solve_maxent(prior, {});
                return (r.posterior.probs - prior.probs).cwiseAbs().maxCoeff();
            }));
        checks.push_back(run_property(
            prop_name("classical.target_reproduction", dim), 1e-9, dim, trials, seed,
            [d](Rng& rng, int) {
                classical::Distribution prior = random_gen::random_distribution(d, rng);
                std::uniform_real_distribution<double> uval(-1.0, 1.0);
                std::uniform_real_distribution<double> umid(0.3, 0.7);
                classical::Constraint c;
                c.observable.resize(d);
                for (Eigen::Index i = 0; i < d; ++i) c.observable(i) = uval(rng);
                const double lo = c.observable.minCoeff(), hi = c.observable.maxCoeff();
                c.target = lo + umid(rng) * (hi - lo);
                classical::MaxEntResult r = classical::solve_maxent(prior, {c});
                return std::abs(c.observable.dot(r.posterior.probs) - c.target);
            }));
        checks.push_back(run_property(
            prop_name("classical.support_rule", dim), 0.0, dim, trials, seed,
            [d](Rng& rng, int trial) {
                classical::Distribution prior = random_gen::random_distribution(d, rng);
                const Eigen::Index hole = trial % d;
                prior.probs(hole) = 0.0;
                prior.probs /= prior.probs.sum();
                std::uniform_real_distribution<double> uval(-1.0, 1.0);
                std::uniform_real_distribution<double> umid(0.3, 0.7);
                classical::Constraint c;
                c.observable.resize(d);
                for (Eigen::Index i = 0; i < d; ++i) c.observable(i) = uval(rng);
                double lo = std::numeric_limits<double>::infinity(), hi = -lo;
                for (Eigen::Index i = 0; i < d; ++i) {
                    if (prior.probs(i) > 0.0) {
                        lo = std::min(lo, c.observable(i));
                        hi = std::max(hi, c.observable(i));
                    }
                }
                if (hi - lo < 1e-6) return 0.0;  // degenerate draw, nothing to test
                c.target = lo + umid(rng) * (hi - lo);
                classical::MaxEntResult r = classical::solve_maxent(prior, {c});
                return r.posterior.probs(hole);
            }));
        checks.push_back(run_property(
            prop_name("classical.bayes_equivalence", dim), 1e-12, dim, trials, seed,
            [d](Rng& rng, int trial) {
                classical::JointDistribution joint = random_gen::random_joint(d, d, rng);
                const Eigen::Index observed = trial % d;
                return (classical::bayes_update(joint, observed).probs -
                        classical::bayes_update_direct(joint, observed).probs)
                    .cwiseAbs()
                    .maxCoeff();
            }));
        checks.push_back(run_property(
            prop_name("classical.dual_convexity", dim), 1e-12, dim, trials, seed,
            [d](Rng& rng, int) {
                classical::Distribution prior = random_gen::random_distribution(d, rng);
                std::uniform_real_distribution<double> uval(-1.0, 1.0);
                std::vector<classical::Constraint> cs(2);
                for (auto& c : cs) {
                    c.observable.resize(d);
                    for (Eigen::Index i = 0; i < d; ++i) c.observable(i) = uval(rng);
                }
                RealVector a(2), b(2);
                for (int i = 0; i < 2; ++i) {
                    a(i) = uval(rng);
                    b(i) = uval(rng);
                }
                const double ga = classical::ln_partition(prior, cs, a);
                const double gb = classical::ln_partition(prior, cs, b);
                const double gm = classical::ln_partition(prior, cs, 0.5 * (a + b));
                return std::max(0.0, gm - 0.5 * (ga + gb));
            }));

        // ----------------------------------------------------------- qsolver
        checks.push_back(run_property(
            prop_name("qsolver.target_reproduction", dim), 1e-9, dim, trials, seed,
            [d](Rng& rng, int trial) {
                DensityMatrix prior = random_gen::random_density(d, rng);
                // Jointly feasible targets: read them off a random interior
                // state. Independently drawn mid-spectrum targets need not be
                // simultaneously achievable.
                DensityMatrix witness = random_gen::random_density(d, rng, 0.05);
                std::vector<qsolver::QuantumConstraint> cs;
                const int n_constraints = 1 + trial % 2;
                for (int k = 0; k < n_constraints; ++k) {
                    HermitianOperator a = random_gen::random_hermitian(d, rng);
                    const double target = (a.matrix() * witness.matrix()).trace().real();
                    cs.push_back({a, target});
                }
                qsolver::MaxEntSolution sol = qsolver::solve_maxent(prior, cs);
                double err = sol.residuals.size() ? sol.residuals.maxCoeff() : 0.0;
                err = std::max(err, sol.posterior.trace_defect());
                err = std::max(err, std::max(0.0, -sol.posterior.min_eigenvalue()));
                return err;
            }));
        checks.push_back(run_property(
            prop_name("qsolver.dual_gradient_fd", dim), 1e-6, dim, trials, seed,
            [d](Rng& rng, int) {
                DensityMatrix prior = random_gen::random_density(d, rng);
                std::uniform_real_distribution<double> ualpha(-0.5, 0.5);
                std::vector<qsolver::QuantumConstraint> cs;
                for (int k = 0; k < 2; ++k) {
                    cs.push_back({random_gen::random_hermitian(d, rng), 0.0});
                }
                RealVector alphas(2);
                alphas << ualpha(rng), ualpha(rng);
                const RealVector grad = qsolver::dual_gradient(prior, cs, alphas);
                const double h = 1e-5;
                double err = 0.0;
                for (int i = 0; i < 2; ++i) {
                    RealVector up = alphas, down = alphas;
                    up(i) += h;
                    down(i) -= h;
                    const double fd = (qsolver::ln_partition(prior, cs, up) -
                                       qsolver::ln_partition(prior, cs, down)) /
                                      (2.0 * h);
                    err = std::max(err, std::abs(fd - grad(i)));
                }
                return err;
            }));
        checks.push_back(run_property(
            prop_name("qsolver.dual_hessian_psd", dim), 1e-7, dim, trials, seed,
            [d](Rng& rng, int) {
                DensityMatrix prior = random_gen::random_density(d, rng);
                std::uniform_real_distribution<double> ualpha(-0.5, 0.5);
                std::vector<qsolver::QuantumConstraint> cs;
                for (int k = 0; k < 2; ++k) {
                    cs.push_back({random_gen::random_hermitian(d, rng), 0.0});
                }
                RealVector alphas(2);
                alphas << ualpha(rng), ualpha(rng);
                const double h = 1e-5;
                Eigen::MatrixXd hess(2, 2);
                for (int j = 0; j < 2; ++j) {
                    RealVector up = alphas, down = alphas;
                    up(j) += h;
                    down(j) -= h;
                    hess.col(j) = (qsolver::dual_gradient(prior, cs, up) -
                                   qsolver::dual_gradient(prior, cs, down)) /
                                  (2.0 * h);
                }
                hess = 0.5 * (hess + hess.transpose());
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
                return std::max(0.0, -es.eigenvalues().minCoeff());
            }));
        checks.push_back(run_property(
            prop_name("qsolver.kubo_mori_hessian", dim), 1e-6, dim, trials, seed,
            [d](Rng& rng, int) {
                DensityMatrix prior = random_gen::random_density(d, rng);
                std::uniform_real_distribution<double> ualpha(-0.5, 0.5);
                std::vector<qsolver::QuantumConstraint> cs;
                for (int k = 0; k < 2; ++k) {
                    cs.push_back({random_gen::random_hermitian(d, rng), 0.0});
                }
                RealVector alphas(2);
                alphas << ualpha(rng), ualpha(rng);
                const Eigen::MatrixXd exact =
                    qsolver::dual_hessian_kubo_mori(prior, cs, alphas);
                const double h = 1e-5;
                Eigen::MatrixXd fd(2, 2);
                for (int j = 0; j < 2; ++j) {
                    RealVector up = alphas, down = alphas;
                    up(j) += h;
                    down(j) -= h;
                    fd.col(j) = (qsolver::dual_gradient(prior, cs, up) -
                                 qsolver::dual_gradient(prior, cs, down)) /
                                (2.0 * h);
                }
                fd = 0.5 * (fd + fd.transpose());
                return (exact - fd).cwiseAbs().maxCoeff();
            }));
        checks.push_back(run_property(
            prop_name("qsolver.commuting_reduction", dim), 1e-10, dim, trials, seed,
            [d](Rng& rng, int) {
                // Everything diagonal in one random orthonormal frame.
                const ComplexMatrix v = random_gen::random_unitary(d, rng);
                classical::Distribution p = random_gen::random_distribution(d, rng);
                std::uniform_real_distribution<double> uval(-1.0, 1.0);
                std::uniform_real_distribution<double> umid(0.35, 0.65);
                RealVector avals(d);
                for (Eigen::Index i = 0; i < d; ++i) avals(i) = uval(rng);
                const double lo = avals.minCoeff(), hi = avals.maxCoeff();
                if (hi - lo < 1e-6) return 0.0;
                const double target = lo + umid(rng) * (hi - lo);

                DensityMatrix prior = DensityMatrix::from_matrix(
                    v * p.probs.cast<Complex>().asDiagonal() * v.adjoint());
                HermitianOperator a(v * avals.cast<Complex>().asDiagonal() * v.adjoint());

                qsolver::SolveOptions qopts;
                qopts.dual_tol = 1e-12;
                qsolver::MaxEntSolution qsol = qsolver::solve_maxent(prior, {{a, target}}, qopts);

                classical::SolveOptions copts;
                copts.dual_tol = 1e-12;
                classical::Constraint cc{avals, target};
                classical::MaxEntResult csol = classical::solve_maxent(p, {cc}, copts);
                const ComplexMatrix expected =
                    v * csol.posterior.probs.cast<Complex>().asDiagonal() * v.adjoint();
                return max_abs(qsol.posterior.matrix() - expected);
            }));
        if (dim >= 3) {
            checks.push_back(run_property(
                prop_name("qsolver.pdmt_scaling", dim), 0.0, dim,
                std::max(1, trials / 5), seed, [d](Rng& rng, int trial) {
                    const Eigen::Index rank = 2 + trial % (d - 1);
                    DensityMatrix prior = random_gen::random_low_rank_density(d, rank, rng);
                    HermitianOperator a = random_gen::random_hermitian(d, rng);
                    const auto support = linops::support_of(prior);
                    const auto pc = qsolver::project_constraint_to_support(support, a);
                    if (pc.achievable_max - pc.achievable_min < 1e-3) return 0.0;
                    std::uniform_real_distribution<double> umid(0.35, 0.65);
                    const double target =
                        pc.achievable_min +
                        umid(rng) * (pc.achievable_max - pc.achievable_min);
                    qsolver::PdmtStudy study = qsolver::pdmt_limit_study(
                        prior, {{a, target}}, {1e-4, 1e-6, 1e-8, 1e-10});
                    double err = 0.0;
                    if (!study.kernel_weight_monotone) err = 1.0;
                    for (const auto& pt : study.points) {
                        if (!pt.solved) err = 1.0;
                    }
                    err = std::max(err, study.final_kernel_weight / 1e-8 - 1.0);
                    err = std::max(err, study.final_support_block_distance / 1e-6 - 1.0);
                    return std::max(0.0, err);
                }));
        }
        if (dim == 2) {
            checks.push_back(run_property(
                prop_name("qsolver.bloch_grid_oracle", dim), 1e-4, dim,
                std::max(1, trials / 5), seed, [](Rng& rng, int) {
                    DensityMatrix prior = random_gen::random_density(2, rng, 0.05);
                    HermitianOperator a = random_gen::random_hermitian(2, rng);
                    linops::EigResult eig = linops::eig_hermitian(a);
                    std::uniform_real_distribution<double> umid(0.3, 0.7);
                    const double target =
                        eig.eigenvalues(0) +
                        umid(rng) * (eig.eigenvalues(1) - eig.eigenvalues(0));
                    std::vector<qsolver::QuantumConstraint> cs{{a, target}};
                    qsolver::MaxEntSolution sol = qsolver::solve_maxent(prior, cs);
                    BlochGridResult grid = bloch_grid_search(prior, cs);
                    const Eigen::Vector3d rb = bloch_of(sol.posterior.matrix());
                    const Eigen::Vector3d fb = bloch_of(prior.matrix());
                    return grid.best_entropy - bloch_umegaki_entropy(rb, fb);
                }));
        }

        // ------------------------------------------------------- measurement
        checks.push_back(run_property(
            prop_name("measurement.dilation_blocks", dim), 1e-10, dim, trials, seed,
            [d](Rng& rng, int trial) {
                const Eigen::Index outcomes = 2 + trial % 3;
                measurement::KrausSet kraus = random_kraus_set(d, outcomes, rng);
                measurement::DilationModel model = measurement::dilation_from_kraus(kraus);
                return std::max(model.unitarity_defect, model.block_defect);
            }));
        checks.push_back(run_property(
            prop_name("measurement.entangle_consistency", dim), 1e-10, dim, trials, seed,
            [d](Rng& rng, int trial) {
                const Eigen::Index outcomes = 2 + trial % 2;
                DensityMatrix phi = random_gen::random_density(d, rng);
                measurement::KrausSet kraus = random_kraus_set(d, outcomes, rng);
                DensityMatrix joint = measurement::entangle_prior(phi, kraus);
                measurement::DilationModel model = measurement::dilation_from_kraus(kraus);
                ComplexMatrix ready =
                    ComplexMatrix::Zero(outcomes * d, outcomes * d);
                ready.block(0, 0, d, d) = phi.matrix();
                const ComplexMatrix via_dilation =
                    model.unitary * ready * model.unitary.adjoint();
                double err = max_abs(joint.matrix() - via_dilation);
                ComplexMatrix nonselective = ComplexMatrix::Zero(d, d);
                for (Eigen::Index x = 0; x < outcomes; ++x) {
                    nonselective += kraus[x] * phi.matrix() * kraus[x].adjoint();
                }
                err = std::max(err, max_abs(linops::partial_trace_raw(
                                                joint.matrix(), outcomes, d,
                                                linops::Subsystem::kFirst) -
                                            nonselective));
                return err;
            }));
        checks.push_back(run_property(
            prop_name("measurement.appropriate_consistency", dim), 1e-12, dim, trials, seed,
            [d](Rng& rng, int trial) {
                const Eigen::Index outcomes = 2 + trial % 2;
                DensityMatrix phi = random_gen::random_density(d, rng);
                measurement::KrausSet kraus = random_kraus_set(d, outcomes, rng);
                DensityMatrix joint = measurement::entangle_prior(phi, kraus);
                DensityMatrix appropriate = measurement::appropriate_prior(phi, kraus);
                DensityMatrix decohered =
                    measurement::ancilla_decohere(joint, outcomes, d);
                return max_abs(appropriate.matrix() - decohered.matrix());
            }));
        checks.push_back(run_property(
            prop_name("measurement.qbr_equivalence", dim), 1e-10, dim, trials, seed,
            [d](Rng& rng, int trial) {
                const Eigen::Index outcomes = 2 + trial % 3;
                DensityMatrix phi = random_gen::random_density(d, rng);
                measurement::KrausSet kraus = random_kraus_set(d, outcomes, rng);
                const RealVector evidence = measurement::evidence_distribution(phi, kraus);
                Eigen::Index best = 0;
                evidence.maxCoeff(&best);
                return max_abs(measurement::qbr_entropic(phi, kraus, best).matrix() -
                               measurement::qbr_direct(phi, kraus, best).matrix());
            }));
        checks.push_back(run_property(
            prop_name("measurement.nonselective_consistency", dim), 1e-10, dim, trials, seed,
            [d](Rng& rng, int trial) {
                const Eigen::Index outcomes = 2 + trial % 2;
                DensityMatrix phi = random_gen::random_density(d, rng);
                measurement::KrausSet kraus = random_kraus_set(d, outcomes, rng);
                const RealVector evidence = measurement::evidence_distribution(phi, kraus);
                ComplexMatrix mixture = ComplexMatrix::Zero(d, d);
                for (Eigen::Index x = 0; x < outcomes; ++x) {
                    mixture += evidence(x) *
                               measurement::qbr_direct(phi, kraus, x).matrix();
                }
                DensityMatrix appropriate = measurement::appropriate_prior(phi, kraus);
                const ComplexMatrix marginal = linops::partial_trace_raw(
                    appropriate.matrix(), outcomes, d, linops::Subsystem::kFirst);
                return max_abs(mixture - marginal);
            }));
        checks.push_back(run_property(
            prop_name("measurement.decohere_idempotent", dim), 1e-12, dim, trials, seed,
            [d](Rng& rng, int) {
                DensityMatrix rho = random_gen::random_density(d, rng);
                const auto projectors =
                    measurement::basis_projectors(random_gen::random_unitary(d, rng));
                DensityMatrix once = measurement::decohere(rho, projectors);
                DensityMatrix twice = measurement::decohere(once, projectors);
                double err = max_abs(twice.matrix() - once.matrix());
                err = std::max(err, std::abs(once.matrix().trace().real() -
                                             rho.matrix().trace().real()));
                return err;
            }));
        checks.push_back(run_property(
            prop_name("measurement.classical_embedding", dim), 1e-12, dim, trials, seed,
            [d](Rng& rng, int trial) {
                // Diagonal prior and diagonal Kraus operators: the quantum
                // update must reduce to Bayes on the induced joint.
                const Eigen::Index outcomes = 2 + trial % 2;
                classical::Distribution ptheta = random_gen::random_distribution(d, rng);
                Eigen::MatrixXd weights(outcomes, d);
                std::uniform_real_distribution<double> uniform(0.05, 1.0);
                for (Eigen::Index j = 0; j < d; ++j) {
                    double colsum = 0.0;
                    for (Eigen::Index x = 0; x < outcomes; ++x) {
                        weights(x, j) = uniform(rng);
                        colsum += weights(x, j);
                    }
                    weights.col(j) /= colsum;
                }
                std::vector<ComplexMatrix> ops;
                for (Eigen::Index x = 0; x < outcomes; ++x) {
                    ComplexMatrix a = ComplexMatrix::Zero(d, d);
                    for (Eigen::Index j = 0; j < d; ++j) {
                        a(j, j) = std::sqrt(weights(x, j));
                    }
                    ops.push_back(std::move(a));
                }
                measurement::KrausSet kraus(std::move(ops));
                DensityMatrix phi = DensityMatrix::from_matrix(
                    ptheta.probs.cast<Complex>().asDiagonal());

                Eigen::MatrixXd joint(outcomes, d);
                for (Eigen::Index x = 0; x < outcomes; ++x) {
                    for (Eigen::Index j = 0; j < d; ++j) {
                        joint(x, j) = weights(x, j) * ptheta.probs(j);
                    }
                }
                const Eigen::Index observed = trial % outcomes;
                classical::Distribution expected = classical::bayes_update(
                    classical::JointDistribution::from_probs(joint), observed);
                DensityMatrix updated = measurement::qbr_direct(phi, kraus, observed);
                double err = 0.0;
                for (Eigen::Index j = 0; j < d; ++j) {
                    err = std::max(err, std::abs(updated.matrix()(j, j).real() -
                                                 expected.probs(j)));
                }
                return err;
            }));
        checks.push_back(run_property(
            prop_name("measurement.thermal_reinsertion", dim), 1e-9, dim, trials, seed,
            [d](Rng& rng, int trial) {
                const Eigen::Index outcomes = 2 + trial % 2;
                DensityMatrix phi = random_gen::random_density(d, rng);
                measurement::KrausSet kraus = random_kraus_set(d, outcomes, rng);
                RealVector energies(outcomes);
                for (Eigen::Index x = 0; x < outcomes; ++x) {
                    energies(x) = static_cast<double>(x);
                }
                std::uniform_real_distribution<double> umid(0.25, 0.75);
                const double target = energies.minCoeff() +
                                      umid(rng) * (energies.maxCoeff() - energies.minCoeff());
                measurement::ThermalResult result =
                    measurement::thermal_weak_collapse(phi, kraus, energies, target);
                const RealVector evidence = measurement::evidence_distribution(phi, kraus);
                double z = 0.0, mean = 0.0;
                for (Eigen::Index x = 0; x < outcomes; ++x) {
                    const double w = std::exp(result.beta * energies(x)) * evidence(x);
                    z += w;
                    mean += w * energies(x);
                }
                return std::abs(mean / z - target);
            }));
        checks.push_back(run_property(
            prop_name("measurement.joint_diagonal_equality", dim), 1e-12, dim, trials, seed,
            [d](Rng& rng, int) {
                DensityMatrix joint = random_gen::random_density(2 * d, rng);
                DensityMatrix phi_t = measurement::ancilla_decohere(joint, 2, d);
                DensityMatrix theta_t = measurement::complementary_prior(joint, 2, d);
                double err = 0.0;
                for (Eigen::Index i = 0; i < joint.dim(); ++i) {
                    err = std::max(err, std::abs(phi_t.matrix()(i, i).real() -
                                                 theta_t.matrix()(i, i).real()));
                    err = std::max(err, std::abs(phi_t.matrix()(i, i).real() -
                                                 joint.matrix()(i, i).real()));
                }
                return err;
            }));
        checks.push_back(run_property(
            prop_name("measurement.jeffrey_reductions", dim), 1e-12, dim, trials, seed,
            [d](Rng& rng, int trial) {
                const Eigen::Index outcomes = 2 + trial % 2;
                DensityMatrix phi = random_gen::random_density(d, rng);
                measurement::KrausSet kraus = random_kraus_set(d, outcomes, rng);
                const RealVector evidence = measurement::evidence_distribution(phi, kraus);

                Eigen::Index best = 0;
                evidence.maxCoeff(&best);
                RealVector point = RealVector::Zero(outcomes);
                point(best) = 1.0;
                classical::Distribution point_mass;
                point_mass.probs = point;
                point_mass.validate();
                double err = max_abs(
                    measurement::quantum_jeffrey(phi, kraus, point_mass).matrix() -
                    measurement::qbr_direct(phi, kraus, best).matrix());

                classical::Distribution marginal;
                marginal.probs = evidence;
                marginal.validate();
                ComplexMatrix nonselective = ComplexMatrix::Zero(d, d);
                for (Eigen::Index x = 0; x < outcomes; ++x) {
                    nonselective += kraus[x] * phi.matrix() * kraus[x].adjoint();
                }
                err = std::max(
                    err, max_abs(measurement::quantum_jeffrey(phi, kraus, marginal).matrix() -
                                 nonselective));
                return err;
            }));

        // -------------------------------------------------------------- json
        checks.push_back(run_property(
            prop_name("json.matrix_roundtrip_bit_exact", dim), 0.0, dim, trials, seed,
            [d](Rng& rng, int) {
                const ComplexMatrix m = random_gen::random_complex_matrix(d, d, rng);
                const json_io::Json j =
                    json_io::parse(json_io::matrix_to_json(m).dump(), "roundtrip");
                const ComplexMatrix back = json_io::matrix_from_json(j, "roundtrip");
                return max_abs(back - m);
            }));
    }

    // Negative control: a corrupted Kraus set must be rejected, with the
    // completeness defect actually measured.
    {
        Rng rng(random_gen::trial_seed(seed, 2, 987654321ULL));
        auto ops = random_gen::random_kraus_operators(2, 2, rng);
        ops[0] *= 1.02;
        double measured_defect = 0.0;
        bool rejected = false;
        try {
            measurement::KrausSet bad(ops);
            (void)bad;
        } catch (const ValidationError&) {
            rejected = true;
            ComplexMatrix total = ComplexMatrix::Zero(2, 2);
            for (const auto& a : ops) total += a.adjoint() * a;
            measured_defect = max_abs(total - ComplexMatrix::Identity(2, 2));
        }
        std::ostringstream os;
        os << "corrupted set has |sum A'A - 1| = " << measured_defect;
        checks.push_back(check_true("measurement.negative_control_corrupted_kraus",
                                    rejected && measured_defect > 1e-10, os.str()));
    }

    return checks;
}

}  // namespace qme::checks

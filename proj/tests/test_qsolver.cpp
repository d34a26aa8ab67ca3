#include <doctest.h>

#include <cmath>

#include "checks.hpp"
#include "oracles.hpp"
#include "qsolver.hpp"
#include "random_gen.hpp"

using namespace qme;
using linops::ComplexMatrix;
using linops::Complex;
using linops::DensityMatrix;
using linops::HermitianOperator;
using linops::max_abs;
using qsolver::QuantumConstraint;

namespace {

ComplexMatrix diag(std::initializer_list<double> values) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v(i++) = x;
    return v.cast<Complex>().asDiagonal();
}

DensityMatrix qubit_mixed(double p) { return DensityMatrix::from_matrix(diag({p, 1.0 - p})); }

Eigen::Vector3d bloch(const ComplexMatrix& rho) {
    Eigen::Vector3d r;
    r(0) = (rho * oracles::sigma_x()).trace().real();
    r(1) = (rho * oracles::sigma_y()).trace().real();
    r(2) = (rho * oracles::sigma_z()).trace().real();
    return r;
}

}  // namespace

TEST_CASE("quantum relative entropy") {
    DensityMatrix half = qubit_mixed(0.5);
    CHECK(qsolver::relative_entropy(half, half) == 0.0);

    // Pure state vs maximally mixed: Tr(rho ln rho) = 0, Tr(rho ln phi) = -ln 2.
    const ComplexMatrix plus = oracles::ket_plus_x() * oracles::ket_plus_x().adjoint();
    DensityMatrix pure = DensityMatrix::from_matrix(plus);
    CHECK(qsolver::relative_entropy(pure, half) ==
          doctest::Approx(-std::log(2.0)).epsilon(1e-12));

    const ComplexMatrix minus = oracles::ket_minus_x() * oracles::ket_minus_x().adjoint();
    CHECK_THROWS_AS(qsolver::relative_entropy(DensityMatrix::from_matrix(minus), pure),
                    SupportViolation);
}

TEST_CASE("solve with no constraints is the identity update") {
    random_gen::Rng rng(5);
    DensityMatrix prior = random_gen::random_density(3, rng);
    qsolver::MaxEntSolution sol = qsolver::solve_maxent(prior, {});
    CHECK(max_abs(sol.posterior.matrix() - prior.matrix()) == 0.0);
    CHECK(sol.alphas.size() == 0);
    CHECK(sol.ln_z == 0.0);
}

TEST_CASE("commuting closed form: sigma_z constraint on the mixed qubit") {
    QuantumConstraint c{HermitianOperator(oracles::sigma_z()), 0.6};
    qsolver::MaxEntSolution sol = qsolver::solve_maxent(qubit_mixed(0.5), {c});
    CHECK(max_abs(sol.posterior.matrix() - diag({0.8, 0.2})) < 1e-10);
    CHECK(sol.alphas(0) == doctest::Approx(std::atanh(0.6)).epsilon(1e-9));
    CHECK(sol.residuals.maxCoeff() <= 1e-9);
}

TEST_CASE("non-commuting constraint: spin-x expectation on a spin-z mixed prior") {
    // Maximally mixed prior: ln(phi) is a multiple of the identity, so the
    // posterior is the x-weighted state with Bloch vector (0.5, 0, 0).
    QuantumConstraint c{HermitianOperator(oracles::sigma_x()), 0.5};
    qsolver::MaxEntSolution sol = qsolver::solve_maxent(qubit_mixed(0.5), {c});
    const Eigen::Vector3d r = bloch(sol.posterior.matrix());
    CHECK(r(0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(std::abs(r(1)) < 1e-10);
    CHECK(std::abs(r(2)) < 1e-10);

    // Genuinely tilted prior: verify optimality against the grid oracle.
    qsolver::MaxEntSolution tilted = qsolver::solve_maxent(qubit_mixed(0.7), {c});
    CHECK(tilted.residuals.maxCoeff() <= 1e-9);
    checks::BlochGridResult grid = checks::bloch_grid_search(qubit_mixed(0.7), {c});
    const double solver_entropy = checks::bloch_umegaki_entropy(
        bloch(tilted.posterior.matrix()), bloch(qubit_mixed(0.7).matrix()));
    CHECK(grid.best_entropy <= solver_entropy + 1e-4);
    // The posterior tilts out of the x axis because the prior is not uniform.
    CHECK(std::abs(bloch(tilted.posterior.matrix())(2)) > 1e-3);
}

TEST_CASE("dual gradient: closed forms and finite differences") {
    random_gen::Rng rng(9);
    DensityMatrix prior = random_gen::random_density(2, rng);

    // At alpha = 0 the gradient is the prior expectation.
    std::vector<QuantumConstraint> cs{{HermitianOperator(oracles::sigma_x()), 0.0}};
    Eigen::VectorXd zero(1);
    zero << 0.0;
    const double expected = (oracles::sigma_x() * prior.matrix()).trace().real();
    CHECK(qsolver::dual_gradient(prior, cs, zero)(0) ==
          doctest::Approx(expected).epsilon(1e-12));

    // Commuting case: matches the scalar d/dalpha ln sum p_k exp(alpha a_k).
    DensityMatrix dprior = qubit_mixed(0.7);
    std::vector<QuantumConstraint> dcs{{HermitianOperator(oracles::sigma_z()), 0.0}};
    Eigen::VectorXd alpha(1);
    alpha << 0.37;
    const double z = 0.7 * std::exp(0.37) + 0.3 * std::exp(-0.37);
    const double scalar = (0.7 * std::exp(0.37) - 0.3 * std::exp(-0.37)) / z;
    CHECK(qsolver::dual_gradient(dprior, dcs, alpha)(0) ==
          doctest::Approx(scalar).epsilon(1e-12));

    // Non-commuting pair: central finite difference of lnZ at h = 1e-5.
    std::vector<QuantumConstraint> xcs{{HermitianOperator(oracles::sigma_x()), 0.0}};
    Eigen::VectorXd a(1);
    a << 0.4;
    const double h = 1e-5;
    Eigen::VectorXd up = a, down = a;
    up(0) += h;
    down(0) -= h;
    const double fd = (qsolver::ln_partition(dprior, xcs, up) -
                       qsolver::ln_partition(dprior, xcs, down)) /
                      (2.0 * h);
    CHECK(std::abs(qsolver::dual_gradient(dprior, xcs, a)(0) - fd) < 1e-7);
}

TEST_CASE("kubo-mori hessian matches finite differences of the gradient") {
    for (int trial = 0; trial < 10; ++trial) {
        random_gen::Rng rng(random_gen::trial_seed(77, 4, trial));
        DensityMatrix prior = random_gen::random_density(4, rng);
        std::vector<QuantumConstraint> cs{{random_gen::random_hermitian(4, rng), 0.0},
                                          {random_gen::random_hermitian(4, rng), 0.0}};
        std::uniform_real_distribution<double> ua(-0.5, 0.5);
        Eigen::VectorXd alphas(2);
        alphas << ua(rng), ua(rng);

        const Eigen::MatrixXd exact = qsolver::dual_hessian_kubo_mori(prior, cs, alphas);
        const double h = 1e-5;
        Eigen::MatrixXd fd(2, 2);
        for (int j = 0; j < 2; ++j) {
            Eigen::VectorXd up = alphas, down = alphas;
            up(j) += h;
            down(j) -= h;
            fd.col(j) = (qsolver::dual_gradient(prior, cs, up) -
                         qsolver::dual_gradient(prior, cs, down)) /
                        (2.0 * h);
        }
        CHECK((exact - 0.5 * (fd + fd.transpose())).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("kubo-mori hessian accelerates the same solve") {
    random_gen::Rng rng(31);
    DensityMatrix prior = random_gen::random_density(3, rng);
    DensityMatrix witness = random_gen::random_density(3, rng, 0.05);
    HermitianOperator a = random_gen::random_hermitian(3, rng);
    const double target = (a.matrix() * witness.matrix()).trace().real();

    qsolver::SolveOptions fd_opts;
    qsolver::SolveOptions km_opts;
    km_opts.hessian = qsolver::HessianScheme::kKuboMori;
    qsolver::MaxEntSolution via_fd = qsolver::solve_maxent(prior, {{a, target}}, fd_opts);
    qsolver::MaxEntSolution via_km = qsolver::solve_maxent(prior, {{a, target}}, km_opts);
    CHECK(max_abs(via_fd.posterior.matrix() - via_km.posterior.matrix()) < 1e-8);
}

TEST_CASE("rank-deficient priors are rejected with direction to regularize") {
    const ComplexMatrix plus = diag({1.0, 0.0});
    DensityMatrix pure = DensityMatrix::from_matrix(plus);
    CHECK_THROWS_AS(
        qsolver::solve_maxent(pure, {{HermitianOperator(oracles::sigma_x()), 0.3}}),
        RankDeficientPrior);
}

TEST_CASE("targets at the spectral boundary are infeasible") {
    CHECK_THROWS_AS(
        qsolver::solve_maxent(qubit_mixed(0.5), {{HermitianOperator(oracles::sigma_z()), 1.0}}),
        InfeasibleConstraint);
    // Identity observables are accepted only when already satisfied.
    CHECK_THROWS_AS(
        qsolver::solve_maxent(qubit_mixed(0.5),
                              {{HermitianOperator(ComplexMatrix::Identity(2, 2)), 0.7}}),
        InfeasibleConstraint);
    qsolver::MaxEntSolution ok = qsolver::solve_maxent(
        qubit_mixed(0.5), {{HermitianOperator(ComplexMatrix::Identity(2, 2)), 1.0}});
    CHECK(ok.alphas(0) == 0.0);
}

TEST_CASE("near-singular dual hessians raise the warning flag") {
    random_gen::Rng rng(13);
    DensityMatrix prior = random_gen::random_density(3, rng);
    DensityMatrix witness = random_gen::random_density(3, rng, 0.05);
    HermitianOperator a = random_gen::random_hermitian(3, rng);
    const double target = (a.matrix() * witness.matrix()).trace().real();
    // The same constraint twice: the dual is flat along alpha_1 - alpha_2.
    qsolver::MaxEntSolution sol = qsolver::solve_maxent(prior, {{a, target}, {a, target}});
    CHECK(sol.near_singular_hessian);
    CHECK(sol.residuals.maxCoeff() <= 1e-9);
}

TEST_CASE("regularize_prior schemes") {
    random_gen::Rng rng(21);

    // Full-rank prior: both schemes stay within eps of the input.
    DensityMatrix full = random_gen::random_density(3, rng);
    for (auto scheme : {qsolver::RegularizationScheme::kConvexMix,
                        qsolver::RegularizationScheme::kBlockFill}) {
        qsolver::RegularizedPrior reg = qsolver::regularize_prior(full, 1e-4, scheme);
        CHECK(reg.max_distortion <= 1e-4);
    }

    // The paper's qubit construction: (1-eps)|+><+| + eps I/2 in the z basis.
    DensityMatrix pure = DensityMatrix::from_matrix(diag({1.0, 0.0}));
    qsolver::RegularizedPrior mix =
        qsolver::regularize_prior(pure, 1e-3, qsolver::RegularizationScheme::kConvexMix);
    CHECK(max_abs(mix.regularized.matrix() - diag({1.0 - 5e-4, 5e-4})) < 1e-15);
    CHECK(mix.regularized.min_eigenvalue() >= mix.eigenvalue_floor * (1.0 - 1e-6));

    qsolver::RegularizedPrior fill =
        qsolver::regularize_prior(pure, 1e-3, qsolver::RegularizationScheme::kBlockFill);
    CHECK(fill.regularized.min_eigenvalue() >=
          fill.epsilon * (1.0 - 1e-6));  // kernel pinned at eps exactly
    CHECK(max_abs(fill.regularized.matrix() - diag({1.0 - 1e-3, 1e-3})) < 1e-15);
    CHECK(std::abs(fill.regularized.matrix().trace().real() - 1.0) < 1e-15);

    CHECK_THROWS_AS(
        qsolver::regularize_prior(pure, 0.9, qsolver::RegularizationScheme::kConvexMix),
        BadEpsilon);
    CHECK_THROWS_AS(
        qsolver::regularize_prior(pure, 0.0, qsolver::RegularizationScheme::kBlockFill),
        BadEpsilon);
}

TEST_CASE("project_constraint_to_support") {
    // Full-rank state: the compressed observable keeps the spectrum.
    random_gen::Rng rng(23);
    DensityMatrix full = random_gen::random_density(3, rng);
    HermitianOperator a = random_gen::random_hermitian(3, rng);
    const auto support_full = linops::support_of(full);
    const auto pc = qsolver::project_constraint_to_support(support_full, a);
    linops::EigResult ae = linops::eig_hermitian(a);
    CHECK(pc.achievable_min == doctest::Approx(ae.eigenvalues.minCoeff()).epsilon(1e-10));
    CHECK(pc.achievable_max == doctest::Approx(ae.eigenvalues.maxCoeff()).epsilon(1e-10));

    // Pure |+z>: sigma_x compresses to [0], sigma_z to [1].
    DensityMatrix pure = DensityMatrix::from_matrix(diag({1.0, 0.0}));
    const auto support = linops::support_of(pure);
    const auto px =
        qsolver::project_constraint_to_support(support, HermitianOperator(oracles::sigma_x()));
    CHECK(std::abs(px.achievable_min) < 1e-12);
    CHECK(std::abs(px.achievable_max) < 1e-12);
    const auto pz =
        qsolver::project_constraint_to_support(support, HermitianOperator(oracles::sigma_z()));
    CHECK(pz.achievable_min == doctest::Approx(1.0));
    CHECK(pz.achievable_max == doctest::Approx(1.0));
}

TEST_CASE("pdmt limit study: the spin fixture collapses back to the prior") {
    DensityMatrix pure = DensityMatrix::from_matrix(diag({1.0, 0.0}));
    std::vector<double> epsilons;
    for (int k = 2; k <= 10; ++k) epsilons.push_back(std::pow(10.0, -k));
    qsolver::PdmtStudy study = qsolver::pdmt_limit_study(
        pure, {{HermitianOperator(oracles::sigma_x()), 0.0}}, epsilons);

    CHECK(study.rank == 1);
    CHECK(study.kernel_weight_monotone);
    for (const auto& p : study.points) CHECK(p.solved);
    // Kernel weight tracks eps itself here.
    CHECK(study.final_kernel_weight <= 1e-8);
    CHECK(study.points.back().prior_distance <= 1e-8);
    CHECK(study.fitted_linear_coefficient <= 10.0);
}

TEST_CASE("pdmt limit study: full-rank prior reports trivial kernel weight") {
    random_gen::Rng rng(29);
    DensityMatrix full = random_gen::random_density(3, rng);
    DensityMatrix witness = random_gen::random_density(3, rng, 0.05);
    HermitianOperator a = random_gen::random_hermitian(3, rng);
    const double target = (a.matrix() * witness.matrix()).trace().real();
    qsolver::PdmtStudy study =
        qsolver::pdmt_limit_study(full, {{a, target}}, {1e-4, 1e-8});
    CHECK(study.rank == 3);
    for (const auto& p : study.points) {
        CHECK(p.solved);
        CHECK(p.kernel_weight == 0.0);
    }
}

TEST_CASE("pdmt limit study: rank-2 prior in dim 4 against the qubit grid oracle") {
    // Support = first two coordinates, so the projected problem is a plain
    // qubit problem that the Bloch grid can solve independently.
    ComplexMatrix prior4 = ComplexMatrix::Zero(4, 4);
    prior4(0, 0) = 0.6;
    prior4(1, 1) = 0.4;
    DensityMatrix prior = DensityMatrix::from_matrix(prior4);

    random_gen::Rng rng(31);
    HermitianOperator a = random_gen::random_hermitian(4, rng);
    const auto support = linops::support_of(prior);
    const auto pc = qsolver::project_constraint_to_support(support, a);
    const double target = pc.achievable_min + 0.4 * (pc.achievable_max - pc.achievable_min);

    std::vector<double> epsilons;
    for (int k = 2; k <= 10; ++k) epsilons.push_back(std::pow(10.0, -k));
    qsolver::PdmtStudy study = qsolver::pdmt_limit_study(prior, {{a, target}}, epsilons);
    CHECK(study.kernel_weight_monotone);
    CHECK(study.final_kernel_weight <= 1e-8);
    CHECK(study.final_support_block_distance <= 1e-6);

    // Independent qubit check of the projected solution itself.
    ComplexMatrix phi_m = support.support_basis.adjoint() * prior.matrix() *
                          support.support_basis;
    DensityMatrix prior_m = DensityMatrix::from_matrix(phi_m);
    std::vector<QuantumConstraint> pcs{{pc.observable, target}};
    checks::BlochGridResult grid = checks::bloch_grid_search(prior_m, pcs);
    const Eigen::Vector3d rb = bloch(study.projected_solution->posterior.matrix());
    const double solver_entropy =
        checks::bloch_umegaki_entropy(rb, bloch(prior_m.matrix()));
    CHECK(grid.best_entropy <= solver_entropy + 1e-4);
    // The refined grid optimum pins the same state to ~1e-6.
    const ComplexMatrix grid_state =
        0.5 * (ComplexMatrix::Identity(2, 2) +
               grid.best_bloch(0) * oracles::sigma_x() +
               grid.best_bloch(1) * oracles::sigma_y() +
               grid.best_bloch(2) * oracles::sigma_z());
    CHECK(max_abs(grid_state - study.projected_solution->posterior.matrix()) < 1e-5);
}

TEST_CASE("pdmt limit study records per-epsilon failures and continues") {
    DensityMatrix pure = DensityMatrix::from_matrix(diag({1.0, 0.0}));
    // 0.6 >= half the smallest support eigenvalue: block_fill rejects it.
    qsolver::PdmtStudy study = qsolver::pdmt_limit_study(
        pure, {{HermitianOperator(oracles::sigma_x()), 0.0}}, {0.4, 1e-6});
    CHECK_FALSE(study.points[0].solved);
    CHECK(study.points[1].solved);
}

TEST_CASE("reprior transform") {
    // Identity re-prioring.
    random_gen::Rng rng(37);
    DensityMatrix phi = random_gen::random_density(3, rng);
    qsolver::RepriorResult same = qsolver::reprior_transform(phi, phi);
    CHECK(max_abs(same.state.matrix() - phi.matrix()) < 1e-10);

    // Invertible phi: exact symbolic cancellation to the new prior.
    DensityMatrix phi_new = random_gen::random_density(3, rng);
    qsolver::RepriorResult swapped = qsolver::reprior_transform(phi, phi_new);
    CHECK(max_abs(swapped.state.matrix() - phi_new.matrix()) < 1e-10);
    CHECK_FALSE(swapped.disjoint_support_warning);

    // Rank-deficient phi: the sandwich projects the new prior onto phi's
    // support. Direct arithmetic for phi = |+z><+z|, phi_new = I/2:
    // sqrt(phi_new) pinv_sqrt(phi) = |+z><+z|/sqrt(2), so the product is
    // |+z><+z|/2 and renormalization returns |+z><+z|.
    DensityMatrix pure = DensityMatrix::from_matrix(diag({1.0, 0.0}));
    DensityMatrix half = qubit_mixed(0.5);
    qsolver::RepriorResult projected = qsolver::reprior_transform(pure, half);
    CHECK(max_abs(projected.state.matrix() - diag({1.0, 0.0})) < 1e-12);
    CHECK(projected.trace_before_normalization == doctest::Approx(0.5).epsilon(1e-12));

    // Disjoint supports: warning flag, requested prior returned.
    DensityMatrix down = DensityMatrix::from_matrix(diag({0.0, 1.0}));
    qsolver::RepriorResult disjoint = qsolver::reprior_transform(pure, down);
    CHECK(disjoint.disjoint_support_warning);
    CHECK(max_abs(disjoint.state.matrix() - down.matrix()) == 0.0);
}

TEST_CASE("posterior entropy is optimal among feasible states (dim 2 oracle)") {
    for (int trial = 0; trial < 5; ++trial) {
        random_gen::Rng rng(random_gen::trial_seed(43, 2, trial));
        DensityMatrix prior = random_gen::random_density(2, rng, 0.05);
        HermitianOperator a = random_gen::random_hermitian(2, rng);
        linops::EigResult ae = linops::eig_hermitian(a);
        const double target =
            ae.eigenvalues(0) + 0.45 * (ae.eigenvalues(1) - ae.eigenvalues(0));
        std::vector<QuantumConstraint> cs{{a, target}};
        qsolver::MaxEntSolution sol = qsolver::solve_maxent(prior, cs);
        checks::BlochGridResult grid = checks::bloch_grid_search(prior, cs);
        const double solver_entropy = checks::bloch_umegaki_entropy(
            bloch(sol.posterior.matrix()), bloch(prior.matrix()));
        CHECK(grid.best_entropy <= solver_entropy + 1e-4);
    }
}

#include <doctest.h>

#include <cmath>

#include "linops.hpp"
#include "oracles.hpp"
#include "random_gen.hpp"

using namespace qme;
using linops::ComplexMatrix;
using linops::Complex;
using linops::DensityMatrix;
using linops::HermitianOperator;
using linops::max_abs;

namespace {

ComplexMatrix diag(std::initializer_list<double> values) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v(i++) = x;
    return v.cast<Complex>().asDiagonal();
}

}  // namespace

TEST_CASE("hermitian construction re-symmetrizes and records the defect") {
    ComplexMatrix m(2, 2);
    m << 1.0, Complex(0.5, 1e-12), Complex(0.5, 1e-12), 2.0;
    // Slightly non-Hermitian off-diagonal pair: defect is 2e-12 in max norm.
    HermitianOperator h(m);
    CHECK(h.hermiticity_defect() == doctest::Approx(2e-12).epsilon(0.2));
    CHECK(max_abs(h.matrix() - h.matrix().adjoint()) == 0.0);

    ComplexMatrix bad(2, 2);
    bad << 1.0, 1.0, -1.0, 1.0;
    CHECK_THROWS_AS(HermitianOperator{bad}, ValidationError);
}

TEST_CASE("density matrix validation") {
    CHECK_THROWS_AS(DensityMatrix::from_matrix(diag({0.5, 0.6})), ValidationError);
    CHECK_THROWS_AS(DensityMatrix::from_matrix(diag({1.5, -0.5})), ValidationError);
    DensityMatrix ok = DensityMatrix::from_matrix(diag({0.5, 0.5}));
    CHECK(ok.min_eigenvalue() == doctest::Approx(0.5));
}

TEST_CASE("eig_hermitian on fixed spectra") {
    // Already diagonal.
    HermitianOperator h(diag({1.0, 2.0, 3.0}));
    linops::EigResult eig = linops::eig_hermitian(h);
    CHECK(eig.eigenvalues(0) == doctest::Approx(1.0));
    CHECK(eig.eigenvalues(1) == doctest::Approx(2.0));
    CHECK(eig.eigenvalues(2) == doctest::Approx(3.0));
    CHECK(max_abs(eig.eigenvectors.cwiseAbs() -
                  ComplexMatrix::Identity(3, 3).cwiseAbs()) < 1e-12);

    // Pauli x: eigenvalues -1, +1 with |−>_x, |+>_x columns.
    linops::EigResult px = linops::eig_hermitian(HermitianOperator(oracles::sigma_x()));
    CHECK(px.eigenvalues(0) == doctest::Approx(-1.0));
    CHECK(px.eigenvalues(1) == doctest::Approx(1.0));
    const ComplexMatrix minus = px.eigenvectors.col(0) * px.eigenvectors.col(0).adjoint();
    const ComplexMatrix expected_minus =
        oracles::ket_minus_x() * oracles::ket_minus_x().adjoint();
    CHECK(max_abs(minus - expected_minus) < 1e-12);
}

TEST_CASE("eig_hermitian vs characteristic-polynomial roots (dims <= 4)") {
    for (int dim : {2, 3, 4}) {
        for (int trial = 0; trial < 10; ++trial) {
            random_gen::Rng rng(random_gen::trial_seed(41, dim, trial));
            HermitianOperator h = random_gen::random_hermitian(dim, rng);
            linops::EigResult eig = linops::eig_hermitian(h);

            // Reconstruction to 1e-12 (unit spectral radius inputs).
            const ComplexMatrix back = eig.eigenvectors * eig.eigenvalues.asDiagonal() *
                                       eig.eigenvectors.adjoint();
            CHECK(max_abs(back - h.matrix()) < 1e-12);

            const Eigen::VectorXd roots = oracles::hermitian_eigenvalues_by_roots(h.matrix());
            for (Eigen::Index i = 0; i < dim; ++i) {
                CHECK(eig.eigenvalues(i) == doctest::Approx(roots(i)).epsilon(1e-8));
            }
        }
    }
}

TEST_CASE("matrix_function basics") {
    CHECK(max_abs(linops::matrix_exp(HermitianOperator(diag({0.0, 0.0}))).matrix() -
                  ComplexMatrix::Identity(2, 2)) < 1e-14);

    const double e = std::exp(1.0);
    HermitianOperator logs =
        linops::matrix_log(HermitianOperator(diag({e, e * e})));
    CHECK(max_abs(logs.matrix() - diag({1.0, 2.0})) < 1e-12);

    // exp(alpha sigma_z) with alpha = ln 2: diag(2, 1/2).
    const double alpha = std::log(2.0);
    HermitianOperator scaled(ComplexMatrix(alpha * oracles::sigma_z()));
    CHECK(max_abs(linops::matrix_exp(scaled).matrix() - diag({2.0, 0.5})) < 1e-3);

    CHECK_THROWS_AS(linops::matrix_log(HermitianOperator(diag({1.0, -0.5}))), DomainError);
    CHECK_THROWS_AS(linops::matrix_log(HermitianOperator(diag({1.0, 0.0}))), DomainError);

    // Support-restricted log of a rank-deficient state maps the kernel to 0.
    HermitianOperator supported =
        linops::matrix_log(HermitianOperator(diag({0.5, 0.5, 0.0})), true);
    CHECK(supported.matrix()(2, 2).real() == doctest::Approx(0.0));
    CHECK(supported.matrix()(0, 0).real() == doctest::Approx(std::log(0.5)));
}

TEST_CASE("support_of splits rank and kernel") {
    const ComplexMatrix plus = oracles::ket_plus_x() * oracles::ket_plus_x().adjoint();
    DensityMatrix pure = DensityMatrix::from_matrix(plus);
    linops::SupportDecomposition sd = linops::support_of(pure);
    CHECK(sd.rank == 1);
    CHECK(max_abs(sd.projector.matrix() - plus) < 1e-12);

    DensityMatrix mixed = DensityMatrix::from_matrix(diag({1.0 / 3, 1.0 / 3, 1.0 / 3}));
    CHECK(linops::support_of(mixed).rank == 3);

    DensityMatrix partial = DensityMatrix::from_matrix(diag({0.7, 0.3, 0.0, 0.0}));
    linops::SupportDecomposition sd2 = linops::support_of(partial);
    CHECK(sd2.rank == 2);
    // Kernel spans the last two coordinates.
    const ComplexMatrix kernel_proj = sd2.kernel_basis * sd2.kernel_basis.adjoint();
    ComplexMatrix expected = ComplexMatrix::Zero(4, 4);
    expected(2, 2) = 1.0;
    expected(3, 3) = 1.0;
    CHECK(max_abs(kernel_proj - expected) < 1e-12);

    // Ambiguity band: an eigenvalue at the tolerance scale must be refused.
    DensityMatrix dusty = DensityMatrix::from_matrix(diag({1.0 - 5e-10, 5e-10}));
    CHECK_THROWS_AS(linops::support_of(dusty, 1e-10), AmbiguousRank);
}

TEST_CASE("support rank matches a rank-revealing factorization") {
    for (int dim : {3, 4, 6}) {
        for (int trial = 0; trial < 8; ++trial) {
            random_gen::Rng rng(random_gen::trial_seed(7, dim, trial));
            const Eigen::Index rank = 1 + trial % dim;
            DensityMatrix rho = random_gen::random_low_rank_density(dim, rank, rng);
            CHECK(linops::support_of(rho).rank == oracles::rank_by_qr(rho.matrix(), 1e-8));
        }
    }
}

TEST_CASE("support split is orientation independent under degeneracy") {
    // Two equal support eigenvalues expressed in two different frames.
    random_gen::Rng rng(11);
    const ComplexMatrix u = random_gen::random_unitary(2, rng);
    ComplexMatrix block = ComplexMatrix::Zero(4, 4);
    block.topLeftCorner(2, 2) = u * (0.5 * ComplexMatrix::Identity(2, 2)) * u.adjoint();
    DensityMatrix rho = DensityMatrix::from_matrix(block);
    linops::SupportDecomposition sd = linops::support_of(rho);
    ComplexMatrix expected = ComplexMatrix::Zero(4, 4);
    expected.topLeftCorner(2, 2) = ComplexMatrix::Identity(2, 2);
    CHECK(max_abs(sd.projector.matrix() - expected) < 1e-12);
}

TEST_CASE("kron ordering and the mixed-product rule") {
    CHECK(max_abs(linops::kron(ComplexMatrix::Identity(2, 2), ComplexMatrix::Identity(3, 3)) -
                  ComplexMatrix::Identity(6, 6)) == 0.0);

    // |0><0| (x) sigma_x has sigma_x in the upper-left block only.
    ComplexMatrix p0 = ComplexMatrix::Zero(2, 2);
    p0(0, 0) = 1.0;
    const ComplexMatrix k = linops::kron(p0, oracles::sigma_x());
    CHECK(max_abs(k.block(0, 0, 2, 2) - oracles::sigma_x()) == 0.0);
    CHECK(max_abs(k.block(2, 2, 2, 2)) == 0.0);

    random_gen::Rng rng(3);
    const ComplexMatrix a = random_gen::random_complex_matrix(2, 2, rng);
    const ComplexMatrix b = random_gen::random_complex_matrix(2, 2, rng);
    const ComplexMatrix c = random_gen::random_complex_matrix(2, 2, rng);
    const ComplexMatrix d = random_gen::random_complex_matrix(2, 2, rng);
    CHECK(max_abs(linops::kron(a, b) * linops::kron(c, d) - linops::kron(a * c, b * d)) <
          1e-12 * max_abs(linops::kron(a * c, b * d)) + 1e-12);
}

TEST_CASE("partial trace against the reshape oracle") {
    // Product state: tracing the ancilla returns the system factor.
    random_gen::Rng rng(17);
    DensityMatrix rho_x = random_gen::random_density(2, rng);
    DensityMatrix rho_t = random_gen::random_density(3, rng);
    DensityMatrix joint =
        DensityMatrix::from_matrix(linops::kron(rho_x.matrix(), rho_t.matrix()));
    DensityMatrix reduced = linops::partial_trace(joint, 2, 3, linops::Subsystem::kFirst);
    CHECK(max_abs(reduced.matrix() - rho_t.matrix()) < 1e-14);

    // Bell state: either marginal is maximally mixed.
    ComplexMatrix bell = ComplexMatrix::Zero(4, 4);
    for (int i : {0, 3}) {
        for (int j : {0, 3}) bell(i, j) = 0.5;
    }
    DensityMatrix bell_state = DensityMatrix::from_matrix(bell);
    DensityMatrix left = linops::partial_trace(bell_state, 2, 2, linops::Subsystem::kSecond);
    CHECK(max_abs(left.matrix() - 0.5 * ComplexMatrix::Identity(2, 2)) < 1e-14);

    // Random joint: agreement with the reshape oracle and trace preservation.
    for (int trial = 0; trial < 6; ++trial) {
        random_gen::Rng trng(random_gen::trial_seed(23, 6, trial));
        DensityMatrix mixed = random_gen::random_density(6, trng);
        const ComplexMatrix lib =
            linops::partial_trace_raw(mixed.matrix(), 2, 3, linops::Subsystem::kFirst);
        const ComplexMatrix ref = oracles::partial_trace_reshape(mixed.matrix(), 2, 3, true);
        CHECK(max_abs(lib - ref) == 0.0);
        CHECK(std::abs(lib.trace().real() - 1.0) < 1e-12);

        const ComplexMatrix lib2 =
            linops::partial_trace_raw(mixed.matrix(), 2, 3, linops::Subsystem::kSecond);
        const ComplexMatrix ref2 = oracles::partial_trace_reshape(mixed.matrix(), 2, 3, false);
        CHECK(max_abs(lib2 - ref2) == 0.0);
    }

    CHECK_THROWS_AS(linops::partial_trace_raw(bell, 3, 2, linops::Subsystem::kFirst),
                    DimensionMismatch);
}

TEST_CASE("partial trace is linear") {
    random_gen::Rng rng(29);
    const ComplexMatrix a = random_gen::random_complex_matrix(6, 6, rng);
    const ComplexMatrix b = random_gen::random_complex_matrix(6, 6, rng);
    const Complex w(0.3, -0.2);
    const ComplexMatrix lhs =
        linops::partial_trace_raw(a + w * b, 2, 3, linops::Subsystem::kFirst);
    const ComplexMatrix rhs =
        linops::partial_trace_raw(a, 2, 3, linops::Subsystem::kFirst) +
        w * linops::partial_trace_raw(b, 2, 3, linops::Subsystem::kFirst);
    CHECK(max_abs(lhs - rhs) < 1e-13);
}

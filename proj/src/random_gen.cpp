#include "random_gen.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>

namespace qme::random_gen {

using linops::ComplexMatrix;
using linops::Complex;

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t dim, std::uint64_t trial) {
    // splitmix64 over the packed inputs
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (dim * 1000003ULL + trial + 1ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

ComplexMatrix random_complex_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    ComplexMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = Complex(gauss(rng), gauss(rng));
        }
    }
    return m;
}

linops::HermitianOperator random_hermitian(Eigen::Index dim, Rng& rng) {
    ComplexMatrix g = random_complex_matrix(dim, dim, rng);
    ComplexMatrix h = 0.5 * (g + g.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h, Eigen::EigenvaluesOnly);
    const double radius = std::max(std::abs(solver.eigenvalues().minCoeff()),
                                   std::abs(solver.eigenvalues().maxCoeff()));
    if (radius > 0.0) h /= radius;
    return linops::HermitianOperator(std::move(h));
}

linops::DensityMatrix random_density(Eigen::Index dim, Rng& rng, double min_eigenvalue) {
    ComplexMatrix g = random_complex_matrix(dim, dim, rng);
    ComplexMatrix rho = g * g.adjoint();
    rho /= rho.trace().real();
    const double floor = min_eigenvalue * static_cast<double>(dim);
    rho = (1.0 - floor) * rho +
          (floor / static_cast<double>(dim)) * ComplexMatrix::Identity(dim, dim);
    return linops::DensityMatrix::from_matrix(std::move(rho));
}

linops::DensityMatrix random_low_rank_density(Eigen::Index dim, Eigen::Index rank, Rng& rng) {
    ComplexMatrix g = random_complex_matrix(dim, rank, rng);
    Eigen::HouseholderQR<ComplexMatrix> qr(g);
    ComplexMatrix q = ComplexMatrix(qr.householderQ()).leftCols(rank);

    std::uniform_real_distribution<double> uniform(0.2, 1.0);
    Eigen::VectorXd weights(rank);
    for (Eigen::Index i = 0; i < rank; ++i) weights(i) = uniform(rng);
    weights /= weights.sum();
    ComplexMatrix rho = q * weights.asDiagonal() * q.adjoint();
    return linops::DensityMatrix::from_matrix(std::move(rho));
}

std::vector<ComplexMatrix> random_kraus_operators(Eigen::Index dim_theta,
                                                  Eigen::Index outcomes, Rng& rng) {
    std::vector<ComplexMatrix> raw;
    ComplexMatrix total = ComplexMatrix::Zero(dim_theta, dim_theta);
    for (Eigen::Index x = 0; x < outcomes; ++x) {
        raw.push_back(random_complex_matrix(dim_theta, dim_theta, rng));
        total += raw.back().adjoint() * raw.back();
    }
    // Whiten: A_x <- A_x T^{-1/2} restores completeness exactly.
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(total);
    Eigen::VectorXd inv_sqrt = solver.eigenvalues().cwiseSqrt().cwiseInverse();
    ComplexMatrix t_inv_sqrt = solver.eigenvectors() * inv_sqrt.asDiagonal() *
                               solver.eigenvectors().adjoint();
    for (auto& a : raw) a = a * t_inv_sqrt;
    return raw;
}

classical::Distribution random_distribution(Eigen::Index n, Rng& rng) {
    std::uniform_real_distribution<double> uniform(0.05, 1.0);
    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) p(i) = uniform(rng);
    p /= p.sum();
    return classical::Distribution::from_probs(std::move(p));
}

classical::JointDistribution random_joint(Eigen::Index nx, Eigen::Index ntheta, Rng& rng) {
    std::uniform_real_distribution<double> uniform(0.05, 1.0);
    Eigen::MatrixXd p(nx, ntheta);
    for (Eigen::Index i = 0; i < nx; ++i) {
        for (Eigen::Index j = 0; j < ntheta; ++j) p(i, j) = uniform(rng);
    }
    p /= p.sum();
    return classical::JointDistribution::from_probs(std::move(p));
}

ComplexMatrix random_unitary(Eigen::Index dim, Rng& rng) {
    ComplexMatrix g = random_complex_matrix(dim, dim, rng);
    Eigen::HouseholderQR<ComplexMatrix> qr(g);
    ComplexMatrix q = qr.householderQ();
    // Fix the phase convention so the result is unique given the input.
    for (Eigen::Index j = 0; j < dim; ++j) {
        const Complex r = qr.matrixQR()(j, j);
        const double mag = std::abs(r);
        if (mag > 0.0) q.col(j) *= r / mag;
    }
    return q;
}

}  // namespace qme::random_gen

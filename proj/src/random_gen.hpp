// random_gen.hpp — Seeded generators for random test instances: Hermitian
// operators, full- and low-rank density matrices, complete Kraus sets,
// distributions and joint tables. Deterministic for a fixed seed.

#pragma once

#include <cstdint>
#include <random>

#include "classical.hpp"
#include "linops.hpp"

namespace qme::random_gen {

using Rng = std::mt19937_64;

// Stable per-trial seed derived from (seed, dim, trial) by mixing.
std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t dim, std::uint64_t trial);

linops::ComplexMatrix random_complex_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);

// Gaussian Hermitian matrix rescaled to unit spectral radius.
linops::HermitianOperator random_hermitian(Eigen::Index dim, Rng& rng);

// Full-rank state with eigenvalues bounded away from zero (>= min_eigenvalue
// after mixing with the maximally mixed state).
linops::DensityMatrix random_density(Eigen::Index dim, Rng& rng,
                                     double min_eigenvalue = 0.02);

// Rank-deficient state: exactly `rank` strictly positive eigenvalues.
linops::DensityMatrix random_low_rank_density(Eigen::Index dim, Eigen::Index rank, Rng& rng);

// Complete Kraus family: Gaussian blocks whitened by (sum A'A)^{-1/2}.
std::vector<linops::ComplexMatrix> random_kraus_operators(Eigen::Index dim_theta,
                                                          Eigen::Index outcomes, Rng& rng);

classical::Distribution random_distribution(Eigen::Index n, Rng& rng);

classical::JointDistribution random_joint(Eigen::Index nx, Eigen::Index ntheta, Rng& rng);

// Haar-ish random unitary via QR of a Gaussian matrix.
linops::ComplexMatrix random_unitary(Eigen::Index dim, Rng& rng);

}  // namespace qme::random_gen

// measurement.hpp — Measurement-theoretic layer: Kraus/POVM families,
// unitary dilation of a POVM, entangled ancilla priors, projective
// decoherence, the block-diagonal prior obtained after detector trace-out,
// the Quantum Bayes Rule (closed form and entropic), the quantum Jeffrey
// rule, the complementary theta-decohered prior, and weak collapse driven by
// a thermal energy constraint.
//
// Ancilla-first tensor ordering throughout: joint states live on x (slow)
// tensor theta (fast).

#pragma once

#include <vector>

#include "classical.hpp"
#include "linops.hpp"
#include "qsolver.hpp"

namespace qme::measurement {

using linops::ComplexMatrix;
using linops::DensityMatrix;
using linops::HermitianOperator;
using linops::RealVector;

inline constexpr double kCompletenessTol = 1e-10;
inline constexpr double kEvidenceTol = 1e-12;

// Ordered family {A_x} of square measurement operators with
// sum_x A_x† A_x = 1 within kCompletenessTol.
class KrausSet {
public:
    KrausSet(std::vector<ComplexMatrix> operators, std::vector<std::string> labels = {},
             double completeness_tol = kCompletenessTol);

    Eigen::Index size() const { return static_cast<Eigen::Index>(operators_.size()); }
    Eigen::Index dim_theta() const { return operators_.front().rows(); }
    const ComplexMatrix& operator[](Eigen::Index x) const {
        return operators_[static_cast<std::size_t>(x)];
    }
    const std::vector<ComplexMatrix>& operators() const { return operators_; }
    const std::vector<std::string>& labels() const { return labels_; }
    double completeness_defect() const { return completeness_defect_; }

    // Projective measurement onto the columns of a unitary basis.
    static KrausSet projective(const ComplexMatrix& basis,
                               std::vector<std::string> labels = {});

private:
    std::vector<ComplexMatrix> operators_;
    std::vector<std::string> labels_;
    double completeness_defect_ = 0.0;
};

// Unitary realization of a KrausSet on ancilla (x) tensor system (theta):
// the block <x|U|ready> equals A_x.
struct DilationModel {
    Eigen::Index ancilla_dim = 0;
    ComplexMatrix unitary;
    Eigen::Index ancilla_ready_index = 0;
    double unitarity_defect = 0.0;
    double block_defect = 0.0;  // max |<x|U|0> - A_x|
};

// Lueders map rho -> sum_i P_i rho P_i for a complete orthogonal projector
// family. Diagonal blocks survive, cross blocks vanish, the trace is kept.
DensityMatrix decohere(const DensityMatrix& rho, const std::vector<ComplexMatrix>& projectors);

// Rank-one projectors onto the columns of a unitary matrix.
std::vector<ComplexMatrix> basis_projectors(const ComplexMatrix& basis);

// Entangled ancilla prior sum_{x,x'} |x><x'| (x) A_x phi A_x'†. Equals
// U (|0><0| (x) phi) U† for the dilation of the same Kraus set.
DensityMatrix entangle_prior(const DensityMatrix& phi_theta, const KrausSet& kraus);

// Builds the first block column of U from the Kraus operators and completes
// the remaining columns orthonormally. Only the first block column carries
// physics; tests must not depend on the completion.
DilationModel dilation_from_kraus(const KrausSet& kraus);

// The ancilla-block-diagonal prior sum_x |x><x| (x) A_x phi A_x† left after
// the detector states are traced out; the valid starting point for POVM
// inference even when phi itself is biased.
DensityMatrix appropriate_prior(const DensityMatrix& phi_theta, const KrausSet& kraus);

// Evidence distribution phi~(x) = Tr(A_x phi A_x†).
RealVector evidence_distribution(const DensityMatrix& phi_theta, const KrausSet& kraus);

// Quantum Bayes Rule, measurement-operator form:
// A_x' phi A_x'† / Tr(A_x' phi A_x'†).
DensityMatrix qbr_direct(const DensityMatrix& phi_theta, const KrausSet& kraus,
                         Eigen::Index outcome);

struct EntropicOptions {
    // Route through the generic dual solver instead of the commuting-block
    // closed form. Delta data targets sit on the spectral boundary, so they
    // are softened to (1 - eta, eta/(n-1), ...); the result approaches the
    // closed form linearly in eta.
    bool via_generic_solver = false;
    double delta_softening = 1e-8;
    qsolver::SolveOptions solver;
};

// Quantum Bayes Rule derived as an entropic update: builds the appropriate
// prior, imposes the per-x data constraints Tr((|x><x| (x) 1) rho) =
// delta_{x,outcome} via the closed-form multipliers exp(a_x) = Z rho(x)/phi~(x),
// and marginalizes over the ancilla. Must agree with qbr_direct to 1e-10.
DensityMatrix qbr_entropic(const DensityMatrix& phi_theta, const KrausSet& kraus,
                           Eigen::Index outcome, const EntropicOptions& options = {});

// Quantum Jeffrey rule sum_x rho(x) A_x phi A_x† / phi~(x). A point mass
// reduces to qbr_direct; the evidence marginal gives the non-selective
// update sum_x A_x phi A_x†.
DensityMatrix quantum_jeffrey(const DensityMatrix& phi_theta, const KrausSet& kraus,
                              const classical::Distribution& outcome_dist);

// Decoheres a joint state in the ancilla basis: sum_x (|x><x| (x) 1) rho (...).
DensityMatrix ancilla_decohere(const DensityMatrix& joint, Eigen::Index dim_x,
                               Eigen::Index dim_theta);

// The complementary prior: the same joint state decohered locally in theta
// instead. Its joint diagonal matches the ancilla-decohered prior's exactly,
// although the two matrices differ.
DensityMatrix complementary_prior(const DensityMatrix& joint, Eigen::Index dim_x,
                                  Eigen::Index dim_theta);

struct ThermalResult {
    DensityMatrix posterior;
    double beta = 0.0;
    classical::Distribution outcome_dist;  // rho(eps_n) = e^{beta eps_n} phi~(eps_n)/Z
    double ln_z = 0.0;
};

// Weak collapse via a thermal ancilla: solves beta from <H> = d ln Z/d beta
// with Z = sum_n e^{beta eps_n} phi~(eps_n) (the paper's sign convention:
// e^{+beta eps}; physical Gibbs states correspond to beta < 0 here), then
// mixes with the quantum Jeffrey rule. The target must lie strictly between
// the smallest and largest energy carrying positive evidence.
ThermalResult thermal_weak_collapse(const DensityMatrix& phi_theta, const KrausSet& kraus,
                                    const RealVector& energies, double target);

}  // namespace qme::measurement

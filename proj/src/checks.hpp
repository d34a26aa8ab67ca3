// checks.hpp — Invariant checks attached to every scenario result, the
// randomized property suite behind `qme selftest`, and the dim-2 Bloch-ball
// grid oracle used to cross-examine the dual solver.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "classical.hpp"
#include "linops.hpp"
#include "measurement.hpp"
#include "qsolver.hpp"

namespace qme::checks {

struct CheckResult {
    std::string name;
    double tolerance = 0.0;
    double measured = 0.0;
    bool pass = false;
    std::string detail;  // reproduction info for failures
};

using CheckList = std::vector<CheckResult>;

bool all_passed(const CheckList& checks);

// measured <= tolerance.
CheckResult check_le(const std::string& name, double measured, double tolerance,
                     const std::string& detail = "");
// Boolean condition; measured is 0 on success, 1 on failure.
CheckResult check_true(const std::string& name, bool condition,
                       const std::string& detail = "");

void append(CheckList& into, CheckList more);

// ---------------------------------------------------------------------------
// Result-level invariant suites (run on every scenario result)
// ---------------------------------------------------------------------------

CheckList density_checks(const std::string& prefix, const linops::DensityMatrix& rho);

CheckList quantum_solution_checks(const linops::DensityMatrix& prior,
                                  const std::vector<qsolver::QuantumConstraint>& constraints,
                                  const qsolver::MaxEntSolution& solution, double dual_tol);

CheckList classical_solution_checks(const classical::Distribution& prior,
                                    const std::vector<classical::Constraint>& constraints,
                                    const classical::MaxEntResult& result, double dual_tol);

CheckList bayes_checks(const classical::JointDistribution& joint, Eigen::Index observed,
                       const classical::Distribution& posterior);

CheckList qbr_checks(const linops::DensityMatrix& prior, const measurement::KrausSet& kraus,
                     Eigen::Index outcome, const linops::DensityMatrix& entropic,
                     const linops::DensityMatrix& direct);

CheckList pdmt_checks(const qsolver::PdmtStudy& study);

CheckList thermal_checks(const linops::DensityMatrix& prior, const measurement::KrausSet& kraus,
                         const linops::RealVector& energies, double target,
                         const measurement::ThermalResult& result);

// ---------------------------------------------------------------------------
// Bloch-ball grid oracle (dim 2)
// ---------------------------------------------------------------------------

struct BlochGridResult {
    double best_entropy = 0.0;
    Eigen::Vector3d best_bloch = Eigen::Vector3d::Zero();
    std::size_t evaluations = 0;
};

// Maximizes the Umegaki entropy -Tr(rho ln rho - rho ln phi) over the Bloch
// set satisfying the constraint planes exactly, by exhaustive gridding at
// `resolution` plus local refinement. Closed-form 2x2 entropy; entirely
// independent of the dual solver.
BlochGridResult bloch_grid_search(const linops::DensityMatrix& prior,
                                  const std::vector<qsolver::QuantumConstraint>& constraints,
                                  double resolution = 2e-3);

// Closed-form Umegaki entropy for qubit states given as Bloch vectors.
double bloch_umegaki_entropy(const Eigen::Vector3d& rho_bloch,
                             const Eigen::Vector3d& prior_bloch);

// ---------------------------------------------------------------------------
// Randomized property suite
// ---------------------------------------------------------------------------

struct SelftestOptions {
    std::vector<int> dims{2, 3, 4};
    int trials = 50;
    std::uint64_t seed = 0;
};

// Runs every module invariant at the given dims and trial counts; one check
// per (property, dim) reporting the worst trial, deterministic for a fixed
// seed. trials == 0 yields a vacuous pass with a warning entry.
CheckList selftest_suite(const SelftestOptions& options);

}  // namespace qme::checks

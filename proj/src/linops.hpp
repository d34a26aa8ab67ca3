// linops.hpp — Dense complex linear algebra for density-matrix inference:
// Hermitian eigendecomposition, spectral matrix functions (optionally
// restricted to the support), tensor products, partial traces and
// support/rank analysis.
//
// Conventions fixed repository-wide:
//   * kron(A, B): the left factor indexes the slow (outer) subsystem.
//   * Eigenvalues are returned in ascending order. Within degenerate
//     subspaces only the subspace is reproducible, never the individual
//     eigenvectors.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <functional>

#include "errors.hpp"

namespace qme::linops {

using ComplexMatrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;
using Complex = std::complex<double>;

// Default tolerances. Double-precision eigensolvers deliver ~1e-12 backward
// error at the dimensions we target, so these leave one-to-two orders of
// slack. All of them can be overridden per call or per construction.
inline constexpr double kHermiticityTol = 1e-10;
inline constexpr double kTraceTol = 1e-9;
inline constexpr double kPsdTol = 1e-9;
inline constexpr double kSupportTol = 1e-10;

// Largest entrywise absolute value; zero for empty matrices.
double max_abs(const ComplexMatrix& m);

// Throws ValidationError if any entry is NaN or infinite.
void require_finite(const ComplexMatrix& m, const std::string& what);

// ---------------------------------------------------------------------------
// Hermitian operators and density matrices
// ---------------------------------------------------------------------------

// A square matrix certified Hermitian. Construction re-symmetrizes the input
// via (M + M†)/2 and records the correction magnitude; inputs further than
// `hermiticity_tol` from Hermitian are rejected.
class HermitianOperator {
public:
    explicit HermitianOperator(ComplexMatrix m, double hermiticity_tol = kHermiticityTol);

    Eigen::Index dim() const { return mat_.rows(); }
    const ComplexMatrix& matrix() const { return mat_; }
    double hermiticity_defect() const { return defect_; }

private:
    ComplexMatrix mat_;
    double defect_ = 0.0;
};

// Positive semidefinite, unit-trace Hermitian operator.
class DensityMatrix {
public:
    explicit DensityMatrix(HermitianOperator op, double trace_tol = kTraceTol,
                           double psd_tol = kPsdTol);

    static DensityMatrix from_matrix(ComplexMatrix m, double trace_tol = kTraceTol,
                                     double psd_tol = kPsdTol,
                                     double hermiticity_tol = kHermiticityTol);

    Eigen::Index dim() const { return op_.dim(); }
    const HermitianOperator& op() const { return op_; }
    const ComplexMatrix& matrix() const { return op_.matrix(); }

    // Diagnostics recorded at validation time.
    double min_eigenvalue() const { return min_eigenvalue_; }
    double trace_defect() const { return trace_defect_; }

private:
    HermitianOperator op_;
    double min_eigenvalue_ = 0.0;
    double trace_defect_ = 0.0;
};

// ---------------------------------------------------------------------------
// Eigendecomposition and spectral functions
// ---------------------------------------------------------------------------

struct EigResult {
    RealVector eigenvalues;       // ascending
    ComplexMatrix eigenvectors;   // unitary, columns match eigenvalues
};

// Throws DecompositionFailure if the iterative solver does not converge.
EigResult eig_hermitian(const HermitianOperator& h);

// V diag(f(lambda)) V†. With support_only, eigenvalues with |lambda| <=
// support_tol are mapped to 0 and f is applied only on the support (used for
// ln of rank-deficient priors). Throws DomainError if f produces a non-finite
// value on an eigenvalue it is applied to.
HermitianOperator matrix_function(const HermitianOperator& h,
                                  const std::function<double(double)>& f,
                                  bool support_only = false,
                                  double support_tol = kSupportTol);

HermitianOperator matrix_exp(const HermitianOperator& h);

// Natural log. Without support_only all eigenvalues must be positive
// (DomainError otherwise); with support_only the kernel maps to 0.
HermitianOperator matrix_log(const HermitianOperator& h, bool support_only = false,
                             double support_tol = kSupportTol);

// x -> sqrt(x) and x -> 1/sqrt(x) on the support, 0 on the kernel.
HermitianOperator matrix_sqrt_support(const HermitianOperator& h,
                                      double support_tol = kSupportTol);
HermitianOperator matrix_pinv_sqrt_support(const HermitianOperator& h,
                                           double support_tol = kSupportTol);

// ---------------------------------------------------------------------------
// Support analysis
// ---------------------------------------------------------------------------

// Split of the Hilbert space into the span of a state (rank M) and its
// kernel (N - M). The projector is basis-independent; the bases themselves
// are one orthonormal choice among many when eigenvalues are degenerate.
struct SupportDecomposition {
    Eigen::Index rank = 0;
    HermitianOperator projector;   // support projector, idempotent within tol
    ComplexMatrix support_basis;   // N x M, orthonormal columns
    ComplexMatrix kernel_basis;    // N x (N - M)
};

// rank = number of eigenvalues > support_tol. Eigenvalues falling inside the
// ambiguity band (support_tol/10, support_tol*10) raise AmbiguousRank: the
// caller must pick a tolerance deliberately rather than inherit a coin flip.
SupportDecomposition support_of(const DensityMatrix& rho, double support_tol = kSupportTol);

// ---------------------------------------------------------------------------
// Tensor products and partial traces
// ---------------------------------------------------------------------------

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

enum class Subsystem {
    kFirst,   // the slow/outer factor (ancilla x in the measurement layer)
    kSecond,  // the fast/inner factor (system theta)
};

// Raw partial trace of a (dim_first*dim_second) square matrix.
ComplexMatrix partial_trace_raw(const ComplexMatrix& joint, Eigen::Index dim_first,
                                Eigen::Index dim_second, Subsystem traced);

DensityMatrix partial_trace(const DensityMatrix& joint, Eigen::Index dim_first,
                            Eigen::Index dim_second, Subsystem traced);

}  // namespace qme::linops

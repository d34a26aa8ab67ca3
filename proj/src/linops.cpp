#include "linops.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>

namespace qme::linops {

double max_abs(const ComplexMatrix& m) {
    if (m.size() == 0) return 0.0;
    return m.cwiseAbs().maxCoeff();
}

void require_finite(const ComplexMatrix& m, const std::string& what) {
    if (!m.allFinite()) {
        throw ValidationError(what + ": entries must be finite (no NaN/Inf)");
    }
}

// ---------------------------------------------------------------------------
// HermitianOperator / DensityMatrix
// ---------------------------------------------------------------------------

HermitianOperator::HermitianOperator(ComplexMatrix m, double hermiticity_tol) {
    if (m.rows() == 0 || m.rows() != m.cols()) {
        throw DimensionMismatch("HermitianOperator: matrix must be square and nonempty");
    }
    require_finite(m, "HermitianOperator");
    defect_ = max_abs(m - m.adjoint());
    if (defect_ > hermiticity_tol) {
        std::ostringstream os;
        os << "HermitianOperator: |M - M'| = " << defect_ << " exceeds tolerance "
           << hermiticity_tol;
        throw ValidationError(os.str());
    }
    mat_ = 0.5 * (m + m.adjoint());
}

DensityMatrix::DensityMatrix(HermitianOperator op, double trace_tol, double psd_tol)
    : op_(std::move(op)) {
    trace_defect_ = std::abs(op_.matrix().trace().real() - 1.0);
    if (trace_defect_ > trace_tol) {
        std::ostringstream os;
        os << "DensityMatrix: |Tr - 1| = " << trace_defect_ << " exceeds tolerance "
           << trace_tol;
        throw ValidationError(os.str());
    }
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(op_.matrix(),
                                                        Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw DecompositionFailure("DensityMatrix: eigenvalue validation failed to converge");
    }
    min_eigenvalue_ = solver.eigenvalues().minCoeff();
    if (min_eigenvalue_ < -psd_tol) {
        std::ostringstream os;
        os << "DensityMatrix: smallest eigenvalue " << min_eigenvalue_
           << " below -psd_tol = " << -psd_tol;
        throw ValidationError(os.str());
    }
}

DensityMatrix DensityMatrix::from_matrix(ComplexMatrix m, double trace_tol, double psd_tol,
                                         double hermiticity_tol) {
    return DensityMatrix(HermitianOperator(std::move(m), hermiticity_tol), trace_tol, psd_tol);
}

// ---------------------------------------------------------------------------
// Eigendecomposition and spectral functions
// ---------------------------------------------------------------------------

EigResult eig_hermitian(const HermitianOperator& h) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h.matrix());
    if (solver.info() != Eigen::Success) {
        std::ostringstream os;
        os << "eig_hermitian: QR iteration did not converge within "
           << 30 * h.dim() << " sweeps (dim " << h.dim() << ")";
        throw DecompositionFailure(os.str());
    }
    return EigResult{solver.eigenvalues(), solver.eigenvectors()};
}

HermitianOperator matrix_function(const HermitianOperator& h,
                                  const std::function<double(double)>& f,
                                  bool support_only, double support_tol) {
    EigResult eig = eig_hermitian(h);
    RealVector mapped(eig.eigenvalues.size());
    for (Eigen::Index i = 0; i < mapped.size(); ++i) {
        const double lambda = eig.eigenvalues(i);
        if (support_only && std::abs(lambda) <= support_tol) {
            mapped(i) = 0.0;
            continue;
        }
        const double value = f(lambda);
        if (!std::isfinite(value)) {
            std::ostringstream os;
            os << "matrix_function: f(" << lambda << ") is not finite";
            throw DomainError(os.str());
        }
        mapped(i) = value;
    }
    ComplexMatrix out = eig.eigenvectors * mapped.asDiagonal() *
                        eig.eigenvectors.adjoint();
    // The spectral synthesis is Hermitian up to rounding; re-symmetrization in
    // the constructor absorbs that.
    return HermitianOperator(std::move(out));
}

HermitianOperator matrix_exp(const HermitianOperator& h) {
    return matrix_function(h, [](double x) { return std::exp(x); });
}

HermitianOperator matrix_log(const HermitianOperator& h, bool support_only,
                             double support_tol) {
    if (!support_only) {
        EigResult eig = eig_hermitian(h);
        if (eig.eigenvalues.minCoeff() <= 0.0) {
            std::ostringstream os;
            os << "matrix_log: nonpositive eigenvalue " << eig.eigenvalues.minCoeff()
               << " (use support_only for rank-deficient operators)";
            throw DomainError(os.str());
        }
    }
    return matrix_function(
        h,
        [support_only, support_tol](double x) {
            if (support_only && x < -support_tol) {
                // Negative weight beyond the support band has no logarithm.
                return std::numeric_limits<double>::quiet_NaN();
            }
            return std::log(x);
        },
        support_only, support_tol);
}

HermitianOperator matrix_sqrt_support(const HermitianOperator& h, double support_tol) {
    return matrix_function(h, [](double x) { return std::sqrt(std::max(x, 0.0)); },
                           /*support_only=*/true, support_tol);
}

HermitianOperator matrix_pinv_sqrt_support(const HermitianOperator& h, double support_tol) {
    return matrix_function(h, [](double x) { return 1.0 / std::sqrt(std::max(x, 0.0)); },
                           /*support_only=*/true, support_tol);
}

// ---------------------------------------------------------------------------
// Support analysis
// ---------------------------------------------------------------------------

SupportDecomposition support_of(const DensityMatrix& rho, double support_tol) {
    EigResult eig = eig_hermitian(rho.op());
    const Eigen::Index n = rho.dim();

    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double lambda = eig.eigenvalues(i);
        if (lambda > support_tol / 10.0 && lambda < support_tol * 10.0) {
            std::ostringstream os;
            os << "support_of: eigenvalue " << lambda << " falls inside the ambiguity band ("
               << support_tol / 10.0 << ", " << support_tol * 10.0
               << "); choose support_tol deliberately";
            throw AmbiguousRank(os.str());
        }
        if (lambda > support_tol) ++rank;
    }
    if (rank == 0) {
        throw ValidationError("support_of: state has empty support at the given tolerance");
    }

    // Eigenvalues are ascending, so the support occupies the trailing columns.
    ComplexMatrix support = eig.eigenvectors.rightCols(rank);
    ComplexMatrix kernel = eig.eigenvectors.leftCols(n - rank);
    HermitianOperator projector(support * support.adjoint());
    return SupportDecomposition{rank, std::move(projector), std::move(support),
                                std::move(kernel)};
}

// ---------------------------------------------------------------------------
// Tensor products and partial traces
// ---------------------------------------------------------------------------

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

ComplexMatrix partial_trace_raw(const ComplexMatrix& joint, Eigen::Index dim_first,
                                Eigen::Index dim_second, Subsystem traced) {
    if (dim_first <= 0 || dim_second <= 0 ||
        joint.rows() != dim_first * dim_second || joint.rows() != joint.cols()) {
        throw DimensionMismatch("partial_trace: joint dimension must equal d_first * d_second");
    }
    if (traced == Subsystem::kFirst) {
        ComplexMatrix out = ComplexMatrix::Zero(dim_second, dim_second);
        for (Eigen::Index x = 0; x < dim_first; ++x) {
            out += joint.block(x * dim_second, x * dim_second, dim_second, dim_second);
        }
        return out;
    }
    ComplexMatrix out = ComplexMatrix::Zero(dim_first, dim_first);
    for (Eigen::Index a = 0; a < dim_first; ++a) {
        for (Eigen::Index b = 0; b < dim_first; ++b) {
            Complex sum = 0.0;
            for (Eigen::Index t = 0; t < dim_second; ++t) {
                sum += joint(a * dim_second + t, b * dim_second + t);
            }
            out(a, b) = sum;
        }
    }
    return out;
}

DensityMatrix partial_trace(const DensityMatrix& joint, Eigen::Index dim_first,
                            Eigen::Index dim_second, Subsystem traced) {
    return DensityMatrix::from_matrix(
        partial_trace_raw(joint.matrix(), dim_first, dim_second, traced));
}

}  // namespace qme::linops

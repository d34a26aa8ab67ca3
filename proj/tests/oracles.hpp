// oracles.hpp — test-only reference computations, kept independent of the
// library paths they check: characteristic-polynomial roots via
// Faddeev-LeVerrier + Durand-Kerner, a reshape-based partial trace, rank
// from column-pivoted QR, and small operator constructors.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <vector>

namespace oracles {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline CMatrix sigma_x() {
    CMatrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

inline CMatrix sigma_y() {
    CMatrix m(2, 2);
    m << 0, Complex(0, -1), Complex(0, 1), 0;
    return m;
}

inline CMatrix sigma_z() {
    CMatrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

inline CVector ket(Eigen::Index dim, Eigen::Index i) {
    CVector v = CVector::Zero(dim);
    v(i) = 1.0;
    return v;
}

// |+> and |-> along x, in the z basis.
inline CVector ket_plus_x() {
    CVector v(2);
    v << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    return v;
}

inline CVector ket_minus_x() {
    CVector v(2);
    v << 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0);
    return v;
}

// Characteristic polynomial coefficients (monic, c[k] multiplies lambda^k)
// via the Faddeev-LeVerrier recursion.
inline std::vector<Complex> char_poly(const CMatrix& a) {
    const Eigen::Index n = a.rows();
    std::vector<Complex> c(static_cast<std::size_t>(n) + 1);
    c[static_cast<std::size_t>(n)] = 1.0;
    CMatrix m = CMatrix::Zero(n, n);
    Complex ck = 1.0;
    for (Eigen::Index k = 1; k <= n; ++k) {
        m = a * m + ck * CMatrix::Identity(n, n);
        ck = -(a * m).trace() / static_cast<double>(k);
        c[static_cast<std::size_t>(n - k)] = ck;
    }
    return c;
}

// Durand-Kerner simultaneous root iteration for a monic polynomial.
inline std::vector<Complex> poly_roots(const std::vector<Complex>& coeffs) {
    const std::size_t degree = coeffs.size() - 1;
    auto eval = [&](Complex x) {
        Complex acc = 0.0;
        for (std::size_t k = coeffs.size(); k-- > 0;) acc = acc * x + coeffs[k];
        return acc;
    };
    std::vector<Complex> roots(degree);
    const Complex seed(0.4, 0.9);
    Complex power = 1.0;
    for (auto& r : roots) {
        power *= seed;
        r = power;
    }
    for (int iter = 0; iter < 500; ++iter) {
        double moved = 0.0;
        for (std::size_t i = 0; i < degree; ++i) {
            Complex denom = 1.0;
            for (std::size_t j = 0; j < degree; ++j) {
                if (j != i) denom *= roots[i] - roots[j];
            }
            const Complex delta = eval(roots[i]) / denom;
            roots[i] -= delta;
            moved = std::max(moved, std::abs(delta));
        }
        if (moved < 1e-14) break;
    }
    return roots;
}

// Real parts of the characteristic roots, ascending. For Hermitian input the
// imaginary parts vanish up to iteration noise.
inline Eigen::VectorXd hermitian_eigenvalues_by_roots(const CMatrix& a) {
    std::vector<Complex> roots = poly_roots(char_poly(a));
    std::vector<double> real_parts;
    for (const auto& r : roots) real_parts.push_back(r.real());
    std::sort(real_parts.begin(), real_parts.end());
    Eigen::VectorXd out(static_cast<Eigen::Index>(real_parts.size()));
    for (std::size_t i = 0; i < real_parts.size(); ++i) {
        out(static_cast<Eigen::Index>(i)) = real_parts[i];
    }
    return out;
}

// Partial trace by explicit four-index reshape, written without any shared
// index arithmetic with the library implementation.
inline CMatrix partial_trace_reshape(const CMatrix& joint, Eigen::Index dx, Eigen::Index dt,
                                     bool trace_first) {
    if (trace_first) {
        CMatrix out = CMatrix::Zero(dt, dt);
        for (Eigen::Index i = 0; i < dt; ++i) {
            for (Eigen::Index j = 0; j < dt; ++j) {
                Complex sum = 0.0;
                for (Eigen::Index x = 0; x < dx; ++x) {
                    for (Eigen::Index y = 0; y < dx; ++y) {
                        if (x == y) sum += joint(x * dt + i, y * dt + j);
                    }
                }
                out(i, j) = sum;
            }
        }
        return out;
    }
    CMatrix out = CMatrix::Zero(dx, dx);
    for (Eigen::Index x = 0; x < dx; ++x) {
        for (Eigen::Index y = 0; y < dx; ++y) {
            Complex sum = 0.0;
            for (Eigen::Index i = 0; i < dt; ++i) {
                for (Eigen::Index j = 0; j < dt; ++j) {
                    if (i == j) sum += joint(x * dt + i, y * dt + j);
                }
            }
            out(x, y) = sum;
        }
    }
    return out;
}

// Numerical rank from a column-pivoted QR, independent of any eigensolver.
inline Eigen::Index rank_by_qr(const CMatrix& m, double tol) {
    Eigen::ColPivHouseholderQR<CMatrix> qr(m);
    qr.setThreshold(tol);
    return qr.rank();
}

}  // namespace oracles

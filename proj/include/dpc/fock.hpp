#pragma once

// Truncated Fock-space linear algebra on dense matrices.

#include <algorithm>
#include <cmath>
#include <complex>
#include <utility>

#include <Eigen/Dense>

#include "dpc/errors.hpp"

namespace dpc {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

inline constexpr double kHermitianTol = 1e-10;
inline constexpr double kPsdTol = 1e-9;

struct CoherentVector {
    CVector amplitudes;
    // Squared norm of the truncated vector before any renormalization.
    double captured_probability = 0.0;
};

struct EigenDecomposition {
    RVector eigenvalues;   // ascending
    CMatrix eigenvectors;  // columns orthonormal
};

namespace detail {

inline void require_dim(long dim, long min_dim, const char* what) {
    if (dim < min_dim) {
        throw InvalidInput(std::string(what) + ": dimension must be >= " + std::to_string(min_dim));
    }
}

inline bool finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

inline double max_abs(const CMatrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

}  // namespace detail

inline CVector basis_vector(long dim, long n) {
    detail::require_dim(dim, 1, "basis_vector");
    if (n < 0 || n >= dim) throw InvalidInput("basis_vector: index out of range");
    CVector v = CVector::Zero(dim);
    v(n) = 1.0;
    return v;
}

/// e^{-|a|^2/2} a^n / sqrt(n!) for n < dim. When `renormalize` is set the
/// result is scaled to unit norm; captured_probability always reports the
/// pre-normalization squared norm.
inline CoherentVector coherent_vector(Complex alpha, long dim, bool renormalize = false) {
    detail::require_dim(dim, 1, "coherent_vector");
    if (!detail::finite(alpha)) throw InvalidInput("coherent_vector: non-finite amplitude");

    CoherentVector out;
    out.amplitudes.resize(dim);
    Complex c = std::exp(-0.5 * std::norm(alpha));
    out.amplitudes(0) = c;
    for (long n = 1; n < dim; ++n) {
        c *= alpha / std::sqrt(static_cast<double>(n));
        out.amplitudes(n) = c;
    }
    out.captured_probability = out.amplitudes.squaredNorm();
    if (renormalize) out.amplitudes /= std::sqrt(out.captured_probability);
    return out;
}

/// (|+>, |->) = ((|0> + |1>)/sqrt2, (|0> - |1>)/sqrt2) embedded in `dim`.
inline std::pair<CVector, CVector> plus_minus_states(long dim) {
    detail::require_dim(dim, 2, "plus_minus_states");
    const double s = 1.0 / std::sqrt(2.0);
    CVector plus = CVector::Zero(dim);
    CVector minus = CVector::Zero(dim);
    plus(0) = s;
    plus(1) = s;
    minus(0) = s;
    minus(1) = -s;
    return {plus, minus};
}

inline CMatrix annihilation(long dim) {
    detail::require_dim(dim, 1, "annihilation");
    CMatrix a = CMatrix::Zero(dim, dim);
    for (long n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

inline CMatrix projector(const CVector& v) { return v * v.adjoint(); }

inline bool is_hermitian(const CMatrix& a, double tol = kHermitianTol) {
    if (a.rows() != a.cols()) return false;
    return detail::max_abs(a - a.adjoint()) < tol * std::max(1.0, detail::max_abs(a));
}

inline CMatrix hermitian_part(const CMatrix& a) { return 0.5 * (a + a.adjoint()); }

/// Eigen-decomposition of a Hermitian operator, eigenvalues ascending.
/// Hermiticity is checked relative to the largest entry.
inline EigenDecomposition hermitian_eig(const CMatrix& op) {
    if (op.rows() != op.cols() || op.rows() == 0) {
        throw InvalidInput("hermitian_eig: operator must be square and non-empty");
    }
    if (!is_hermitian(op)) throw ContractViolation("hermitian_eig: operator is not Hermitian");
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian_part(op));
    if (solver.info() != Eigen::Success) throw ContractViolation("hermitian_eig: solver did not converge");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

inline double min_eigenvalue(const CMatrix& op) { return hermitian_eig(op).eigenvalues(0); }

namespace detail {

// Eigenvalues of a PSD operator with tolerance-level negatives clipped to 0.
inline EigenDecomposition psd_eig(const CMatrix& op) {
    EigenDecomposition e = hermitian_eig(op);
    const double scale = std::max(1.0, e.eigenvalues.cwiseAbs().maxCoeff());
    if (e.eigenvalues(0) < -kPsdTol * scale) throw NotPsd(e.eigenvalues(0));
    e.eigenvalues = e.eigenvalues.cwiseMax(0.0);
    return e;
}

inline CMatrix rebuild(const EigenDecomposition& e, const RVector& values) {
    return e.eigenvectors * values.asDiagonal() * e.eigenvectors.adjoint();
}

}  // namespace detail

inline CMatrix psd_sqrt(const CMatrix& op) {
    const auto e = detail::psd_eig(op);
    return detail::rebuild(e, e.eigenvalues.cwiseSqrt());
}

/// Pseudo-inverse; eigenvalues below `floor` map to 0.
inline CMatrix psd_pinv(const CMatrix& op, double floor = 1e-12) {
    const auto e = detail::psd_eig(op);
    RVector inv = e.eigenvalues.unaryExpr([floor](double v) { return v < floor ? 0.0 : 1.0 / v; });
    return detail::rebuild(e, inv);
}

/// exp(beta a^dag - beta^* a) with `a` truncated at `dim` before
/// exponentiating. Exactly unitary at `dim`, but matrix elements near the
/// truncation edge are distorted; use displacement_block for physics.
inline CMatrix displacement_matrix(Complex beta, long dim) {
    detail::require_dim(dim, 1, "displacement_matrix");
    if (!detail::finite(beta)) throw InvalidInput("displacement_matrix: non-finite amplitude");
    if (beta == Complex(0.0)) return CMatrix::Identity(dim, dim);
    const CMatrix a = annihilation(dim);
    // generator = -i H with H Hermitian
    const CMatrix h = Complex(0.0, 1.0) * (beta * a.adjoint() - std::conj(beta) * a);
    const auto e = hermitian_eig(h);
    CVector phases(dim);
    for (long k = 0; k < dim; ++k) phases(k) = std::exp(Complex(0.0, -e.eigenvalues(k)));
    return e.eigenvectors * phases.asDiagonal() * e.eigenvectors.adjoint();
}

inline long guard_dimension(long dim) { return std::max(dim + 12, 20L); }

/// Top-left dim x dim block of D(beta) evaluated at guard_dimension(dim).
/// Converges to the exact infinite-dimensional matrix elements.
inline CMatrix displacement_block(Complex beta, long dim) {
    detail::require_dim(dim, 1, "displacement_block");
    return displacement_matrix(beta, guard_dimension(dim)).topLeftCorner(dim, dim);
}

}  // namespace dpc

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "dpc/detector.hpp"
#include "dpc/fock.hpp"
#include "dpc/povm.hpp"
#include "dpc/receivers.hpp"
#include "dpc/tomography.hpp"

namespace dpc {

enum class PovmSource { Analytic, Reconstructed };

inline const char* to_string(PovmSource s) { return s == PovmSource::Analytic ? "analytic" : "reconstructed"; }

struct DiscriminationReport {
    double p_error = 0.0;
    double p_error_plus_given_minus = 0.0;  // <-|Pi_+|->
    double p_error_minus_given_plus = 0.0;  // <+|Pi_-|+>
    Complex beta_nominal{0.0, 0.0};
    PovmSource source = PovmSource::Reconstructed;
};

struct FidelityReport {
    double f_plus = 0.0;
    double f_minus = 0.0;
};

inline double homodyne_error() { return 0.5 - 1.0 / std::sqrt(2.0 * std::numbers::pi); }

/// Equal-prior error for |+>/|-> from a binary POVM on the qubit block.
inline DiscriminationReport discrimination_error(const PovmSet& povm2, Complex beta_nominal = {0.0, 0.0},
                                                 PovmSource source = PovmSource::Reconstructed) {
    check_shape(povm2);
    if (povm2.dim != 2) throw InvalidInput("discrimination_error: expected a 2-dimensional POVM");
    const auto [plus, minus] = plus_minus_states(2);
    DiscriminationReport r;
    r.p_error_plus_given_minus = (minus.adjoint() * povm2.at(kPlus) * minus)(0).real();
    r.p_error_minus_given_plus = (plus.adjoint() * povm2.at(kMinus) * plus)(0).real();
    r.p_error = 0.5 * (r.p_error_plus_given_minus + r.p_error_minus_given_plus);
    r.beta_nominal = beta_nominal;
    r.source = source;
    return r;
}

namespace detail {

// Square root with eigenvalues below a relative floor treated as zero.
inline CMatrix floored_sqrt(const CMatrix& a) {
    const auto e = hermitian_eig(hermitian_part(a));
    const double floor = 64 * std::numeric_limits<double>::epsilon() * std::max(e.eigenvalues.maxCoeff(), 0.0);
    const RVector root = e.eigenvalues.unaryExpr([&](double x) { return x > floor ? std::sqrt(x) : 0.0; });
    return e.eigenvectors * root.asDiagonal() * e.eigenvectors.adjoint();
}

}  // namespace detail

/// (Tr[(sqrt(B) A sqrt(B))^{1/2}])^2 / (Tr A Tr B), evaluated as the squared
/// nuclear norm of sqrt(A) sqrt(B). Symmetric and invariant under positive
/// rescaling of either argument.
inline double element_fidelity(const CMatrix& a, const CMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidInput("element_fidelity: shape mismatch");
    const double ta = a.trace().real();
    const double tb = b.trace().real();
    if (!(ta > 0.0) || !(tb > 0.0)) throw UndefinedFidelity("element_fidelity: element with zero trace");
    const CMatrix product = detail::floored_sqrt(a / ta) * detail::floored_sqrt(b / tb);
    const double nuclear = Eigen::JacobiSVD<CMatrix>(product).singularValues().sum();
    return std::clamp(nuclear * nuclear, 0.0, 1.0);
}

inline FidelityReport povm_fidelity(const PovmSet& reconstructed, const PovmSet& reference) {
    check_shape(reconstructed);
    check_shape(reference);
    if (reconstructed.dim != 2 || reference.dim != 2) throw InvalidInput("povm_fidelity: expected 2-dimensional POVMs");
    return {element_fidelity(reconstructed.at(kPlus), reference.at(kPlus)),
            element_fidelity(reconstructed.at(kMinus), reference.at(kMinus))};
}

/// Binary POVM of the imperfect counter. For coherent input alpha the
/// no-click probability is
///   (1 - p_dc) exp(-eta |alpha + v beta|^2) exp(-eta (1 - v^2) |beta|^2),
/// so Pi_+ = (1 - p_dc) e^{-eta (1 - v^2)|beta|^2} D(v beta)^dag (1 - eta)^n D(v beta).
inline PovmSet imperfect_kennedy_povm(const DetectorModel& model, long dim) {
    model.validate();
    detail::require_dim(dim, 2, "imperfect_kennedy_povm");
    const double v = model.visibility;
    const double eta = model.loss_eta;
    const double weight = (1.0 - model.dark_prob) * std::exp(-eta * (1.0 - v * v) * std::norm(model.beta));
    const long guard = guard_dimension(dim);
    RVector no_click(guard);
    for (long n = 0; n < guard; ++n) no_click(n) = n == 0 ? 1.0 : std::pow(1.0 - eta, static_cast<double>(n));
    const CMatrix d = displacement_matrix(v * model.beta, guard);
    const CMatrix plus = weight * (d.adjoint() * no_click.asDiagonal() * d).topLeftCorner(dim, dim);
    return binary_povm(hermitian_part(plus), dim);
}

struct TheoryRow {
    double beta;
    double pe_ideal;
    double pe_imperfect;
    double pe_homodyne;
};

inline std::vector<TheoryRow> theory_curves(const std::vector<double>& beta_grid, const DetectorModel& model,
                                            long dim = 4) {
    std::vector<TheoryRow> rows;
    rows.reserve(beta_grid.size());
    for (double b : beta_grid) {
        DetectorModel m = model;
        m.beta = Complex(b, 0.0);
        const PovmSet block = truncate_povm(imperfect_kennedy_povm(m, dim), 2);
        rows.push_back({b, kennedy_error({Complex(b, 0.0)}), discrimination_error(block, m.beta, PovmSource::Analytic).p_error,
                        homodyne_error()});
    }
    return rows;
}

inline std::vector<double> linear_grid(double lo, double hi, int points) {
    if (points < 2) throw InvalidInput("linear_grid: need at least 2 points");
    std::vector<double> g(points);
    for (int i = 0; i < points; ++i) g[i] = lo + (hi - lo) * i / (points - 1);
    return g;
}

inline void write_theory_csv(std::ostream& os, const std::vector<TheoryRow>& rows, const Metadata& metadata = {}) {
    for (const auto& [k, v] : metadata) os << "# " << k << " = " << v << '\n';
    os << "beta,pe_ideal,pe_imperfect,pe_homodyne\n";
    for (const auto& r : rows) {
        os << format_double(r.beta) << ',' << format_double(r.pe_ideal) << ',' << format_double(r.pe_imperfect) << ','
           << format_double(r.pe_homodyne) << '\n';
    }
}

}  // namespace dpc

#pragma once

// Closed-form theory for discriminating |+> and |-> with
//   * a displacement photon counter (displace by beta, then on/off detection), and
//   * a general Gaussian unitary D(alpha) R(phi) S(r) R(theta) followed by homodyne.
//
// Conventions: x = (a + a^dag)/sqrt2, R(t) = exp(i t n), S(r) = exp(r/2 (a^2 - a^dag^2)),
// D(alpha) = exp(alpha a^dag - alpha^* a).

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "dpc/fock.hpp"
#include "dpc/povm.hpp"

namespace dpc {

struct KennedyParams {
    Complex beta{0.0, 0.0};
};

inline double wrap_angle(double a) {
    constexpr double pi = std::numbers::pi;
    double w = std::remainder(a, 2.0 * pi);  // [-pi, pi]
    if (w <= -pi) w += 2.0 * pi;
    return w;
}

struct GaussianParams {
    Complex alpha{0.0, 0.0};
    double phi = 0.0;
    double r = 0.0;
    double theta = 0.0;

    GaussianParams() = default;
    GaussianParams(Complex alpha_, double phi_, double r_, double theta_)
        : alpha(alpha_), phi(wrap_angle(phi_)), r(r_), theta(wrap_angle(theta_)) {
        if (!(r >= 0.0) || !std::isfinite(r)) throw InvalidInput("gaussian params: squeezing r must be finite and >= 0");
    }
};

struct GaussianElement {
    double x = 0.0;
    double x_tilde = 0.0;
    Complex epsilon;
    Complex xi;
    double norm_n = 0.0;       // <x|U|0> squared modulus, i.e. matrix(0,0)
    Eigen::Matrix2cd matrix;  // <i| U^dag |x><x| U |j>, i,j in {0,1}
};

/// Which half-line of x_tilde is assigned to outcome "+".
enum class PlusHalfLine { NonNegative, Negative };

// ---------------------------------------------------------------- Kennedy

/// Pi_+ = D(beta)^dag |0><0| D(beta) (exact matrix elements via the guard
/// dimension), Pi_- = I - Pi_+.
inline PovmSet kennedy_povm(const KennedyParams& params, long dim) {
    detail::require_dim(dim, 2, "kennedy_povm");
    const CVector v = displacement_block(params.beta, dim).row(0).adjoint();
    return binary_povm(projector(v), dim);
}

inline double kennedy_error(const KennedyParams& params) {
    const double pe = 0.5 + params.beta.real() * std::exp(-std::norm(params.beta));
    return std::clamp(pe, 0.0, 1.0);
}

struct KennedyOptimum {
    double beta;
    double p_error;
};

/// d/dbeta [1/2 + beta e^{-beta^2}] = 0 gives 2 beta^2 = 1; the minimum is the negative root.
inline KennedyOptimum optimal_kennedy_beta() {
    const double beta = -1.0 / std::numbers::sqrt2;
    return {beta, kennedy_error({Complex(beta, 0.0)})};
}

/// |<0| D(beta) |+>|^2 for real or complex beta.
inline double vacuum_overlap(Complex beta) {
    const CMatrix d = displacement_block(beta, 2);
    const Complex amp = (d(0, 0) + d(0, 1)) / std::numbers::sqrt2;
    return std::norm(amp);
}

/// Real beta maximizing |<0|D(beta)|+>|^2, found as the root of the
/// derivative. For real beta, dD/dbeta = (a^dag - a) D.
inline double closest_to_vacuum_beta() {
    const long dim = guard_dimension(2);
    const CMatrix a = annihilation(dim);
    const CMatrix gen = a.adjoint() - a;
    const CVector plus = plus_minus_states(dim).first;
    auto slope = [&](double beta) {
        const CMatrix d = displacement_matrix(Complex(beta, 0.0), dim);
        const Complex amp = (d.row(0) * plus)(0);
        const Complex damp = ((gen * d).row(0) * plus)(0);
        return 2.0 * (std::conj(amp) * damp).real();
    };
    std::uintmax_t max_iter = 200;
    auto tol = boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits - 3);
    const auto [lo, hi] = boost::math::tools::toms748_solve(slope, -1.5, -0.05, tol, max_iter);
    return 0.5 * (lo + hi);
}

// --------------------------------------------------------------- Gaussian

namespace detail {

struct GaussianWave {
    Complex a;        // e^{-i phi} cosh r
    Complex b;        // e^{+i phi} sinh r
    Complex kappa;    // (a + b) / (a - b); Re kappa = 1 / |a - b|^2
    Complex c0;       // <y| R(phi) S(r) |0> = c0 exp(-kappa y^2 / 2)
    Complex epsilon;  // <y| R(phi) S(r) R(theta) |1> = epsilon y <y|R S|0>
};

inline GaussianWave gaussian_wave(const GaussianParams& p) {
    GaussianWave w;
    const Complex eiphi = std::polar(1.0, p.phi);
    w.a = std::conj(eiphi) * std::cosh(p.r);
    w.b = eiphi * std::sinh(p.r);
    w.kappa = (w.a + w.b) / (w.a - w.b);
    // Fix the global phase by <0| R S |0> = sech(r)^{1/2} > 0.
    const double pi = std::numbers::pi;
    w.c0 = std::sqrt(1.0 / std::cosh(p.r)) * std::pow(pi, 0.25) * std::sqrt((1.0 + w.kappa) / (2.0 * pi));
    w.epsilon = std::polar(1.0, p.theta) * std::numbers::sqrt2 / (w.a - w.b);
    return w;
}

}  // namespace detail

/// Position wavefunctions <x| U_G |0> and <x| U_G |1>.
inline std::pair<Complex, Complex> gaussian_wavefunctions(const GaussianParams& p, double x) {
    const auto w = detail::gaussian_wave(p);
    const double shift = std::numbers::sqrt2 * p.alpha.real();
    const double y = x - shift;
    // D(alpha): psi(x) -> e^{-i Re a Im a} e^{i sqrt2 Im a x} psi(x - sqrt2 Re a)
    const Complex phase = std::polar(1.0, std::numbers::sqrt2 * p.alpha.imag() * x - p.alpha.real() * p.alpha.imag());
    const Complex psi0 = phase * w.c0 * std::exp(-0.5 * w.kappa * y * y);
    return {psi0, w.epsilon * y * psi0};
}

inline Complex gaussian_xi(const GaussianParams& p) { return std::polar(std::tanh(p.r), 2.0 * p.phi); }

inline Complex gaussian_epsilon(const GaussianParams& p) {
    return std::polar(std::numbers::sqrt2 / std::cosh(p.r), p.phi + p.theta) / (1.0 - gaussian_xi(p));
}

inline GaussianElement gaussian_povm_element(const GaussianParams& p, double x) {
    if (!(p.r >= 0.0)) throw InvalidInput("gaussian_povm_element: r must be >= 0");
    const auto [psi0, psi1] = gaussian_wavefunctions(p, x);
    GaussianElement el;
    el.x = x;
    el.x_tilde = x - std::numbers::sqrt2 * p.alpha.real();
    el.xi = gaussian_xi(p);
    el.epsilon = gaussian_epsilon(p);
    el.matrix(0, 0) = std::conj(psi0) * psi0;
    el.matrix(0, 1) = std::conj(psi0) * psi1;
    el.matrix(1, 0) = std::conj(psi1) * psi0;
    el.matrix(1, 1) = std::conj(psi1) * psi1;
    el.norm_n = el.matrix(0, 0).real();
    return el;
}

inline PlusHalfLine gaussian_decision_rule(const GaussianParams& p) {
    return gaussian_epsilon(p).real() >= 0.0 ? PlusHalfLine::NonNegative : PlusHalfLine::Negative;
}

struct GaussianErrorResult {
    double p_error = 0.5;
    bool degenerate = false;  // tanh r -> 1 with cos 2phi -> 1; value forced to 1/2
};

inline GaussianErrorResult gaussian_error(const GaussianParams& p) {
    if (!(p.r >= 0.0)) throw InvalidInput("gaussian_error: r must be >= 0");
    const double t = std::tanh(p.r);
    const double denom2 = 1.0 - 2.0 * std::cos(2.0 * p.phi) * t + t * t;
    if (!(denom2 > std::numeric_limits<double>::min())) return {0.5, true};
    const double num = std::abs(std::cos(p.theta + p.phi) - std::cos(p.theta - p.phi) * t);
    return {0.5 - num / (std::sqrt(2.0 * std::numbers::pi) * std::sqrt(denom2)), false};
}

namespace detail {

// Integrates f(x_tilde) with x_tilde = u * width, where width is the
// homodyne peak width; u is restricted to [-10, 10].
template <class F>
double integrate_standardized(const GaussianParams& p, F&& f, double u_lo, double u_hi) {
    const auto w = gaussian_wave(p);
    const double width = std::abs(w.a - w.b);
    auto g = [&](double u) { return width * f(u * width); };
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, std::max(u_lo, -10.0),
                                                                          std::min(u_hi, 10.0), 20, 1e-12, &err);
}

}  // namespace detail

/// Integral of the qubit-block matrix over all homodyne outcomes; equals I_2
/// for a complete measurement.
inline Eigen::Matrix2cd integrate_gaussian_povm(const GaussianParams& p) {
    const double shift = std::numbers::sqrt2 * p.alpha.real();
    Eigen::Matrix2cd out;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            auto re = [&](double xt) { return gaussian_povm_element(p, xt + shift).matrix(i, j).real(); };
            auto im = [&](double xt) { return gaussian_povm_element(p, xt + shift).matrix(i, j).imag(); };
            out(i, j) = Complex(detail::integrate_standardized(p, re, -10.0, 10.0),
                                detail::integrate_standardized(p, im, -10.0, 10.0));
        }
    }
    return out;
}

/// Error of the binary homodyne decision evaluated by quadrature of the
/// first-principles POVM elements (independent of the closed form).
inline double gaussian_error_quadrature(const GaussianParams& p) {
    const double shift = std::numbers::sqrt2 * p.alpha.real();
    const auto [plus, minus] = plus_minus_states(2);
    const Eigen::Vector2cd vp = plus.head<2>();
    const Eigen::Vector2cd vm = minus.head<2>();
    auto given_plus = [&](double xt) {
        return (vp.adjoint() * gaussian_povm_element(p, xt + shift).matrix * vp)(0).real();
    };
    auto given_minus = [&](double xt) {
        return (vm.adjoint() * gaussian_povm_element(p, xt + shift).matrix * vm)(0).real();
    };
    const double inf = std::numeric_limits<double>::infinity();
    const bool plus_on_nonneg = gaussian_decision_rule(p) == PlusHalfLine::NonNegative;
    const double minus_as_plus = plus_on_nonneg ? detail::integrate_standardized(p, given_minus, 0.0, inf)
                                                : detail::integrate_standardized(p, given_minus, -inf, 0.0);
    const double plus_as_minus = plus_on_nonneg ? detail::integrate_standardized(p, given_plus, -inf, 0.0)
                                                : detail::integrate_standardized(p, given_plus, 0.0, inf);
    return 0.5 * (minus_as_plus + plus_as_minus);
}

struct GaussianOptimum {
    double p_error;
    GaussianParams params;
};

/// Minimizes the closed-form Gaussian error over theta, phi in (-pi, pi]
/// and r in [0, 3]: coarse grid, then a compass search from the best cell.
inline GaussianOptimum min_gaussian_error() {
    constexpr double pi = std::numbers::pi;
    constexpr int kAngles = 24;
    constexpr int kRadii = 13;
    constexpr double kRMax = 3.0;
    auto eval = [](double theta, double phi, double r) {
        return gaussian_error(GaussianParams({0.0, 0.0}, phi, r, theta)).p_error;
    };

    std::array<double, 3> best{0.0, 0.0, 0.0};  // theta, phi, r
    double best_val = eval(0.0, 0.0, 0.0);
    for (int i = 0; i < kAngles; ++i) {
        for (int j = 0; j < kAngles; ++j) {
            for (int k = 0; k < kRadii; ++k) {
                const double th = wrap_angle(2.0 * pi * i / kAngles);
                const double ph = wrap_angle(2.0 * pi * j / kAngles);
                const double r = kRMax * k / (kRadii - 1);
                const double v = eval(th, ph, r);
                if (v < best_val) {
                    best_val = v;
                    best = {th, ph, r};
                }
            }
        }
    }

    double step = pi / kAngles;
    while (step > 1e-10) {
        bool moved = false;
        for (int c = 0; c < 3; ++c) {
            for (double dir : {1.0, -1.0}) {
                auto trial = best;
                trial[c] += dir * step;
                if (c == 2) trial[2] = std::clamp(trial[2], 0.0, kRMax);
                const double v = eval(trial[0], trial[1], trial[2]);
                if (v < best_val) {
                    best_val = v;
                    best = trial;
                    moved = true;
                }
            }
        }
        if (!moved) step *= 0.5;
    }
    return {best_val, GaussianParams({0.0, 0.0}, best[1], best[2], best[0])};
}

}  // namespace dpc

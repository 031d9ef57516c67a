#pragma once

// Maximum-likelihood detector tomography with coherent probes.
//
// For probe states rho_m and observed frequencies f_ml the iteration
//     R_l    = sum_m f_ml / Tr[rho_m Pi_l] rho_m
//     lambda = (sum_l R_l Pi_l R_l)^{1/2}
//     Pi_l  <- lambda^{-1} R_l Pi_l R_l lambda^{-1}
// keeps every iterate a POVM on the span of the probes and climbs the
// log-likelihood sum_lm f_ml ln Tr[rho_m Pi_l].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "dpc/detector.hpp"
#include "dpc/fock.hpp"
#include "dpc/povm.hpp"

namespace dpc {

struct MlConfig {
    long max_iterations = 10'000;
    double convergence_tol = 1e-8;  // max Frobenius change of any element in one step
    double prob_floor = 1e-12;      // floor on Tr[rho Pi] inside R_l and the logarithm
    double eig_floor = 1e-12;       // relative pseudo-inverse floor for lambda

    void validate() const {
        if (max_iterations < 1 || !(convergence_tol > 0.0) || !(prob_floor > 0.0) || !(eig_floor > 0.0)) {
            throw InvalidInput("ml config: all settings must be positive");
        }
    }
};

inline constexpr double kConstraintFlag = 1e-6;

struct MlReport {
    long iterations_run = 0;
    double final_log_likelihood = 0.0;
    std::vector<double> log_likelihood_trace;
    double max_constraint_violation = 0.0;
    bool converged = false;
    bool constraints_ok = true;  // max_constraint_violation <= 1e-6
    long damped_steps = 0;  // iterations that shortened the step
    long probed_support_dim = 0;
};

struct MlResult {
    PovmSet povm;
    MlReport report;
};

/// Truncated, renormalized |alpha><alpha| for each probe.
inline std::vector<CMatrix> probe_density_matrices(const std::vector<Complex>& probes, long dim) {
    std::vector<CMatrix> rhos;
    rhos.reserve(probes.size());
    for (const auto& a : probes) rhos.push_back(projector(coherent_vector(a, dim, true).amplitudes));
    return rhos;
}

inline std::vector<CMatrix> probe_density_matrices(const ProbeEnsemble& ensemble) {
    return probe_density_matrices(ensemble.probes, ensemble.truncation_dim);
}

namespace detail {

inline double trace_product(const CMatrix& rho, const CMatrix& pi) {
    return rho.cwiseProduct(pi.transpose()).sum().real();
}

inline void check_inputs(const std::vector<CMatrix>& rhos, const Eigen::MatrixXd& freqs) {
    if (rhos.empty()) throw InvalidInput("tomography: no probes");
    if (static_cast<std::size_t>(freqs.rows()) != rhos.size()) {
        throw InvalidInput("tomography: frequency rows do not match probe count");
    }
    if (freqs.cols() < 1) throw InvalidInput("tomography: no outcomes");
    if ((freqs.array() < 0.0).any() || !freqs.allFinite()) throw InvalidInput("tomography: frequencies must be finite and >= 0");
    const long dim = rhos.front().rows();
    for (const auto& r : rhos) {
        if (r.rows() != dim || r.cols() != dim) throw InvalidInput("tomography: probe dimensions disagree");
    }
}

inline double log_likelihood(const std::vector<CMatrix>& elements, const std::vector<CMatrix>& rhos,
                             const Eigen::MatrixXd& freqs, double prob_floor) {
    long double total = 0.0L;
    for (std::size_t l = 0; l < elements.size(); ++l) {
        for (std::size_t m = 0; m < rhos.size(); ++m) {
            const double f = freqs(m, l);
            if (f == 0.0) continue;
            total += f * std::log(std::max(trace_product(rhos[m], elements[l]), prob_floor));
        }
    }
    return static_cast<double>(total);
}

inline double constraint_violation(const std::vector<CMatrix>& elements) {
    PovmSet p;
    p.dim = elements.front().rows();
    p.elements = elements;
    const auto d = diagnose(p);
    return std::max({d.completeness_defect, -d.min_eigenvalue, d.max_hermitian_defect, 0.0});
}

// Canonical probe order; results are independent of the caller's ordering.
inline std::vector<std::size_t> canonical_order(const std::vector<CMatrix>& rhos, const Eigen::MatrixXd& freqs) {
    std::vector<std::size_t> idx(rhos.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto key_less = [&](std::size_t a, std::size_t b) {
        for (long j = 0; j < freqs.cols(); ++j) {
            if (freqs(a, j) != freqs(b, j)) return freqs(a, j) < freqs(b, j);
        }
        for (long k = 0; k < rhos[a].size(); ++k) {
            const Complex x = rhos[a].data()[k];
            const Complex y = rhos[b].data()[k];
            if (x.real() != y.real()) return x.real() < y.real();
            if (x.imag() != y.imag()) return x.imag() < y.imag();
        }
        return false;
    };
    std::stable_sort(idx.begin(), idx.end(), key_less);
    return idx;
}

}  // namespace detail

inline std::vector<std::string> default_labels(std::size_t n) {
    if (n == 2) return {kPlus, kMinus};
    std::vector<std::string> labels;
    for (std::size_t l = 0; l < n; ++l) labels.push_back(std::to_string(l));
    return labels;
}

/// sum_lm f_ml ln Tr[rho_m Pi_l]; zero counts contribute exactly 0.
inline double log_likelihood(const PovmSet& povm, const std::vector<CMatrix>& rhos, const Eigen::MatrixXd& freqs,
                             double prob_floor = 1e-12) {
    check_shape(povm);
    detail::check_inputs(rhos, freqs);
    if (rhos.front().rows() != povm.dim) throw InvalidInput("log_likelihood: probe and povm dimensions disagree");
    if (static_cast<std::size_t>(freqs.cols()) != povm.size()) {
        throw InvalidInput("log_likelihood: outcome count does not match povm");
    }
    return detail::log_likelihood(povm.elements, rhos, freqs, prob_floor);
}

inline double log_likelihood(const PovmSet& povm, const ProbeEnsemble& ensemble, const FrequencyTable& table,
                             double prob_floor = 1e-12) {
    if (ensemble.truncation_dim != povm.dim) throw InvalidInput("log_likelihood: ensemble and povm dimensions disagree");
    return log_likelihood(povm, probe_density_matrices(ensemble), table.as_real(), prob_floor);
}

inline MlResult ml_reconstruct(const std::vector<CMatrix>& rhos_in, const Eigen::MatrixXd& freqs_in,
                               const MlConfig& config = {}) {
    config.validate();
    detail::check_inputs(rhos_in, freqs_in);

    const auto order = detail::canonical_order(rhos_in, freqs_in);
    std::vector<CMatrix> rhos;
    Eigen::MatrixXd freqs(freqs_in.rows(), freqs_in.cols());
    for (std::size_t i = 0; i < order.size(); ++i) {
        rhos.push_back(rhos_in[order[i]]);
        freqs.row(static_cast<long>(i)) = freqs_in.row(static_cast<long>(order[i]));
    }

    const long dim = rhos.front().rows();
    const auto outcomes = static_cast<std::size_t>(freqs.cols());
    const CMatrix identity = CMatrix::Identity(dim, dim);

    MlReport report;
    {
        CMatrix span = CMatrix::Zero(dim, dim);
        for (const auto& r : rhos) span += r;
        const RVector ev = hermitian_eig(span).eigenvalues;
        report.probed_support_dim = (ev.array() > config.eig_floor * ev.maxCoeff()).count();
    }

    std::vector<CMatrix> pis(outcomes, identity / static_cast<double>(outcomes));
    double current = detail::log_likelihood(pis, rhos, freqs, config.prob_floor);

    std::vector<CMatrix> r_ops(outcomes);
    std::vector<CMatrix> proposal(outcomes);
    std::vector<CMatrix> trial(outcomes);
    for (long it = 1; it <= config.max_iterations; ++it) {
        CMatrix g = CMatrix::Zero(dim, dim);
        for (std::size_t l = 0; l < outcomes; ++l) {
            r_ops[l] = CMatrix::Zero(dim, dim);
            for (std::size_t m = 0; m < rhos.size(); ++m) {
                const double f = freqs(m, l);
                if (f == 0.0) continue;
                r_ops[l] += (f / std::max(detail::trace_product(rhos[m], pis[l]), config.prob_floor)) * rhos[m];
            }
            proposal[l] = r_ops[l] * pis[l] * r_ops[l];
            g += proposal[l];
        }
        if (!g.allFinite()) throw NumericalFailure("ml_reconstruct: non-finite update", static_cast<std::size_t>(it));

        // lambda^{-1} on the support of g; the complement keeps its previous value.
        const auto eg = hermitian_eig(hermitian_part(g));
        const double gmax = std::max(eg.eigenvalues.maxCoeff(), 0.0);
        RVector inv_sqrt(dim);
        RVector null_mask(dim);
        for (long k = 0; k < dim; ++k) {
            const bool kept = gmax > 0.0 && eg.eigenvalues(k) > config.eig_floor * gmax;
            inv_sqrt(k) = kept ? 1.0 / std::sqrt(eg.eigenvalues(k)) : 0.0;
            null_mask(k) = kept ? 0.0 : 1.0;
        }
        const CMatrix lambda_inv = eg.eigenvectors * inv_sqrt.asDiagonal() * eg.eigenvectors.adjoint();
        const CMatrix q = eg.eigenvectors * null_mask.asDiagonal() * eg.eigenvectors.adjoint();
        for (std::size_t l = 0; l < outcomes; ++l) {
            proposal[l] = hermitian_part(lambda_inv * proposal[l] * lambda_inv + q * pis[l] * q);
        }

        double next = detail::log_likelihood(proposal, rhos, freqs, config.prob_floor);
        if (!std::isfinite(next)) throw NumericalFailure("ml_reconstruct: non-finite log-likelihood", static_cast<std::size_t>(it));

        // The likelihood is concave along the segment from the current iterate
        // to the proposal; halve s while that improves it. When nothing beats
        // the current iterate the step is zero, which ends the run.
        double s = 1.0;
        for (int halving = 0; halving < 60; ++halving) {
            const double t = 0.5 * s;
            for (std::size_t l = 0; l < outcomes; ++l) trial[l] = (1.0 - t) * pis[l] + t * proposal[l];
            const double v = detail::log_likelihood(trial, rhos, freqs, config.prob_floor);
            if (!(v > next)) break;
            s = t;
            next = v;
        }
        if (s < 1.0) {
            ++report.damped_steps;
            for (std::size_t l = 0; l < outcomes; ++l) proposal[l] = (1.0 - s) * pis[l] + s * proposal[l];
        }
        if (next < current) {
            proposal = pis;
            next = current;
        }

        double change = 0.0;
        for (std::size_t l = 0; l < outcomes; ++l) change = std::max(change, (proposal[l] - pis[l]).norm());
        std::swap(pis, proposal);
        current = next;
        report.log_likelihood_trace.push_back(current);
        report.iterations_run = it;
        if (change < config.convergence_tol) {
            report.converged = true;
            break;
        }
    }

    report.final_log_likelihood = current;
    report.max_constraint_violation = detail::constraint_violation(pis);
    report.constraints_ok = report.max_constraint_violation <= kConstraintFlag;

    PovmSet povm;
    povm.dim = dim;
    povm.labels = default_labels(outcomes);
    povm.elements = std::move(pis);
    return {std::move(povm), std::move(report)};
}

inline MlResult ml_reconstruct(const ProbeEnsemble& ensemble, const FrequencyTable& table, const MlConfig& config = {}) {
    if (table.size() != ensemble.size()) throw InvalidInput("ml_reconstruct: table rows do not match probes");
    return ml_reconstruct(probe_density_matrices(ensemble), table.as_real(), config);
}

/// Top-left block of every element. The result is positive but in general
/// not complete, and is flagged as such.
inline PovmSet truncate_povm(const PovmSet& povm, long sub_dim) {
    check_shape(povm);
    if (sub_dim < 1 || sub_dim > povm.dim) throw InvalidInput("truncate_povm: sub_dim must lie in [1, dim]");
    PovmSet out;
    out.dim = sub_dim;
    out.labels = povm.labels;
    out.complete = false;
    for (const auto& e : povm.elements) out.elements.push_back(e.topLeftCorner(sub_dim, sub_dim));
    return out;
}

}  // namespace dpc

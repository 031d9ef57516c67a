#include "dpc/metrics.hpp"
#include "dpc/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace dpc;

namespace {

// counts = round(shots * p) from the physical click model.
Eigen::MatrixXd noiseless_frequencies(const DetectorModel& model, const ProbeEnsemble& ens, double shots) {
    Eigen::MatrixXd f(static_cast<long>(ens.size()), 2);
    for (std::size_t m = 0; m < ens.size(); ++m) {
        const double plus = std::round(shots * (1.0 - click_probability(model, ens.probes[m])));
        f(static_cast<long>(m), 0) = plus;
        f(static_cast<long>(m), 1) = shots - plus;
    }
    return f;
}

// One step of the multiplicative update, written directly from its definition.
std::vector<CMatrix> reference_update(const std::vector<CMatrix>& pis, const std::vector<CMatrix>& rhos,
                                      const Eigen::MatrixXd& f) {
    const long dim = rhos.front().rows();
    std::vector<CMatrix> rs;
    CMatrix g = CMatrix::Zero(dim, dim);
    for (std::size_t l = 0; l < pis.size(); ++l) {
        CMatrix r = CMatrix::Zero(dim, dim);
        for (std::size_t m = 0; m < rhos.size(); ++m) {
            r += f(static_cast<long>(m), static_cast<long>(l)) / (rhos[m] * pis[l]).trace().real() * rhos[m];
        }
        rs.push_back(r);
        g += r * pis[l] * r;
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> es(g);
    const double top = es.eigenvalues().maxCoeff();
    Eigen::VectorXd inv = es.eigenvalues().unaryExpr([&](double x) { return x > 1e-12 * top ? 1.0 / std::sqrt(x) : 0.0; });
    const CMatrix li = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().adjoint();
    std::vector<CMatrix> out;
    for (std::size_t l = 0; l < pis.size(); ++l) out.push_back(li * rs[l] * pis[l] * rs[l] * li);
    return out;
}

}  // namespace

TEST(LogLikelihood, Examples) {
    const auto rhos = probe_density_matrices(default_probe_ensemble());
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(16, 2);
    f.col(0).setConstant(100.0);
    const PovmSet certain = binary_povm(CMatrix::Identity(4, 4), 4);
    EXPECT_NEAR(log_likelihood(certain, rhos, f), 0.0, 1e-10);

    f.col(1).setConstant(50.0);
    const PovmSet coin = binary_povm(0.5 * CMatrix::Identity(4, 4), 4);
    EXPECT_NEAR(log_likelihood(coin, rhos, f), 16 * 150 * std::log(0.5), 1e-9);
}

TEST(LogLikelihood, RejectsMismatchedInputs) {
    const auto rhos = probe_density_matrices(default_probe_ensemble());
    const PovmSet coin = binary_povm(0.5 * CMatrix::Identity(4, 4), 4);
    EXPECT_THROW(log_likelihood(coin, rhos, Eigen::MatrixXd::Ones(15, 2)), InvalidInput);
    EXPECT_THROW(log_likelihood(coin, rhos, Eigen::MatrixXd::Ones(16, 3)), InvalidInput);
    EXPECT_THROW(log_likelihood(binary_povm(0.5 * CMatrix::Identity(3, 3), 3), rhos, Eigen::MatrixXd::Ones(16, 2)),
                 InvalidInput);
    EXPECT_THROW(log_likelihood(coin, rhos, -Eigen::MatrixXd::Ones(16, 2)), InvalidInput);
    EXPECT_THROW(ml_reconstruct(rhos, Eigen::MatrixXd::Ones(15, 2)), InvalidInput);
    EXPECT_THROW(ml_reconstruct({}, Eigen::MatrixXd::Ones(0, 2)), InvalidInput);
    MlConfig bad;
    bad.max_iterations = 0;
    EXPECT_THROW(ml_reconstruct(rhos, Eigen::MatrixXd::Ones(16, 2), bad), InvalidInput);
}

TEST(MlReconstruct, OneDimensionalToy) {
    Eigen::MatrixXd f(1, 2);
    f << 0.3, 0.7;
    const auto res = ml_reconstruct({CMatrix::Identity(1, 1)}, f);
    ASSERT_TRUE(res.report.converged);
    EXPECT_NEAR(res.povm.elements[0](0, 0).real(), 0.3, 1e-8);
    EXPECT_NEAR(res.povm.elements[1](0, 0).real(), 0.7, 1e-8);
}

TEST(MlReconstruct, NoiselessDataRecoversKennedyBlock) {
    const auto ens = default_probe_ensemble();
    for (double beta : {-0.63, -0.70}) {
        const Complex b(beta, 0.0);
        const auto res = ml_reconstruct(probe_density_matrices(ens), noiseless_frequencies(DetectorModel::ideal(b), ens, 1e6));
        ASSERT_TRUE(res.report.converged) << beta;
        const auto fid = povm_fidelity(truncate_povm(res.povm, 2), truncate_povm(kennedy_povm({b}, 4), 2));
        EXPECT_GT(fid.f_plus, 0.999) << beta;
        EXPECT_GT(fid.f_minus, 0.999) << beta;
    }
}

TEST(MlReconstruct, InvariantsHold) {
    const auto ens = default_probe_ensemble(4, 50'000, 17);
    const auto table = simulate_frequency_table({{-0.7, 0.0}, 0.991, 3.1e-4, 1.0}, ens);
    const auto res = ml_reconstruct(ens, table);
    const auto& trace = res.report.log_likelihood_trace;
    ASSERT_EQ(static_cast<long>(trace.size()), res.report.iterations_run);
    for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_GE(trace[i], trace[i - 1] - 1e-9) << i;
    EXPECT_TRUE(res.report.converged);
    EXPECT_TRUE(res.report.constraints_ok);
    EXPECT_LT(res.report.max_constraint_violation, 1e-6);
    const auto diag = diagnose(res.povm);
    EXPECT_GT(diag.min_eigenvalue, -1e-9);
    EXPECT_LT(diag.completeness_defect, 1e-9);
    EXPECT_EQ(res.report.probed_support_dim, 4);
    EXPECT_DOUBLE_EQ(res.report.final_log_likelihood, log_likelihood(res.povm, ens, table));

    // Bounded above by the saturated model and below by the generating detector.
    const auto f = table.as_real();
    double saturated = 0.0;
    for (long m = 0; m < f.rows(); ++m) {
        const double n = f.row(m).sum();
        for (long l = 0; l < 2; ++l) saturated += f(m, l) > 0 ? f(m, l) * std::log(f(m, l) / n) : 0.0;
    }
    EXPECT_LE(res.report.final_log_likelihood, saturated + 1e-6);
    const PovmSet generating = imperfect_kennedy_povm({{-0.7, 0.0}, 0.991, 3.1e-4, 1.0}, 4);
    EXPECT_GE(res.report.final_log_likelihood, log_likelihood(generating, ens, table));
}

TEST(MlReconstruct, FixedPointOfTheUpdate) {
    const auto ens = default_probe_ensemble(4, 50'000, 3);
    const auto table = simulate_frequency_table(DetectorModel::ideal({-0.7, 0.0}), ens);
    MlConfig cfg;
    cfg.convergence_tol = 1e-11;
    cfg.max_iterations = 200'000;
    const auto res = ml_reconstruct(ens, table, cfg);
    ASSERT_TRUE(res.report.converged);
    const auto next = reference_update(res.povm.elements, probe_density_matrices(ens), table.as_real());
    for (std::size_t l = 0; l < 2; ++l) EXPECT_LT((next[l] - res.povm.elements[l]).norm(), 1e-6);
}

TEST(MlReconstruct, ProbeOrderDoesNotMatter) {
    const auto ens = default_probe_ensemble(4, 20'000, 8);
    const auto table = simulate_frequency_table(DetectorModel::ideal({-0.63, 0.0}), ens);
    const auto rhos = probe_density_matrices(ens);
    const auto f = table.as_real();
    std::vector<std::size_t> perm(rhos.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));
    std::vector<CMatrix> rhos_p;
    Eigen::MatrixXd f_p(f.rows(), f.cols());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        rhos_p.push_back(rhos[perm[i]]);
        f_p.row(static_cast<long>(i)) = f.row(static_cast<long>(perm[i]));
    }
    const auto a = ml_reconstruct(rhos, f);
    const auto b = ml_reconstruct(rhos_p, f_p);
    EXPECT_EQ(a.report.iterations_run, b.report.iterations_run);
    for (std::size_t l = 0; l < 2; ++l) EXPECT_EQ(a.povm.elements[l], b.povm.elements[l]);
}

TEST(MlReconstruct, MatchesExhaustiveQubitSearch) {
    std::vector<Complex> probes{{0.5, 0.0}, {0.0, 0.6}, {-0.4, -0.3}, {0.7, 0.7}};
    const auto rhos = probe_density_matrices(probes, 2);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        std::mt19937_64 rng(seed);
        CMatrix plus = test::random_psd(rng, 2);
        plus /= 1.1 * hermitian_eig(plus).eigenvalues.maxCoeff();
        const PovmSet truth = binary_povm(plus, 2);
        Eigen::MatrixXd f(4, 2);
        for (long m = 0; m < 4; ++m) {
            const double p = (rhos[m] * plus).trace().real();
            std::binomial_distribution<int> draw(1000, p);
            f(m, 0) = draw(rng);
            f(m, 1) = 1000 - f(m, 0);
        }
        MlConfig cfg;
        cfg.convergence_tol = 1e-12;
        cfg.max_iterations = 1'000'000;
        const auto res = ml_reconstruct(rhos, f, cfg);
        const double oracle = test::qubit_ml_oracle(rhos, f);
        EXPECT_NEAR(res.report.final_log_likelihood, oracle, 1e-6) << seed;
        EXPECT_TRUE(res.report.constraints_ok);
    }
}

TEST(MlReconstruct, OverflowRaisesNumericalFailure) {
    Eigen::MatrixXd f(2, 2);
    f << 1e300, 0.0, 0.0, 1e300;
    const std::vector<CMatrix> rhos{projector(basis_vector(2, 0)), projector(basis_vector(2, 1))};
    try {
        ml_reconstruct(rhos, f);
        FAIL();
    } catch (const NumericalFailure& e) {
        EXPECT_EQ(e.iteration(), 1u);
    }
}

TEST(TruncatePovm, KeepsTopLeftBlock) {
    const PovmSet full = kennedy_povm({Complex(-0.7, 0.0)}, 4);
    const PovmSet block = truncate_povm(full, 2);
    EXPECT_EQ(block.dim, 2);
    EXPECT_FALSE(block.complete);
    EXPECT_NEAR(block.at(kPlus)(0, 0).real(), std::exp(-0.49), 1e-12);
    for (const auto& e : block.elements) EXPECT_LE(hermitian_eig(e).eigenvalues.maxCoeff(), 1.0 + 1e-9);
    EXPECT_THROW(truncate_povm(full, 5), InvalidInput);
    EXPECT_THROW(truncate_povm(full, 0), InvalidInput);
}

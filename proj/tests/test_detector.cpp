#include "dpc/detector.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

using namespace dpc;

TEST(ProbeEnsemble, DefaultDesign) {
    const auto e = default_probe_ensemble();
    ASSERT_EQ(e.size(), 16u);
    EXPECT_EQ(e.shots_per_probe, 50'000);
    EXPECT_EQ(e.truncation_dim, 4);
    const double pi = std::numbers::pi;
    for (std::size_t m = 0; m < e.size(); ++m) {
        const double phase = std::arg(e.probes[m]);
        const double want = std::remainder((2 * (m % 4) + 1) * pi / 4.0, 2 * pi);
        EXPECT_NEAR(phase, want, 1e-15);
        EXPECT_GE(coherent_vector(e.probes[m], 4).captured_probability, 0.95);
    }
    // Partial Poisson sums for the chosen magnitudes.
    for (double n : default_mean_photon_numbers()) {
        const double captured = std::exp(-n) * (1 + n + n * n / 2 + n * n * n / 6);
        EXPECT_GE(captured, 0.95) << n;
    }
}

TEST(ProbeEnsemble, RejectsPoorlyCapturedProbes) {
    EXPECT_THROW(default_probe_ensemble(4, 100, 0, {0.25, 1.5}), InvalidInput);
    EXPECT_NO_THROW(default_probe_ensemble(6, 100, 0, {0.25, 1.5}));
    ProbeEnsemble empty;
    EXPECT_THROW(empty.validate(), InvalidInput);
}

TEST(ClickProbability, Examples) {
    const auto ideal = DetectorModel::ideal({-0.70, 0.0});
    EXPECT_NEAR(click_probability(ideal, {0.70, 0.0}), 0.0, 1e-15);
    EXPECT_NEAR(click_probability(ideal, {0.0, 0.0}), 1.0 - std::exp(-0.49), 1e-15);
    EXPECT_NEAR(click_probability(ideal, {0.0, 0.0}), 0.3874, 5e-5);

    const DetectorModel imperfect{{-0.70, 0.0}, 0.991, 310.0 * 1e-6, 1.0};
    EXPECT_NEAR(kMeasuredDarkProb, 3.1e-4, 1e-18);
    const double nbar = 2 * 0.49 * (1 - 0.991);
    EXPECT_NEAR(click_probability(imperfect, {0.70, 0.0}), 1.0 - (1 - 3.1e-4) * std::exp(-nbar), 1e-15);
    EXPECT_NEAR(click_probability(imperfect, {0.70, 0.0}), 0.00909, 5e-6);
}

TEST(ClickProbability, IdealIsDisplacedVacuumProbability) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int t = 0; t < 20; ++t) {
        const Complex a(u(rng), u(rng)), b(u(rng), u(rng));
        EXPECT_NEAR(click_probability(DetectorModel::ideal(b), a), 1.0 - std::exp(-std::norm(a + b)), 1e-14);
    }
}

TEST(ClickProbability, RangeAndMonotonicity) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        const Complex a(u(rng), u(rng)), b(u(rng), u(rng));
        const DetectorModel m{b, unit(rng), 0.5 * unit(rng), 1.0};
        const double p = click_probability(m, a);
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
        DetectorModel darker = m;
        darker.dark_prob = std::min(0.99, m.dark_prob + 0.1);
        EXPECT_GE(click_probability(darker, a), p);
    }
    // At visibility 1, monotone in |alpha + beta|^2.
    const auto ideal = DetectorModel::ideal({-0.5, 0.0});
    double prev = -1.0;
    for (double x = 0.5; x < 3.0; x += 0.05) {
        const double p = click_probability(ideal, {x, 0.0});
        EXPECT_GE(p, prev);
        prev = p;
    }
}

TEST(ClickProbability, RejectsInvalidModels) {
    EXPECT_THROW(click_probability({{0.0, 0.0}, 1.2, 0.0, 1.0}, {0.0, 0.0}), InvalidInput);
    EXPECT_THROW(click_probability({{0.0, 0.0}, 1.0, 1.0, 1.0}, {0.0, 0.0}), InvalidInput);
    EXPECT_THROW(click_probability({{0.0, 0.0}, 1.0, 0.0, 0.0}, {0.0, 0.0}), InvalidInput);
    EXPECT_THROW(click_probability({{NAN, 0.0}, 1.0, 0.0, 1.0}, {0.0, 0.0}), InvalidInput);
}

TEST(LossRescale, Examples) {
    EXPECT_EQ(loss_rescale({0.3, -0.2}, 1.0), Complex(0.3, -0.2));
    EXPECT_NEAR(std::abs(loss_rescale({0.7, 0.0}, 0.49) - 1.0), 0.0, 1e-15);
    EXPECT_THROW(loss_rescale({0.7, 0.0}, 0.0), InvalidInput);
    EXPECT_THROW(loss_rescale({0.7, 0.0}, -0.5), InvalidInput);
}

TEST(LossRescale, CompensatesLinearLoss) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    std::uniform_real_distribution<double> eta_dist(0.1, 1.0);
    for (int t = 0; t < 20; ++t) {
        const Complex a(u(rng), u(rng)), b(u(rng), u(rng));
        const double eta = eta_dist(rng);
        const DetectorModel lossy{loss_rescale(b, eta), 1.0, 0.0, eta};
        EXPECT_NEAR(click_probability(lossy, loss_rescale(a, eta)), click_probability(DetectorModel::ideal(b), a), 1e-14);
    }
}

TEST(Simulation, PerfectNullingNeverClicks) {
    ProbeEnsemble e;
    e.probes = {{0.7, 0.0}, {0.7, 0.0}};
    e.shots_per_probe = 20'000;
    const auto t = simulate_frequency_table(DetectorModel::ideal({-0.7, 0.0}), e);
    EXPECT_EQ(t.clicks(0), 0);
    EXPECT_EQ(t.clicks(1), 0);
    EXPECT_EQ(t.shots(0), 20'000);
}

TEST(Simulation, FairCoinStatistics) {
    ProbeEnsemble e;
    e.probes = {{0.0, 0.0}};
    e.shots_per_probe = 50'000;
    e.seed = 2024;
    const auto model = DetectorModel::ideal({-std::sqrt(std::log(2.0)), 0.0});
    ASSERT_NEAR(click_probability(model, e.probes[0]), 0.5, 1e-15);
    const auto t = simulate_frequency_table(model, e);
    EXPECT_LT(std::abs(t.clicks(0) - 25'000), 4.0 * std::sqrt(5e4 * 0.25));
    EXPECT_EQ(t.clicks(0), 25'061);  // regression value for this seed
}

TEST(Simulation, DeterministicAndOrderIndependent) {
    const auto e = default_probe_ensemble(4, 5'000, 99);
    const DetectorModel model{{-0.7, 0.0}, 0.991, 3.1e-4, 1.0};
    const auto a = simulate_frequency_table(model, e);
    const auto b = simulate_frequency_table(model, e);
    EXPECT_EQ(a.counts, b.counts);

    std::vector<std::int64_t> reversed(e.size());
    for (std::size_t m = e.size(); m-- > 0;) reversed[m] = simulate_probe_clicks(model, e, m);
    std::vector<std::int64_t> threaded(e.size());
    {
        std::vector<std::jthread> pool;
        for (std::size_t m = 0; m < e.size(); ++m) {
            pool.emplace_back([&, m] { threaded[m] = simulate_probe_clicks(model, e, m); });
        }
    }
    for (std::size_t m = 0; m < e.size(); ++m) {
        EXPECT_EQ(reversed[m], a.clicks(m));
        EXPECT_EQ(threaded[m], a.clicks(m));
        EXPECT_EQ(a.shots(m), 5'000);
    }

    auto other = e;
    other.seed = 100;
    EXPECT_NE(simulate_frequency_table(model, other).counts, a.counts);
}

TEST(Simulation, ConvergesToClickProbability) {
    const auto e = default_probe_ensemble(4, 1'000'000, 5);
    const auto model = DetectorModel::ideal({-0.7, 0.0});
    const auto t = simulate_frequency_table(model, e);
    for (std::size_t m = 0; m < e.size(); ++m) {
        const double p = 1.0 - std::exp(-std::norm(e.probes[m] + model.beta));
        const double freq = static_cast<double>(t.clicks(m)) / 1e6;
        EXPECT_LT(std::abs(freq - p), 5.0 * std::sqrt(p * (1 - p) / 1e6)) << m;
    }
}

TEST(FrequencyCsv, WritesSchemaAndReadsBack) {
    const auto e = default_probe_ensemble(4, 1'000, 7);
    const auto t = simulate_frequency_table(DetectorModel::ideal({-0.7, 0.0}), e);
    std::ostringstream os;
    write_frequency_csv(os, e, t, {{"seed", "7"}, {"beta", "-0.7"}});
    const std::string text = os.str();
    EXPECT_NE(text.find("\n" + kFrequencyCsvHeader + "\n"), std::string::npos);
    EXPECT_EQ(text.find('\r'), std::string::npos);

    std::istringstream is(text);
    const auto back = read_frequency_csv(is);
    EXPECT_EQ(back.table.counts, t.counts);
    ASSERT_EQ(back.probes.size(), e.probes.size());
    for (std::size_t m = 0; m < e.size(); ++m) EXPECT_EQ(back.probes[m], e.probes[m]);  // bit-exact
    ASSERT_EQ(back.metadata.size(), 2u);
    EXPECT_EQ(back.metadata[1].first, "beta");
    EXPECT_EQ(back.metadata[1].second, "-0.7");
}

TEST(FrequencyCsv, ReportsLineAndColumn) {
    auto parse = [](const std::string& s) {
        std::istringstream is(s);
        return read_frequency_csv(is);
    };
    const std::string h = kFrequencyCsvHeader + "\n";
    try {
        parse(h + "0,0.5,0.5,100,10\n1,0.5,abc,100,3\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_EQ(e.column(), 7u);
    }
    try {
        parse(h + "0,0.5,0.5,100,101\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_EQ(e.column(), 15u);
    }
    EXPECT_THROW(parse("a,b,c\n"), ParseError);
    EXPECT_THROW(parse(h), ParseError);
    EXPECT_THROW(parse(h + "0,0.5,0.5,100\n"), ParseError);
    EXPECT_THROW(parse(h + "3,0.5,0.5,100,1\n"), ParseError);
}

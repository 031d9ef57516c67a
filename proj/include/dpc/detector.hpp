#pragma once

// On/off detector behind a displacement, with imperfect mode matching and
// dark counts, plus Monte Carlo generation of click statistics for a set
// of coherent probes.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "dpc/fock.hpp"

namespace dpc {

inline constexpr double kMeasuredVisibility = 0.991;
inline constexpr double kDarkCountRateHz = 310.0;
inline constexpr double kGateSeconds = 1e-6;
inline constexpr double kMeasuredDarkProb = kDarkCountRateHz * kGateSeconds;
inline constexpr long kDefaultShots = 50'000;
inline constexpr double kMinCapturedProbability = 0.95;

struct DetectorModel {
    Complex beta{0.0, 0.0};
    double visibility = 1.0;
    double dark_prob = 0.0;
    double loss_eta = 1.0;

    static DetectorModel ideal(Complex beta) { return {beta, 1.0, 0.0, 1.0}; }

    void validate() const {
        if (!std::isfinite(beta.real()) || !std::isfinite(beta.imag())) throw InvalidInput("detector: non-finite beta");
        if (!(visibility >= 0.0 && visibility <= 1.0)) throw InvalidInput("detector: visibility must be in [0, 1]");
        if (!(dark_prob >= 0.0 && dark_prob < 1.0)) throw InvalidInput("detector: dark_prob must be in [0, 1)");
        if (!(loss_eta > 0.0 && loss_eta <= 1.0)) throw InvalidInput("detector: loss_eta must be in (0, 1]");
    }
};

struct ProbeEnsemble {
    std::vector<Complex> probes;
    long shots_per_probe = kDefaultShots;
    long truncation_dim = 4;
    std::uint64_t seed = 0;

    std::size_t size() const { return probes.size(); }

    void validate() const {
        if (probes.empty()) throw InvalidInput("probe ensemble is empty");
        if (shots_per_probe < 1) throw InvalidInput("probe ensemble: shots_per_probe must be positive");
        detail::require_dim(truncation_dim, 1, "probe ensemble");
        for (const auto& a : probes) {
            const double captured = coherent_vector(a, truncation_dim).captured_probability;
            if (captured < kMinCapturedProbability) {
                throw InvalidInput("probe |alpha|^2 = " + std::to_string(std::norm(a)) + " keeps only " +
                                   std::to_string(captured) + " of its weight in dimension " +
                                   std::to_string(truncation_dim));
            }
        }
    }
};

/// Outcome counts; column 0 is "+" (no click), column 1 is "-" (click).
struct FrequencyTable {
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, 2> counts;

    std::size_t size() const { return static_cast<std::size_t>(counts.rows()); }
    std::int64_t shots(std::size_t m) const { return counts(m, 0) + counts(m, 1); }
    std::int64_t clicks(std::size_t m) const { return counts(m, 1); }

    Eigen::MatrixXd as_real() const { return counts.cast<double>(); }
};

inline const std::vector<double>& default_mean_photon_numbers() {
    static const std::vector<double> v{0.25, 0.5, 1.0, 1.25};
    return v;
}

/// 4 mean photon numbers x phases {pi/4, 3pi/4, 5pi/4, 7pi/4}.
inline ProbeEnsemble default_probe_ensemble(long dim = 4, long shots = kDefaultShots, std::uint64_t seed = 0,
                                            const std::vector<double>& mean_photons = default_mean_photon_numbers()) {
    ProbeEnsemble e;
    e.shots_per_probe = shots;
    e.truncation_dim = dim;
    e.seed = seed;
    for (double n : mean_photons) {
        for (int k = 0; k < 4; ++k) {
            e.probes.push_back(std::polar(std::sqrt(n), (2 * k + 1) * std::numbers::pi / 4.0));
        }
    }
    e.validate();
    return e;
}

/// Probability of a click for coherent input alpha. The displacement
/// interferes with the signal through a cross-term scaled by the visibility,
/// the combined field is attenuated by loss_eta, and a dark count clicks
/// independently of the optical field.
inline double click_probability(const DetectorModel& model, Complex alpha) {
    model.validate();
    if (!std::isfinite(alpha.real()) || !std::isfinite(alpha.imag())) throw InvalidInput("click_probability: non-finite alpha");
    const double nbar = std::max(
        0.0, std::norm(alpha) + std::norm(model.beta) + 2.0 * model.visibility * (alpha * std::conj(model.beta)).real());
    return 1.0 - (1.0 - model.dark_prob) * std::exp(-model.loss_eta * nbar);
}

/// Amplitude to prepare so that after linear efficiency eta the field
/// reaching the detector is `alpha_physical`; with probes and displacement
/// both rescaled, a lossy detector reproduces the unit-efficiency statistics.
inline Complex loss_rescale(Complex alpha_physical, double eta) {
    if (!(eta > 0.0 && eta <= 1.0)) throw InvalidInput("loss_rescale: eta must be in (0, 1]");
    return alpha_physical / std::sqrt(eta);
}

namespace detail {

inline std::mt19937_64 probe_stream(std::uint64_t seed, std::size_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(std::uint64_t(index) >> 32)};
    return std::mt19937_64(seq);
}

// 53-bit uniform in [0, 1), identical on every standard library.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

/// Click count for probe m, drawn from its own stream seeded by (seed, m).
inline std::int64_t simulate_probe_clicks(const DetectorModel& model, const ProbeEnsemble& ensemble, std::size_t m) {
    if (m >= ensemble.size()) throw InvalidInput("simulate_probe_clicks: probe index out of range");
    const double p = click_probability(model, ensemble.probes[m]);
    auto rng = detail::probe_stream(ensemble.seed, m);
    std::int64_t clicks = 0;
    for (long s = 0; s < ensemble.shots_per_probe; ++s) clicks += detail::unit_uniform(rng) < p ? 1 : 0;
    return clicks;
}

/// Draws shots_per_probe Bernoulli trials per probe. Rows are independent
/// of the order (or thread) in which probes are visited.
inline FrequencyTable simulate_frequency_table(const DetectorModel& model, const ProbeEnsemble& ensemble) {
    model.validate();
    ensemble.validate();
    FrequencyTable t;
    t.counts.resize(static_cast<long>(ensemble.size()), 2);
    for (std::size_t m = 0; m < ensemble.size(); ++m) {
        const std::int64_t clicks = simulate_probe_clicks(model, ensemble, m);
        t.counts(m, 0) = ensemble.shots_per_probe - clicks;
        t.counts(m, 1) = clicks;
    }
    return t;
}

/// shots * (1 - p, p) per probe, without sampling.
inline Eigen::MatrixXd expected_frequencies(const DetectorModel& model, const ProbeEnsemble& ensemble) {
    Eigen::MatrixXd f(static_cast<long>(ensemble.size()), 2);
    for (std::size_t m = 0; m < ensemble.size(); ++m) {
        const double p = click_probability(model, ensemble.probes[m]);
        f(m, 0) = ensemble.shots_per_probe * (1.0 - p);
        f(m, 1) = ensemble.shots_per_probe * p;
    }
    return f;
}

// ------------------------------------------------------------------- CSV

inline const std::string kFrequencyCsvHeader = "probe_index,re_alpha,im_alpha,shots,clicks";

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

using Metadata = std::vector<std::pair<std::string, std::string>>;

/// Metadata goes first as "# key = value" lines; readers skip them.
inline void write_frequency_csv(std::ostream& os, const ProbeEnsemble& ensemble, const FrequencyTable& table,
                                const Metadata& metadata = {}) {
    if (table.size() != ensemble.size()) throw InvalidInput("frequency table and ensemble disagree on probe count");
    for (const auto& [k, v] : metadata) os << "# " << k << " = " << v << '\n';
    os << kFrequencyCsvHeader << '\n';
    for (std::size_t m = 0; m < table.size(); ++m) {
        os << m << ',' << format_double(ensemble.probes[m].real()) << ',' << format_double(ensemble.probes[m].imag())
           << ',' << table.shots(m) << ',' << table.clicks(m) << '\n';
    }
}

struct FrequencyCsv {
    std::vector<Complex> probes;
    FrequencyTable table;
    Metadata metadata;
};

namespace detail {

template <class T>
T parse_field(const std::string& field, std::size_t line, std::size_t column, const char* name) {
    T v{};
    const auto* end = field.data() + field.size();
    const auto res = std::from_chars(field.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end) {
        throw ParseError(std::string("cannot parse ") + name + " from '" + field + "'", line, column);
    }
    return v;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

inline FrequencyCsv read_frequency_csv(std::istream& is) {
    FrequencyCsv out;
    std::vector<std::array<std::int64_t, 2>> rows;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq != std::string::npos) {
                out.metadata.emplace_back(detail::trim(line.substr(1, eq - 1)), detail::trim(line.substr(eq + 1)));
            }
            continue;
        }
        if (!have_header) {
            if (line != kFrequencyCsvHeader) throw ParseError("expected header '" + kFrequencyCsvHeader + "'", lineno, 1);
            have_header = true;
            continue;
        }
        std::vector<std::string> fields;
        std::vector<std::size_t> columns;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            fields.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
            columns.push_back(start + 1);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 5) {
            throw ParseError("expected 5 fields, found " + std::to_string(fields.size()), lineno, 1);
        }
        const auto index = detail::parse_field<std::int64_t>(fields[0], lineno, columns[0], "probe_index");
        if (index != static_cast<std::int64_t>(rows.size())) {
            throw ParseError("probe_index out of sequence", lineno, columns[0]);
        }
        const auto re = detail::parse_field<double>(fields[1], lineno, columns[1], "re_alpha");
        const auto im = detail::parse_field<double>(fields[2], lineno, columns[2], "im_alpha");
        const auto shots = detail::parse_field<std::int64_t>(fields[3], lineno, columns[3], "shots");
        const auto clicks = detail::parse_field<std::int64_t>(fields[4], lineno, columns[4], "clicks");
        if (shots < 1) throw ParseError("shots must be positive", lineno, columns[3]);
        if (clicks < 0 || clicks > shots) throw ParseError("clicks must lie in [0, shots]", lineno, columns[4]);
        out.probes.emplace_back(re, im);
        rows.push_back({shots - clicks, clicks});
    }
    if (!have_header) throw ParseError("missing header", lineno + 1, 1);
    if (rows.empty()) throw ParseError("no data rows", lineno + 1, 1);
    out.table.counts.resize(static_cast<long>(rows.size()), 2);
    for (std::size_t m = 0; m < rows.size(); ++m) {
        out.table.counts(m, 0) = rows[m][0];
        out.table.counts(m, 1) = rows[m][1];
    }
    return out;
}

}  // namespace dpc

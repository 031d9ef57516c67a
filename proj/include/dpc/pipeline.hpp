#pragma once

// End-to-end commands behind the dpc executable. Each command takes a
// RunConfig, writes its artifacts under RunConfig::out and returns the
// in-memory results. Every artifact carries the effective configuration:
// CSVs as leading "# key = value" lines, JSON documents under "config".

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dpc/detector.hpp"
#include "dpc/metrics.hpp"
#include "dpc/povm_io.hpp"
#include "dpc/receivers.hpp"
#include "dpc/tomography.hpp"

namespace dpc {

inline const std::vector<double>& default_sweep_betas() {
    static const std::vector<double> v{-0.85, -0.78, -0.71, -0.63, -0.56};
    return v;
}

inline constexpr double kDefaultSimulateBeta = -0.70;

struct RunConfig {
    std::vector<double> betas;  // empty: command default
    long shots = kDefaultShots;
    int reps = 5;
    long dim = 4;
    double visibility = 1.0;
    double dark_prob = 0.0;
    std::uint64_t seed = 0;
    std::filesystem::path out = ".";
    long max_iterations = 100'000;
    double tolerance = 1e-8;
    int jobs = 0;  // sweep worker threads; 0 picks the hardware count

    void validate() const {
        if (shots < 1) throw InvalidInput("shots must be >= 1");
        if (reps < 1) throw InvalidInput("reps must be >= 1");
        if (dim < 2) throw InvalidInput("dim must be >= 2");
        if (jobs < 0) throw InvalidInput("jobs must be >= 0");
        for (double b : betas) {
            if (!std::isfinite(b)) throw InvalidInput("beta must be finite");
        }
        model(0.0).validate();
        ml().validate();
    }

    DetectorModel model(double beta) const { return {Complex(beta, 0.0), visibility, dark_prob, 1.0}; }

    MlConfig ml() const {
        MlConfig c;
        c.max_iterations = max_iterations;
        c.convergence_tol = tolerance;
        return c;
    }

    ProbeEnsemble ensemble(std::uint64_t run_seed) const { return default_probe_ensemble(dim, shots, run_seed); }
};

// -------------------------------------------------------------- config echo

inline std::string format_beta_list(const std::vector<double>& betas) {
    std::string s = "[";
    for (std::size_t i = 0; i < betas.size(); ++i) s += (i ? ", " : "") + format_double(betas[i]);
    return s + "]";
}

/// Accepts "x" or "[x, y, ...]".
inline std::vector<double> parse_beta_list(const std::string& text) {
    std::string s = text;
    std::erase_if(s, [](char c) { return c == '[' || c == ']' || c == ' ' || c == '"'; });
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= s.size() && !s.empty()) {
        const std::size_t end = std::min(s.find(',', start), s.size());
        double v = 0.0;
        const auto res = std::from_chars(s.data() + start, s.data() + end, v);
        if (res.ec != std::errc() || res.ptr != s.data() + end) throw InvalidInput("cannot parse beta list '" + text + "'");
        out.push_back(v);
        start = end + 1;
    }
    return out;
}

/// Keys match the command-line flags, so the lines (without "# ") form a
/// valid --config file.
inline Metadata config_metadata(const RunConfig& c, const std::string& command, const std::vector<double>& betas) {
    return {{"command", command},
            {"beta", format_beta_list(betas)},
            {"shots", std::to_string(c.shots)},
            {"reps", std::to_string(c.reps)},
            {"dim", std::to_string(c.dim)},
            {"visibility", format_double(c.visibility)},
            {"dark-prob", format_double(c.dark_prob)},
            {"seed", std::to_string(c.seed)},
            {"max-iterations", std::to_string(c.max_iterations)},
            {"tolerance", format_double(c.tolerance)}};
}

inline Json config_json(const RunConfig& c, const std::string& command, const std::vector<double>& betas) {
    return {{"command", command},       {"beta", betas},           {"shots", c.shots},
            {"reps", c.reps},           {"dim", c.dim},            {"visibility", c.visibility},
            {"dark-prob", c.dark_prob}, {"seed", c.seed},          {"max-iterations", c.max_iterations},
            {"tolerance", c.tolerance}, {"out", c.out.string()}};
}

// ---------------------------------------------------------------------- I/O

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory (" + ec.message() + ")", path.parent_path().string());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing", path.string());
    return os;
}

inline void finish_output(std::ofstream& os, const std::filesystem::path& path) {
    os.flush();
    if (!os) throw IoError("write failed", path.string());
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading", path.string());
    return is;
}

template <class Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
    auto os = open_output(path);
    writer(os);
    finish_output(os, path);
}

inline void write_json_file(const std::filesystem::path& path, const Json& doc) {
    write_file(path, [&](std::ostream& os) { os << doc.dump(2) << '\n'; });
}

inline void write_config_file(const std::filesystem::path& path, const Metadata& metadata) {
    write_file(path, [&](std::ostream& os) {
        for (const auto& [k, v] : metadata) os << k << " = " << (k == "command" ? '"' + v + '"' : v) << '\n';
    });
}

// -------------------------------------------------------------------- theory

inline std::vector<TheoryRow> cmd_theory(const RunConfig& c) {
    c.validate();
    const auto grid = c.betas.empty() ? linear_grid(-1.5, 0.0, 201) : c.betas;
    const auto rows = theory_curves(grid, c.model(0.0), c.dim);
    write_file(c.out / "theory.csv",
               [&](std::ostream& os) { write_theory_csv(os, rows, config_metadata(c, "theory", c.betas)); });
    if (c.betas.size() == 1) {
        const PovmSet reference = truncate_povm(imperfect_kennedy_povm(c.model(c.betas[0]), c.dim), 2);
        Json meta = config_json(c, "theory", c.betas);
        meta["source"] = to_string(PovmSource::Analytic);
        write_file(c.out / "reference_povm.json", [&](std::ostream& os) { write_povm_json(os, reference, meta); });
    }
    return rows;
}

// ------------------------------------------------------------------ simulate

inline double single_beta(const RunConfig& c, double fallback) {
    if (c.betas.size() > 1) throw InvalidInput("this command takes a single --beta");
    return c.betas.empty() ? fallback : c.betas[0];
}

struct SimulationRun {
    ProbeEnsemble ensemble;
    FrequencyTable table;
    Metadata metadata;
};

inline SimulationRun simulate_run(const RunConfig& c, double beta, std::uint64_t run_seed) {
    RunConfig echo = c;
    echo.seed = run_seed;
    SimulationRun r{c.ensemble(run_seed), {}, config_metadata(echo, "simulate", {beta})};
    r.ensemble.validate();
    r.table = simulate_frequency_table(c.model(beta), r.ensemble);
    return r;
}

inline void write_simulation(const std::filesystem::path& dir, const SimulationRun& r) {
    write_file(dir / "frequencies.csv",
               [&](std::ostream& os) { write_frequency_csv(os, r.ensemble, r.table, r.metadata); });
    write_config_file(dir / "frequencies.ini", r.metadata);
}

inline SimulationRun cmd_simulate(const RunConfig& c) {
    c.validate();
    auto r = simulate_run(c, single_beta(c, kDefaultSimulateBeta), c.seed);
    write_simulation(c.out, r);
    return r;
}

// --------------------------------------------------------------- reconstruct

struct Evaluation {
    DiscriminationReport discrimination;
    std::optional<FidelityReport> fidelity;  // present when the nominal beta is known
    std::optional<double> pe_ideal;
    std::optional<double> pe_imperfect;
};

/// Fidelities use the ideal Kennedy pair at the nominal beta as reference.
inline Evaluation evaluate_povm(const PovmSet& povm2, std::optional<double> beta, PovmSource source,
                                const RunConfig& c) {
    Evaluation e;
    e.discrimination = discrimination_error(povm2, Complex(beta.value_or(0.0), 0.0), source);
    if (beta) {
        const Complex b(*beta, 0.0);
        e.fidelity = povm_fidelity(povm2, truncate_povm(kennedy_povm({b}, std::max<long>(c.dim, 2)), 2));
        e.pe_ideal = kennedy_error({b});
        e.pe_imperfect =
            discrimination_error(truncate_povm(imperfect_kennedy_povm(c.model(*beta), std::max<long>(c.dim, 2)), 2))
                .p_error;
    }
    return e;
}

inline Json to_json(const Evaluation& e) {
    const auto& d = e.discrimination;
    Json j = {{"discrimination",
               {{"p_error", d.p_error},
                {"p_error_plus_given_minus", d.p_error_plus_given_minus},
                {"p_error_minus_given_plus", d.p_error_minus_given_plus},
                {"beta_nominal", {d.beta_nominal.real(), d.beta_nominal.imag()}},
                {"source", to_string(d.source)}}}};
    if (e.fidelity) j["fidelity"] = {{"f_plus", e.fidelity->f_plus}, {"f_minus", e.fidelity->f_minus}};
    if (e.pe_ideal) j["theory"] = {{"pe_ideal", *e.pe_ideal}, {"pe_imperfect", *e.pe_imperfect}};
    return j;
}

inline Json to_json(const MlReport& r) {
    return {{"iterations_run", r.iterations_run},
            {"converged", r.converged},
            {"final_log_likelihood", r.final_log_likelihood},
            {"max_constraint_violation", r.max_constraint_violation},
            {"constraints_ok", r.constraints_ok},
            {"damped_steps", r.damped_steps},
            {"probed_support_dim", r.probed_support_dim},
            {"log_likelihood_trace", r.log_likelihood_trace}};
}

struct Reconstruction {
    MlResult ml;
    PovmSet qubit;
    std::optional<double> beta;
    Evaluation evaluation;
};

inline Reconstruction reconstruct_table(const RunConfig& c, const std::vector<Complex>& probes,
                                        const FrequencyTable& table, std::optional<double> beta) {
    ProbeEnsemble ens;
    ens.probes = probes;
    ens.truncation_dim = c.dim;
    ens.shots_per_probe = std::max<long>(1, table.size() ? table.shots(0) : 1);
    ens.validate();
    Reconstruction r;
    r.ml = ml_reconstruct(probe_density_matrices(ens), table.as_real(), c.ml());
    r.qubit = truncate_povm(r.ml.povm, 2);
    r.beta = beta;
    r.evaluation = evaluate_povm(r.qubit, beta, PovmSource::Reconstructed, c);
    return r;
}

inline void write_reconstruction(const std::filesystem::path& dir, const Reconstruction& r, const Json& config) {
    Json meta = config;
    meta["source"] = to_string(PovmSource::Reconstructed);
    if (r.beta) meta["beta"] = std::vector<double>{*r.beta};
    write_file(dir / "povm.json", [&](std::ostream& os) { write_povm_json(os, r.ml.povm, meta); });
    write_file(dir / "povm_qubit.json", [&](std::ostream& os) { write_povm_json(os, r.qubit, meta); });
    Json report = to_json(r.ml.report);
    report.update(to_json(r.evaluation));
    report["config"] = config;
    write_json_file(dir / "ml_report.json", report);
}

inline std::optional<double> beta_from_metadata(const Metadata& metadata) {
    for (const auto& [k, v] : metadata) {
        if (k != "beta") continue;
        const auto list = parse_beta_list(v);
        if (list.size() == 1) return list[0];
    }
    return std::nullopt;
}

/// Reads a frequency CSV. The nominal beta comes from --beta, else from
/// the CSV header.
inline Reconstruction cmd_reconstruct(const RunConfig& c, const std::filesystem::path& input) {
    c.validate();
    auto is = open_input(input);
    FrequencyCsv csv;
    try {
        csv = read_frequency_csv(is);
    } catch (const ParseError& e) {
        throw e.in(input.string());
    }
    std::optional<double> beta = beta_from_metadata(csv.metadata);
    if (!c.betas.empty()) beta = single_beta(c, 0.0);
    auto r = reconstruct_table(c, csv.probes, csv.table, beta);
    Json config = config_json(c, "reconstruct", c.betas);
    config["input"] = input.string();
    write_reconstruction(c.out, r, config);
    return r;
}

// ------------------------------------------------------------------ evaluate

inline Evaluation cmd_evaluate(const RunConfig& c, const std::filesystem::path& input) {
    c.validate();
    auto is = open_input(input);
    PovmDocument doc;
    try {
        doc = read_povm_json(is);
    } catch (const ParseError& e) {
        throw e.in(input.string());
    } catch (const SchemaError& e) {
        throw SchemaError(input.string() + ": " + e.what());
    }
    if (doc.povm.dim < 2) throw InvalidInput(input.string() + ": povm dimension must be >= 2");
    if (doc.povm.size() != 2) throw SchemaError(input.string() + ": expected a two-outcome povm");
    doc.povm.index_of(kPlus);
    doc.povm.index_of(kMinus);

    std::optional<double> beta;
    if (!c.betas.empty()) {
        beta = single_beta(c, 0.0);
    } else if (doc.metadata.is_object() && doc.metadata.contains("beta")) {
        const Json& b = doc.metadata["beta"];
        if (b.is_number()) beta = b.get<double>();
        if (b.is_array() && b.size() == 1 && b[0].is_number()) beta = b[0].get<double>();
    }
    const bool analytic = doc.metadata.is_object() && doc.metadata.value("source", "") == to_string(PovmSource::Analytic);
    const auto source = analytic ? PovmSource::Analytic : PovmSource::Reconstructed;
    const auto e = evaluate_povm(truncate_povm(doc.povm, 2), beta, source, c);

    Json out = to_json(e);
    Json config = config_json(c, "evaluate", c.betas);
    config["input"] = input.string();
    out["config"] = config;
    write_json_file(c.out / "evaluation.json", out);
    return e;
}

// --------------------------------------------------------------------- sweep

struct CellResult {
    double beta = 0.0;
    int rep = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    long iterations = 0;
    bool converged = false;
    double p_error = NAN;
    double f_plus = NAN;
    double f_minus = NAN;
    double max_likelihood_drop = 0.0;  // largest decrease between consecutive iterations
    PovmDiagnostics diagnostics;
};

inline double max_likelihood_drop(const std::vector<double>& trace) {
    double drop = 0.0;
    for (std::size_t i = 1; i < trace.size(); ++i) drop = std::max(drop, trace[i - 1] - trace[i]);
    return drop;
}

struct SweepRow {
    double beta = 0.0;
    int cells_ok = 0;
    double pe_mean = NAN;
    std::optional<double> pe_std;  // sample standard deviation; needs two successful cells
    double f_plus_mean = NAN;
    double f_minus_mean = NAN;
    double pe_ideal = NAN;
    double pe_imperfect = NAN;
    double pe_homodyne = NAN;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    std::vector<CellResult> cells;
    bool all_ok() const {
        return std::all_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.ok; });
    }
};

inline std::filesystem::path cell_directory(const std::filesystem::path& out, std::size_t beta_index, int rep) {
    return out / "cells" / ("beta" + std::to_string(beta_index) + "_rep" + std::to_string(rep));
}

/// One (beta, repetition) cell end to end. Failures are recorded in the
/// result rather than thrown.
inline CellResult run_cell(const RunConfig& c, double beta, int rep, const std::filesystem::path* dir) {
    CellResult cell;
    cell.beta = beta;
    cell.rep = rep;
    cell.seed = c.seed + static_cast<std::uint64_t>(rep);
    try {
        const auto sim = simulate_run(c, beta, cell.seed);
        const auto rec = reconstruct_table(c, sim.ensemble.probes, sim.table, beta);
        cell.iterations = rec.ml.report.iterations_run;
        cell.converged = rec.ml.report.converged;
        cell.p_error = rec.evaluation.discrimination.p_error;
        cell.f_plus = rec.evaluation.fidelity->f_plus;
        cell.f_minus = rec.evaluation.fidelity->f_minus;
        cell.max_likelihood_drop = max_likelihood_drop(rec.ml.report.log_likelihood_trace);
        cell.diagnostics = diagnose(rec.ml.povm);
        if (dir) {
            write_simulation(*dir, sim);
            RunConfig echo = c;
            echo.seed = cell.seed;
            Json config = config_json(echo, "reconstruct", {beta});
            config["input"] = (*dir / "frequencies.csv").string();
            write_reconstruction(*dir, rec, config);
        }
        cell.ok = cell.converged;
        if (!cell.converged) cell.error = "no convergence within max-iterations";
    } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
    }
    return cell;
}

inline SweepReport run_sweep(const RunConfig& c, bool write_files) {
    c.validate();
    const auto betas = c.betas.empty() ? default_sweep_betas() : c.betas;
    const std::size_t n_cells = betas.size() * static_cast<std::size_t>(c.reps);
    SweepReport report;
    report.cells.resize(n_cells);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < n_cells; k = next++) {
            const std::size_t b = k / static_cast<std::size_t>(c.reps);
            const int rep = static_cast<int>(k % static_cast<std::size_t>(c.reps));
            const auto dir = cell_directory(c.out, b, rep);
            report.cells[k] = run_cell(c, betas[b], rep, write_files ? &dir : nullptr);
        }
    };
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t n_threads = std::min<std::size_t>(c.jobs > 0 ? static_cast<std::size_t>(c.jobs) : hw, n_cells);
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
        worker();
    }

    const auto theory = theory_curves(betas, c.model(0.0), c.dim);
    for (std::size_t b = 0; b < betas.size(); ++b) {
        SweepRow row;
        row.beta = betas[b];
        row.pe_ideal = theory[b].pe_ideal;
        row.pe_imperfect = theory[b].pe_imperfect;
        row.pe_homodyne = theory[b].pe_homodyne;
        std::vector<const CellResult*> good;
        for (int rep = 0; rep < c.reps; ++rep) {
            const auto& cell = report.cells[b * static_cast<std::size_t>(c.reps) + static_cast<std::size_t>(rep)];
            if (cell.ok) good.push_back(&cell);
        }
        row.cells_ok = static_cast<int>(good.size());
        if (!good.empty()) {
            const double n = static_cast<double>(good.size());
            double pe = 0.0, fp = 0.0, fm = 0.0;
            for (const auto* g : good) pe += g->p_error, fp += g->f_plus, fm += g->f_minus;
            row.pe_mean = pe / n;
            row.f_plus_mean = fp / n;
            row.f_minus_mean = fm / n;
            if (good.size() >= 2) {
                double ss = 0.0;
                for (const auto* g : good) ss += (g->p_error - row.pe_mean) * (g->p_error - row.pe_mean);
                row.pe_std = std::sqrt(ss / (n - 1.0));
            }
        }
        report.rows.push_back(row);
    }
    return report;
}

inline std::string format_optional(double v) { return std::isfinite(v) ? format_double(v) : ""; }

inline void write_sweep_csv(std::ostream& os, const SweepReport& r, const Metadata& metadata) {
    for (const auto& [k, v] : metadata) os << "# " << k << " = " << v << '\n';
    os << "beta,cells_ok,pe_mean,pe_std,pe_ideal,pe_imperfect,pe_homodyne,f_plus_mean,f_minus_mean\n";
    for (const auto& row : r.rows) {
        os << format_double(row.beta) << ',' << row.cells_ok << ',' << format_optional(row.pe_mean) << ','
           << (row.pe_std ? format_double(*row.pe_std) : "") << ',' << format_double(row.pe_ideal) << ','
           << format_double(row.pe_imperfect) << ',' << format_double(row.pe_homodyne) << ','
           << format_optional(row.f_plus_mean) << ',' << format_optional(row.f_minus_mean) << '\n';
    }
}

inline void write_cells_csv(std::ostream& os, const SweepReport& r, const Metadata& metadata) {
    for (const auto& [k, v] : metadata) os << "# " << k << " = " << v << '\n';
    os << "beta,rep,seed,ok,converged,iterations,p_error,f_plus,f_minus,error\n";
    for (const auto& c : r.cells) {
        std::string err = c.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        os << format_double(c.beta) << ',' << c.rep << ',' << c.seed << ',' << (c.ok ? 1 : 0) << ','
           << (c.converged ? 1 : 0) << ',' << c.iterations << ',' << format_optional(c.p_error) << ','
           << format_optional(c.f_plus) << ',' << format_optional(c.f_minus) << ',' << err << '\n';
    }
}

inline SweepReport cmd_sweep(const RunConfig& c) {
    auto report = run_sweep(c, true);
    const auto betas = c.betas.empty() ? default_sweep_betas() : c.betas;
    const auto meta = config_metadata(c, "sweep", betas);
    write_file(c.out / "sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, report, meta); });
    write_file(c.out / "cells.csv", [&](std::ostream& os) { write_cells_csv(os, report, meta); });
    return report;
}

}  // namespace dpc

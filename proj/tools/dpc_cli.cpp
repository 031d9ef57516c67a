// Command-line front end for the commands in dpc/pipeline.hpp.

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "dpc/pipeline.hpp"

namespace {

void print_evaluation(const dpc::Evaluation& e) {
    std::cout << "p_error " << e.discrimination.p_error << '\n';
    if (e.fidelity) std::cout << "fidelity_plus " << e.fidelity->f_plus << "\nfidelity_minus " << e.fidelity->f_minus << '\n';
    if (e.pe_ideal) std::cout << "pe_ideal " << *e.pe_ideal << "\npe_imperfect " << *e.pe_imperfect << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    dpc::RunConfig cfg;
    std::string out = cfg.out.string();
    std::string input;

    CLI::App app{"Displacement photon counter toolkit"};
    app.require_subcommand(1);
    app.allow_config_extras(CLI::config_extras_mode::ignore);
    app.set_config("--config", "", "Flat key = value file mirroring the flags");
    app.add_option("--beta", cfg.betas, "Displacement amplitude(s); repeat for a list")->allow_extra_args(false);
    app.add_option("--shots", cfg.shots, "Shots per probe")->capture_default_str();
    app.add_option("--reps", cfg.reps, "Repetitions per beta in a sweep")->capture_default_str();
    app.add_option("--dim", cfg.dim, "Fock truncation dimension")->capture_default_str();
    app.add_option("--visibility", cfg.visibility, "Interference visibility")->capture_default_str();
    app.add_option("--dark-prob", cfg.dark_prob, "Dark-count probability per gate")->capture_default_str();
    app.add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
    app.add_option("--out", out, "Output directory")->capture_default_str();
    app.add_option("--max-iterations", cfg.max_iterations, "ML iteration limit")->capture_default_str();
    app.add_option("--tolerance", cfg.tolerance, "ML convergence tolerance")->capture_default_str();
    app.add_option("--jobs", cfg.jobs, "Sweep worker threads (0: all cores)")->capture_default_str();

    auto* theory = app.add_subcommand("theory", "Ideal, imperfect and homodyne error curves");
    auto* simulate = app.add_subcommand("simulate", "Simulate click counts for the probe ensemble");
    auto* reconstruct = app.add_subcommand("reconstruct", "Maximum-likelihood POVM from a frequency CSV");
    auto* evaluate = app.add_subcommand("evaluate", "Error probability and fidelities of a POVM document");
    auto* sweep = app.add_subcommand("sweep", "Simulate, reconstruct and evaluate over betas and repetitions");
    reconstruct->add_option("--in", input, "Frequency CSV")->required();
    evaluate->add_option("--in", input, "POVM JSON document")->required();
    for (auto* sub : {theory, simulate, reconstruct, evaluate, sweep}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);
    cfg.out = out;

    try {
        if (theory->parsed()) {
            const auto rows = dpc::cmd_theory(cfg);
            std::cout << "wrote " << rows.size() << " rows to " << (cfg.out / "theory.csv").string() << '\n';
        } else if (simulate->parsed()) {
            const auto run = dpc::cmd_simulate(cfg);
            std::cout << "wrote " << run.table.size() << " probes to " << (cfg.out / "frequencies.csv").string() << '\n';
        } else if (reconstruct->parsed()) {
            const auto rec = dpc::cmd_reconstruct(cfg, input);
            const auto& rep = rec.ml.report;
            std::cout << "iterations " << rep.iterations_run << "\nconverged " << (rep.converged ? "yes" : "no")
                      << "\nlog_likelihood " << rep.final_log_likelihood << '\n';
            print_evaluation(rec.evaluation);
            if (!rep.converged) {
                std::cerr << "error: no convergence within " << cfg.max_iterations << " iterations (report kept in "
                          << (cfg.out / "ml_report.json").string() << ")\n";
                return 1;
            }
            if (!rep.constraints_ok) {
                std::cerr << "error: POVM constraints violated by " << rep.max_constraint_violation << '\n';
                return 1;
            }
        } else if (evaluate->parsed()) {
            print_evaluation(dpc::cmd_evaluate(cfg, input));
        } else if (sweep->parsed()) {
            const auto report = dpc::cmd_sweep(cfg);
            for (const auto& row : report.rows) {
                std::cout << "beta " << row.beta << "  ok " << row.cells_ok << "/" << cfg.reps << "  pe_mean "
                          << row.pe_mean << "  pe_std " << (row.pe_std ? std::to_string(*row.pe_std) : "-")
                          << "  pe_ideal " << row.pe_ideal << '\n';
            }
            for (const auto& cell : report.cells) {
                if (!cell.ok) std::cerr << "cell beta=" << cell.beta << " rep=" << cell.rep << " failed: " << cell.error << '\n';
            }
            if (!report.all_ok()) return 1;
        }
    } catch (const dpc::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return EXIT_SUCCESS;
}

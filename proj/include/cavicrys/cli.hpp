#pragma once

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cavicrys/config.hpp"
#include "cavicrys/output.hpp"
#include "cavicrys/selftest.hpp"
#include "cavicrys/sweeps.hpp"

namespace cavicrys {

namespace clidetail {

inline RunConfig load_config(const std::string& path) {
    if (path.empty()) return parse_config("");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

inline void emit(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open output file '" + path + "'");
    out << text;
}

struct CommonFlags {
    std::string config_path;
    std::string mode;
    std::string method;
    std::string out_path;
    std::string format;
    long long seed = -1;

    void attach(CLI::App* sub) {
        sub->add_option("--config", config_path, "config file (key = value sections)");
        sub->add_option("--mode", mode, "transverse mode as two digits MN");
        sub->add_option("--method", method, "integration method")
            ->check(CLI::IsMember({"averaged", "oscillatory", "mc"}));
        sub->add_option("--out", out_path, "output path (default stdout)");
        sub->add_option("--format", format, "output format")
            ->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--seed", seed, "base random seed");
    }

    RunConfig resolve() const {
        RunConfig cfg = load_config(config_path);
        if (!mode.empty()) cfg.modes = {parse_mode_label(mode)};
        if (method == "averaged") cfg.coupling.method = CouplingMethod::PhaseAveraged;
        else if (method == "oscillatory") cfg.coupling.method = CouplingMethod::Oscillatory;
        else if (method == "mc") cfg.coupling.method = CouplingMethod::MonteCarlo;
        if (!out_path.empty()) cfg.out_path = out_path;
        if (format == "csv") cfg.format = OutputFormat::Csv;
        else if (format == "json") cfg.format = OutputFormat::Json;
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
        return cfg;
    }
};

}  // namespace clidetail

/// Entry point behind the cavicrys binary; exposed for in-process tests.
/// Exit status: 0 success, 1 usage/config error, 2 computation/fit error.
inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"coupling of optical-cavity transverse modes to ion Coulomb crystals"};
    app.require_subcommand(1);

    clidetail::CommonFlags coupling_flags, sweep_flags, synth_flags;
    CLI::App* coupling_cmd =
        app.add_subcommand("coupling", "compute one collective coupling rate");
    coupling_flags.attach(coupling_cmd);
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "run the configured sweep");
    sweep_flags.attach(sweep_cmd);
    CLI::App* synth_cmd = app.add_subcommand(
        "synth-fit", "end-to-end detuning pipeline: spectra, fits, (G, gamma)");
    synth_flags.attach(synth_cmd);
    app.add_subcommand("selftest", "run the built-in cross-validation suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "cavicrys: error: usage: " << e.what() << "\n";
        return 1;
    }

    try {
        if (coupling_cmd->parsed()) {
            RunConfig cfg = coupling_flags.resolve();
            cfg.coupling.mc_seed = cfg.seed;
            ModeIndex mode = cfg.modes.empty() ? ModeIndex{0, 0} : cfg.modes.front();
            CouplingResult r =
                compute_coupling(cfg.beam(), mode, cfg.crystal, cfg.coupling);
            clidetail::emit(coupling_result_json(r, cfg.precision), cfg.out_path);
        } else if (sweep_cmd->parsed() || synth_cmd->parsed()) {
            bool synth = synth_cmd->parsed();
            RunConfig cfg = synth ? synth_flags.resolve() : sweep_flags.resolve();
            if (synth) {
                cfg.kind = SweepKind::Detuning;
                cfg.end_to_end = true;
            }
            SweepRequest req = cfg.request();
            if (cfg.kind == SweepKind::Detuning) {
                DetuningSweepResult result = run_detuning_sweep(req);
                if (cfg.format == OutputFormat::Csv && !synth) {
                    std::ostringstream os;
                    write_detuning_csv(os, result, cfg.physics, cfg.precision);
                    clidetail::emit(os.str(), cfg.out_path);
                } else {
                    clidetail::emit(detuning_result_json(result, cfg.physics, cfg.precision),
                                    cfg.out_path);
                }
            } else {
                std::vector<SweepRecord> records = (cfg.kind == SweepKind::Displacement)
                                                       ? run_displacement_sweep(req)
                                                       : run_radius_sweep(req);
                if (cfg.format == OutputFormat::Json) {
                    clidetail::emit(sweep_records_json(records, cfg.precision),
                                    cfg.out_path);
                } else {
                    std::ostringstream os;
                    write_sweep_csv(os, records, cfg.precision);
                    clidetail::emit(os.str(), cfg.out_path);
                }
            }
        } else {  // selftest
            return run_selftest(std::cout) ? 0 : 2;
        }
    } catch (const ParseError& e) {
        std::cerr << "cavicrys: error: config: " << e.what() << "\n";
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "cavicrys: error: config: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "cavicrys: error: compute: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace cavicrys

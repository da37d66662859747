// rsctl: run one experiment config and write its artifacts.

#include "rsctl/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Regime-switching control toolkit"};
    std::string config_path;
    std::string out_dir;
    int threads = 1;
    bool verbose = false;
    app.add_option("--config", config_path, "experiment config (JSON)")->required();
    app.add_option("--out", out_dir, "output directory (defaults to the config's `output`)");
    app.add_option("--threads", threads, "worker threads; results do not depend on it")->check(CLI::PositiveNumber);
    app.add_flag("--verbose", verbose, "print the report to stdout");
    app.set_version_flag("--version", std::string(rsctl::kVersion));
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : rsctl::kExitConfig;
    }

    rsctl::ExperimentConfig cfg;
    try {
        cfg = rsctl::parse_config(rsctl::read_file(config_path));
    } catch (const rsctl::Error& e) {
        std::cerr << e.what() << '\n';
        return e.code() == rsctl::ErrorCode::Io ? rsctl::kExitSolver : rsctl::kExitConfig;
    }
    if (out_dir.empty()) out_dir = cfg.output;
    if (out_dir.empty()) {
        std::cerr << "E_CONFIG: no output directory (pass --out or set `output`)\n";
        return rsctl::kExitConfig;
    }

    rsctl::ExecOptions exec;
    exec.threads = threads;
    const rsctl::RunResult res = rsctl::run_command(cfg, exec);
    try {
        rsctl::write_outputs(cfg, res, out_dir);
    } catch (const rsctl::Error& e) {
        std::cerr << e.what() << '\n';
        return rsctl::kExitSolver;
    }
    if (verbose) std::cout << rsctl::report_text(cfg, res);
    for (const auto& e : res.errors) std::cerr << e << '\n';
    return res.status;
}

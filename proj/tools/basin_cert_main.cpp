// basin-cert: certify domains of attraction of asymptotically stable
// T-periodic solutions of dx/dt = eps*g(t,x,eps) and validate them with
// Poincaré-map experiments. See README.md for the config schema.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "basincert/config.hpp"
#include "basincert/pipeline.hpp"
#include "basincert/version.hpp"

namespace {

using namespace basincert;

Vec parse_point(const std::string& csv, int n) {
    Vec v;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        std::size_t comma = csv.find(',', pos);
        std::string tok = csv.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        try {
            v.push_back(std::stod(tok));
        } catch (...) {
            throw ConfigError("--at expects a comma-separated list of numbers");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (static_cast<int>(v.size()) != n)
        throw ConfigError("--at has dimension " + std::to_string(v.size()) + ", system needs " +
                          std::to_string(n));
    return v;
}

struct Cli {
    std::string config_path;
    std::string out_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> eps;
    std::string at;
    int threads = 1;
    bool timings = false;
    bool dump_trajectories = false;
};

// The --out override is routed through RunOptions, not the config, so
// the report's config echo does not depend on where it was written.
JobConfig load_job(const Cli& cli) {
    JobConfig cfg = load_config(cli.config_path);
    if (cli.seed) cfg.seed = *cli.seed;
    if (cli.eps) cfg.epsilons = {*cli.eps};
    return cfg;
}

void emit(const ojson& j, const std::string& out_path) {
    std::cout << j.dump(2) << "\n";
    if (!out_path.empty()) {
        std::ofstream f(out_path, std::ios::binary);
        if (!f) throw ConfigError("cannot write " + out_path);
        f << j.dump(2) << "\n";
    }
}

int cmd_average(const Cli& cli) {
    JobConfig cfg = load_job(cli);
    StandardSystem sys = build_system(cfg);
    Vec at = cli.at.empty() ? set_center(cfg.set) : parse_point(cli.at, sys.n);
    Vec g0 = average(sys, at);
    std::cout << ojson(g0).dump() << "\n";
    return 0;
}

int cmd_find_zero(const Cli& cli) {
    JobConfig cfg = load_job(cli);
    StandardSystem sys = build_system(cfg);
    Vec start = cli.at.empty() ? set_center(cfg.set) : parse_point(cli.at, sys.n);
    Vec v0 = find_zero(sys, start);
    emit(ojson{{"v0", v0}, {"residual", inf_norm(average(sys, v0))}}, cli.out_path);
    return 0;
}

int cmd_bogolubov(const Cli& cli) {
    JobConfig cfg = load_job(cli);
    StandardSystem sys = build_system(cfg);
    Vec v0 = cli.at.empty() ? find_zero(sys, set_center(cfg.set)) : parse_point(cli.at, sys.n);
    emit(to_json(bogolubov_check(sys, v0)), cli.out_path);
    return 0;
}

int cmd_certify(const Cli& cli) {
    JobConfig cfg = load_job(cli);
    StandardSystem sys = build_system(cfg);
    Certificate cert = certify_nonsmooth(sys, cfg.set, certify_options_from(cfg, cli.threads));
    if (cert.status == CertStatus::Certified) {
        cert.eps0 = epsilon0_estimate(sys, cert, 32, cfg.seed).eps0;
        if (cert.eps0 == 0.0) cert.status = CertStatus::InconclusiveForEps;
    }
    emit(to_json(cert), cli.out_path);
    return cert.status == CertStatus::Certified ? 0 : 1;
}

int run_full(const Cli& cli, LastStage last) {
    JobConfig cfg = load_job(cli);
    RunOptions opts;
    opts.threads = cli.threads;
    opts.timings = cli.timings;
    opts.dump_trajectories = cli.dump_trajectories;
    opts.out_path = !cli.out_path.empty() ? cli.out_path : cfg.out_path;
    opts.last_stage = last;
    PipelineResult res = run_pipeline(cfg, opts);
    std::cout << res.report.dump(2) << "\n";
    return res.exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"contraction certificates for domains of attraction of averaged periodic systems"};
    app.set_version_flag("--version", std::string(basincert::kToolName) + " " + basincert::kVersion);
    app.require_subcommand(1);

    Cli cli;
    std::string command;
    for (const char* name : {"average", "find-zero", "bogolubov", "certify", "periodic", "basin", "pipeline"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", cli.config_path, "job config JSON")->required();
        sub->add_option("--out", cli.out_path, "output path (report JSON)");
        sub->add_option("--seed", cli.seed, "override config seed");
        sub->add_option("--eps", cli.eps, "override config epsilon");
        sub->add_option("--at", cli.at, "point v1,v2,... (average/find-zero/bogolubov)");
        sub->add_option("--threads", cli.threads, "worker threads for grid/basin stages");
        sub->add_flag("--timings", cli.timings, "include per-stage wall-clock in the report");
        sub->add_flag("--dump-trajectories", cli.dump_trajectories,
                      "write one trajectory CSV per basin sample");
        sub->callback([&command, name] { command = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (command == "average") return cmd_average(cli);
        if (command == "find-zero") return cmd_find_zero(cli);
        if (command == "bogolubov") return cmd_bogolubov(cli);
        if (command == "certify") return cmd_certify(cli);
        // the staged pipeline; earlier stages are prerequisites of later
        // ones, so "periodic" runs through the orbit and stops there
        return run_full(cli, command == "periodic" ? LastStage::Periodic : LastStage::Basin);
    } catch (const basincert::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const basincert::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

#pragma once

// Stage orchestration behind the CLI: zero -> Bogolubov -> certify ->
// eps0 -> periodic -> basin, short-circuiting on failure. Writes the
// RunReport JSON and trajectory/basin CSVs next to it.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>

#include "basincert/config.hpp"
#include "basincert/dynamics.hpp"
#include "basincert/io.hpp"
#include "basincert/version.hpp"

namespace basincert {

enum class LastStage { Certify, Periodic, Basin };

struct RunOptions {
    int threads = 1;
    bool timings = false;
    bool dump_trajectories = false;        // one CSV per basin sample
    std::string out_path;                  // overrides config's
    LastStage last_stage = LastStage::Basin;
};

struct PipelineResult {
    ojson report;
    int exit_code = 0; // 0 ok, 1 not certified, 3 numerical failure
    Certificate certificate;
    bool has_certificate = false;
};

namespace detail {

class StageClock {
public:
    explicit StageClock(bool enabled) : enabled_(enabled) {}

    template <class F>
    auto run(const char* name, F&& f) {
        auto t0 = std::chrono::steady_clock::now();
        auto cleanup = [&] {
            if (!enabled_) return;
            auto dt = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0);
            timings_[name] = dt.count();
        };
        try {
            auto r = f();
            cleanup();
            return r;
        } catch (...) {
            cleanup();
            throw;
        }
    }

    bool enabled() const { return enabled_; }
    const ojson& timings() const { return timings_; }

private:
    bool enabled_;
    ojson timings_ = ojson::object();
};

inline std::string eps_tag(double eps) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", eps);
    return buf;
}

} // namespace detail

inline CertifyOptions certify_options_from(const JobConfig& cfg, int threads) {
    CertifyOptions opts;
    if (cfg.alpha_grid) opts.alpha_grid = *cfg.alpha_grid;
    if (cfg.norm_P) opts.norms = {WeightedNorm(*cfg.norm_P)};
    opts.grid_per_dim = cfg.grid_per_dim;
    opts.seed = cfg.seed;
    opts.threads = threads;
    return opts;
}

inline PipelineResult run_pipeline(const JobConfig& cfg, const RunOptions& ropts = {}) {
    PipelineResult res;
    detail::StageClock clock(ropts.timings);

    ojson& rep = res.report;
    rep["tool"] = kToolName;
    rep["version"] = kVersion;
    rep["config"] = config_echo(cfg);
    rep["stages"] = ojson::object();

    StandardSystem sys = build_system(cfg);
    std::string out = !ropts.out_path.empty() ? ropts.out_path
                      : !cfg.out_path.empty() ? cfg.out_path
                                              : "report.json";
    {
        // the per-epsilon CSVs land beside the report before it is written
        std::filesystem::path p(out);
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    }

    auto finish = [&](int code) {
        if (clock.enabled()) rep["timings_ms"] = clock.timings();
        std::ofstream f(out, std::ios::binary);
        if (!f) throw ConfigError("cannot write report to " + out);
        f << rep.dump(2) << "\n";
        res.exit_code = code;
        return res;
    };

    // zero
    Vec v0;
    try {
        v0 = clock.run("zero", [&] { return find_zero(sys, set_center(cfg.set)); });
    } catch (const NumericalError& e) {
        rep["stages"]["zero"] = ojson{{"error", e.what()}};
        finish(3);
        throw; // CLI reports exit 3; the report file is already on disk
    }
    rep["stages"]["zero"] = ojson{{"v0", v0}};

    // Bogolubov
    auto bog = clock.run("bogolubov", [&] { return bogolubov_check(sys, v0); });
    rep["stages"]["bogolubov"] = to_json(bog);
    if (!(bog.is_zero && bog.hyperbolic_zero && bog.asymptotically_stable)) {
        rep["pipeline_status"] = "bogolubov_failed";
        return finish(1);
    }

    // certify (the nonsmooth path reduces to the smooth one bit-for-bit
    // when there is no spatial switching)
    Certificate cert = clock.run(
        "certify", [&] { return certify_nonsmooth(sys, cfg.set, certify_options_from(cfg, ropts.threads)); });
    if (cert.status != CertStatus::Certified) {
        rep["stages"]["certificate"] = to_json(cert);
        rep["pipeline_status"] = to_string(cert.status);
        res.certificate = cert;
        res.has_certificate = true;
        return finish(1);
    }

    // eps0
    auto eps0rep = clock.run("eps0", [&] { return epsilon0_estimate(sys, cert, 32, cfg.seed); });
    cert.eps0 = eps0rep.eps0;
    if (cert.eps0 == 0.0) cert.status = CertStatus::InconclusiveForEps;
    rep["stages"]["certificate"] = to_json(cert);
    res.certificate = cert;
    res.has_certificate = true;
    if (cert.status != CertStatus::Certified) {
        rep["pipeline_status"] = to_string(cert.status);
        return finish(1);
    }

    if (ropts.last_stage == LastStage::Certify) {
        rep["pipeline_status"] = "ok";
        return finish(0);
    }

    // per-epsilon: periodic orbit, then basin over the certified set
    std::filesystem::path outp(out);
    std::filesystem::path stem = outp.parent_path() / outp.stem();
    ojson periodic = ojson::array();
    ojson basins = ojson::array();
    for (double eps : cfg.epsilons) {
        std::string tag = detail::eps_tag(eps);
        auto orbit = clock.run(("periodic eps=" + tag).c_str(),
                               [&] { return find_periodic(sys, eps, cert); });
        periodic.push_back(to_json(orbit));
        {
            Trajectory tr = integrate(sys, orbit.v_eps, eps, 0.0, sys.T);
            std::ofstream csv(stem.string() + "_orbit_eps" + tag + ".csv", std::ios::binary);
            tr.write_csv(csv);
        }
        if (ropts.last_stage == LastStage::Periodic) continue;
        auto basin = clock.run(("basin eps=" + tag).c_str(), [&] {
            return basin_sample(sys, eps, cfg.set, orbit.v_eps, cert.norm, cfg.samples,
                                cfg.horizon, cfg.seed, {}, ropts.threads);
        });
        {
            std::ofstream csv(stem.string() + "_basin_eps" + tag + ".csv", std::ios::binary);
            csv << "converged,periods_to_converge,final_distance";
            for (int i = 1; i <= sys.n; ++i) csv << ",x" << i << "_start";
            csv << "\n";
            char buf[40];
            for (const auto& s : basin.samples) {
                csv << (s.converged ? 1 : 0) << ',' << s.periods_to_converge;
                std::snprintf(buf, sizeof(buf), "%.17g", s.final_distance);
                csv << ',' << buf;
                for (double c : s.v_start) {
                    std::snprintf(buf, sizeof(buf), "%.17g", c);
                    csv << ',' << buf;
                }
                csv << "\n";
            }
        }
        if (ropts.dump_trajectories) {
            for (std::size_t i = 0; i < basin.samples.size(); ++i) {
                const auto& s = basin.samples[i];
                if (!s.error.empty()) continue;
                int periods = s.converged ? s.periods_to_converge : cfg.horizon;
                Trajectory tr = integrate(sys, s.v_start, eps, 0.0, periods * sys.T);
                std::ofstream csv(stem.string() + "_traj_eps" + tag + "_sample" +
                                      std::to_string(i) + ".csv",
                                  std::ios::binary);
                tr.write_csv(csv);
            }
        }
        basins.push_back(to_json(basin));
    }
    rep["stages"]["periodic"] = std::move(periodic);
    if (ropts.last_stage == LastStage::Basin) rep["stages"]["basin"] = std::move(basins);
    rep["pipeline_status"] = "ok";
    return finish(0);
}

} // namespace basincert

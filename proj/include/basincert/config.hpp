#pragma once

// Job configuration: the JSON schema behind the CLI. Exactly one of the
// standard/original system forms must be present; see README for the key
// reference.

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "basincert/averaging.hpp"
#include "basincert/certify.hpp"
#include "basincert/errors.hpp"
#include "basincert/io.hpp"

namespace basincert {

struct JobConfig {
    // system (exactly one form)
    bool original_form = false;
    int n = 0;
    double T = 0.0;
    std::vector<std::string> g_sources; // standard form
    Mat A;                              // original form
    std::vector<std::string> h_sources; // original form
    std::string label;

    std::vector<double> epsilons;
    ConvexSet set;
    std::optional<Mat> norm_P;
    std::optional<std::vector<double>> alpha_grid;
    int grid_per_dim = 33;
    int samples = 200;
    int horizon = 50;
    std::uint64_t seed = 0;
    std::string out_path;
};

namespace detail {

inline Vec parse_vec(const ojson& j, const char* what) {
    if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array of numbers");
    Vec v;
    for (const auto& e : j) {
        if (!e.is_number()) throw ConfigError(std::string(what) + " must contain only numbers");
        v.push_back(e.get<double>());
    }
    return v;
}

inline Mat parse_mat(const ojson& j, const char* what) {
    if (!j.is_array() || j.empty())
        throw ConfigError(std::string(what) + " must be a row-major array of arrays");
    Mat m(static_cast<int>(j.size()), static_cast<int>(j.front().size()));
    for (int i = 0; i < m.rows; ++i) {
        const auto& row = j[i];
        if (!row.is_array() || static_cast<int>(row.size()) != m.cols)
            throw ConfigError(std::string(what) + " rows must all have the same length");
        for (int k = 0; k < m.cols; ++k) m(i, k) = row[k].get<double>();
    }
    return m;
}

} // namespace detail

inline JobConfig parse_config(const ojson& j) {
    JobConfig c;
    if (!j.contains("system")) throw ConfigError("config needs a 'system' object");
    const auto& s = j.at("system");
    std::string form = s.value("form", "standard");
    if (form == "standard") {
        if (!s.contains("n") || !s.contains("T") || !s.contains("g"))
            throw ConfigError("standard system needs n, T, g");
        if (s.contains("A") || s.contains("h"))
            throw ConfigError("standard system must not carry A/h");
        c.n = s.at("n").get<int>();
        c.T = s.at("T").get<double>();
        for (const auto& e : s.at("g")) c.g_sources.push_back(e.get<std::string>());
        if (static_cast<int>(c.g_sources.size()) != c.n)
            throw ConfigError("system.g must have exactly n expressions");
    } else if (form == "original") {
        if (!s.contains("A") || !s.contains("T") || !s.contains("h"))
            throw ConfigError("original system needs A, T, h");
        if (s.contains("g")) throw ConfigError("original system must not carry g");
        c.original_form = true;
        c.A = detail::parse_mat(s.at("A"), "system.A");
        if (!c.A.square()) throw ConfigError("system.A must be square");
        c.n = c.A.rows;
        c.T = s.at("T").get<double>();
        for (const auto& e : s.at("h")) c.h_sources.push_back(e.get<std::string>());
        if (static_cast<int>(c.h_sources.size()) != c.n)
            throw ConfigError("system.h must have exactly n expressions");
    } else {
        throw ConfigError("system.form must be 'standard' or 'original'");
    }
    c.label = s.value("label", "");
    if (!(c.T > 0.0)) throw ConfigError("system.T must be positive");

    if (!j.contains("epsilon")) throw ConfigError("config needs 'epsilon' (number or array)");
    const auto& ej = j.at("epsilon");
    if (ej.is_number()) {
        c.epsilons.push_back(ej.get<double>());
    } else if (ej.is_array()) {
        for (const auto& e : ej) c.epsilons.push_back(e.get<double>());
    } else {
        throw ConfigError("'epsilon' must be a number or an array");
    }
    for (double e : c.epsilons)
        if (!(e > 0.0)) throw ConfigError("epsilon values must be positive");

    if (j.contains("norm")) {
        c.norm_P = detail::parse_mat(j.at("norm").at("P"), "norm.P");
        if (c.norm_P->rows != c.n) throw ConfigError("norm.P has the wrong dimension");
    }

    if (!j.contains("set")) throw ConfigError("config needs 'set'");
    const auto& sj = j.at("set");
    std::string type = sj.value("type", "");
    if (type == "box") {
        Box b{detail::parse_vec(sj.at("lo"), "set.lo"), detail::parse_vec(sj.at("hi"), "set.hi")};
        if (static_cast<int>(b.lo.size()) != c.n) throw ConfigError("set dimension mismatch");
        c.set = b;
    } else if (type == "ball") {
        BallSet b;
        b.center = detail::parse_vec(sj.at("center"), "set.center");
        b.radius = sj.at("radius").get<double>();
        if (static_cast<int>(b.center.size()) != c.n) throw ConfigError("set dimension mismatch");
        if (c.norm_P) b.norm = WeightedNorm(*c.norm_P);
        c.set = b;
    } else {
        throw ConfigError("set.type must be 'box' or 'ball'");
    }
    validate_set(c.set);

    if (j.contains("alpha")) {
        const auto& aj = j.at("alpha");
        c.alpha_grid = log_spaced(aj.at("min").get<double>(), aj.at("max").get<double>(),
                                  aj.at("steps").get<int>());
    }
    c.grid_per_dim = j.value("grid_per_dim", 33);
    if (c.grid_per_dim < 3) throw ConfigError("grid_per_dim must be >= 3");
    c.samples = j.value("samples", 200);
    c.horizon = j.value("horizon", 50);
    if (c.samples < 1 || c.horizon < 1) throw ConfigError("samples/horizon must be >= 1");
    c.seed = j.value("seed", std::uint64_t{0});
    c.out_path = j.value("out", "");
    return c;
}

inline JobConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    ojson j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

// Normalized echo; parse_config(config_echo(c)) rebuilds an equivalent config.
inline ojson config_echo(const JobConfig& c) {
    ojson sys;
    if (c.original_form) {
        sys["form"] = "original";
        ojson rows = ojson::array();
        for (int i = 0; i < c.A.rows; ++i) {
            ojson row = ojson::array();
            for (int k = 0; k < c.A.cols; ++k) row.push_back(c.A(i, k));
            rows.push_back(std::move(row));
        }
        sys["A"] = std::move(rows);
        sys["T"] = c.T;
        sys["h"] = c.h_sources;
    } else {
        sys["form"] = "standard";
        sys["n"] = c.n;
        sys["T"] = c.T;
        sys["g"] = c.g_sources;
    }
    if (!c.label.empty()) sys["label"] = c.label;

    ojson j;
    j["system"] = std::move(sys);
    j["epsilon"] = c.epsilons;
    j["set"] = to_json(c.set);
    if (c.norm_P) {
        ojson rows = ojson::array();
        for (int i = 0; i < c.norm_P->rows; ++i) {
            ojson row = ojson::array();
            for (int k = 0; k < c.norm_P->cols; ++k) row.push_back((*c.norm_P)(i, k));
            rows.push_back(std::move(row));
        }
        j["norm"] = ojson{{"P", std::move(rows)}};
    }
    if (c.alpha_grid) {
        // echo as an explicit grid; re-parse accepts min == max single steps
        j["alpha"] = ojson{{"min", c.alpha_grid->front()},
                           {"max", c.alpha_grid->back()},
                           {"steps", static_cast<int>(c.alpha_grid->size())}};
    }
    j["grid_per_dim"] = c.grid_per_dim;
    j["samples"] = c.samples;
    j["horizon"] = c.horizon;
    j["seed"] = c.seed;
    if (!c.out_path.empty()) j["out"] = c.out_path;
    return j;
}

inline StandardSystem build_system(const JobConfig& c) {
    if (c.original_form) {
        OriginalSystem orig = make_original_system(c.A, c.T, c.h_sources, c.label);
        return to_standard_form(orig);
    }
    return make_standard_system(c.n, c.T, c.g_sources, c.label);
}

} // namespace basincert

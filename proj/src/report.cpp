#include "mbwish/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>

namespace mbwish {

namespace {

bool same_bits(double a, double b) {
    return std::memcmp(&a, &b, sizeof a) == 0;
}

std::string show(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

nlohmann::json log_to_json(double v) {
    if (v == -std::numeric_limits<double>::infinity()) return nullptr;
    return v;
}

double log_from_json(const nlohmann::json& j) {
    if (j.is_null()) return -std::numeric_limits<double>::infinity();
    return j.get<double>();
}

nlohmann::json report_to_json(const EstimateReport& r) {
    const EstimatorConfig& c = r.config;
    nlohmann::json config = {{"q", c.q},
                             {"n", c.n},
                             {"r", c.bin_rank()},
                             {"delta", c.delta},
                             {"t", c.t()},
                             {"gamma", c.gamma()},
                             {"ell", c.ell()},
                             {"n_prime", c.n_prime()},
                             {"construction", to_string(c.construction)},
                             {"seed", c.seed},
                             {"field", r.field}};
    if (c.construction == Construction::SparseToeplitz) config["density"] = c.density;
    if (c.budget_seconds) config["budget_seconds"] = *c.budget_seconds;

    nlohmann::json log_M = nlohmann::json::array();
    for (double v : r.log_M) log_M.push_back(log_to_json(v));
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& L : r.levels) {
        nlohmann::json lv = nlohmann::json::array();
        nlohmann::json st = nlohmann::json::array();
        for (double v : L.log_values) lv.push_back(log_to_json(v));
        for (auto s : L.statuses) st.push_back(to_string(s));
        levels.push_back({{"i", L.i}, {"regime", L.regime}, {"values", L.values}, {"log_values", lv},
                          {"statuses", st}});
    }
    return {{"variant", r.variant},
            {"config", config},
            {"model", r.model},
            {"M", r.M},
            {"log_M", log_M},
            {"estimate", r.estimate},
            {"log_estimate", log_to_json(r.log_estimate)},
            {"oracle_calls", r.oracle_calls},
            {"lower_bound_only", r.lower_bound_only},
            {"levels", levels},
            {"timing", {{"wall_seconds", r.wall_seconds}}}};
}

std::string canonical_report(const nlohmann::json& report) {
    nlohmann::json copy = report;
    copy.erase("timing");
    return copy.dump();
}

VerifyResult verify_report(const nlohmann::json& j) {
    VerifyResult out;
    auto problem = [&](std::string s) {
        out.ok = false;
        out.problems.push_back(std::move(s));
    };
    try {
        const auto M = j.at("M").get<std::vector<double>>();
        std::vector<double> log_M;
        for (const auto& v : j.at("log_M")) log_M.push_back(log_from_json(v));
        const double t = j.at("config").at("t").get<double>();
        const auto& levels = j.at("levels");
        if (M.size() != levels.size() + 1) problem("M has " + std::to_string(M.size()) + " entries for " +
                                                   std::to_string(levels.size()) + " levels");
        const std::size_t ell = j.at("config").at("ell").get<std::size_t>();
        if (j.at("oracle_calls").get<std::uint64_t>() != levels.size() * ell + 1)
            problem("oracle_calls is not n' * ell + 1");
        for (std::size_t i = 0; i < levels.size() && i + 1 < M.size(); ++i) {
            const auto vals = levels[i].at("values").get<std::vector<double>>();
            std::vector<double> logs;
            for (const auto& v : levels[i].at("log_values")) logs.push_back(log_from_json(v));
            if (vals.size() != logs.size() || vals.empty()) {
                problem("level " + std::to_string(i + 1) + " is malformed");
                continue;
            }
            const std::size_t pos = median_position(logs);
            if (!same_bits(vals[pos], M[i + 1]) || !same_bits(logs[pos], log_M[i + 1]))
                problem("M_" + std::to_string(i + 1) + " is not the lower median of its level");
        }
        const Combined c = combine(M, log_M, t);
        const auto& est = j.at("estimate");
        const double stored = est.is_null() ? std::numeric_limits<double>::infinity() : est.get<double>();
        const double stored_log = log_from_json(j.at("log_estimate"));
        if (!same_bits(c.value, stored))
            problem("estimate " + show(stored) + " != recomputed " + show(c.value));
        if (!same_bits(c.log_value, stored_log))
            problem("log_estimate " + show(stored_log) + " != recomputed " + show(c.log_value));
    } catch (const std::exception& e) {
        problem(std::string("malformed report: ") + e.what());
    }
    return out;
}

}  // namespace mbwish

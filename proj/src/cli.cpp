#include "mbwish/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mbwish/hash_family.hpp"
#include "mbwish/max_oracle.hpp"
#include "mbwish/mb_wish.hpp"
#include "mbwish/perm_wish.hpp"
#include "mbwish/report.hpp"
#include "mbwish/unconstrained.hpp"
#include "mbwish/weight_models.hpp"
#include "mbwish/work_pool.hpp"

namespace mbwish::cli {

namespace {

using nlohmann::json;

/// Raised for invalid user input; maps to kConfigError.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EstimatorFlags {
    std::uint32_t q = 0;
    std::uint32_t r = 0;
    double delta = 0.1;
    std::uint64_t seed = 0;
    std::string oracle = "exhaustive";
    std::optional<double> budget;
    std::string variant = "constrained";
    std::string construction = "dense";
    double density = 0.5;
    std::size_t workers = 1;
    std::optional<std::size_t> ell;
    std::size_t trials = 1;
    bool exact = false;
    std::string out;
    std::string export_dir;
};

void add_estimator_flags(CLI::App* cmd, EstimatorFlags& f, bool with_variant) {
    cmd->add_option("--q", f.q, "Field size (must agree with the model when given)");
    cmd->add_option("--r", f.r, "Bin rank; default floor((q-1)/2)");
    cmd->add_option("--delta", f.delta, "Failure probability")->capture_default_str();
    cmd->add_option("--seed", f.seed, "Base seed")->capture_default_str();
    cmd->add_option("--oracle", f.oracle, "exhaustive or export")
        ->check(CLI::IsMember({"exhaustive", "export"}))
        ->capture_default_str();
    cmd->add_option("--budget-seconds", f.budget, "Per-call oracle time limit");
    if (with_variant)
        cmd->add_option("--variant", f.variant, "constrained or unconstrained")
            ->check(CLI::IsMember({"constrained", "unconstrained"}))
            ->capture_default_str();
    cmd->add_option("--construction", f.construction, "dense, toeplitz, sparse-toeplitz or fieldmult")
        ->check(CLI::IsMember({"dense", "toeplitz", "sparse-toeplitz", "fieldmult"}))
        ->capture_default_str();
    cmd->add_option("--density", f.density, "Sparse Toeplitz density")->capture_default_str();
    cmd->add_option("--workers", f.workers, "Threads (0 = all cores); results do not depend on it")
        ->capture_default_str();
    cmd->add_option("--ell", f.ell, "Override the repetitions per level");
    cmd->add_option("--trials", f.trials, "Independent runs with seeds seed, seed+1, ...")->capture_default_str();
    cmd->add_flag("--exact", f.exact, "Also compute the exact value by enumeration and report ratios");
    cmd->add_option("--out", f.out, "Output file (default: stdout)");
    cmd->add_option("--export-dir", f.export_dir, "Directory for --oracle export");
}

EstimatorConfig make_config(const EstimatorFlags& f, std::uint32_t q, std::size_t n) {
    EstimatorConfig c;
    c.q = q;
    c.n = n;
    c.r = f.r;
    c.delta = f.delta;
    c.seed = f.seed;
    c.budget_seconds = f.budget;
    c.density = f.density;
    c.workers = f.workers;
    c.ell_override = f.ell;
    try {
        c.construction = construction_from_string(f.construction);
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (f.trials < 1) throw ConfigError("--trials must be at least 1");
    return c;
}

void write_output(const json& j, const std::string& path, std::ostream& out) {
    const std::string text = j.dump(2) + "\n";
    if (path.empty()) {
        out << text;
        return;
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp);
        if (!f) throw std::runtime_error("cannot write '" + path + "'");
        f << text;
    }
    std::filesystem::rename(tmp, path);
}

json ratio_stats(const std::vector<double>& ratios, double t) {
    if (ratios.empty()) return nullptr;
    double lo = ratios[0], hi = ratios[0], logsum = 0;
    std::size_t within = 0;
    for (double x : ratios) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
        logsum += std::log(x);
        within += x >= 1 / (t * t) && x <= t * t;
    }
    return {{"min", lo},
            {"max", hi},
            {"geometric_mean", std::exp(logsum / static_cast<double>(ratios.size()))},
            {"fraction_within_t2", static_cast<double>(within) / static_cast<double>(ratios.size())},
            {"t2", t * t}};
}

/// Runs `trials` seeds (outer parallelism) and packages the result.
int run_trials(const EstimatorFlags& f, const EstimatorConfig& base,
               const std::function<EstimateReport(const EstimatorConfig&)>& one,
               std::optional<ExactSum> truth, std::ostream& out) {
    std::vector<EstimateReport> reports(f.trials);
    EstimatorConfig inner = base;
    inner.workers = f.trials > 1 ? 1 : base.workers;
    parallel_for(f.trials, f.trials > 1 ? base.workers : 1, [&](std::size_t t) {
        EstimatorConfig c = inner;
        c.seed = base.seed + t;
        reports[t] = one(c);
    });
    bool degraded = false;
    std::vector<double> ratios;
    json items = json::array();
    for (const auto& r : reports) {
        json j = report_to_json(r);
        if (truth) {
            j["exact"] = {{"value", truth->value}, {"log_value", log_to_json(truth->log_value)}};
            const double ratio = std::exp(r.log_estimate - truth->log_value);
            j["ratio"] = ratio;
            ratios.push_back(ratio);
        }
        degraded |= r.lower_bound_only;
        items.push_back(std::move(j));
    }
    json result;
    if (f.trials == 1) {
        result = items[0];
    } else {
        result = {{"trials", items}};
        if (truth) {
            result["exact"] = {{"value", truth->value}, {"log_value", log_to_json(truth->log_value)}};
            result["ratios"] = ratio_stats(ratios, base.t());
        }
    }
    write_output(result, f.out, out);
    return degraded ? kDegraded : kOk;
}

int export_queries(const std::vector<PlannedQuery>& queries, const std::string& dir, std::ostream& out) {
    if (dir.empty()) throw ConfigError("--oracle export needs --export-dir");
    std::filesystem::create_directories(dir);
    json manifest = json::array();
    for (const auto& pq : queries) {
        OracleQuery q = pq.query;
        if (q.kind == ConstraintKind::Unconstrained) {
            // Level 0 as an always-true multi-bin constraint.
            const Domain d = q.weight->domain();
            q = OracleQuery::multibin(q.weight, make_hash(Field::make(d.q), Construction::Dense,
                                                          FieldMatrix(0, d.n), FieldVector{}, 1));
        }
        const std::string name = "query_" + std::to_string(pq.i) + "_" + std::to_string(pq.k) + ".ilp";
        export_ilp(q, (std::filesystem::path(dir) / name).string());
        manifest.push_back({{"i", pq.i}, {"k", pq.k}, {"file", name}});
    }
    std::ofstream(std::filesystem::path(dir) / "manifest.json") << manifest.dump(2) << "\n";
    out << "wrote " << queries.size() << " queries to " << dir << "\n";
    return kOk;
}

WeightPtr load_model_or_config_error(const std::string& path) {
    try {
        return load_model(path);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model file: ") + e.what());
    }
}

ExactSum exact_or_refuse(const WeightModel& w) {
    const Domain d = w.domain();
    if (!domain_size(d.q, d.n, 100'000'000ULL)) throw DomainTooLarge("exact value: q^n exceeds 1e8");
    return exact_sum(w);
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("bad list entry '" + item + "'");
        }
    }
    return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-bin WISH estimators for discrete integration"};
    app.name("mbwish");
    app.require_subcommand(1);

    // estimate
    EstimatorFlags est;
    std::string est_model;
    auto* c_est = app.add_subcommand("estimate", "Estimate the sum of a weight model over F_q^n");
    c_est->add_option("--model", est_model, "Model JSON file")->required();
    add_estimator_flags(c_est, est, true);

    // permanent
    EstimatorFlags perm;
    std::string perm_matrix;
    auto* c_perm = app.add_subcommand("permanent", "Estimate a matrix permanent");
    c_perm->add_option("--matrix", perm_matrix, "JSON 2-D array of nonnegative numbers")->required();
    add_estimator_flags(c_perm, perm, false);

    // tv
    EstimatorFlags tv;
    std::string tv_model, tv_ns = "4,6,8,10";
    bool tv_estimate = false;
    auto* c_tv = app.add_subcommand("tv", "Total variation distance of a distribution pair");
    c_tv->add_option("--model", tv_model, "Product or Markov pair JSON (default: the eps = 0.01 product pair)");
    c_tv->add_option("--ns", tv_ns, "Comma-separated chain lengths")->capture_default_str();
    c_tv->add_flag("--estimate", tv_estimate, "Also run the estimator at each n");
    add_estimator_flags(c_tv, tv, false);

    // exact
    std::string ex_model, ex_matrix, ex_out;
    auto* c_ex = app.add_subcommand("exact", "Exact sum, permanent or TV distance by enumeration");
    auto* ex_model_opt = c_ex->add_option("--model", ex_model, "Model JSON file");
    c_ex->add_option("--matrix", ex_matrix, "Matrix JSON file")->excludes(ex_model_opt);
    c_ex->add_option("--out", ex_out, "Output file (default: stdout)");

    // sweep
    EstimatorFlags sw;
    std::size_t sw_n = 4, sw_d = 2;
    std::uint32_t sw_q = 5;
    double sw_J = 0.1, sw_H = 0.1;
    std::string sw_zetas = "0,5,10,15,20,25,30,35,40,45,50";
    std::uint64_t sw_graph_seed = 1;
    auto* c_sw = app.add_subcommand("sweep", "Potts ratio sweep over zeta against brute force");
    c_sw->add_option("--n", sw_n, "Vertices")->capture_default_str();
    c_sw->add_option("--d", sw_d, "Degree")->capture_default_str();
    c_sw->add_option("--states", sw_q, "Potts states (field size)")->capture_default_str();
    c_sw->add_option("--J", sw_J)->capture_default_str();
    c_sw->add_option("--H", sw_H)->capture_default_str();
    c_sw->add_option("--zetas", sw_zetas, "Comma-separated zeta values")->capture_default_str();
    c_sw->add_option("--graph-seed", sw_graph_seed)->capture_default_str();
    add_estimator_flags(c_sw, sw, true);

    // verify-hash
    std::string vh_construction = "dense", vh_out;
    std::uint32_t vh_q = 2, vh_r = 1;
    std::size_t vh_m = 1, vh_n = 2;
    double vh_density = 0.5;
    auto* c_vh = app.add_subcommand("verify-hash", "Exhaustive pairwise-independence audit of a hash family");
    c_vh->add_option("--construction", vh_construction)
        ->check(CLI::IsMember({"dense", "toeplitz", "sparse-toeplitz", "fieldmult"}))
        ->capture_default_str();
    c_vh->add_option("--q", vh_q)->capture_default_str();
    c_vh->add_option("--r", vh_r)->capture_default_str();
    c_vh->add_option("--m", vh_m)->capture_default_str();
    c_vh->add_option("--n", vh_n)->capture_default_str();
    c_vh->add_option("--density", vh_density)->capture_default_str();
    c_vh->add_option("--out", vh_out, "Output file (default: stdout)");

    // verify
    std::string vr_path;
    auto* c_vr = app.add_subcommand("verify", "Recompute a report's estimate from its stored medians");
    c_vr->add_option("report", vr_path, "Report JSON")->required();

    // gen-potts
    std::size_t gp_n = 4, gp_d = 2;
    std::uint32_t gp_q = 5;
    double gp_zeta = 1, gp_J = 0.1, gp_H = 0.1;
    std::uint64_t gp_seed = 1;
    std::string gp_out;
    auto* c_gp = app.add_subcommand("gen-potts", "Write a Potts model on a random regular graph");
    c_gp->add_option("--n", gp_n)->capture_default_str();
    c_gp->add_option("--d", gp_d)->capture_default_str();
    c_gp->add_option("--states", gp_q)->capture_default_str();
    c_gp->add_option("--zeta", gp_zeta)->capture_default_str();
    c_gp->add_option("--J", gp_J)->capture_default_str();
    c_gp->add_option("--H", gp_H)->capture_default_str();
    c_gp->add_option("--seed", gp_seed)->capture_default_str();
    c_gp->add_option("--out", gp_out, "Output file (default: stdout)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kConfigError;
    }

    const ExhaustiveOracle oracle;
    try {
        if (*c_est) {
            const WeightPtr w = load_model_or_config_error(est_model);
            const Domain d = w->domain();
            if (est.q != 0 && est.q != d.q) throw ConfigError("--q disagrees with the model's state count");
            const EstimatorConfig cfg = make_config(est, d.q, d.n);
            if (est.oracle == "export") {
                if (est.variant != "constrained")
                    throw ConfigError("--oracle export needs the constrained variant");
                if (!w->log_linear_form())
                    throw DomainTooLarge("model '" + w->name() + "' has no log-linear objective to export");
                return export_queries(plan_mb_wish(cfg, w), est.export_dir, out);
            }
            std::optional<ExactSum> truth;
            if (est.exact) truth = exact_or_refuse(*w);
            const bool unc = est.variant == "unconstrained";
            return run_trials(est, cfg, [&](const EstimatorConfig& c) {
                return unc ? run_unconstrained_mb_wish(c, w, oracle) : run_mb_wish(c, w, oracle);
            }, truth, out);
        }
        if (*c_perm) {
            Matrix D;
            try {
                D = load_matrix(perm_matrix);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
            const PermanentInstance inst{D, perm.q};
            try {
                inst.validate();
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
            const EstimatorConfig cfg = make_config(perm, inst.field_size(), inst.n());
            if (perm.oracle == "export") return export_queries(plan_perm_wish(inst, cfg), perm.export_dir, out);
            std::optional<ExactSum> truth;
            if (perm.exact) {
                const double v = exact_permanent(D);
                truth = ExactSum{v, v > 0 ? std::log(v) : -std::numeric_limits<double>::infinity()};
            }
            return run_trials(perm, cfg, [&](const EstimatorConfig& c) { return run_perm_wish(inst, c, oracle); },
                              truth, out);
        }
        if (*c_tv) {
            const std::vector<double> ns = parse_list(tv_ns);
            json rows = json::array();
            bool degraded = false;
            json base_model = tv_model.empty()
                                  ? json{{"type", "product"},
                                         {"P", {0.2, 0.2, 0.2, 0.2, 0.2}},
                                         {"Q", {0.2, 0.21, 0.19, 0.21, 0.19}},
                                         {"n", 1}}
                                  : [&] {
                                        std::ifstream in(tv_model);
                                        if (!in) throw ConfigError("cannot open model file '" + tv_model + "'");
                                        return json::parse(in);
                                    }();
            for (double nd : ns) {
                if (nd < 1 || nd != std::floor(nd)) throw ConfigError("--ns entries must be positive integers");
                json mj = base_model;
                mj["n"] = static_cast<std::size_t>(nd);
                WeightPtr w;
                try {
                    w = model_from_json(mj);
                } catch (const std::exception& e) {
                    throw ConfigError(e.what());
                }
                json row = {{"n", static_cast<std::size_t>(nd)}};
                if (auto* pp = dynamic_cast<const ProductDistributionPair*>(w.get())) {
                    const HellingerBracket hb = hellinger_bracket(*pp);
                    row["hellinger_lower"] = hb.lower;
                    row["hellinger_upper"] = hb.upper;
                }
                const Domain d = w->domain();
                if (tv.exact) row["exact"] = exact_or_refuse(*w).value;
                if (tv_estimate) {
                    const EstimatorConfig cfg = make_config(tv, d.q, d.n);
                    const EstimateReport r = run_mb_wish(cfg, w, oracle);
                    row["estimate"] = r.estimate;
                    row["log_estimate"] = log_to_json(r.log_estimate);
                    row["oracle_calls"] = r.oracle_calls;
                    degraded |= r.lower_bound_only;
                }
                rows.push_back(std::move(row));
            }
            write_output({{"model", base_model}, {"rows", rows}}, tv.out, out);
            return degraded ? kDegraded : kOk;
        }
        if (*c_ex) {
            json result;
            if (!ex_matrix.empty()) {
                Matrix D;
                try {
                    D = load_matrix(ex_matrix);
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(e.what());
                }
                if (D.size() > 20) throw DomainTooLarge("exact permanent limited to n <= 20");
                const double v = exact_permanent(D);
                result = {{"kind", "permanent"}, {"value", v}, {"log_value", log_to_json(v > 0 ? std::log(v) : -INFINITY)}};
            } else if (!ex_model.empty()) {
                const WeightPtr w = load_model_or_config_error(ex_model);
                const ExactSum s = exact_or_refuse(*w);
                result = {{"kind", w->name()}, {"value", s.value}, {"log_value", log_to_json(s.log_value)}};
                if (auto* pp = dynamic_cast<const ProductDistributionPair*>(w.get())) {
                    const HellingerBracket hb = hellinger_bracket(*pp);
                    result["hellinger_lower"] = hb.lower;
                    result["hellinger_upper"] = hb.upper;
                }
            } else {
                throw ConfigError("exact needs --model or --matrix");
            }
            write_output(result, ex_out, out);
            return kOk;
        }
        if (*c_sw) {
            const std::vector<double> zetas = parse_list(sw_zetas);
            Graph g;
            try {
                g = random_regular_graph(sw_n, sw_d, sw_graph_seed);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
            const EstimatorConfig cfg = make_config(sw, sw_q, sw_n);
            const bool unc = sw.variant == "unconstrained";
            json rows = json::array();
            bool degraded = false;
            for (double zeta : zetas) {
                const WeightPtr w = std::make_shared<PottsModel>(g, sw_q, zeta, sw_J, sw_H);
                const ExactSum truth = exact_or_refuse(*w);
                std::vector<EstimateReport> reports(sw.trials);
                parallel_for(sw.trials, sw.workers, [&](std::size_t t) {
                    EstimatorConfig c = cfg;
                    c.workers = 1;
                    c.seed = cfg.seed + t;
                    reports[t] = unc ? run_unconstrained_mb_wish(c, w, oracle) : run_mb_wish(c, w, oracle);
                });
                std::vector<double> ratios;
                for (const auto& r : reports) {
                    ratios.push_back(std::exp(r.log_estimate - truth.log_value));
                    degraded |= r.lower_bound_only;
                }
                rows.push_back({{"zeta", zeta},
                                {"log_exact", truth.log_value},
                                {"ratios", ratios},
                                {"summary", ratio_stats(ratios, cfg.t())}});
                out << "zeta=" << zeta << " log Z=" << truth.log_value
                    << " fraction within t^2=" << ratio_stats(ratios, cfg.t())["fraction_within_t2"] << "\n";
            }
            json edges = json::array();
            for (auto [u, v] : g.edges) edges.push_back({u, v});
            const json result = {{"variant", sw.variant}, {"n", sw_n},   {"d", sw_d},     {"q", sw_q},
                                 {"J", sw_J},             {"H", sw_H},   {"edges", edges}, {"seeds", sw.trials},
                                 {"base_seed", sw.seed},  {"rows", rows}};
            if (!sw.out.empty()) write_output(result, sw.out, out);
            return degraded ? kDegraded : kOk;
        }
        if (*c_vh) {
            AuditReport a;
            try {
                a = pairwise_independence_audit(construction_from_string(vh_construction), vh_q, vh_r, vh_m,
                                                vh_n, vh_density);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
            json j;
            to_json(j, a);
            write_output(j, vh_out, out);
            return a.passed() ? kOk : kVerifyFailed;
        }
        if (*c_vr) {
            std::ifstream in(vr_path);
            if (!in) throw ConfigError("cannot open report '" + vr_path + "'");
            json j;
            try {
                j = json::parse(in);
            } catch (const json::exception& e) {
                throw ConfigError(std::string("report is not JSON: ") + e.what());
            }
            std::vector<const json*> reports;
            if (j.contains("trials"))
                for (const auto& t : j.at("trials")) reports.push_back(&t);
            else
                reports.push_back(&j);
            bool ok = true;
            for (std::size_t i = 0; i < reports.size(); ++i) {
                const VerifyResult v = verify_report(*reports[i]);
                for (const auto& p : v.problems) err << "report " << i << ": " << p << "\n";
                ok &= v.ok;
            }
            out << (ok ? "OK" : "MISMATCH") << " (" << reports.size() << " report" << (reports.size() == 1 ? "" : "s")
                << ")\n";
            return ok ? kOk : kVerifyFailed;
        }
        if (*c_gp) {
            Graph g;
            try {
                g = random_regular_graph(gp_n, gp_d, gp_seed);
                const PottsModel m(g, gp_q, gp_zeta, gp_J, gp_H);
                write_output(m.describe(), gp_out, out);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
            return kOk;
        }
    } catch (const ConfigError& e) {
        err << "mbwish: " << e.what() << "\n";
        return kConfigError;
    } catch (const DomainTooLarge& e) {
        err << "mbwish: oracle refused: " << e.what() << "\n";
        return kOracleRefused;
    } catch (const std::invalid_argument& e) {
        err << "mbwish: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        err << "mbwish: " << e.what() << "\n";
        return kFailure;
    }
    return kFailure;
}

int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace mbwish::cli

#pragma once

#include "rbc/adversary.hpp"
#include "rbc/analysis.hpp"
#include "rbc/errors.hpp"
#include "rbc/nonlocal_games.hpp"
#include "rbc/protocol.hpp"
#include "rbc/spacetime_sim.hpp"
#include "rbc/transcript_json.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace rbc::cli {

/// Everything a `simulate` run needs, after merging the config file and flags.
struct ExperimentConfig {
    ProtocolKind kind = ProtocolKind::tree;
    int k = 10;
    std::uint64_t q = 2147483647;
    std::vector<double> p{0.0};
    int m = 1;
    std::optional<int> n_stations;
    int prune_delay = 2;
    int acc_delay = 2;
    bool lossy_reveal = false;
    std::optional<std::uint64_t> seed;
    std::uint64_t trials = 1000;
    unsigned jobs = 1;
    std::string csv_path;
    std::string json_path;
    std::string transcript_path;  ///< transcript of trial 0
    std::string events_path;      ///< event log of trial 0

    int stations() const { return n_stations ? *n_stations : (kind == ProtocolKind::tree ? 3 : 2); }
};

inline std::string output_path(const std::string& p) {
    if (p.empty() || std::filesystem::path(p).is_absolute()) return p;
    if (const char* dir = std::getenv("RBCLAB_OUT_DIR"); dir != nullptr && *dir != '\0') {
        std::filesystem::create_directories(dir);
        return (std::filesystem::path(dir) / p).string();
    }
    return p;
}

inline void write_file(const std::string& path, const std::string& content) {
    const std::string full = output_path(path);
    std::ofstream f(full, std::ios::binary);
    if (!f) throw config_error("output", "cannot write '" + full + "'");
    f << content;
}

inline nlohmann::json read_json_file(const std::string& path, const std::string& what) {
    std::ifstream f(path);
    if (!f) throw config_error(what, "cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error(what, std::string("invalid JSON: ") + e.what());
    }
}

namespace detail {

inline std::uint64_t as_uint(const nlohmann::json& v, const std::string& field) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
    throw config_error(field, "expected a non-negative integer");
}

inline int as_int(const nlohmann::json& v, const std::string& field) {
    if (!v.is_number_integer()) throw config_error(field, "expected an integer");
    return v.get<int>();
}

inline double as_double(const nlohmann::json& v, const std::string& field) {
    if (!v.is_number()) throw config_error(field, "expected a number");
    return v.get<double>();
}

inline std::string as_string(const nlohmann::json& v, const std::string& field) {
    if (!v.is_string()) throw config_error(field, "expected a string");
    return v.get<std::string>();
}

}  // namespace detail

/// Applies a JSON config document. Unknown keys are rejected.
inline void apply_config(ExperimentConfig& c, const nlohmann::json& j) {
    using namespace detail;
    if (!j.is_object()) throw config_error("config", "expected a JSON object");
    static const std::set<std::string> known{"protocol", "k", "q", "p", "m", "n_stations", "N", "acc_delay",
                                             "lossy_reveal", "seed", "trials", "jobs", "output"};
    for (const auto& [key, val] : j.items()) {
        if (!known.count(key)) throw config_error("config." + key, "unknown field");
    }
    if (j.contains("protocol")) {
        try {
            c.kind = parse_protocol(as_string(j["protocol"], "config.protocol"));
        } catch (const config_error& e) {
            throw config_error("config.protocol", e.what());
        }
    }
    if (j.contains("k")) c.k = as_int(j["k"], "config.k");
    if (j.contains("q")) c.q = as_uint(j["q"], "config.q");
    if (j.contains("p")) {
        c.p.clear();
        if (j["p"].is_array()) {
            for (std::size_t i = 0; i < j["p"].size(); ++i) c.p.push_back(as_double(j["p"][i], "config.p[" + std::to_string(i) + "]"));
        } else {
            c.p.push_back(as_double(j["p"], "config.p"));
        }
    }
    if (j.contains("m")) c.m = as_int(j["m"], "config.m");
    if (j.contains("n_stations")) c.n_stations = as_int(j["n_stations"], "config.n_stations");
    if (j.contains("N")) c.prune_delay = as_int(j["N"], "config.N");
    if (j.contains("acc_delay")) c.acc_delay = as_int(j["acc_delay"], "config.acc_delay");
    if (j.contains("lossy_reveal")) {
        if (!j["lossy_reveal"].is_boolean()) throw config_error("config.lossy_reveal", "expected a boolean");
        c.lossy_reveal = j["lossy_reveal"].get<bool>();
    }
    if (j.contains("seed")) c.seed = as_uint(j["seed"], "config.seed");
    if (j.contains("trials")) c.trials = as_uint(j["trials"], "config.trials");
    if (j.contains("jobs")) c.jobs = static_cast<unsigned>(as_uint(j["jobs"], "config.jobs"));
    if (j.contains("output")) {
        const auto& o = j["output"];
        if (!o.is_object()) throw config_error("config.output", "expected an object");
        static const std::set<std::string> out_keys{"csv", "json", "transcript", "events"};
        for (const auto& [key, val] : o.items()) {
            if (!out_keys.count(key)) throw config_error("config.output." + key, "unknown field");
        }
        if (o.contains("csv")) c.csv_path = as_string(o["csv"], "config.output.csv");
        if (o.contains("json")) c.json_path = as_string(o["json"], "config.output.json");
        if (o.contains("transcript")) c.transcript_path = as_string(o["transcript"], "config.output.transcript");
        if (o.contains("events")) c.events_path = as_string(o["events"], "config.output.events");
    }
}

inline RunConfig to_run_config(const ExperimentConfig& c, double p) {
    RunConfig rc;
    rc.kind = c.kind;
    rc.k = c.k;
    try {
        rc.field = FieldSpec(c.q);
    } catch (const std::domain_error& e) {
        throw config_error("q", e.what());
    }
    rc.n_stations = c.stations();
    rc.loss = LossModel{p, c.m};
    rc.prune_delay = c.prune_delay;
    rc.acc_delay = c.acc_delay;
    rc.lossy_reveal = c.lossy_reveal;
    rc.validate();
    return rc;
}

inline void validate(const ExperimentConfig& c) {
    if (!c.seed) throw config_error("seed", "simulate requires a seed (--seed or config.seed)");
    if (c.trials < 1) throw config_error("trials", "need at least one trial");
    if (c.jobs < 1) throw config_error("jobs", "need at least one job");
    if (c.p.empty()) throw config_error("p", "need at least one loss probability");
    for (double p : c.p) to_run_config(c, p);
}

inline std::vector<double> parse_list(const std::string& s, const std::string& field) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw config_error(field, "cannot parse '" + item + "' as a number");
        }
    }
    if (out.empty()) throw config_error(field, "empty list");
    return out;
}

inline GameRational parse_rational(const std::string& s, const std::string& field) {
    try {
        const auto slash = s.find('/');
        std::size_t used = 0;
        if (slash == std::string::npos) {
            const long long n = std::stoll(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return GameRational(n);
        }
        const std::string a = s.substr(0, slash), b = s.substr(slash + 1);
        const long long n = std::stoll(a, &used);
        if (used != a.size()) throw std::invalid_argument(s);
        const long long d = std::stoll(b, &used);
        if (used != b.size() || d <= 0) throw std::invalid_argument(s);
        return GameRational(n, d);
    } catch (const std::exception&) {
        throw config_error(field, "cannot parse '" + s + "' as a rational");
    }
}

inline std::string pretty_reliability(const std::vector<ReliabilityReport>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(8) << "proto" << std::setw(10) << "p" << std::setw(4) << "m" << std::setw(6) << "k"
       << std::setw(12) << "P_ok(form)" << std::setw(12) << "P_ok(mc)" << std::setw(24) << "95% CI" << std::setw(14)
       << "bits(mean)" << "half-life\n";
    for (const auto& r : rows) {
        std::ostringstream ci;
        ci << '[' << std::setprecision(5) << r.ci.lo << ", " << r.ci.hi << ']';
        os << std::left << std::setw(8) << to_string(r.kind) << std::setw(10) << r.p << std::setw(4) << r.m
           << std::setw(6) << r.k << std::setw(12) << std::setprecision(6) << r.p_ok_formula << std::setw(12)
           << r.p_ok_mc << std::setw(24) << ci.str() << std::setw(14) << r.comm_bits_mean << r.half_life_formula << '\n';
    }
    return os.str();
}

inline int run_simulate(const ExperimentConfig& c, bool pretty, std::ostream& out) {
    validate(c);
    std::vector<ReliabilityReport> rows;
    for (double p : c.p) rows.push_back(monte_carlo_reliability(to_run_config(c, p), c.trials, *c.seed, c.jobs));

    nlohmann::ordered_json summary;
    summary["seed"] = *c.seed;
    summary["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) summary["rows"].push_back(to_json(r));
    if (c.kind == ProtocolKind::tree && rows.size() >= 2) {
        std::vector<double> xs, ys;
        for (const auto& r : rows) {
            if (r.hazard > 0) {
                xs.push_back(r.m * r.p);
                ys.push_back(r.hazard);
            }
        }
        if (xs.size() >= 2) {
            const SlopeFit f = fit_loglog(xs, ys);
            summary["hazard_slope"] = f.slope;
            summary["hazard_slope_stderr"] = f.stderr_slope;
        }
    }

    if (!c.transcript_path.empty() || !c.events_path.empty()) {
        RunConfig rc = to_run_config(c, c.p.front());
        rc.record_events = true;
        const std::uint64_t s = derive_seed(*c.seed, StreamTag::trial, 0);
        const int d = static_cast<int>(derive_seed(s, StreamTag::commitment) & 1U);
        HonestAlice alice(Commitment(d), honest_shares(rc, s));
        const RunResult res = Simulator(rc).run(alice, s);
        if (!c.transcript_path.empty()) write_file(c.transcript_path, transcript_to_json(res.transcript).dump(2) + "\n");
        if (!c.events_path.empty()) {
            std::ostringstream ev;
            write_event_log(ev, res.events);
            write_file(c.events_path, ev.str());
        }
    }
    if (!c.csv_path.empty()) {
        std::ostringstream csv;
        write_reliability_csv(csv, rows);
        write_file(c.csv_path, csv.str());
    }
    if (!c.json_path.empty()) write_file(c.json_path, summary.dump(2) + "\n");
    if (pretty) {
        out << pretty_reliability(rows);
        if (summary.contains("hazard_slope")) out << "hazard slope vs mp: " << summary["hazard_slope"].get<double>() << '\n';
    } else {
        out << summary.dump(2) << '\n';
    }
    return 0;
}

inline const char* usage_text() {
    return "usage: rbclab <simulate|bind-oracle|chsh|bounds|verify-transcript> [options]\n"
           "run 'rbclab <subcommand> --help' for the options of a subcommand\n";
}

/// Entry point shared by the executable and the tests. Exit status: 0 on
/// success, 1 on validation or usage errors, 2 when a resource guard refuses.
inline int dispatch(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Relativistic bit commitment laboratory", "rbclab"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    ExperimentConfig sim_cfg;
    std::string sim_config_path, sim_protocol, sim_p;
    std::optional<int> sim_k, sim_m, sim_n, sim_N;
    std::optional<std::uint64_t> sim_q, sim_seed, sim_trials;
    std::optional<unsigned> sim_jobs;
    std::string sim_csv, sim_json, sim_transcript, sim_events;
    bool pretty = false;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo reliability of honest runs");
    simulate->add_option("--config", sim_config_path, "JSON experiment config");
    simulate->add_option("--protocol", sim_protocol, "single, fq or tree");
    simulate->add_option("--k", sim_k, "rounds");
    simulate->add_option("--q", sim_q, "prime field size");
    simulate->add_option("--p", sim_p, "death probability, or a comma-separated sweep");
    simulate->add_option("--m", sim_m, "dead duration in rounds");
    simulate->add_option("--n-stations", sim_n, "stations (tree: 3..11)");
    simulate->add_option("--N", sim_N, "pruning delay in rounds");
    simulate->add_option("--seed", sim_seed, "root seed (required)");
    simulate->add_option("--trials", sim_trials, "trials per row");
    simulate->add_option("--jobs", sim_jobs, "worker threads");
    simulate->add_option("--csv", sim_csv, "write the CSV report here");
    simulate->add_option("--json", sim_json, "write the JSON summary here");
    simulate->add_option("--transcript", sim_transcript, "write trial 0's transcript here");
    simulate->add_option("--events", sim_events, "write trial 0's event log (JSON lines) here");
    simulate->add_flag("--pretty", pretty, "human-readable table");

    std::string bo_protocol = "single";
    std::optional<int> bo_k;
    std::uint64_t bo_q = 2;
    bool bo_unreduced = false;
    double bo_budget = 5e8;
    std::string bo_json;
    auto* bind = app.add_subcommand("bind-oracle", "exact sum-binding value by exhaustive search");
    bind->add_option("--protocol", bo_protocol, "single, fq or tree");
    bind->add_option("--k", bo_k, "rounds");
    bind->add_option("--q", bo_q, "prime field size");
    bind->add_flag("--no-reduction", bo_unreduced, "let rightmost children stay silent too");
    bind->add_option("--budget", bo_budget, "work budget in evaluation steps");
    bind->add_option("--json", bo_json, "also write the report here");
    bind->add_flag("--pretty", pretty, "human-readable output");

    std::uint64_t ch_q = 2;
    bool ch_uniform = false;
    std::string ch_S, ch_y;
    auto* chsh = app.add_subcommand("chsh", "classical value of a CHSH-type game over F_Q");
    chsh->add_option("--q", ch_q, "prime field size");
    chsh->add_flag("--uniform", ch_uniform, "S = F_Q and uniform y (the default)");
    chsh->add_option("--S", ch_S, "comma-separated support of x");
    chsh->add_option("--y", ch_y, "comma-separated distribution of y, entries like 1/3");
    chsh->add_flag("--pretty", pretty, "human-readable output");

    std::string bd_k = "1,10,100", bd_q = "2,101,2147483647", bd_n = "3";
    std::optional<double> bd_eps, bd_eps_k;
    auto* bounds = app.add_subcommand("bounds", "binding bound table and x_n recursion");
    bounds->add_option("--k", bd_k, "comma-separated round counts");
    bounds->add_option("--q", bd_q, "comma-separated field sizes");
    bounds->add_option("--n", bd_n, "comma-separated station counts");
    bounds->add_option("--eps", bd_eps, "target epsilon for the minimal log2 Q");
    bounds->add_option("--eps-k", bd_eps_k, "round count for --eps (default: largest --k)");
    bounds->add_flag("--pretty", pretty, "human-readable output");

    std::string vt_file;
    auto* verify = app.add_subcommand("verify-transcript", "replay a transcript through Bob's verifier");
    verify->add_option("file", vt_file, "transcript JSON")->required();

    std::vector<std::string> args;
    args.reserve(argv.size());
    for (auto it = argv.rbegin(); it != argv.rend(); ++it) args.push_back(*it);
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n' << usage_text();
        return 1;
    }

    try {
        if (simulate->parsed()) {
            if (!sim_config_path.empty()) apply_config(sim_cfg, read_json_file(sim_config_path, "config"));
            if (!sim_protocol.empty()) sim_cfg.kind = parse_protocol(sim_protocol);
            if (sim_k) sim_cfg.k = *sim_k;
            if (sim_q) sim_cfg.q = *sim_q;
            if (!sim_p.empty()) sim_cfg.p = parse_list(sim_p, "p");
            if (sim_m) sim_cfg.m = *sim_m;
            if (sim_n) sim_cfg.n_stations = *sim_n;
            if (sim_N) sim_cfg.prune_delay = *sim_N;
            if (sim_seed) sim_cfg.seed = *sim_seed;
            if (sim_trials) sim_cfg.trials = *sim_trials;
            if (sim_jobs) sim_cfg.jobs = *sim_jobs;
            if (!sim_csv.empty()) sim_cfg.csv_path = sim_csv;
            if (!sim_json.empty()) sim_cfg.json_path = sim_json;
            if (!sim_transcript.empty()) sim_cfg.transcript_path = sim_transcript;
            if (!sim_events.empty()) sim_cfg.events_path = sim_events;
            return run_simulate(sim_cfg, pretty, out);
        }
        if (bind->parsed()) {
            const ProtocolKind kind = parse_protocol(bo_protocol);
            const int k = bo_k ? *bo_k : (kind == ProtocolKind::single ? 1 : 2);
            FieldSpec f;
            try {
                f = FieldSpec(bo_q);
            } catch (const std::domain_error& e) {
                throw config_error("q", e.what());
            }
            BindingOptions opt;
            opt.reduced = !bo_unreduced;
            opt.budget = bo_budget;
            const BindingReport r = brute_force_binding(kind, k, f, opt);
            const auto j = to_json(r);
            if (!bo_json.empty()) write_file(bo_json, j.dump(2) + "\n");
            if (pretty) {
                out << to_string(kind) << " k=" << k << " Q=" << bo_q << ": sum = " << to_string(r.sum_exact) << " ("
                    << r.sum << "), epsilon = " << r.epsilon << ", bound on sum = " << r.bound_sum << '\n';
            } else {
                out << j.dump(2) << '\n';
            }
            return 0;
        }
        if (chsh->parsed()) {
            FieldSpec f;
            try {
                f = FieldSpec(ch_q);
            } catch (const std::domain_error& e) {
                throw config_error("q", e.what());
            }
            GameSpec g = GameSpec::uniform(f);
            if (!ch_S.empty()) {
                g.S.clear();
                for (double x : parse_list(ch_S, "S")) {
                    if (x < 0 || x != static_cast<double>(static_cast<std::uint64_t>(x))) {
                        throw config_error("S", "entries must be field elements");
                    }
                    g.S.push_back(static_cast<std::uint64_t>(x));
                }
            }
            if (!ch_y.empty()) {
                g.y_dist.clear();
                std::stringstream ss(ch_y);
                std::string item;
                while (std::getline(ss, item, ',')) g.y_dist.push_back(parse_rational(item, "y"));
            }
            const GameValue v = chsh_value(g);
            const auto j = game_report(g, v);
            if (pretty) {
                out << "Q=" << ch_q << " |S|=" << g.S.size() << ": value " << v.value << ", bound "
                    << j["bound"].get<double>() << ", gap " << j["gap"].get<double>() << '\n';
            } else {
                out << j.dump(2) << '\n';
            }
            return 0;
        }
        if (bounds->parsed()) {
            std::vector<int> ks, ns;
            std::vector<std::uint64_t> qs;
            for (double v : parse_list(bd_k, "k")) ks.push_back(static_cast<int>(v));
            for (double v : parse_list(bd_n, "n")) ns.push_back(static_cast<int>(v));
            for (const auto& item : [&] {
                     std::vector<std::string> parts;
                     std::stringstream ss(bd_q);
                     std::string s;
                     while (std::getline(ss, s, ',')) parts.push_back(s);
                     return parts;
                 }()) {
                try {
                    qs.push_back(std::stoull(item));
                } catch (const std::exception&) {
                    throw config_error("q", "cannot parse '" + item + "'");
                }
            }
            const auto rows = bound_table(ks, qs, ns);
            nlohmann::ordered_json j;
            j["rows"] = nlohmann::ordered_json::array();
            for (const auto& r : rows) j["rows"].push_back(to_json(r));
            nlohmann::ordered_json xs;
            for (int n : ns) xs[std::to_string(n)] = x_n(n);
            j["x_n"] = xs;
            if (bd_eps) {
                const double kk = bd_eps_k ? *bd_eps_k : *std::max_element(ks.begin(), ks.end());
                j["min_log2_q"] = {{"k", kk}, {"epsilon", *bd_eps}, {"log2_q", min_log2_q(kk, *bd_eps)}};
            }
            if (pretty) {
                out << std::left << std::setw(10) << "n" << std::setw(10) << "k" << std::setw(14) << "Q" << std::setw(16)
                    << "eps bound" << "x_n\n";
                for (const auto& r : rows) {
                    out << std::left << std::setw(10) << r.n_stations << std::setw(10) << r.k << std::setw(14) << r.q
                        << std::setw(16) << r.bound.raw << r.bound.x << (r.bound.conjectured ? " (conjectured)" : "")
                        << '\n';
                }
                if (j.contains("min_log2_q")) out << "min log2 Q: " << j["min_log2_q"]["log2_q"].get<double>() << '\n';
            } else {
                out << j.dump(2) << '\n';
            }
            return 0;
        }
        if (verify->parsed()) {
            const Transcript t = transcript_from_json(read_json_file(vt_file, "transcript"));
            const Verdict v = verify_transcript(t);
            nlohmann::ordered_json j;
            j["outcome"] = to_string(v.outcome);
            if (v.accepted()) j["bit"] = v.bit;
            j["reason"] = v.reason;
            out << j.dump(2) << '\n';
            return 0;
        }
    } catch (const resource_guard_error& e) {
        err << "refused: " << e.what() << '\n';
        return 2;
    } catch (const std::logic_error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::runtime_error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    err << usage_text();
    return 1;
}

}  // namespace rbc::cli

#pragma once

#include "rbc/errors.hpp"
#include "rbc/protocol.hpp"
#include "rbc/random.hpp"
#include "rbc/spacetime_sim.hpp"

#include <boost/math/distributions/beta.hpp>
#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace rbc {

using BigRational = boost::multiprecision::cpp_rational;

namespace detail {

inline void check_loss_params(double p, int m, int k) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("p must lie in [0, 1]");
    if (m < 1) throw std::domain_error("m must be >= 1");
    if (k < 1) throw std::domain_error("k must be >= 1");
    if (m * p > 1.0) throw std::domain_error("mp must lie in [0, 1]");
}

}  // namespace detail

/// Per-round abort probability of Tree(n) in the closed-form model:
/// q(n) = n (mp)^(n-1) + (mp)^n. For n = 3 this is 3(mp)^2 + (mp)^3.
inline double tree_q(int n_stations, double mp) {
    if (n_stations < 3) throw std::domain_error("the tree protocol needs at least 3 stations");
    return n_stations * std::pow(mp, n_stations - 1) + std::pow(mp, n_stations);
}

inline BigRational tree_q_exact(int n_stations, const BigRational& mp) {
    if (n_stations < 3) throw std::domain_error("the tree protocol needs at least 3 stations");
    BigRational pw(1);
    for (int i = 0; i < n_stations - 1; ++i) pw *= mp;
    return BigRational(n_stations) * pw + pw * mp;
}

/// Closed-form success probability: (1-p)^k for the two-station protocols,
/// (1-q(n))^k for Tree(n).
inline double p_ok_formula(ProtocolKind kind, double p, int m, int k, int n_stations = 3) {
    detail::check_loss_params(p, m, k);
    if (kind != ProtocolKind::tree) return std::pow(1.0 - p, k);
    return std::pow(1.0 - tree_q(n_stations, m * p), k);
}

inline BigRational p_ok_formula_exact(ProtocolKind kind, const BigRational& p, int m, int k, int n_stations = 3) {
    if (p < 0 || p > 1) throw std::domain_error("p must lie in [0, 1]");
    if (m < 1 || k < 1) throw std::domain_error("m and k must be >= 1");
    const BigRational base = kind == ProtocolKind::tree ? BigRational(1) - tree_q_exact(n_stations, p * m) : BigRational(1) - p;
    BigRational r(1);
    for (int i = 0; i < k; ++i) r *= base;
    return r;
}

/// Exact survival of the two-station chain protocol under this simulator's
/// loss process: a station is silent at round i iff it drew a death in
/// rounds [i-m+1, i]. Equals (1-p)^k when m = 1.
inline double fq_survival_exact(double p, int m, int k) {
    detail::check_loss_params(p, m, k);
    std::uint64_t draws = 0;
    for (int station = 0; station < 2; ++station) {
        int covered_until = 0;
        for (int i = 1 + station; i <= k; i += 2) {
            const int lo = std::max(1, i - m + 1);
            draws += static_cast<std::uint64_t>(i - std::max(lo - 1, covered_until));
            covered_until = i;
        }
    }
    return std::pow(1.0 - p, static_cast<double>(draws));
}

struct HalfLife {
    double rounds = 0;          ///< 1/(mp) for chains, as usually quoted
    double from_formula = 0;    ///< 1 / per-round hazard implied by p_ok_formula
    double approx = 0;          ///< leading-order approximation
    std::string note;
};

inline double inverse_or_inf(double x) { return x > 0 ? 1.0 / x : std::numeric_limits<double>::infinity(); }

/// Rounds until survival drops to about 1/e.
inline HalfLife half_life(ProtocolKind kind, double p, int m, int n_stations = 3) {
    detail::check_loss_params(p, m, 1);
    HalfLife h;
    if (kind != ProtocolKind::tree) {
        h.rounds = inverse_or_inf(m * p);
        h.from_formula = inverse_or_inf(p);
        h.approx = h.rounds;
        h.note = "displayed value is 1/(mp); (1-p)^k gives 1/p";
        return h;
    }
    const double q = tree_q(n_stations, m * p);
    h.rounds = inverse_or_inf(q);
    h.from_formula = h.rounds;
    h.approx = inverse_or_inf(n_stations * std::pow(m * p, n_stations - 1));
    if (n_stations * m * p >= 0.1) h.note = "outside the nmp << 1 regime";
    return h;
}

/// x_2 = 1, x_n = x_{n-1} + 1/(4 x_{n-1}).
inline double x_n(int n) {
    if (n < 2) throw std::domain_error("x_n is defined for n >= 2");
    double x = 1.0;
    for (int i = 3; i <= n; ++i) x += 1.0 / (4.0 * x);
    return x;
}

struct BindingBound {
    double raw = 0;
    double capped = 0;  ///< min(raw, 1)
    double x = 0;       ///< x_n used
    bool conjectured = false;
};

/// Binding parameter bound: 5k/sqrt(2Q) with three stations, and the
/// conjectured 2 k x_n sqrt(2/Q) with n > 3.
inline BindingBound binding_bound(int k, std::uint64_t q, int n_stations = 3) {
    if (k < 1) throw std::domain_error("k must be >= 1");
    if (q < 2) throw std::domain_error("Q must be >= 2");
    if (n_stations < 3) throw std::domain_error("n_stations must be >= 3");
    BindingBound b;
    b.x = x_n(n_stations);
    if (n_stations == 3) {
        b.raw = 5.0 * k / std::sqrt(2.0 * static_cast<double>(q));
    } else {
        b.raw = 2.0 * k * b.x * std::sqrt(2.0 / static_cast<double>(q));
        b.conjectured = true;
    }
    b.capped = std::min(b.raw, 1.0);
    return b;
}

/// Smallest log2 Q with 5k/sqrt(2Q) <= eps, i.e. Q >= 25 k^2 / (2 eps^2).
inline double min_log2_q(double k, double eps) {
    if (!(k >= 1) || !(eps > 0)) throw std::domain_error("need k >= 1 and eps > 0");
    return std::log2(25.0) + 2.0 * std::log2(k) - 1.0 - 2.0 * std::log2(eps);
}

struct BoundRow {
    int k = 1;
    std::uint64_t q = 2;
    int n_stations = 3;
    BindingBound bound;
};

inline std::vector<BoundRow> bound_table(const std::vector<int>& ks, const std::vector<std::uint64_t>& qs,
                                         const std::vector<int>& ns) {
    std::vector<BoundRow> rows;
    for (int n : ns) {
        for (int k : ks) {
            for (auto q : qs) rows.push_back(BoundRow{k, q, n, binding_bound(k, q, n)});
        }
    }
    return rows;
}

struct Interval {
    double lo = 0;
    double hi = 1;
};

/// Exact binomial (Clopper-Pearson) interval at level 1 - alpha.
inline Interval clopper_pearson(std::uint64_t successes, std::uint64_t trials, double alpha = 0.05) {
    if (trials == 0) throw std::domain_error("need at least one trial");
    if (successes > trials) throw std::domain_error("more successes than trials");
    const double x = static_cast<double>(successes), n = static_cast<double>(trials);
    Interval ci;
    ci.lo = successes == 0 ? 0.0 : boost::math::quantile(boost::math::beta_distribution<>(x, n - x + 1), alpha / 2);
    ci.hi = successes == trials ? 1.0 : boost::math::quantile(boost::math::beta_distribution<>(x + 1, n - x), 1 - alpha / 2);
    return ci;
}

struct SlopeFit {
    double slope = 0;
    double intercept = 0;
    double stderr_slope = 0;
};

/// Least squares fit of log y against log x.
inline SlopeFit fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2) throw std::domain_error("need at least two points");
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0) || !(ys[i] > 0)) throw std::domain_error("log-log fit needs positive data");
        const double lx = std::log(xs[i]), ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    SlopeFit f;
    const double den = n * sxx - sx * sx;
    f.slope = (n * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / n;
    if (xs.size() > 2) {
        double rss = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double r = std::log(ys[i]) - f.intercept - f.slope * std::log(xs[i]);
            rss += r * r;
        }
        f.stderr_slope = std::sqrt(rss / (n - 2) / (sxx - sx * sx / n));
    }
    return f;
}

struct ReliabilityReport {
    ProtocolKind kind = ProtocolKind::tree;
    double p = 0;
    int m = 1;
    int k = 1;
    int n_stations = 3;
    int prune_delay = 2;
    std::uint64_t q = 2;
    std::uint64_t trials = 0;
    std::uint64_t successes = 0;
    double p_ok_formula = 1;
    double p_ok_exact_model = 1;  ///< exact value under this loss process, where known
    double p_ok_mc = 1;
    Interval ci;
    double sigma = 0;
    std::vector<std::uint64_t> aborts_at;  ///< index r-1
    std::vector<std::uint64_t> at_risk;    ///< runs alive at the start of round r
    double hazard = 0;                     ///< pooled per-round abort rate after the first m+1 rounds
    std::uint64_t hazard_events = 0;
    std::uint64_t hazard_exposure = 0;
    double q_closed_form = 0;
    double stationary_dead = 0;
    double comm_bits_mean = 0;
    double reveal_bits_mean = 0;
    double comm_bits_formula = 0;
    double half_life_formula = 0;
    double half_life_alt = 0;
    std::string notes;
};

/// Paper's communication cost: 2k log2 Q for the chain, k 2^(N+2) log2 Q for
/// the binary tree (generalised as 2 k a^(N+1) log2 Q for arity a).
inline double comm_cost_formula(ProtocolKind kind, int k, const FieldSpec& f, int prune_delay, int n_stations = 3) {
    if (kind != ProtocolKind::tree) return 2.0 * k * f.log2q();
    const double a = n_stations - 1;
    return 2.0 * k * std::pow(a, prune_delay + 1) * f.log2q();
}

/// Honest-party Monte Carlo. Trial t uses seed derive_seed(seed, trial, t), so
/// the result is independent of `jobs`.
inline ReliabilityReport monte_carlo_reliability(const RunConfig& cfg, std::uint64_t trials, std::uint64_t seed,
                                                 unsigned jobs = 1) {
    if (trials < 1) throw config_error("trials", "need at least one trial");
    const Simulator sim(cfg);
    const int k = cfg.k;
    struct Acc {
        std::uint64_t ok = 0;
        std::vector<std::uint64_t> aborts;
    };
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::min<std::uint64_t>(trials, 256))));
    std::vector<Acc> parts(jobs);
    // Floating sums are kept per block and reduced in block order so the
    // mean does not depend on how blocks were spread over workers.
    const std::uint64_t n_blocks = (trials + 1023) / 1024;
    std::vector<double> block_bits(n_blocks, 0.0), block_rbits(n_blocks, 0.0);
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&](unsigned w) {
        Acc& a = parts[w];
        a.aborts.assign(static_cast<std::size_t>(k), 0);
        try {
            for (;;) {
                const std::uint64_t t = next.fetch_add(1024);
                if (t >= trials) break;
                const std::uint64_t end = std::min(trials, t + 1024);
                for (std::uint64_t i = t; i < end; ++i) {
                    const std::uint64_t s = derive_seed(seed, StreamTag::trial, i);
                    const int d = static_cast<int>(derive_seed(s, StreamTag::commitment) & 1U);
                    HonestAlice alice(Commitment(d), honest_shares(cfg, s));
                    const RunResult r = sim.run(alice, s);
                    const CommCost c = comm_cost_detail(r.transcript);
                    block_bits[t / 1024] += c.bits;
                    block_rbits[t / 1024] += c.reveal_bits;
                    if (r.verdict.accepted(d)) {
                        ++a.ok;
                    } else if (r.transcript.aborted) {
                        ++a.aborts[static_cast<std::size_t>(r.transcript.abort_round - 1)];
                    }
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mu);
            if (!failure) failure = std::current_exception();
        }
    };
    if (jobs == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < jobs; ++w) pool.emplace_back(worker, w);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    ReliabilityReport rep;
    rep.kind = cfg.kind;
    rep.p = cfg.loss.p;
    rep.m = cfg.loss.m;
    rep.k = k;
    rep.n_stations = cfg.n_stations;
    rep.prune_delay = cfg.prune_delay;
    rep.q = cfg.field.q();
    rep.trials = trials;
    rep.aborts_at.assign(static_cast<std::size_t>(k), 0);
    double bits = 0, rbits = 0;
    for (const auto& a : parts) {
        rep.successes += a.ok;
        for (int r = 0; r < k; ++r) rep.aborts_at[static_cast<std::size_t>(r)] += a.aborts[static_cast<std::size_t>(r)];
    }
    for (std::uint64_t b = 0; b < n_blocks; ++b) {
        bits += block_bits[b];
        rbits += block_rbits[b];
    }
    rep.comm_bits_mean = bits / static_cast<double>(trials);
    rep.reveal_bits_mean = rbits / static_cast<double>(trials);
    rep.p_ok_mc = static_cast<double>(rep.successes) / static_cast<double>(trials);
    if (cfg.loss.p == 0.0 && cfg.outages.empty()) {
        // Loss-free runs are deterministic; the interval collapses.
        rep.ci = Interval{rep.p_ok_mc, rep.p_ok_mc};
    } else {
        rep.ci = clopper_pearson(rep.successes, trials);
    }
    rep.sigma = std::sqrt(rep.p_ok_mc * (1 - rep.p_ok_mc) / static_cast<double>(trials));
    rep.at_risk.assign(static_cast<std::size_t>(k), 0);
    std::uint64_t alive = trials;
    for (int r = 0; r < k; ++r) {
        rep.at_risk[static_cast<std::size_t>(r)] = alive;
        alive -= rep.aborts_at[static_cast<std::size_t>(r)];
        if (r + 1 > cfg.loss.m + 1) {
            rep.hazard_events += rep.aborts_at[static_cast<std::size_t>(r)];
            rep.hazard_exposure += rep.at_risk[static_cast<std::size_t>(r)];
        }
    }
    rep.hazard = rep.hazard_exposure ? static_cast<double>(rep.hazard_events) / static_cast<double>(rep.hazard_exposure) : 0.0;
    rep.stationary_dead = cfg.loss.stationary_dead();
    const double mp = cfg.loss.m * cfg.loss.p;
    if (mp <= 1.0) {
        rep.p_ok_formula = p_ok_formula(cfg.kind, cfg.loss.p, cfg.loss.m, k, cfg.n_stations);
        const HalfLife h = half_life(cfg.kind, cfg.loss.p, cfg.loss.m, cfg.n_stations);
        rep.half_life_formula = h.rounds;
        rep.half_life_alt = h.from_formula;
        if (cfg.kind == ProtocolKind::tree) {
            rep.q_closed_form = tree_q(cfg.n_stations, mp);
            rep.p_ok_exact_model = std::numeric_limits<double>::quiet_NaN();
        } else {
            rep.p_ok_exact_model = fq_survival_exact(cfg.loss.p, cfg.loss.m, k);
            rep.notes = "half-life shown as 1/(mp); (1-p)^k implies 1/p";
        }
    }
    rep.comm_bits_formula = comm_cost_formula(cfg.kind, k, cfg.field, cfg.prune_delay, cfg.n_stations);
    return rep;
}

inline const std::vector<std::string>& reliability_csv_columns() {
    static const std::vector<std::string> cols{"protocol",     "p",        "m",     "k",     "n",
                                               "N",            "p_ok_formula", "p_ok_mc", "ci_lo", "ci_hi",
                                               "comm_bits_mean", "comm_bits_formula", "half_life_formula"};
    return cols;
}

inline std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

inline void write_reliability_csv(std::ostream& os, const std::vector<ReliabilityReport>& rows) {
    const auto& cols = reliability_csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    for (const auto& r : rows) {
        os << to_string(r.kind) << ',' << format_number(r.p) << ',' << r.m << ',' << r.k << ',' << r.n_stations << ','
           << r.prune_delay << ',' << format_number(r.p_ok_formula) << ',' << format_number(r.p_ok_mc) << ','
           << format_number(r.ci.lo) << ',' << format_number(r.ci.hi) << ',' << format_number(r.comm_bits_mean) << ','
           << format_number(r.comm_bits_formula) << ',' << format_number(r.half_life_formula) << '\n';
    }
}

inline nlohmann::ordered_json to_json(const ReliabilityReport& r) {
    auto num = [](double v) -> nlohmann::ordered_json {
        if (std::isfinite(v)) return v;
        return format_number(v);
    };
    nlohmann::ordered_json j;
    j["protocol"] = to_string(r.kind);
    j["p"] = r.p;
    j["m"] = r.m;
    j["k"] = r.k;
    j["n"] = r.n_stations;
    j["N"] = r.prune_delay;
    j["p_ok_formula"] = num(r.p_ok_formula);
    j["p_ok_mc"] = r.p_ok_mc;
    j["ci_lo"] = r.ci.lo;
    j["ci_hi"] = r.ci.hi;
    j["comm_bits_mean"] = r.comm_bits_mean;
    j["comm_bits_formula"] = r.comm_bits_formula;
    j["half_life_formula"] = num(r.half_life_formula);
    j["half_life_from_p_ok"] = num(r.half_life_alt);
    j["q"] = r.q;
    j["trials"] = r.trials;
    j["successes"] = r.successes;
    j["reveal_bits_mean"] = r.reveal_bits_mean;
    j["hazard"] = r.hazard;
    j["q_closed_form"] = r.q_closed_form;
    j["stationary_dead"] = r.stationary_dead;
    j["p_ok_exact_model"] = num(r.p_ok_exact_model);
    j["aborts_at"] = r.aborts_at;
    if (!r.notes.empty()) j["notes"] = r.notes;
    return j;
}

inline nlohmann::ordered_json to_json(const BoundRow& r) {
    nlohmann::ordered_json j;
    j["k"] = r.k;
    j["q"] = r.q;
    j["n"] = r.n_stations;
    j["epsilon_bound"] = r.bound.raw;
    j["epsilon_bound_capped"] = r.bound.capped;
    j["x_n"] = r.bound.x;
    j["conjectured"] = r.bound.conjectured;
    return j;
}

}  // namespace rbc

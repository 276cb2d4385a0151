#pragma once

#include "rbc/errors.hpp"
#include "rbc/finite_field.hpp"

#include <boost/rational.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace rbc {

using GameRational = boost::rational<std::int64_t>;

/// CHSH-type game over F_Q: x uniform on S, y drawn from y_dist; the players
/// win when f(x) + g(y) = x*y.
struct GameSpec {
    FieldSpec field{2};
    std::vector<std::uint64_t> S;
    std::vector<GameRational> y_dist;  ///< one entry per element of F_Q

    static GameSpec uniform(const FieldSpec& f) {
        GameSpec g;
        g.field = f;
        for (std::uint64_t x = 0; x < f.q(); ++x) g.S.push_back(x);
        g.y_dist.assign(f.q(), GameRational(1, static_cast<std::int64_t>(f.q())));
        return g;
    }

    GameRational p_max() const { return *std::max_element(y_dist.begin(), y_dist.end()); }

    void validate() const {
        if (S.empty()) throw config_error("S", "support of x must be nonempty");
        std::set<std::uint64_t> seen;
        for (auto x : S) {
            if (x >= field.q()) throw config_error("S", "element " + std::to_string(x) + " outside the field");
            if (!seen.insert(x).second) throw config_error("S", "duplicate element " + std::to_string(x));
        }
        if (y_dist.size() != field.q()) throw config_error("y_dist", "needs one probability per field element");
        GameRational total(0);
        for (const auto& p : y_dist) {
            if (p < GameRational(0)) throw config_error("y_dist", "negative probability");
            total += p;
        }
        if (total != GameRational(1)) throw config_error("y_dist", "probabilities must sum to 1");
    }
};

struct GameValue {
    GameRational value_exact{0};
    double value = 0;
    std::vector<std::uint64_t> f;  ///< f(S[i]) for each i
    std::vector<std::uint64_t> g;  ///< g(y) for every y in F_Q (0 off the support)
};

/// Exact win probability of a deterministic strategy pair.
inline GameRational game_win_probability(const GameSpec& game, const std::vector<std::uint64_t>& f,
                                         const std::vector<std::uint64_t>& g) {
    const FieldSpec& F = game.field;
    GameRational total(0);
    for (std::size_t i = 0; i < game.S.size(); ++i) {
        for (std::uint64_t y = 0; y < F.q(); ++y) {
            if (game.y_dist[y] == GameRational(0)) continue;
            if (F.element(f[i]) + F.element(g[y]) == F.element(game.S[i]) * F.element(y)) total += game.y_dist[y];
        }
    }
    return total / static_cast<std::int64_t>(game.S.size());
}

/// Classical value by enumeration of g on the support of y; for each g the
/// best f is chosen pointwise, which is exact because x only enters through
/// f(x). Ties resolve to the smallest g in odometer order and the smallest f(x).
inline GameValue chsh_value(const GameSpec& game, double budget = 5e7) {
    game.validate();
    const std::uint64_t q = game.field.q();
    std::vector<std::uint64_t> supp;
    std::int64_t lcm = 1;
    for (std::uint64_t y = 0; y < q; ++y) {
        if (game.y_dist[y] != GameRational(0)) {
            supp.push_back(y);
            lcm = std::lcm(lcm, game.y_dist[y].denominator());
        }
    }
    const double work = std::pow(static_cast<double>(q), static_cast<double>(supp.size())) *
                        static_cast<double>(game.S.size()) * static_cast<double>(supp.size() + q);
    if (work > budget) {
        throw resource_guard_error("game enumeration needs about " + std::to_string(work) + " steps; budget is " +
                                   std::to_string(budget));
    }
    std::vector<std::int64_t> w(supp.size());
    for (std::size_t i = 0; i < supp.size(); ++i) {
        w[i] = (game.y_dist[supp[i]] * lcm).numerator();
    }

    std::vector<std::uint64_t> gs(supp.size(), 0);
    std::int64_t best = -1;
    GameValue out;
    std::vector<std::int64_t> mass(q);
    std::vector<std::uint64_t> f(game.S.size());
    for (;;) {
        std::int64_t score = 0;
        for (std::size_t i = 0; i < game.S.size(); ++i) {
            std::fill(mass.begin(), mass.end(), 0);
            const std::uint64_t x = game.S[i];
            for (std::size_t s = 0; s < supp.size(); ++s) {
                // f(x) must equal x*y - g(y) to win at y.
                const std::uint64_t target = (detail::mulmod(x, supp[s], q) + q - gs[s]) % q;
                mass[target] += w[s];
            }
            const auto it = std::max_element(mass.begin(), mass.end());
            f[i] = static_cast<std::uint64_t>(it - mass.begin());
            score += *it;
        }
        if (score > best) {
            best = score;
            out.f = f;
            out.g.assign(q, 0);
            for (std::size_t s = 0; s < supp.size(); ++s) out.g[supp[s]] = gs[s];
        }
        std::size_t pos = 0;
        while (pos < gs.size() && ++gs[pos] == q) gs[pos++] = 0;
        if (pos == gs.size()) break;
    }
    out.value_exact = GameRational(best, lcm * static_cast<std::int64_t>(game.S.size()));
    out.value = static_cast<double>(out.value_exact.numerator()) / static_cast<double>(out.value_exact.denominator());
    return out;
}

/// Upper bound p + sqrt(2/|S|) on the classical value.
inline double chsh_bound(double p, std::int64_t s_size) {
    if (!(p > 0.0 && p <= 1.0)) throw std::domain_error("p must lie in (0, 1]");
    if (s_size < 1) throw std::domain_error("|S| must be >= 1");
    return p + std::sqrt(2.0 / static_cast<double>(s_size));
}

inline nlohmann::ordered_json game_report(const GameSpec& game, const GameValue& v) {
    const double p = static_cast<double>(game.p_max().numerator()) / static_cast<double>(game.p_max().denominator());
    const double bound = chsh_bound(p, static_cast<std::int64_t>(game.S.size()));
    nlohmann::ordered_json j;
    j["q"] = game.field.q();
    j["S"] = game.S;
    j["p"] = p;
    j["value"] = v.value;
    j["value_exact"] = std::to_string(v.value_exact.numerator()) + "/" + std::to_string(v.value_exact.denominator());
    j["bound"] = bound;
    j["gap"] = bound - v.value;
    j["f"] = v.f;
    j["g"] = v.g;
    return j;
}

}  // namespace rbc

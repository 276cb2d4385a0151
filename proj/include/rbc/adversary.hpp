#pragma once

#include "rbc/errors.hpp"
#include "rbc/finite_field.hpp"
#include "rbc/protocol.hpp"
#include "rbc/tree_topology.hpp"

#include <boost/rational.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace rbc {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) {
    return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

inline std::string to_string(const Rational& r) {
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

/// Lookup table for one agent. Entries are indexed by the challenges in `acc`
/// (first entry least significant) followed by the agent's own challenge;
/// leaves have no own challenge. An entry equal to Q means silence.
struct AgentTable {
    std::vector<int> acc;  ///< BFS indices of internal nodes whose challenges the agent sees
    std::array<std::vector<std::uint32_t>, 2> by_target;
};

/// A deterministic cheating strategy on a small tree. The root's table is
/// shared by both targets: the commit round happens before Alice picks the bit
/// to open. Every later agent is told the target bit, and leaves always open
/// to the target.
struct StrategyTable {
    ProtocolKind kind = ProtocolKind::tree;
    int k = 1;
    FieldSpec field;
    int n_stations = 3;
    std::string name;
    std::vector<AgentTable> internal;  ///< BFS order
    std::vector<AgentTable> leaves;    ///< left-to-right

    TreeShape shape() const { return TreeShape(k, arity_for(kind, n_stations)); }
    std::uint32_t silent() const { return static_cast<std::uint32_t>(field.q()); }
};

namespace detail {

inline std::uint64_t ipow(std::uint64_t base, std::uint64_t e, std::uint64_t cap) {
    std::uint64_t r = 1;
    for (std::uint64_t i = 0; i < e; ++i) {
        if (r > cap / base) throw resource_guard_error("table size overflows the enumeration limit");
        r *= base;
    }
    return r;
}

/// Static layout of a small tree shared by the enumerators.
struct SmallTree {
    TreeShape shape;
    Coloring coloring;
    std::uint64_t q = 2;
    int n_internal = 0;
    int n_leaves = 0;
    std::vector<NodeId> ids;  ///< internal, BFS
    std::vector<int> parent;  ///< internal parent index, -1 for the root
    std::vector<int> first_leaf_of;  ///< per internal node at depth k-1: leaf index of its first child
    std::vector<std::vector<int>> acc_internal, acc_leaf;

    SmallTree(ProtocolKind kind, int k, const FieldSpec& f, int n_stations, int acc_delay = 2)
        : shape(k, arity_for(kind, n_stations)), coloring(Coloring::canonical(shape)), q(f.q()) {
        if (shape.internal_count() > 4096) throw resource_guard_error("strategy tables need at most 4096 internal nodes");
        n_internal = static_cast<int>(shape.internal_count());
        n_leaves = static_cast<int>(shape.width(k));
        for (int i = 0; i < n_internal; ++i) {
            ids.push_back(shape.at_index(static_cast<std::uint64_t>(i)));
            parent.push_back(i == 0 ? -1 : (i - 1) / shape.arity);
        }
        first_leaf_of.assign(static_cast<std::size_t>(n_internal), -1);
        const std::uint64_t first_deep = shape.internal_count() - shape.width(k - 1);
        for (int i = 0; i < n_internal; ++i) {
            if (static_cast<std::uint64_t>(i) >= first_deep) {
                first_leaf_of[static_cast<std::size_t>(i)] = (i - static_cast<int>(first_deep)) * shape.arity;
            }
        }
        auto to_idx = [&](const std::set<NodeId>& s) {
            std::vector<int> out;
            for (const auto& w : s) out.push_back(static_cast<int>(shape.index_of(w)));
            std::sort(out.begin(), out.end());
            return out;
        };
        for (int i = 0; i < n_internal; ++i) {
            acc_internal.push_back(to_idx(accessible_set(ids[static_cast<std::size_t>(i)], coloring, acc_delay)));
        }
        for (const auto& leaf : shape.level(k)) acc_leaf.push_back(to_idx(accessible_set(leaf, coloring, acc_delay)));
    }

    NodeId leaf_id(int j) const {
        return shape.at_index(shape.internal_count() + static_cast<std::uint64_t>(j));
    }

    int leaf_parent(int j) const {
        return static_cast<int>(shape.internal_count() - shape.width(shape.depth - 1)) + j / shape.arity;
    }

    std::uint64_t table_size(const std::vector<int>& acc, bool own) const {
        return ipow(q, acc.size() + (own ? 1 : 0), std::uint64_t{1} << 20);
    }
};

/// Table index of an agent for a full challenge vector `b` (BFS order).
inline std::uint64_t table_index(const std::vector<int>& acc, const std::vector<std::uint32_t>& b, std::uint64_t q,
                                 int own = -1) {
    std::uint64_t idx = 0, mul = 1;
    for (int w : acc) {
        idx += b[static_cast<std::size_t>(w)] * mul;
        mul *= q;
    }
    if (own >= 0) idx += b[static_cast<std::size_t>(own)] * mul;
    return idx;
}

}  // namespace detail

/// Response of internal node `i` (BFS) for target `d` on the challenge vector `b`.
/// Returns Q for silence.
inline std::uint32_t strategy_respond(const StrategyTable& s, int i, int d, const std::vector<std::uint32_t>& b) {
    const AgentTable& t = s.internal.at(static_cast<std::size_t>(i));
    return t.by_target[static_cast<std::size_t>(d)].at(detail::table_index(t.acc, b, s.field.q(), i));
}

inline std::uint32_t strategy_reveal(const StrategyTable& s, int leaf, int d, const std::vector<std::uint32_t>& b) {
    const AgentTable& t = s.leaves.at(static_cast<std::size_t>(leaf));
    return t.by_target[static_cast<std::size_t>(d)].at(detail::table_index(t.acc, b, s.field.q()));
}

/// Builds a table by evaluating `internal_fn(i, d, b)` / `leaf_fn(j, d, b)` on
/// vectors where only the agent's inputs are set (all other challenges 0).
/// The information constraint therefore holds by construction.
template <class InternalFn, class LeafFn>
StrategyTable tabulate_strategy(ProtocolKind kind, int k, const FieldSpec& field, int n_stations, std::string name,
                                InternalFn internal_fn, LeafFn leaf_fn) {
    const detail::SmallTree tree(kind, k, field, n_stations);
    StrategyTable s;
    s.kind = kind;
    s.k = k;
    s.field = field;
    s.n_stations = n_stations;
    s.name = std::move(name);
    const std::uint64_t q = field.q();
    auto fill = [&](const std::vector<int>& acc, int own, auto&& fn) {
        AgentTable t;
        t.acc = acc;
        const std::uint64_t size = tree.table_size(acc, own >= 0);
        std::vector<std::uint32_t> b(static_cast<std::size_t>(tree.n_internal), 0);
        for (int d = 0; d < 2; ++d) {
            auto& out = t.by_target[static_cast<std::size_t>(d)];
            out.resize(size);
            for (std::uint64_t idx = 0; idx < size; ++idx) {
                std::uint64_t rest = idx;
                for (int w : acc) {
                    b[static_cast<std::size_t>(w)] = static_cast<std::uint32_t>(rest % q);
                    rest /= q;
                }
                if (own >= 0) b[static_cast<std::size_t>(own)] = static_cast<std::uint32_t>(rest % q);
                const std::optional<FieldElement> v = fn(d, b);
                out[idx] = v ? static_cast<std::uint32_t>(v->value()) : static_cast<std::uint32_t>(q);
            }
        }
        return t;
    };
    for (int i = 0; i < tree.n_internal; ++i) {
        s.internal.push_back(fill(tree.acc_internal[static_cast<std::size_t>(i)], i,
                                  [&](int d, const std::vector<std::uint32_t>& b) { return internal_fn(i, d, b); }));
    }
    for (int j = 0; j < tree.n_leaves; ++j) {
        s.leaves.push_back(fill(tree.acc_leaf[static_cast<std::size_t>(j)], -1,
                                [&](int d, const std::vector<std::uint32_t>& b) { return leaf_fn(j, d, b); }));
    }
    if (s.internal[0].by_target[0] != s.internal[0].by_target[1]) {
        throw precondition_violation("root response may not depend on the target bit");
    }
    return s;
}

/// Structural checks: table shapes match the accessible sets, the root ignores
/// the target and never stays silent, and entries lie in F_Q plus silence.
inline void validate_strategy(const StrategyTable& s) {
    const detail::SmallTree tree(s.kind, s.k, s.field, s.n_stations);
    if (s.internal.size() != static_cast<std::size_t>(tree.n_internal) ||
        s.leaves.size() != static_cast<std::size_t>(tree.n_leaves)) {
        throw precondition_violation("strategy table does not match the tree size");
    }
    auto check = [&](const AgentTable& t, const std::vector<int>& acc, bool own, const std::string& who) {
        if (t.acc != acc) throw precondition_violation(who + " reads outside its accessible set");
        const std::uint64_t size = tree.table_size(acc, own);
        for (const auto& tab : t.by_target) {
            if (tab.size() != size) throw precondition_violation(who + " table has the wrong size");
            for (auto v : tab) {
                if (v > s.field.q()) throw precondition_violation(who + " table entry out of range");
            }
        }
    };
    for (int i = 0; i < tree.n_internal; ++i) {
        check(s.internal[static_cast<std::size_t>(i)], tree.acc_internal[static_cast<std::size_t>(i)], true,
              "node '" + tree.ids[static_cast<std::size_t>(i)].str() + "'");
    }
    for (int j = 0; j < tree.n_leaves; ++j) {
        check(s.leaves[static_cast<std::size_t>(j)], tree.acc_leaf[static_cast<std::size_t>(j)], false,
              "leaf '" + tree.leaf_id(j).str() + "'");
    }
    const AgentTable& root = s.internal[0];
    if (root.by_target[0] != root.by_target[1]) throw precondition_violation("root response depends on the target bit");
    for (auto v : root.by_target[0]) {
        if (v == s.silent()) throw precondition_violation("root never stays silent");
    }
}

/// Transcript Bob sees when `s` plays against the challenge vector `b` with
/// every node challenged.
inline Transcript strategy_transcript(const StrategyTable& s, int d, const std::vector<std::uint32_t>& b) {
    const detail::SmallTree tree(s.kind, s.k, s.field, s.n_stations);
    Transcript t;
    t.kind = s.kind;
    t.k = s.k;
    t.field = s.field;
    t.n_stations = s.n_stations;
    for (int i = 0; i < tree.n_internal; ++i) {
        const NodeId& id = tree.ids[static_cast<std::size_t>(i)];
        NodeRecord rec;
        rec.parent = tree.parent[static_cast<std::size_t>(i)];
        rec.letter = id.is_root() ? 0 : id.last();
        rec.depth = id.depth();
        rec.round = rec.depth + 1;
        rec.color = tree.coloring.color(id);
        rec.heap = static_cast<std::uint64_t>(i);
        rec.challenge = s.field.element(b[static_cast<std::size_t>(i)]);
        const std::uint32_t y = strategy_respond(s, i, d, b);
        if (y != s.silent()) rec.response = s.field.element(y);
        t.nodes.push_back(rec);
    }
    for (int j = 0; j < tree.n_leaves; ++j) {
        const NodeId id = tree.leaf_id(j);
        RevealRecord rr;
        rr.parent = tree.leaf_parent(j);
        rr.letter = id.last();
        rr.round = s.k + 1;
        rr.color = tree.coloring.color(id);
        const std::uint32_t c = strategy_reveal(s, j, d, b);
        if (c != s.silent()) rr.claim = Claim{d, s.field.element(c)};
        t.reveals.push_back(rr);
    }
    if (!t.nodes[0].response) {
        t.aborted = true;
        t.abort_round = 1;
        t.abort_reason = "root did not answer";
    }
    return t;
}

struct StrategyEval {
    std::array<Rational, 2> success{Rational(0), Rational(0)};
    /// Leftmost-alive node distribution per target and depth (counts over challenge vectors).
    std::array<std::vector<std::map<std::string, std::uint64_t>>, 2> leftmost;
    std::uint64_t histories = 0;

    Rational sum() const { return success[0] + success[1]; }
};

inline std::uint64_t history_count(const StrategyTable& s, std::uint64_t budget) {
    const detail::SmallTree tree(s.kind, s.k, s.field, s.n_stations);
    std::uint64_t n = 1;
    for (int i = 0; i < tree.n_internal; ++i) {
        if (n > budget / s.field.q()) {
            throw resource_guard_error("strategy evaluation needs Q^" + std::to_string(tree.n_internal) +
                                       " challenge histories; budget is " + std::to_string(budget));
        }
        n *= s.field.q();
    }
    return n;
}

/// Exact acceptance probability for each target bit over uniform challenges,
/// by replaying every challenge history through Bob's verifier.
inline StrategyEval strategy_eval(const StrategyTable& s, std::uint64_t budget = std::uint64_t{1} << 22) {
    validate_strategy(s);
    const std::uint64_t n = history_count(s, budget);
    const std::uint64_t q = s.field.q();
    const int n_internal = static_cast<int>(s.internal.size());
    StrategyEval out;
    out.histories = n;
    std::vector<std::uint32_t> b(static_cast<std::size_t>(n_internal), 0);
    for (int d = 0; d < 2; ++d) {
        out.leftmost[static_cast<std::size_t>(d)].assign(static_cast<std::size_t>(s.k), {});
        std::uint64_t wins = 0;
        for (std::uint64_t h = 0; h < n; ++h) {
            std::uint64_t rest = h;
            for (int i = 0; i < n_internal; ++i) {
                b[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(rest % q);
                rest /= q;
            }
            const Transcript t = strategy_transcript(s, d, b);
            const LivenessMap live = liveness_from(t);
            for (int depth = 0; depth < s.k; ++depth) {
                if (auto v = leftmost_alive(depth, live)) ++out.leftmost[static_cast<std::size_t>(d)][static_cast<std::size_t>(depth)][v->str()];
            }
            const Verdict v = s.kind == ProtocolKind::tree ? verify_tree(t) : verify_transcript(t);
            if (v.accepted(d)) ++wins;
        }
        out.success[static_cast<std::size_t>(d)] = Rational(static_cast<std::int64_t>(wins), static_cast<std::int64_t>(n));
    }
    return out;
}

/// Information-hygiene audit: for every agent, two challenge histories that
/// agree on its accessible set and its own challenge must produce the same
/// output. Returns the number of violating (agent, history pair) classes.
inline std::size_t audit_information(const StrategyTable& s, std::uint64_t budget = std::uint64_t{1} << 22) {
    const detail::SmallTree tree(s.kind, s.k, s.field, s.n_stations);
    const std::uint64_t n = history_count(s, budget);
    const std::uint64_t q = s.field.q();
    std::size_t violations = 0;
    std::vector<std::uint32_t> b(static_cast<std::size_t>(tree.n_internal), 0);
    auto project = [&](const std::vector<int>& acc, int own) {
        std::vector<std::uint32_t> key;
        for (int w : acc) key.push_back(b[static_cast<std::size_t>(w)]);
        if (own >= 0) key.push_back(b[static_cast<std::size_t>(own)]);
        return key;
    };
    for (int d = 0; d < 2; ++d) {
        std::vector<std::map<std::vector<std::uint32_t>, std::uint32_t>> seen_int(static_cast<std::size_t>(tree.n_internal));
        std::vector<std::map<std::vector<std::uint32_t>, std::uint32_t>> seen_leaf(static_cast<std::size_t>(tree.n_leaves));
        std::set<std::pair<int, std::vector<std::uint32_t>>> bad;
        for (std::uint64_t h = 0; h < n; ++h) {
            std::uint64_t rest = h;
            for (int i = 0; i < tree.n_internal; ++i) {
                b[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(rest % q);
                rest /= q;
            }
            for (int i = 0; i < tree.n_internal; ++i) {
                auto key = project(tree.acc_internal[static_cast<std::size_t>(i)], i);
                const std::uint32_t y = strategy_respond(s, i, d, b);
                auto [it, fresh] = seen_int[static_cast<std::size_t>(i)].emplace(key, y);
                if (!fresh && it->second != y) bad.emplace(i, key);
            }
            for (int j = 0; j < tree.n_leaves; ++j) {
                auto key = project(tree.acc_leaf[static_cast<std::size_t>(j)], -1);
                const std::uint32_t c = strategy_reveal(s, j, d, b);
                auto [it, fresh] = seen_leaf[static_cast<std::size_t>(j)].emplace(key, c);
                if (!fresh && it->second != c) bad.emplace(tree.n_internal + j, key);
            }
        }
        violations += bad.size();
    }
    // The commit round must not see the target.
    if (s.internal[0].by_target[0] != s.internal[0].by_target[1]) ++violations;
    return violations;
}

/// Runs a strategy table inside the simulator. Challenges are read through the
/// history view, which enforces the light cone; pruned inputs count as 0.
class StrategyAgent final : public AliceAgent {
public:
    StrategyAgent(const StrategyTable& s, int target) : s_(s), target_(target), tree_(s.kind, s.k, s.field, s.n_stations) {
        validate_strategy(s);
    }

    std::optional<FieldElement> respond(const NodeContext& ctx) override {
        const int i = static_cast<int>(ctx.node.heap);
        const AgentTable& t = s_.internal.at(static_cast<std::size_t>(i));
        std::uint64_t idx = 0, mul = 1;
        for (int w : t.acc) {
            idx += read(ctx, w) * mul;
            mul *= s_.field.q();
        }
        idx += ctx.challenge.value() * mul;
        const std::uint32_t y = t.by_target[static_cast<std::size_t>(target_)].at(idx);
        if (y == s_.silent()) return std::nullopt;
        return s_.field.element(y);
    }

    std::optional<Claim> reveal(const NodeContext& ctx) override {
        const int j = static_cast<int>(ctx.node.heap - static_cast<std::uint64_t>(tree_.n_internal));
        const AgentTable& t = s_.leaves.at(static_cast<std::size_t>(j));
        std::uint64_t idx = 0, mul = 1;
        for (int w : t.acc) {
            idx += read(ctx, w) * mul;
            mul *= s_.field.q();
        }
        const std::uint32_t c = t.by_target[static_cast<std::size_t>(target_)].at(idx);
        if (c == s_.silent()) return std::nullopt;
        return Claim{target_, s_.field.element(c)};
    }

private:
    std::uint64_t read(const NodeContext& ctx, int w) const {
        const auto v = ctx.view->challenge(tree_.ids[static_cast<std::size_t>(w)]);
        return v ? v->value() : 0;
    }

    const StrategyTable& s_;
    int target_;
    detail::SmallTree tree_;
};

/// Honest strategy committed to `d0`, written as a table. For the other target
/// its leaves still claim the parent's share, which is the natural honest-based
/// cheating attempt.
inline StrategyTable honest_strategy(ProtocolKind kind, int k, const FieldSpec& field, int n_stations, int d0,
                                     const std::vector<FieldElement>& shares) {
    const detail::SmallTree tree(kind, k, field, n_stations);
    if (shares.size() != static_cast<std::size_t>(tree.n_internal)) throw config_error("shares", "wrong share count");
    return tabulate_strategy(
        kind, k, field, n_stations, "honest",
        [&](int i, int, const std::vector<std::uint32_t>& b) -> std::optional<FieldElement> {
            const FieldElement bi = field.element(b[static_cast<std::size_t>(i)]);
            const int par = tree.parent[static_cast<std::size_t>(i)];
            const FieldElement g = par < 0 ? field.element(static_cast<std::uint64_t>(d0)) : shares[static_cast<std::size_t>(par)];
            return shares[static_cast<std::size_t>(i)] + bi * g;
        },
        [&](int j, int, const std::vector<std::uint32_t>&) -> std::optional<FieldElement> {
            return shares[static_cast<std::size_t>(tree.leaf_parent(j))];
        });
}

enum class HeuristicKind { late_decision, guess_share, selective_silence };

inline HeuristicKind parse_heuristic(const std::string& s) {
    if (s == "late_decision") return HeuristicKind::late_decision;
    if (s == "guess_share") return HeuristicKind::guess_share;
    if (s == "selective_silence") return HeuristicKind::selective_silence;
    throw config_error("attack", "unknown heuristic '" + s + "'");
}

struct HeuristicOptions {
    int d0 = 0;                         ///< bit the commit round is honest for
    std::vector<FieldElement> shares;   ///< empty means all zero
    std::uint64_t guess = 1;            ///< late_decision's stand-in for challenges it cannot see
};

/// Named cheating heuristics.
///  guess_share: honest answers committed to d0; every leaf claims its parent's share.
///  selective_silence: as guess_share, but when opening the other bit a non-root
///    left child stays silent whenever its challenge is nonzero, pushing the
///    leftmost path onto its brother.
///  late_decision: after the commit round every agent rebuilds the whole run
///    with the challenges it cannot see replaced by `guess`, computes Bob's
///    chain for the target bit on that reconstruction, and answers (or claims)
///    so that its own link of the chain matches.
inline StrategyTable heuristic_attack(HeuristicKind kind, ProtocolKind protocol, int k, const FieldSpec& field,
                                      int n_stations, HeuristicOptions opt = {}) {
    const detail::SmallTree tree(protocol, k, field, n_stations);
    std::vector<FieldElement> shares = opt.shares;
    if (shares.empty()) shares.assign(static_cast<std::size_t>(tree.n_internal), field.zero());
    if (shares.size() != static_cast<std::size_t>(tree.n_internal)) throw config_error("shares", "wrong share count");
    const int d0 = opt.d0;

    auto honest_y = [&](int i, const std::vector<std::uint32_t>& b) {
        const FieldElement bi = field.element(b[static_cast<std::size_t>(i)]);
        const int par = tree.parent[static_cast<std::size_t>(i)];
        const FieldElement g = par < 0 ? field.element(static_cast<std::uint64_t>(d0)) : shares[static_cast<std::size_t>(par)];
        return shares[static_cast<std::size_t>(i)] + bi * g;
    };
    auto parent_share = [&](int j) { return shares[static_cast<std::size_t>(tree.leaf_parent(j))]; };

    switch (kind) {
        case HeuristicKind::guess_share:
            return tabulate_strategy(
                protocol, k, field, n_stations, "guess_share",
                [&](int i, int, const std::vector<std::uint32_t>& b) -> std::optional<FieldElement> { return honest_y(i, b); },
                [&](int j, int, const std::vector<std::uint32_t>&) -> std::optional<FieldElement> { return parent_share(j); });
        case HeuristicKind::selective_silence:
            return tabulate_strategy(
                protocol, k, field, n_stations, "selective_silence",
                [&](int i, int d, const std::vector<std::uint32_t>& b) -> std::optional<FieldElement> {
                    const NodeId& id = tree.ids[static_cast<std::size_t>(i)];
                    if (tree.shape.arity >= 2 && !id.is_root() && id.last() == 0 && d != d0 &&
                        b[static_cast<std::size_t>(i)] != 0) {
                        return std::nullopt;
                    }
                    return honest_y(i, b);
                },
                [&](int j, int, const std::vector<std::uint32_t>&) -> std::optional<FieldElement> { return parent_share(j); });
        case HeuristicKind::late_decision: {
            const FieldElement guess = field.element(opt.guess);
            // Chain value at internal node `i` for target d on a full vector.
            std::function<FieldElement(int, int, const std::vector<std::uint32_t>&)> response;
            std::function<FieldElement(int, int, const std::vector<std::uint32_t>&)> chain;
            auto view_of = [&](const std::vector<int>& acc, int own, const std::vector<std::uint32_t>& b) {
                std::vector<std::uint32_t> v(b.size(), static_cast<std::uint32_t>(guess.value()));
                for (int w : acc) v[static_cast<std::size_t>(w)] = b[static_cast<std::size_t>(w)];
                if (own >= 0) v[static_cast<std::size_t>(own)] = b[static_cast<std::size_t>(own)];
                return v;
            };
            chain = [&](int i, int d, const std::vector<std::uint32_t>& b) -> FieldElement {
                const FieldElement bi = field.element(b[static_cast<std::size_t>(i)]);
                const int par = tree.parent[static_cast<std::size_t>(i)];
                const FieldElement prev = par < 0 ? field.element(static_cast<std::uint64_t>(d)) : chain(par, d, b);
                return response(i, d, b) - bi * prev;
            };
            response = [&](int i, int d, const std::vector<std::uint32_t>& b) -> FieldElement {
                const int par = tree.parent[static_cast<std::size_t>(i)];
                if (par < 0) return honest_y(i, b);
                const auto v = view_of(tree.acc_internal[static_cast<std::size_t>(i)], i, b);
                return shares[static_cast<std::size_t>(i)] + field.element(b[static_cast<std::size_t>(i)]) * chain(par, d, v);
            };
            return tabulate_strategy(
                protocol, k, field, n_stations, "late_decision",
                [&](int i, int d, const std::vector<std::uint32_t>& b) -> std::optional<FieldElement> {
                    return response(i, d, b);
                },
                [&](int j, int d, const std::vector<std::uint32_t>& b) -> std::optional<FieldElement> {
                    const auto v = view_of(tree.acc_leaf[static_cast<std::size_t>(j)], -1, b);
                    return chain(tree.leaf_parent(j), d, v);
                });
        }
    }
    throw usage_error("unknown heuristic");
}

struct BindingReport {
    ProtocolKind kind = ProtocolKind::single;
    int k = 1;
    std::uint64_t q = 2;
    int n_stations = 2;
    Rational sum_exact{0};
    double sum = 0;
    double epsilon = 0;
    double bound = 0;        ///< raw 5k/sqrt(2Q) style bound on epsilon
    double bound_sum = 0;    ///< min(2, 1 + bound)
    double search_size = 0;  ///< deterministic strategies covered per target
    double work = 0;         ///< elementary evaluation steps performed
    double seconds = 0;
    bool reduced = true;
    std::string argmax;
    StrategyTable best;
};

inline nlohmann::ordered_json to_json(const BindingReport& r) {
    nlohmann::ordered_json j;
    j["kind"] = to_string(r.kind);
    j["k"] = r.k;
    j["q"] = r.q;
    j["n_stations"] = r.n_stations;
    j["sum"] = r.sum;
    j["sum_exact"] = to_string(r.sum_exact);
    j["epsilon"] = r.epsilon;
    j["bound"] = r.bound;
    j["bound_sum"] = r.bound_sum;
    j["search_size"] = r.search_size;
    j["seconds"] = r.seconds;
    j["reduced"] = r.reduced;
    j["argmax"] = r.argmax;
    return j;
}

struct BindingOptions {
    bool reduced = true;       ///< rightmost non-root children never stay silent
    double budget = 5e8;       ///< refuse searches estimated above this many steps
    int n_stations = 0;        ///< 0 picks 2 (single, fq) or 3 (tree)
};

namespace detail {

/// Odometer over a product of small domains.
inline bool advance(std::vector<std::uint32_t>& digits, const std::vector<std::uint32_t>& radix) {
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (++digits[i] < radix[i]) return true;
        digits[i] = 0;
    }
    return false;
}

}  // namespace detail

/// Exact sum-binding value: the maximum over commit-round functions of
/// sum_d max over opening strategies of Pr[Bob accepts d]. Non-root internal
/// tables are enumerated in full; leaf tables are optimised per deepest path
/// node, which is exact because each challenge history is decided by the
/// leaves of exactly one such node. Ties go to the lexicographically first
/// strategy in enumeration order.
inline BindingReport brute_force_binding(ProtocolKind kind, int k, const FieldSpec& field, BindingOptions opt = {}) {
    const auto start = std::chrono::steady_clock::now();
    const int n_stations = opt.n_stations > 0 ? opt.n_stations : (kind == ProtocolKind::tree ? 3 : 2);
    if (kind == ProtocolKind::single && k != 1) throw config_error("k", "the single-round protocol has k = 1");
    const detail::SmallTree tree(kind, k, field, n_stations);
    const std::uint64_t q = field.q();
    const int ni = tree.n_internal;
    const int arity = tree.shape.arity;

    // Domains: each non-root table entry ranges over F_Q plus silence.
    std::vector<std::uint64_t> tsize(static_cast<std::size_t>(ni));
    std::vector<std::uint32_t> radix;  // flattened non-root internal entries
    std::vector<std::pair<int, std::uint64_t>> slot;
    double internal_space = 1, leaf_space = 1;
    for (int i = 0; i < ni; ++i) {
        tsize[static_cast<std::size_t>(i)] = tree.table_size(tree.acc_internal[static_cast<std::size_t>(i)], true);
        if (i == 0) continue;
        const bool rightmost = tree.ids[static_cast<std::size_t>(i)].last() == arity - 1;
        const std::uint32_t dom = static_cast<std::uint32_t>(opt.reduced && rightmost ? q : q + 1);
        for (std::uint64_t e = 0; e < tsize[static_cast<std::size_t>(i)]; ++e) {
            radix.push_back(dom);
            slot.emplace_back(i, e);
            internal_space *= dom;
        }
    }
    std::vector<std::uint64_t> lsize(static_cast<std::size_t>(tree.n_leaves));
    for (int j = 0; j < tree.n_leaves; ++j) {
        lsize[static_cast<std::size_t>(j)] = tree.table_size(tree.acc_leaf[static_cast<std::size_t>(j)], false);
        leaf_space *= std::pow(static_cast<double>(q + 1), static_cast<double>(lsize[static_cast<std::size_t>(j)]));
    }
    const double root_space = std::pow(static_cast<double>(q), static_cast<double>(q));
    const double histories = std::pow(static_cast<double>(q), ni);
    double group_cost = 0;
    for (int g = 0; g < static_cast<int>(tree.shape.width(k - 1)); ++g) {
        double c = 1;
        const bool single_leaf = arity == 1;
        for (int t = 0; t < arity; ++t) {
            const double l = std::pow(static_cast<double>(q + 1), static_cast<double>(lsize[static_cast<std::size_t>(g * arity + t)]));
            c *= l;
        }
        group_cost += single_leaf ? histories * static_cast<double>(q + 1) : c * histories;
    }
    const double work = root_space * 2 * internal_space * (histories * k + group_cost);
    if (work > opt.budget) {
        throw resource_guard_error("binding search needs about " + std::to_string(work) + " steps; budget is " +
                                   std::to_string(opt.budget));
    }

    // Challenge vectors and per-agent table indices.
    const std::uint64_t n_hist = static_cast<std::uint64_t>(histories);
    std::vector<std::vector<std::uint32_t>> hb(n_hist, std::vector<std::uint32_t>(static_cast<std::size_t>(ni)));
    for (std::uint64_t h = 0; h < n_hist; ++h) {
        std::uint64_t rest = h;
        for (int i = 0; i < ni; ++i) {
            hb[h][static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(rest % q);
            rest /= q;
        }
    }
    std::vector<std::vector<std::uint64_t>> tidx(static_cast<std::size_t>(ni), std::vector<std::uint64_t>(n_hist));
    for (int i = 0; i < ni; ++i) {
        for (std::uint64_t h = 0; h < n_hist; ++h) {
            tidx[static_cast<std::size_t>(i)][h] = detail::table_index(tree.acc_internal[static_cast<std::size_t>(i)], hb[h], q, i);
        }
    }
    std::vector<std::vector<std::uint64_t>> lidx(static_cast<std::size_t>(tree.n_leaves), std::vector<std::uint64_t>(n_hist));
    for (int j = 0; j < tree.n_leaves; ++j) {
        for (std::uint64_t h = 0; h < n_hist; ++h) {
            lidx[static_cast<std::size_t>(j)][h] = detail::table_index(tree.acc_leaf[static_cast<std::size_t>(j)], hb[h], q);
        }
    }

    const int n_groups = static_cast<int>(tree.shape.width(k - 1));
    const int first_deep = ni - n_groups;
    const std::uint32_t silent = static_cast<std::uint32_t>(q);

    struct OpenBest {
        std::uint64_t wins = 0;
        std::vector<std::uint32_t> internal;
        std::vector<std::vector<std::uint32_t>> leaves;
    };

    std::vector<std::vector<std::uint32_t>> tables(static_cast<std::size_t>(ni));
    for (int i = 0; i < ni; ++i) tables[static_cast<std::size_t>(i)].assign(tsize[static_cast<std::size_t>(i)], 0);

    // Best leaf tables of group g given (history, alpha) pairs routed to it.
    auto optimise_group = [&](int g, const std::vector<std::pair<std::uint64_t, std::uint32_t>>& cases,
                              std::vector<std::vector<std::uint32_t>>& best_leaves) -> std::uint64_t {
        const int l0 = g * arity;
        if (arity == 1) {
            // One leaf: its entries are independent, pick the best claim per entry.
            const std::uint64_t sz = lsize[static_cast<std::size_t>(l0)];
            std::vector<std::vector<std::uint64_t>> count(sz, std::vector<std::uint64_t>(q, 0));
            for (const auto& [h, alpha] : cases) ++count[lidx[static_cast<std::size_t>(l0)][h]][alpha];
            std::vector<std::uint32_t> table(sz, 0);
            std::uint64_t wins = 0;
            for (std::uint64_t e = 0; e < sz; ++e) {
                std::uint32_t arg = 0;
                for (std::uint32_t c = 1; c < q; ++c) {
                    if (count[e][c] > count[e][arg]) arg = c;
                }
                table[e] = arg;
                wins += count[e][arg];
            }
            best_leaves[static_cast<std::size_t>(l0)] = std::move(table);
            return wins;
        }
        std::vector<std::uint32_t> lr;  // flattened leaf entries of the group
        for (int t = 0; t < arity; ++t) {
            for (std::uint64_t e = 0; e < lsize[static_cast<std::size_t>(l0 + t)]; ++e) lr.push_back(silent + 1);
        }
        std::vector<std::uint32_t> digits(lr.size(), 0), best_digits(lr.size(), 0);
        std::vector<std::uint64_t> offset(static_cast<std::size_t>(arity), 0);
        for (int t = 1; t < arity; ++t) offset[static_cast<std::size_t>(t)] = offset[static_cast<std::size_t>(t - 1)] + lsize[static_cast<std::size_t>(l0 + t - 1)];
        std::int64_t best = -1;
        do {
            std::uint64_t wins = 0;
            for (const auto& [h, alpha] : cases) {
                std::optional<std::uint32_t> used;
                bool ok = true;
                for (int t = 0; t < arity && ok; ++t) {
                    const std::uint32_t c = digits[offset[static_cast<std::size_t>(t)] + lidx[static_cast<std::size_t>(l0 + t)][h]];
                    if (c == silent) continue;
                    if (!used) {
                        used = c;
                    } else if (*used != c) {
                        ok = false;
                    }
                }
                if (ok && used && *used == alpha) ++wins;
            }
            if (static_cast<std::int64_t>(wins) > best) {
                best = static_cast<std::int64_t>(wins);
                best_digits = digits;
            }
        } while (detail::advance(digits, lr));
        for (int t = 0; t < arity; ++t) {
            best_leaves[static_cast<std::size_t>(l0 + t)].assign(
                best_digits.begin() + static_cast<std::ptrdiff_t>(offset[static_cast<std::size_t>(t)]),
                best_digits.begin() + static_cast<std::ptrdiff_t>(offset[static_cast<std::size_t>(t)] + lsize[static_cast<std::size_t>(l0 + t)]));
        }
        return static_cast<std::uint64_t>(best);
    };

    auto best_open = [&](int d) {
        OpenBest best;
        bool first = true;
        std::vector<std::uint32_t> digits(radix.size(), 0);
        std::vector<std::vector<std::pair<std::uint64_t, std::uint32_t>>> routed(static_cast<std::size_t>(n_groups));
        std::vector<std::vector<std::uint32_t>> leaves(static_cast<std::size_t>(tree.n_leaves));
        do {
            for (std::size_t s = 0; s < slot.size(); ++s) tables[static_cast<std::size_t>(slot[s].first)][slot[s].second] = digits[s];
            for (auto& r : routed) r.clear();
            for (std::uint64_t h = 0; h < n_hist; ++h) {
                const auto& b = hb[h];
                // Root never silent; alpha chain along the leftmost alive path.
                std::uint64_t alpha = (tables[0][tidx[0][h]] + (q - (static_cast<std::uint64_t>(b[0]) * static_cast<std::uint64_t>(d)) % q)) % q;
                int cur = 0;
                bool alive_path = true;
                for (int depth = 1; depth < k; ++depth) {
                    int next = -1;
                    for (int t = 0; t < arity; ++t) {
                        const int c = cur * arity + t + 1;
                        if (tables[static_cast<std::size_t>(c)][tidx[static_cast<std::size_t>(c)][h]] != silent) {
                            next = c;
                            break;
                        }
                    }
                    if (next < 0) {
                        alive_path = false;
                        break;
                    }
                    const std::uint64_t y = tables[static_cast<std::size_t>(next)][tidx[static_cast<std::size_t>(next)][h]];
                    alpha = (y + q - detail::mulmod(b[static_cast<std::size_t>(next)], alpha, q)) % q;
                    cur = next;
                }
                if (alive_path) routed[static_cast<std::size_t>(cur - first_deep)].emplace_back(h, static_cast<std::uint32_t>(alpha));
            }
            std::uint64_t wins = 0;
            for (int g = 0; g < n_groups; ++g) wins += optimise_group(g, routed[static_cast<std::size_t>(g)], leaves);
            if (first || wins > best.wins) {
                first = false;
                best.wins = wins;
                best.internal = digits;
                best.leaves = leaves;
            }
        } while (detail::advance(digits, radix));
        return best;
    };

    std::uint64_t best_total = 0;
    bool have = false;
    std::vector<std::uint32_t> best_root;
    std::array<OpenBest, 2> best_opens;
    std::uint64_t best_root_index = 0;
    std::vector<std::uint32_t> root_digits(q, 0), root_radix(q, static_cast<std::uint32_t>(q));
    std::uint64_t root_index = 0;
    do {
        tables[0].assign(root_digits.begin(), root_digits.end());
        std::array<OpenBest, 2> opens{best_open(0), best_open(1)};
        const std::uint64_t total = opens[0].wins + opens[1].wins;
        if (!have || total > best_total) {
            have = true;
            best_total = total;
            best_root = root_digits;
            best_opens = opens;
            best_root_index = root_index;
        }
        ++root_index;
    } while (detail::advance(root_digits, root_radix));

    BindingReport r;
    r.kind = kind;
    r.k = k;
    r.q = q;
    r.n_stations = n_stations;
    r.reduced = opt.reduced;
    r.sum_exact = Rational(static_cast<std::int64_t>(best_total), static_cast<std::int64_t>(n_hist));
    r.sum = to_double(r.sum_exact);
    r.epsilon = r.sum - 1.0;
    r.bound = 5.0 * k / std::sqrt(2.0 * static_cast<double>(q));
    r.bound_sum = std::min(2.0, 1.0 + r.bound);
    r.search_size = root_space * internal_space * leaf_space;
    r.work = work;
    r.argmax = "root#" + std::to_string(best_root_index);

    // Rebuild the optimum as a strategy table.
    StrategyTable s;
    s.kind = kind;
    s.k = k;
    s.field = field;
    s.n_stations = n_stations;
    s.name = "oracle_argmax";
    for (int i = 0; i < ni; ++i) {
        AgentTable t;
        t.acc = tree.acc_internal[static_cast<std::size_t>(i)];
        for (int d = 0; d < 2; ++d) t.by_target[static_cast<std::size_t>(d)].assign(tsize[static_cast<std::size_t>(i)], 0);
        s.internal.push_back(std::move(t));
    }
    s.internal[0].by_target[0] = best_root;
    s.internal[0].by_target[1] = best_root;
    for (int d = 0; d < 2; ++d) {
        const auto& ob = best_opens[static_cast<std::size_t>(d)];
        for (std::size_t x = 0; x < slot.size(); ++x) {
            s.internal[static_cast<std::size_t>(slot[x].first)].by_target[static_cast<std::size_t>(d)][slot[x].second] = ob.internal[x];
        }
    }
    for (int j = 0; j < tree.n_leaves; ++j) {
        AgentTable t;
        t.acc = tree.acc_leaf[static_cast<std::size_t>(j)];
        for (int d = 0; d < 2; ++d) {
            t.by_target[static_cast<std::size_t>(d)] = best_opens[static_cast<std::size_t>(d)].leaves[static_cast<std::size_t>(j)];
            if (t.by_target[static_cast<std::size_t>(d)].empty()) t.by_target[static_cast<std::size_t>(d)].assign(lsize[static_cast<std::size_t>(j)], 0);
        }
        s.leaves.push_back(std::move(t));
    }
    r.best = std::move(s);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

}  // namespace rbc

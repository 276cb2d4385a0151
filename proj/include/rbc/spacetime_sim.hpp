#pragma once

#include "rbc/errors.hpp"
#include "rbc/finite_field.hpp"
#include "rbc/protocol.hpp"
#include "rbc/random.hpp"
#include "rbc/tree_topology.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace rbc {

/// Station layout. Distances are in units of D, the minimal honest separation;
/// `tau` is the light travel time over D.
struct Geometry {
    int n_stations = 3;
    std::vector<std::vector<double>> distance;
    double tau = 1.0;

    static Geometry unit(int n_stations, double tau = 1.0) {
        Geometry g;
        g.n_stations = n_stations;
        g.tau = tau;
        g.distance.assign(static_cast<std::size_t>(n_stations), std::vector<double>(static_cast<std::size_t>(n_stations), 1.0));
        for (int i = 0; i < n_stations; ++i) g.distance[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 0.0;
        return g;
    }

    double dist(int color_a, int color_b) const {
        return distance.at(static_cast<std::size_t>(color_a - 1)).at(static_cast<std::size_t>(color_b - 1));
    }

    double max_distance() const {
        double m = 0;
        for (const auto& row : distance) {
            for (double d : row) m = std::max(m, d);
        }
        return m;
    }

    void validate() const {
        if (n_stations < 2) throw config_error("geometry.n_stations", "need at least 2 stations");
        if (!(tau > 0)) throw config_error("geometry.tau", "tau must be positive");
        if (distance.size() != static_cast<std::size_t>(n_stations)) {
            throw config_error("geometry.distance", "matrix must be n_stations x n_stations");
        }
        for (int i = 0; i < n_stations; ++i) {
            if (distance[static_cast<std::size_t>(i)].size() != static_cast<std::size_t>(n_stations)) {
                throw config_error("geometry.distance", "matrix must be n_stations x n_stations");
            }
            for (int j = 0; j < n_stations; ++j) {
                const double dij = distance[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                if (i == j && dij != 0.0) throw config_error("geometry.distance", "diagonal must be zero");
                if (i != j && dij < 1.0) throw config_error("geometry.distance", "stations closer than D");
                if (dij != distance[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]) {
                    throw config_error("geometry.distance", "matrix must be symmetric");
                }
            }
        }
    }
};

struct LossModel {
    double p = 0.0;  ///< per-round death probability of each station
    int m = 1;       ///< rounds a death lasts

    void validate() const {
        if (!(p >= 0.0 && p <= 1.0)) throw config_error("p", "death probability must lie in [0, 1]");
        if (m < 1) throw config_error("m", "dead duration must be >= 1");
    }

    /// Stationary probability that a station is unresponsive in a given round.
    double stationary_dead() const { return 1.0 - std::pow(1.0 - p, m); }
};

struct StationState {
    bool alive = true;
    int dead_until = 0;  ///< first round at which the station responds again
};

/// Per-round loss draw, applied at the start of `round` before any challenge.
/// Every station draws a death with probability p; a death at round r keeps it
/// silent for rounds r .. r+m-1 (a fresh death while dead extends the outage).
template <class URBG>
void loss_step(std::vector<StationState>& stations, const LossModel& loss, int round, std::vector<URBG>& rngs) {
    for (std::size_t i = 0; i < stations.size(); ++i) {
        StationState& s = stations[i];
        if (loss.p > 0.0 && bernoulli(rngs[i], loss.p)) s.dead_until = std::max(s.dead_until, round + loss.m);
        s.alive = s.dead_until <= round;
    }
}

/// A station forced silent for rounds [from, to].
struct Outage {
    int station = 1;
    int from = 1;
    int to = 1;
};

enum class EventKind { death, revival, challenge, response, timeout, reveal, withhold, abort };

inline std::string to_string(EventKind k) {
    switch (k) {
        case EventKind::death: return "death";
        case EventKind::revival: return "revival";
        case EventKind::challenge: return "challenge";
        case EventKind::response: return "response";
        case EventKind::timeout: return "timeout";
        case EventKind::reveal: return "reveal";
        case EventKind::withhold: return "withhold";
        case EventKind::abort: return "abort";
    }
    return "?";
}

struct Event {
    double time = 0;
    int round = 0;
    int station = 0;
    EventKind kind = EventKind::challenge;
    std::string node;  ///< empty for station events and the root
    std::optional<std::uint64_t> value;
    std::optional<int> bit;
    std::string note;

    friend bool operator==(const Event&, const Event&) = default;
};

inline nlohmann::ordered_json to_json(const Event& e) {
    nlohmann::ordered_json j;
    j["time"] = e.time;
    j["round"] = e.round;
    j["station"] = e.station;
    j["kind"] = to_string(e.kind);
    if (e.kind != EventKind::death && e.kind != EventKind::revival && e.kind != EventKind::abort) j["node"] = e.node;
    if (e.value) j["value"] = *e.value;
    if (e.bit) j["bit"] = *e.bit;
    if (!e.note.empty()) j["note"] = e.note;
    return j;
}

inline void write_event_log(std::ostream& os, const std::vector<Event>& events) {
    for (const auto& e : events) os << to_json(e).dump() << '\n';
}

/// One read of an earlier challenge by an Alice agent.
struct HistoryRead {
    int reader_round = 0;
    int reader_color = 0;
    std::string reader_node;
    std::string target_node;
    int target_round = 0;
    int target_color = 0;
};

/// Run parameters shared by every trial of a batch.
struct RunConfig {
    ProtocolKind kind = ProtocolKind::tree;
    int k = 2;
    FieldSpec field{2};
    int n_stations = 3;
    LossModel loss;
    int prune_delay = 2;  ///< N: rounds before all of Bob's agents learn a branch's fate
    int acc_delay = 2;
    std::optional<Geometry> geometry;
    std::optional<Coloring> coloring;
    std::vector<Outage> outages;
    std::map<NodeId, std::uint64_t> fixed_challenges;  ///< overrides Bob's draw at these nodes
    bool lossy_reveal = false;  ///< leaves at dead stations stay silent when set
    bool record_events = false;
    std::uint64_t node_budget = std::uint64_t{1} << 24;

    int arity() const { return arity_for(kind, n_stations); }
    TreeShape shape() const { return TreeShape(k, arity()); }

    Geometry effective_geometry() const { return geometry ? *geometry : Geometry::unit(n_stations); }

    void validate() const {
        if (k < 1) throw config_error("k", "need at least one round");
        if (kind == ProtocolKind::single && k != 1) throw config_error("k", "the single-round protocol has k = 1");
        if (kind != ProtocolKind::tree && n_stations != 2) {
            throw config_error("n_stations", "the " + to_string(kind) + " protocol uses exactly 2 stations");
        }
        if (kind == ProtocolKind::tree && (n_stations < 3 || n_stations > 11)) {
            throw config_error("n_stations", "the tree protocol needs 3..11 stations");
        }
        loss.validate();
        if (prune_delay < 1) throw config_error("N", "pruning delay must be >= 1");
        if (acc_delay < 2) throw config_error("acc_delay", "must be >= 2");
        const Geometry g = effective_geometry();
        g.validate();
        if (g.n_stations != n_stations) throw config_error("geometry.n_stations", "does not match n_stations");
        if (static_cast<double>(prune_delay) < g.max_distance()) {
            throw config_error("N", "pruning delay shorter than the largest station distance");
        }
        if (coloring) {
            if (coloring->shape().depth != k || coloring->shape().arity != arity()) {
                throw config_error("coloring", "shape does not match the run");
            }
        }
        for (const auto& o : outages) {
            if (o.station < 1 || o.station > n_stations) throw config_error("outages.station", "no such station");
            if (o.from > o.to) throw config_error("outages", "empty window");
        }
    }
};

struct RunResult {
    Transcript transcript;
    Verdict verdict;
    std::vector<Event> events;
    std::vector<HistoryRead> reads;
    std::vector<int> challenges_per_round;  ///< index r-1 for round r
};

/// Message counts and bit cost. Challenges and responses cost log2 Q each;
/// a reveal (bit plus share) costs 1 + log2 Q and is reported separately.
struct CommCost {
    std::uint64_t challenges = 0;
    std::uint64_t responses = 0;
    std::uint64_t reveals = 0;
    double bits = 0;
    double reveal_bits = 0;
    double total_bits() const { return bits + reveal_bits; }
};

inline CommCost comm_cost_detail(const Transcript& t) {
    CommCost c;
    for (const auto& rec : t.nodes) {
        ++c.challenges;
        if (rec.response) ++c.responses;
    }
    for (const auto& r : t.reveals) {
        if (r.claim) ++c.reveals;
    }
    const double lq = t.field.log2q();
    c.bits = static_cast<double>(c.challenges + c.responses) * lq;
    c.reveal_bits = static_cast<double>(c.reveals) * (1.0 + lq);
    return c;
}

inline double comm_cost(const Transcript& t, const FieldSpec& spec) {
    if (!(t.field == spec)) throw usage_error("transcript uses a different field");
    return comm_cost_detail(t).bits;
}

namespace detail {

/// Whether an Alice agent acting at (round_v, c_v) may know a value produced at
/// (round_w, c_w): a light signal must arrive strictly before round_v starts.
inline bool alice_may_read(const Geometry& g, int acc_delay, int round_w, int c_w, int round_v, int c_v) {
    if (round_w >= round_v) return false;
    if (c_w == c_v) return true;
    const double cone = static_cast<double>(round_w) + g.dist(c_w, c_v);
    return cone < static_cast<double>(round_v) && round_v - round_w >= acc_delay;
}

}  // namespace detail

/// Event-loop engine for one protocol configuration. Bob is honest; Alice is
/// any agent. Bob's challenge at each node comes from a per-node stream, so
/// pruning or instrumentation never shifts other draws.
class Simulator {
public:
    explicit Simulator(RunConfig cfg)
        : cfg_(validated(std::move(cfg))),
          shape_(cfg_.shape()),
          coloring_(cfg_.coloring ? *cfg_.coloring : Coloring::canonical(shape_)),
          geometry_(cfg_.effective_geometry()) {}

    const RunConfig& config() const noexcept { return cfg_; }
    const TreeShape& shape() const noexcept { return shape_; }
    const Coloring& coloring() const noexcept { return coloring_; }
    const Geometry& geometry() const noexcept { return geometry_; }

    RunResult run(AliceAgent& alice, std::uint64_t seed) const;

private:
    class Run;
    friend class Run;

    static RunConfig validated(RunConfig cfg) {
        cfg.validate();
        return cfg;
    }

    RunConfig cfg_;
    TreeShape shape_;
    Coloring coloring_;
    Geometry geometry_;
};

class Simulator::Run {
public:
    Run(const Simulator& sim, AliceAgent& alice, std::uint64_t seed)
        : sim_(sim), cfg_(sim.cfg_), alice_(alice), bob_seed_(derive_seed(seed, StreamTag::bob, 0)) {
        const int n = cfg_.n_stations;
        stations_.assign(static_cast<std::size_t>(n), StationState{});
        for (int c = 0; c < n; ++c) {
            station_rng_.emplace_back(derive_seed(seed, StreamTag::station, static_cast<std::uint64_t>(c + 1)));
        }
        Transcript& t = result.transcript;
        t.kind = cfg_.kind;
        t.k = cfg_.k;
        t.field = cfg_.field;
        t.n_stations = cfg_.n_stations;
    }

    void execute() {
        Transcript& t = result.transcript;
        const int k = cfg_.k;
        const int arity = sim_.shape_.arity;
        leftmost_.assign(static_cast<std::size_t>(k), -1);

        std::vector<int> prev;
        for (int r = 1; r <= k; ++r) {
            step_stations(r);
            std::vector<int> current;
            if (r == 1) {
                current.push_back(add_node(-1, 0, r));
            } else {
                for (int parent : prev) {
                    if (!keep_descendants(parent, r)) continue;
                    for (int c = 0; c < arity; ++c) current.push_back(add_node(parent, c, r));
                }
            }
            result.challenges_per_round.push_back(static_cast<int>(current.size()));
            for (int idx : current) serve_node(idx, r);

            // Leftmost alive node at depth r-1.
            const int anchor = r == 1 ? -1 : leftmost_[static_cast<std::size_t>(r - 2)];
            int best = -1;
            for (int idx : current) {
                const NodeRecord& rec = t.nodes[static_cast<std::size_t>(idx)];
                if (rec.parent == anchor && rec.response &&
                    (best < 0 || rec.letter < t.nodes[static_cast<std::size_t>(best)].letter)) {
                    best = idx;
                }
            }
            if (best < 0) {
                abort_run(r, r == 1 ? "root did not answer"
                                    : "no live child of the leftmost alive node at depth " + std::to_string(r - 2));
                return;
            }
            leftmost_[static_cast<std::size_t>(r - 1)] = best;
            prev = std::move(current);
        }

        const int rr = k + 1;
        if (cfg_.lossy_reveal) step_stations(rr);
        for (int parent : prev) {
            if (!keep_descendants(parent, rr)) continue;
            for (int c = 0; c < arity; ++c) serve_leaf(parent, c, rr);
        }
        result.verdict = sim_.cfg_.kind == ProtocolKind::tree ? verify_tree(t) : verify_transcript(t);
    }

    RunResult result;

private:
    class View final : public HistoryView {
    public:
        View(Run& run, int round, int color, int record, int leaf_letter = -1)
            : run_(run), round_(round), color_(color), record_(record), leaf_letter_(leaf_letter) {}

        std::optional<FieldElement> challenge(const NodeId& w) const override {
            if (!run_.sim_.shape_.contains(w) || w.depth() >= run_.cfg_.k) {
                throw precondition_violation("history read of a node outside the internal tree: '" + w.str() + "'");
            }
            const int round_w = w.depth() + 1;
            const int c_w = run_.sim_.coloring_.color(w);
            if (!detail::alice_may_read(run_.sim_.geometry_, run_.cfg_.acc_delay, round_w, c_w, round_, color_)) {
                throw causality_violation("agent at '" + label() + "' (round " + std::to_string(round_) + ", station " +
                                          std::to_string(color_) + ") read challenge of '" + w.str() + "'");
            }
            run_.result.reads.push_back(HistoryRead{round_, color_, label(), w.str(), round_w, c_w});
            const int idx = run_.locate(w);
            if (idx < 0) return std::nullopt;
            return run_.result.transcript.nodes[static_cast<std::size_t>(idx)].challenge;
        }

    private:
        std::string label() const {
            NodeId id = run_.result.transcript.node_id(record_);
            if (leaf_letter_ >= 0) id = id.child_unchecked(static_cast<std::uint8_t>(leaf_letter_));
            return id.str();
        }

        Run& run_;
        int round_;
        int color_;
        int record_;
        int leaf_letter_;
    };

    void emit(Event e) {
        if (!cfg_.record_events) return;
        e.time = static_cast<double>(e.round - 1) * sim_.geometry_.tau;
        result.events.push_back(std::move(e));
    }

    void step_stations(int r) {
        std::vector<bool> before;
        if (cfg_.record_events) {
            for (const auto& s : stations_) before.push_back(s.alive);
        }
        loss_step(stations_, cfg_.loss, r, station_rng_);
        for (const auto& o : cfg_.outages) {
            if (r >= o.from && r <= o.to) stations_[static_cast<std::size_t>(o.station - 1)].alive = false;
        }
        if (cfg_.record_events) {
            for (std::size_t i = 0; i < stations_.size(); ++i) {
                if (before[i] && !stations_[i].alive) emit(Event{0, r, static_cast<int>(i + 1), EventKind::death, {}, {}, {}, {}});
                if (!before[i] && stations_[i].alive) emit(Event{0, r, static_cast<int>(i + 1), EventKind::revival, {}, {}, {}, {}});
            }
        }
    }

    /// Pruning rule: at round r Bob keeps challenging below `parent` only if its
    /// ancestor at depth r-1-N is the leftmost alive node there, the newest fact
    /// all of his agents share.
    bool keep_descendants(int parent, int r) const {
        const int d0 = r - 1 - cfg_.prune_delay;
        if (d0 < 0) return true;
        const auto& nodes = result.transcript.nodes;
        int a = parent;
        while (nodes[static_cast<std::size_t>(a)].depth > d0) a = nodes[static_cast<std::size_t>(a)].parent;
        return a == leftmost_[static_cast<std::size_t>(d0)];
    }

    int add_node(int parent, int letter, int r) {
        Transcript& t = result.transcript;
        if (t.nodes.size() >= cfg_.node_budget) {
            throw resource_guard_error("run exceeds the node budget of " + std::to_string(cfg_.node_budget) +
                                       " challenged nodes; raise N-dependent limits or lower k");
        }
        NodeRecord rec;
        rec.parent = parent;
        rec.letter = letter;
        rec.round = r;
        if (parent < 0) {
            rec.depth = 0;
            rec.color = sim_.coloring_.color(NodeId::root(sim_.shape_.arity));
            rec.key = kRootKey;
            rec.heap = 0;
        } else {
            const NodeRecord& p = t.nodes[static_cast<std::size_t>(parent)];
            rec.depth = p.depth + 1;
            rec.key = child_key(p.key, letter);
            rec.heap = child_heap(p.heap, letter);
            rec.color = sim_.coloring_.is_canonical() ? Coloring::canonical_child_color(p.color, letter)
                                                      : sim_.coloring_.child_color(p.color, p.heap, letter);
        }
        rec.challenge = draw_challenge(rec, static_cast<int>(t.nodes.size()));
        t.nodes.push_back(rec);
        first_child_.push_back(-1);
        next_sibling_.push_back(-1);
        const int idx = static_cast<int>(t.nodes.size()) - 1;
        if (parent >= 0) link_child(parent, idx);
        return idx;
    }

    std::uint64_t child_heap(std::uint64_t parent_heap, int letter) const {
        const auto a = static_cast<std::uint64_t>(sim_.shape_.arity);
        if (parent_heap == kNoHeapIndex || parent_heap > (kNoHeapIndex - a - 1) / a) return kNoHeapIndex;
        return parent_heap * a + static_cast<std::uint64_t>(letter) + 1;
    }

    void link_child(int parent, int idx) {
        // Keep children in letter order; they are appended in order, so walk to the tail.
        int& head = first_child_[static_cast<std::size_t>(parent)];
        if (head < 0) {
            head = idx;
            return;
        }
        int c = head;
        while (next_sibling_[static_cast<std::size_t>(c)] >= 0) c = next_sibling_[static_cast<std::size_t>(c)];
        next_sibling_[static_cast<std::size_t>(c)] = idx;
    }

    FieldElement draw_challenge(const NodeRecord& rec, int index) const {
        if (!cfg_.fixed_challenges.empty()) {
            const NodeId id = pending_id(rec, index);
            auto it = cfg_.fixed_challenges.find(id);
            if (it != cfg_.fixed_challenges.end()) return cfg_.field.element(it->second);
        }
        SplitMix64 rng(SplitMix64::mix(bob_seed_ ^ rec.key));
        return fe_sample(cfg_.field, rng);
    }

    NodeId pending_id(const NodeRecord& rec, int) const {
        if (rec.parent < 0) return NodeId::root(sim_.shape_.arity);
        return result.transcript.node_id(rec.parent).child_unchecked(static_cast<std::uint8_t>(rec.letter));
    }

    int locate(const NodeId& w) const {
        if (result.transcript.nodes.empty()) return -1;
        int cur = 0;
        for (auto letter : w.path()) {
            int c = first_child_[static_cast<std::size_t>(cur)];
            while (c >= 0 && result.transcript.nodes[static_cast<std::size_t>(c)].letter != letter) {
                c = next_sibling_[static_cast<std::size_t>(c)];
            }
            if (c < 0) return -1;
            cur = c;
        }
        return cur;
    }

    void serve_node(int idx, int r) {
        Transcript& t = result.transcript;
        NodeRecord& rec = t.nodes[static_cast<std::size_t>(idx)];
        const bool up = stations_[static_cast<std::size_t>(rec.color - 1)].alive;
        const bool trace = cfg_.record_events;
        std::string name = trace ? t.node_id(idx).str() : std::string{};
        emit(Event{0, r, rec.color, EventKind::challenge, name, rec.challenge.value(), {}, {}});
        if (!up) {
            emit(Event{0, r, rec.color, EventKind::timeout, name, {}, {}, "station dead"});
            return;
        }
        NodeContext ctx;
        ctx.transcript = &t;
        ctx.node = rec.ref(idx);
        if (rec.parent >= 0) ctx.parent = t.nodes[static_cast<std::size_t>(rec.parent)].ref(rec.parent);
        ctx.challenge = rec.challenge;
        View view(*this, r, rec.color, idx);
        ctx.view = &view;
        std::optional<FieldElement> y = alice_.respond(ctx);
        NodeRecord& rec2 = t.nodes[static_cast<std::size_t>(idx)];
        if (y && y->modulus() != cfg_.field.q()) throw usage_error("agent answered with an element of another field");
        rec2.response = y;
        if (y) {
            emit(Event{0, r, rec2.color, EventKind::response, name, y->value(), {}, {}});
        } else {
            emit(Event{0, r, rec2.color, EventKind::timeout, name, {}, {}, "no answer"});
        }
    }

    void serve_leaf(int parent, int letter, int r) {
        Transcript& t = result.transcript;
        const NodeRecord& p = t.nodes[static_cast<std::size_t>(parent)];
        RevealRecord rr;
        rr.parent = parent;
        rr.letter = letter;
        rr.round = r;
        rr.color = sim_.coloring_.is_canonical() ? Coloring::canonical_child_color(p.color, letter)
                                                 : sim_.coloring_.child_color(p.color, p.heap, letter);
        const bool trace = cfg_.record_events;
        const std::string name =
            trace ? t.node_id(parent).child_unchecked(static_cast<std::uint8_t>(letter)).str() : std::string{};
        const bool up = !cfg_.lossy_reveal || stations_[static_cast<std::size_t>(rr.color - 1)].alive;
        if (up) {
            NodeContext ctx;
            ctx.transcript = &t;
            ctx.leaf = true;
            ctx.node = NodeRef{-1, p.depth + 1, letter, r, rr.color, child_key(p.key, letter), child_heap(p.heap, letter)};
            ctx.parent = p.ref(parent);
            View view(*this, r, rr.color, parent, letter);
            ctx.view = &view;
            rr.claim = alice_.reveal(ctx);
        }
        if (rr.claim) {
            emit(Event{0, r, rr.color, EventKind::reveal, name, rr.claim->share.value(), rr.claim->bit, {}});
        } else {
            emit(Event{0, r, rr.color, EventKind::withhold, name, {}, {}, up ? "no answer" : "station dead"});
        }
        t.reveals.push_back(std::move(rr));
    }

    void abort_run(int r, std::string why) {
        Transcript& t = result.transcript;
        t.aborted = true;
        t.abort_round = r;
        t.abort_reason = why;
        emit(Event{0, r, 0, EventKind::abort, {}, {}, {}, why});
        result.verdict = Verdict::abort(std::move(why));
    }

    const Simulator& sim_;
    const RunConfig& cfg_;
    AliceAgent& alice_;
    std::uint64_t bob_seed_;
    std::vector<StationState> stations_;
    std::vector<SplitMix64> station_rng_;
    std::vector<int> leftmost_;
    std::vector<int> first_child_, next_sibling_;
};

inline RunResult Simulator::run(AliceAgent& alice, std::uint64_t seed) const {
    Run r(*this, alice, seed);
    r.execute();
    return std::move(r.result);
}

/// Share table for an honest run: dense while the tree is small, per-node
/// derived shares beyond that.
inline ShareTable honest_shares(const RunConfig& cfg, std::uint64_t seed) {
    const TreeShape shape = cfg.shape();
    const std::uint64_t s = derive_seed(seed, StreamTag::alice, 0);
    if (shape.depth <= 40 && shape.internal_count() <= (std::uint64_t{1} << 16)) {
        return ShareTable::sample(shape, cfg.field, s);
    }
    return ShareTable::derived(cfg.field, s);
}

/// One run. `alice` defaults to the honest agent committed to `d`.
inline RunResult run_protocol(const RunConfig& cfg, AliceAgent& alice, std::uint64_t seed) {
    return Simulator(cfg).run(alice, seed);
}

inline RunResult run_protocol(const RunConfig& cfg, int d, std::uint64_t seed) {
    HonestAlice alice(Commitment(d), honest_shares(cfg, seed));
    return Simulator(cfg).run(alice, seed);
}

/// Full event sequence of an honest run.
inline std::vector<Event> schedule_run(RunConfig cfg, int d, std::uint64_t seed) {
    cfg.record_events = true;
    return run_protocol(cfg, d, seed).events;
}

/// Post-hoc causality check. Counts reads outside the reader's past cone and
/// responses that do not sit at their node's round and station.
inline std::size_t validate_causality(const RunResult& res, const RunConfig& cfg) {
    const Geometry g = cfg.effective_geometry();
    std::size_t violations = 0;
    for (const auto& rd : res.reads) {
        if (!detail::alice_may_read(g, cfg.acc_delay, rd.target_round, rd.target_color, rd.reader_round,
                                    rd.reader_color)) {
            ++violations;
        }
    }
    const Transcript& t = res.transcript;
    for (const auto& rec : t.nodes) {
        if (rec.round != rec.depth + 1) ++violations;
        if (rec.parent >= 0) {
            const NodeRecord& p = t.nodes[static_cast<std::size_t>(rec.parent)];
            if (p.round >= rec.round || p.color == rec.color) ++violations;
        }
    }
    for (const auto& rv : t.reveals) {
        if (rv.round != t.k + 1) ++violations;
        if (t.nodes[static_cast<std::size_t>(rv.parent)].color == rv.color) ++violations;
    }
    double last = -1;
    for (const auto& e : res.events) {
        if (e.time < last) ++violations;
        last = e.time;
        if (std::abs(e.time - static_cast<double>(e.round - 1) * g.tau) > 1e-12) ++violations;
    }
    return violations;
}

}  // namespace rbc

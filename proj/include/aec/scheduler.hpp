#pragma once

// Queue ordering: urgency-weighted waiting-time cost, an exhaustive oracle
// for short queues and a genetic algorithm whose genome is the permutation
// index itself.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "aec/error.hpp"
#include "aec/json_enum.hpp"
#include "aec/permutation.hpp"

namespace aec::sched {

struct PatientRecord {
    std::string id;
    double ts = 0.0;                // triage score
    double arrival = 0.0;           // minutes on the centre timeline
    double expected_consult = 0.0;  // minutes

    friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

struct Queue {
    std::vector<PatientRecord> patients;  // arrival order
    double now = 0.0;

    std::size_t size() const noexcept { return patients.size(); }

    void validate() const {
        std::set<std::string> ids;
        for (const auto& p : patients) {
            if (!ids.insert(p.id).second) throw ValidationError("id", "duplicate patient id '" + p.id + "'");
            if (!std::isfinite(p.ts) || p.ts < 0.0) {
                throw ValidationError("ts", "patient '" + p.id + "' needs a finite ts >= 0");
            }
            if (!std::isfinite(p.expected_consult) || !(p.expected_consult > 0.0)) {
                throw ValidationError("expected_consult",
                                      "patient '" + p.id + "' needs expected_consult > 0");
            }
            if (!std::isfinite(p.arrival) || p.arrival > now) {
                throw ValidationError("now", "current time " + std::to_string(now) +
                                                 " precedes arrival of '" + p.id + "'");
            }
        }
    }
};

/// 1-based positions into Queue::patients.
using Order = std::vector<std::size_t>;

inline Order fifo_order(std::size_t n) {
    Order o(n);
    std::iota(o.begin(), o.end(), std::size_t{1});
    return o;
}

inline void validate_order(const Queue& q, std::span<const std::size_t> order) {
    if (order.size() != q.size()) {
        throw ValidationError("order", "order length " + std::to_string(order.size()) +
                                           " does not match queue length " + std::to_string(q.size()));
    }
    std::vector<bool> seen(q.size() + 1, false);
    for (auto i : order) {
        if (i < 1 || i > q.size() || seen[i]) throw ValidationError("order", "order is not a permutation");
        seen[i] = true;
    }
}

/// Cost without validation; the GA hot path.
inline double fitness_unchecked(const Queue& q, std::span<const std::size_t> order, double now) {
    double cost = 0.0;
    double ahead = 0.0;
    for (auto pos : order) {
        const auto& p = q.patients[pos - 1];
        cost += (p.ts + 1.0) * (now - p.arrival + ahead);
        ahead += p.expected_consult;
    }
    return cost;
}

/// Sum over queue positions of (T_i + 1) * (now - arrival_i + consults ahead).
inline double fitness(const Queue& q, std::span<const std::size_t> order, double now) {
    validate_order(q, order);
    for (const auto& p : q.patients) {
        if (p.arrival > now) {
            throw ValidationError("now", "current time " + std::to_string(now) +
                                             " precedes arrival of '" + p.id + "'");
        }
    }
    return fitness_unchecked(q, order, now);
}

inline double fitness(const Queue& q, std::span<const std::size_t> order) {
    return fitness(q, order, q.now);
}

struct ScheduleResult {
    Order order;
    double fitness = 0.0;
    std::vector<double> per_patient_wait;  // total wait, by queue position
    std::vector<double> projected_start;   // minutes from now, by queue position
    std::size_t generations_run = 0;
    std::size_t evaluations = 0;
};

inline ScheduleResult make_result(const Queue& q, Order order, std::size_t generations,
                                  std::size_t evaluations) {
    ScheduleResult r;
    r.fitness = fitness(q, order);
    double ahead = 0.0;
    for (auto pos : order) {
        const auto& p = q.patients[pos - 1];
        r.projected_start.push_back(ahead);
        r.per_patient_wait.push_back(q.now - p.arrival + ahead);
        ahead += p.expected_consult;
    }
    r.order = std::move(order);
    r.generations_run = generations;
    r.evaluations = evaluations;
    return r;
}

inline constexpr std::size_t kBruteForceMaxN = 9;

/// Exhaustive scan in index order; ties resolve to the lowest index.
inline ScheduleResult brute_force(const Queue& q) {
    q.validate();
    const std::size_t n = q.size();
    if (n == 0) throw ValidationError("patients", "queue is empty");
    if (n > kBruteForceMaxN) {
        throw ValidationError("patients", "brute force supports at most " +
                                              std::to_string(kBruteForceMaxN) + " patients (got " +
                                              std::to_string(n) + "); use optimize()");
    }
    Order current = fifo_order(n);
    Order best = current;
    double best_cost = fitness_unchecked(q, current, q.now);
    std::size_t evaluations = 1;
    while (std::next_permutation(current.begin(), current.end())) {
        const double c = fitness_unchecked(q, current, q.now);
        ++evaluations;
        if (c < best_cost) {
            best_cost = c;
            best = current;
        }
    }
    return make_result(q, std::move(best), 0, evaluations);
}

// ---------------------------------------------------------------------------
// Genetic algorithm

enum class CrossoverKind {
    midpoint,  // integer midpoint of the two parent indices
    digit,     // uniform crossover on the factorial-base digits of the indices
};

enum class MutationKind {
    scale,  // multiply by a log-uniform factor in [0.5, 2]
    shift,  // add/subtract a step of log-uniform magnitude
    digit,  // redraw one factorial-base digit
    mixed,  // scale, shift or digit, with equal probability
};

struct GaParams {
    std::size_t population = 100;
    std::size_t generations = 200;
    double crossover_rate = 0.8;
    double mutation_rate = 0.2;
    std::size_t elitism = 2;
    std::uint64_t seed = 1;
    CrossoverKind crossover = CrossoverKind::digit;
    MutationKind mutation = MutationKind::mixed;

    void validate() const {
        if (population < 2) throw ValidationError("population", "population must be >= 2");
        if (elitism >= population) throw ValidationError("elitism", "elitism must be < population");
        if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) {
            throw ValidationError("crossover_rate", "crossover_rate must lie in [0, 1]");
        }
        if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) {
            throw ValidationError("mutation_rate", "mutation_rate must lie in [0, 1]");
        }
    }
};

namespace detail {

using perm::BigIndex;

inline BigIndex random_below(std::mt19937_64& rng, const BigIndex& bound) {
    // uniform in [0, bound) by rejection over the bit width of bound
    const std::size_t bits = bound <= 1 ? 1 : msb(BigIndex(bound - 1)) + 1;
    while (true) {
        BigIndex v = 0;
        std::size_t have = 0;
        while (have < bits) {
            v <<= 64;
            v |= rng();
            have += 64;
        }
        v >>= (have - bits);
        if (v < bound) return v;
    }
}

/// Index arithmetic specialised for the genome representation.
template <class Index>
struct IndexOps {
    static Index uniform(std::mt19937_64& rng, const Index& count) {
        if constexpr (perm::is_u64<Index>) {
            return std::uniform_int_distribution<std::uint64_t>(1, count)(rng);
        } else {
            return random_below(rng, count) + 1;
        }
    }

    static Index midpoint(const Index& a, const Index& b) {
        if constexpr (perm::is_u64<Index>) {
            return std::min(a, b) + (std::max(a, b) - std::min(a, b)) / 2;
        } else {
            return (a + b) / 2;
        }
    }

    static Index clamp(const BigIndex& v, const Index& count) {
        if (v < 1) return 1;
        if (v > BigIndex(count)) return count;
        return static_cast<Index>(v);
    }

    static Index scale(std::mt19937_64& rng, const Index& x, const Index& count) {
        const double factor = std::exp(std::uniform_real_distribution<double>(std::log(0.5), std::log(2.0))(rng));
        constexpr unsigned kFracBits = 40;
        const BigIndex fixed = static_cast<std::uint64_t>(std::llround(factor * std::ldexp(1.0, kFracBits)));
        const BigIndex scaled = (BigIndex(x) * fixed) >> kFracBits;
        return clamp(scaled, count);
    }

    static Index shift(std::mt19937_64& rng, const Index& x, const Index& count) {
        const BigIndex big_count(count);
        const std::size_t top = msb(big_count) + 1;
        const std::size_t k = std::uniform_int_distribution<std::size_t>(0, top)(rng);
        BigIndex step = 1;
        if (k > 0) {
            const BigIndex lo = BigIndex(1) << (k - 1);
            step = lo + random_below(rng, lo);
        }
        const bool up = std::bernoulli_distribution(0.5)(rng);
        return clamp(up ? BigIndex(x) + step : BigIndex(x) - step, count);
    }
};

/// Factorial-base digits of index - 1: digit p lies in [0, p] and carries
/// weight p!. Digit n-1 selects the first queue position.
template <class Index>
std::vector<std::size_t> to_digits(const Index& index, std::size_t n) {
    std::vector<std::size_t> digits(n, 0);
    Index v = index - 1;
    for (std::size_t p = 0; p < n; ++p) {
        const unsigned radix = static_cast<unsigned>(p + 1);
        digits[p] = static_cast<std::size_t>(v % radix);
        v /= radix;
    }
    return digits;
}

template <class Index>
Index from_digits(const std::vector<std::size_t>& digits) {
    Index v = 0;
    for (std::size_t p = digits.size(); p-- > 0;) {
        v *= static_cast<unsigned>(p + 1);
        v += static_cast<unsigned>(digits[p]);
    }
    return v + 1;
}

template <class Index>
Index digit_crossover(std::mt19937_64& rng, const Index& a, const Index& b, std::size_t n) {
    auto da = to_digits(a, n);
    const auto db = to_digits(b, n);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t p = 0; p < n; ++p) {
        if (coin(rng)) da[p] = db[p];
    }
    return from_digits<Index>(da);
}

template <class Index>
Index digit_mutation(std::mt19937_64& rng, const Index& x, std::size_t n) {
    auto d = to_digits(x, n);
    const std::size_t p = std::uniform_int_distribution<std::size_t>(1, n - 1)(rng);
    d[p] = std::uniform_int_distribution<std::size_t>(0, p)(rng);
    return from_digits<Index>(d);
}

template <class Index>
struct Individual {
    Index genome;
    double cost;
};

template <class Index>
struct IndexHash {
    std::size_t operator()(const Index& i) const {
        if constexpr (perm::is_u64<Index>) {
            return std::hash<std::uint64_t>{}(i);
        } else {
            return boost::multiprecision::hash_value(i);
        }
    }
};

template <class Index>
ScheduleResult run_ga(const Queue& q, const GaParams& params) {
    using Ops = IndexOps<Index>;
    const perm::Mapper<Index> mapper(q.size());
    const Index& count = mapper.count();
    std::mt19937_64 rng(params.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Order scratch;
    std::size_t evaluations = 0;
    auto evaluate = [&](const Index& genome) {
        mapper.decode_into(genome, scratch);
        ++evaluations;
        return fitness_unchecked(q, scratch, q.now);
    };
    auto mutate = [&](const Index& x) {
        MutationKind kind = params.mutation;
        if (kind == MutationKind::mixed) {
            const double u = unit(rng);
            kind = u < 1.0 / 3 ? MutationKind::scale : u < 2.0 / 3 ? MutationKind::shift : MutationKind::digit;
        }
        switch (kind) {
            case MutationKind::scale: return Ops::scale(rng, x, count);
            case MutationKind::shift: return Ops::shift(rng, x, count);
            default: return digit_mutation(rng, x, q.size());
        }
    };
    auto crossover = [&](const Index& a, const Index& b) {
        if (params.crossover == CrossoverKind::midpoint) return Ops::midpoint(a, b);
        return digit_crossover(rng, a, b, q.size());
    };
    auto better = [](const Individual<Index>& a, const Individual<Index>& b) {
        return a.cost < b.cost || (a.cost == b.cost && a.genome < b.genome);
    };

    std::vector<Individual<Index>> pop;
    pop.reserve(params.population);
    // FIFO (index 1) is always present, so the result never loses to arrival order.
    pop.push_back({Index(1), evaluate(Index(1))});
    while (pop.size() < params.population) {
        const Index g = Ops::uniform(rng, count);
        pop.push_back({g, evaluate(g)});
    }
    std::sort(pop.begin(), pop.end(), better);

    auto tournament = [&]() -> const Individual<Index>& {
        std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
        const auto& a = pop[pick(rng)];
        const auto& b = pop[pick(rng)];
        return better(a, b) ? a : b;
    };

    std::vector<Individual<Index>> next;
    next.reserve(params.population);
    std::unordered_set<Index, IndexHash<Index>> members;
    for (std::size_t gen = 0; gen < params.generations; ++gen) {
        next.clear();
        members.clear();
        for (std::size_t e = 0; e < params.elitism; ++e) {
            next.push_back(pop[e]);
            members.insert(pop[e].genome);
        }
        while (next.size() < params.population) {
            const auto& a = tournament();
            const auto& b = tournament();
            Index child = a.genome;
            if (unit(rng) < params.crossover_rate) child = crossover(a.genome, b.genome);
            if (unit(rng) < params.mutation_rate) child = mutate(child);
            // Collisions with the new generation are re-drawn by mutation, a
            // bounded number of times, to keep the population diverse.
            for (int attempt = 0; attempt < 8 && members.count(child) != 0; ++attempt) {
                child = mutate(child);
            }
            members.insert(child);
            next.push_back({child, evaluate(child)});
        }
        std::sort(next.begin(), next.end(), better);
        pop.swap(next);
    }
    return make_result(q, mapper.decode(pop.front().genome), params.generations, evaluations);
}

}  // namespace detail

/// GA search over permutation indices. The result is never worse than FIFO
/// and is deterministic for a fixed seed.
inline ScheduleResult optimize(const Queue& q, const GaParams& params = {}) {
    q.validate();
    params.validate();
    const std::size_t n = q.size();
    if (n == 0) throw ValidationError("patients", "queue is empty");
    if (n == 1) return make_result(q, {1}, 0, 1);
    if (n <= perm::kMaxU64N) return detail::run_ga<std::uint64_t>(q, params);
    return detail::run_ga<perm::BigIndex>(q, params);
}

// ---------------------------------------------------------------------------
// JSON

inline Queue queue_from_json(const nlohmann::json& j) {
    try {
        Queue q;
        for (const auto& p : j.at("patients")) {
            q.patients.push_back({p.at("id").is_string() ? p.at("id").get<std::string>() : p.at("id").dump(),
                                  p.at("ts").get<double>(), p.at("arrival_min").get<double>(),
                                  p.at("expected_consult_min").get<double>()});
        }
        q.now = j.at("now_min").get<double>();
        q.validate();
        return q;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid queue document: ") + e.what());
    }
}

inline nlohmann::json to_json(const Queue& q) {
    auto patients = nlohmann::json::array();
    for (const auto& p : q.patients) {
        patients.push_back({{"id", p.id},
                            {"ts", p.ts},
                            {"arrival_min", p.arrival},
                            {"expected_consult_min", p.expected_consult}});
    }
    return {{"patients", patients}, {"now_min", q.now}};
}

inline nlohmann::json to_json(const ScheduleResult& r, const Queue& q) {
    auto ids = nlohmann::json::array();
    for (auto pos : r.order) ids.push_back(q.patients[pos - 1].id);
    return {{"order", r.order},
            {"order_ids", ids},
            {"fitness", r.fitness},
            {"per_patient_wait", r.per_patient_wait},
            {"projected_start", r.projected_start},
            {"generations_run", r.generations_run},
            {"evaluations", r.evaluations}};
}

NLOHMANN_JSON_SERIALIZE_ENUM(CrossoverKind, {{CrossoverKind::digit, "digit"},
                                             {CrossoverKind::midpoint, "midpoint"}})
NLOHMANN_JSON_SERIALIZE_ENUM(MutationKind, {{MutationKind::digit, "digit"},
                                            {MutationKind::mixed, "mixed"},
                                            {MutationKind::scale, "scale"},
                                            {MutationKind::shift, "shift"}})

inline GaParams ga_params_from_json(const nlohmann::json& j) {
    GaParams p;
    p.population = j.value("population", p.population);
    p.generations = j.value("generations", p.generations);
    p.crossover_rate = j.value("crossover_rate", p.crossover_rate);
    p.mutation_rate = j.value("mutation_rate", p.mutation_rate);
    p.elitism = j.value("elitism", p.elitism);
    p.seed = j.value("seed", p.seed);
    p.crossover = enum_value(j, "crossover", p.crossover);
    p.mutation = enum_value(j, "mutation", p.mutation);
    p.validate();
    return p;
}

inline nlohmann::json to_json(const GaParams& p) {
    return {{"population", p.population},     {"generations", p.generations},
            {"crossover_rate", p.crossover_rate}, {"mutation_rate", p.mutation_rate},
            {"elitism", p.elitism},           {"seed", p.seed},
            {"crossover", p.crossover},       {"mutation", p.mutation}};
}

}  // namespace aec::sched

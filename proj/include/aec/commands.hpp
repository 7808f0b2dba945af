#pragma once

// One function per CLI subcommand. Each returns the JSON document the CLI
// prints, so the binary stays a thin argument parser.

#include <optional>
#include <string>

#include <json.hpp>

#include "aec/config.hpp"
#include "aec/scheduler.hpp"
#include "aec/simkit.hpp"
#include "aec/triage.hpp"

namespace aec::commands {

inline nlohmann::json triage(const EngineConfig& config, const nlohmann::json& assessment) {
    const auto engine = config.make_triage_engine();
    return triage::to_json(engine(triage::assessment_from_json(assessment)));
}

inline nlohmann::json schedule(const EngineConfig& config, const nlohmann::json& queue_doc, bool brute_force) {
    const auto q = sched::queue_from_json(queue_doc);
    const auto result = brute_force ? sched::brute_force(q) : sched::optimize(q, config.ga);
    auto out = sched::to_json(result, q);
    out["method"] = brute_force ? "brute-force" : "ga";
    out["fifo_fitness"] = sched::fitness(q, sched::fifo_order(q.size()));
    return out;
}

struct FqlRun {
    nlohmann::json summary;
    std::string curve_csv;
};

inline FqlRun sim_fql(const EngineConfig& config, std::size_t epochs, std::uint64_t seed, double noise_sigma) {
    const auto run = sim::run_teacher_experiment(seed, epochs, noise_sigma, config.fql);
    const auto misaligned = sim::misaligned_rows(run);
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < run.model.qtable().rows(); ++r) {
        rows.push_back({{"row", r},
                        {"visits", run.model.qtable().row_visits(r)},
                        {"teacher", run.teacher.rules()[r].consequent},
                        {"learned", run.model.bins()[run.model.qtable().argmax(r)].label}});
    }
    return {{{"epochs", epochs},
             {"seed", seed},
             {"noise_sigma", noise_sigma},
             {"final_sliding_avg_abs_error", *run.curve.final_average()},
             {"final_epsilon", run.model.epsilon()},
             {"misaligned_rows", misaligned},
             {"rows", rows}},
            sim::curve_csv(run.curve)};
}

inline nlohmann::json sim_schedule(const EngineConfig& config, const sim::ArrivalTrace& trace, sim::Policy policy,
                                   double noise_sigma, std::uint64_t seed) {
    const auto report =
        sim::run_schedule_benchmark(trace, policy, noise_sigma, seed, config.ga, config.triage.thresholds);
    return sim::to_json(report);
}

inline sim::ArrivalTrace generated_trace(const EngineConfig& config, std::optional<std::size_t> n,
                                         std::optional<std::uint64_t> seed) {
    auto g = config.sim.trace;
    if (n) g.n = *n;
    if (seed) g.seed = *seed;
    return sim::generate_trace(g, config.triage.thresholds);
}

inline nlohmann::json sim_triage(const EngineConfig& config) {
    return sim::to_json(sim::triage_agreement(config.make_triage_engine()));
}

}  // namespace aec::commands

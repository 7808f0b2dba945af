#pragma once

// Engine configuration document shared by the CLI and the service.

#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "aec/error.hpp"
#include "aec/fql.hpp"
#include "aec/fuzzy.hpp"
#include "aec/scheduler.hpp"
#include "aec/simkit.hpp"
#include "aec/triage.hpp"

namespace aec {

struct ServiceOptions {
    bool red_bypass = true;  // red patients are pinned ahead of the optimized order
    std::size_t snapshot_every = 50;
};

struct SimOptions {
    sim::TraceGenerator trace;
    double prediction_noise_sigma = 4.0;
};

struct EngineConfig {
    triage::TriageConfig triage;
    std::optional<fuzzy::Fis> triage_fis;  // default rule base when absent
    fql::Params fql;
    sched::GaParams ga;
    ServiceOptions service;
    SimOptions sim;

    triage::Engine make_triage_engine() const { return triage::Engine(triage, triage_fis); }
};

inline EngineConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("config must be a JSON object");
    EngineConfig c;
    try {
        if (j.contains("triage")) {
            c.triage = triage::triage_config_from_json(j.at("triage"));
            if (j.at("triage").contains("fis")) c.triage_fis = fuzzy::fis_from_json(j.at("triage").at("fis"));
        }
        if (j.contains("fql")) c.fql = fql::params_from_json(j.at("fql"));
        if (j.contains("ga")) c.ga = sched::ga_params_from_json(j.at("ga"));
        if (j.contains("service")) {
            const auto& s = j.at("service");
            c.service.red_bypass = s.value("red_bypass", c.service.red_bypass);
            c.service.snapshot_every = s.value("snapshot_every", c.service.snapshot_every);
        }
        if (j.contains("sim")) {
            const auto& s = j.at("sim");
            auto& g = c.sim.trace;
            g.n = s.value("n", g.n);
            g.mean_interarrival_min = s.value("mean_interarrival_min", g.mean_interarrival_min);
            g.colour_mix = s.value("colour_mix", g.colour_mix);
            g.consult_median_min = s.value("consult_median_min", g.consult_median_min);
            g.consult_log_sigma = s.value("consult_log_sigma", g.consult_log_sigma);
            g.seed = s.value("seed", g.seed);
            c.sim.prediction_noise_sigma = s.value("prediction_noise_sigma", c.sim.prediction_noise_sigma);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid config: ") + e.what());
    }
    // Validate parameters eagerly so a bad file fails at load time.
    fql::Model{c.fql};
    return c;
}

inline nlohmann::json to_json(const EngineConfig& c) {
    auto triage = triage::to_json(c.triage);
    if (c.triage_fis) triage["fis"] = fuzzy::to_json(*c.triage_fis);
    const auto& g = c.sim.trace;
    return {{"triage", triage},
            {"fql", fql::to_json(c.fql)},
            {"ga", sched::to_json(c.ga)},
            {"service", {{"red_bypass", c.service.red_bypass}, {"snapshot_every", c.service.snapshot_every}}},
            {"sim",
             {{"n", g.n},
              {"mean_interarrival_min", g.mean_interarrival_min},
              {"colour_mix", g.colour_mix},
              {"consult_median_min", g.consult_median_min},
              {"consult_log_sigma", g.consult_log_sigma},
              {"seed", g.seed},
              {"prediction_noise_sigma", c.sim.prediction_noise_sigma}}}};
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline EngineConfig load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

}  // namespace aec

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "aec/config.hpp"

using namespace aec;
using nlohmann::json;

TEST(Config, DefaultsRoundTrip) {
    const EngineConfig c;
    const auto j = to_json(c);
    EXPECT_EQ(to_json(config_from_json(j)), j);
    EXPECT_TRUE(c.service.red_bypass);
    EXPECT_DOUBLE_EQ(c.sim.prediction_noise_sigma, 4.0);
    EXPECT_EQ(c.sim.trace.n, 17u);
}

TEST(Config, EmptyObjectIsDefaults) {
    EXPECT_EQ(to_json(config_from_json(json::object())), to_json(EngineConfig{}));
}

TEST(Config, PartialOverrides) {
    const auto c = config_from_json(json::parse(R"({
        "ga": {"population": 40, "seed": 5, "crossover": "midpoint"},
        "service": {"red_bypass": false},
        "sim": {"n": 30, "prediction_noise_sigma": 2.5},
        "fql": {"alpha": 0.2}
    })"));
    EXPECT_EQ(c.ga.population, 40u);
    EXPECT_EQ(c.ga.seed, 5u);
    EXPECT_EQ(c.ga.crossover, sched::CrossoverKind::midpoint);
    EXPECT_EQ(c.ga.generations, 200u);
    EXPECT_FALSE(c.service.red_bypass);
    EXPECT_EQ(c.sim.trace.n, 30u);
    EXPECT_DOUBLE_EQ(c.sim.prediction_noise_sigma, 2.5);
    EXPECT_DOUBLE_EQ(c.fql.alpha, 0.2);
}

TEST(Config, InvalidValuesRejected) {
    EXPECT_THROW(config_from_json(json::array()), ParseError);
    EXPECT_THROW(config_from_json(json::parse(R"({"fql": {"alpha": 0}})")), ValidationError);
    EXPECT_THROW(config_from_json(json::parse(R"({"ga": {"elitism": 500}})")), ValidationError);
    EXPECT_THROW(config_from_json(json::parse(R"({"ga": {"population": "many"}})")), ParseError);
}

TEST(Config, CustomTriageFisUsed) {
    json j = to_json(EngineConfig{});
    j["triage"]["fis"] = fuzzy::to_json(triage::default_triage_fis());
    const auto c = config_from_json(j);
    ASSERT_TRUE(c.triage_fis.has_value());
    triage::Assessment a{{150, 75, 37, 11}, triage::Avpu::alert, {}, {}};
    EXPECT_DOUBLE_EQ(c.make_triage_engine()(a).crisp_ts, triage::Engine{}(a).crisp_ts);
}

TEST(Config, Files) {
    const auto dir = std::filesystem::temp_directory_path() / "aec_config_test";
    std::filesystem::create_directories(dir);
    const auto good = dir / "good.json";
    const auto bad = dir / "bad.json";
    std::ofstream(good) << R"({"ga": {"seed": 3}})";
    std::ofstream(bad) << "{ not json";
    EXPECT_EQ(load_config(good.string()).ga.seed, 3u);
    EXPECT_THROW(load_config(bad.string()), ParseError);
    EXPECT_THROW(load_config((dir / "missing.json").string()), NotFoundError);
    std::filesystem::remove_all(dir);
}

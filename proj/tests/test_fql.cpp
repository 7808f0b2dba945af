#include <array>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "aec/fql.hpp"

using namespace aec;
using namespace aec::fql;

namespace {

// Severity 5 / age 40 sits inside the medium x adult plateaus: one rule, full strength.
constexpr double kSev = 5.0;
constexpr double kAge = 40.0;

std::size_t column_of(const Model& m, double minutes) {
    for (std::size_t c = 0; c < m.bins().size(); ++c) {
        if (m.bins()[c].minutes == minutes) return c;
    }
    throw std::logic_error("no such bin");
}

// Makes a q-row prefer `minutes` by playing every column once against that
// observation: the matching column keeps q = 0, the rest go negative.
void prefer(Model& m, double sev, double age, double minutes) {
    for (std::size_t c = 0; c < m.bins().size(); ++c) {
        auto rec = m.predict_greedy(sev, age);
        for (auto& r : rec.rules) r.column = c;
        m.update(rec, minutes);
    }
}

}  // namespace

TEST(Epsilon, Examples) {
    EXPECT_EQ(epsilon(0), 1.0);
    EXPECT_NEAR(epsilon(100), 0.62, 1e-12);
    EXPECT_NEAR(epsilon(249), 0.0538, 1e-12);
    EXPECT_EQ(epsilon(250), 0.05);
    EXPECT_EQ(epsilon(10000), 0.05);
}

TEST(Epsilon, BoundedAndNonIncreasing) {
    double prev = epsilon(0);
    for (std::int64_t t = 0; t <= 10000; ++t) {
        const double e = epsilon(t);
        ASSERT_GE(e, 0.05);
        ASSERT_LE(e, 1.0);
        ASSERT_LE(e, prev);
        prev = e;
    }
}

TEST(QTable, DefaultDimensionsAndZeroInit) {
    const Model m;
    EXPECT_EQ(m.qtable().rows(), 9u);
    EXPECT_EQ(m.qtable().cols(), 12u);
    for (double v : m.qtable().values()) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(m.bins().front().minutes, 5.0);
    EXPECT_EQ(m.bins().back().minutes, 60.0);
}

TEST(Predict, SingleFullyActiveRuleGreedy) {
    Model m;
    prefer(m, kSev, kAge, 30);
    const auto rec = m.predict_greedy(kSev, kAge);
    ASSERT_EQ(rec.rules.size(), 1u);
    EXPECT_EQ(rec.rules[0].strength, 1.0);
    EXPECT_EQ(rec.rules[0].row, m.row(1, 1));
    EXPECT_EQ(rec.rules[0].chosen_by, ChosenBy::exploitation);
    EXPECT_EQ(rec.predicted_minutes, 30.0);
}

TEST(Predict, EqualBlendOfTwoRules) {
    Model m;
    // Severity 3.5 is midway between the low [0,3] and medium [4,6] plateaus
    // with equal spreads, so both rules fire equally for an adult.
    prefer(m, 1.5, kAge, 10);
    prefer(m, kSev, kAge, 20);
    const auto rec = m.predict_greedy(3.5, kAge);
    ASSERT_EQ(rec.rules.size(), 2u);
    EXPECT_NEAR(rec.rules[0].strength, 0.5, 1e-12);
    EXPECT_NEAR(rec.rules[1].strength, 0.5, 1e-12);
    EXPECT_NEAR(rec.predicted_minutes, 15.0, 1e-12);
}

TEST(Predict, NormalizedStrengthsSumToOne) {
    const Model m;
    std::mt19937_64 rng(4);
    for (int i = 0; i < 2000; ++i) {
        const double s = std::uniform_real_distribution<double>(0, 10)(rng);
        const double a = std::uniform_real_distribution<double>(0, 100)(rng);
        const auto rec = m.predict(s, a, rng);
        double sum = 0;
        for (const auto& r : rec.rules) {
            ASSERT_GT(r.strength, 0.0);
            ASSERT_LE(r.strength, 1.0);
            ASSERT_LT(r.column, 12u);
            sum += r.strength;
        }
        ASSERT_NEAR(sum, 1.0, 1e-12);
        ASSERT_GE(rec.predicted_minutes, 5.0);
        ASSERT_LE(rec.predicted_minutes, 60.0);
    }
}

TEST(Predict, EpochZeroIsUniformExploration) {
    const Model m;
    std::mt19937_64 rng(99);
    std::array<int, 12> counts{};
    constexpr int kDraws = 10000;
    for (int i = 0; i < kDraws; ++i) {
        const auto rec = m.predict(kSev, kAge, rng);
        ASSERT_EQ(rec.rules[0].chosen_by, ChosenBy::exploration);
        ++counts[rec.rules[0].column];
    }
    double chi2 = 0;
    const double expected = kDraws / 12.0;
    for (int c : counts) {
        EXPECT_NEAR(c / double(kDraws), 1.0 / 12.0, 0.02);
        chi2 += (c - expected) * (c - expected) / expected;
    }
    EXPECT_LT(chi2, 24.725);  // chi-square, 11 dof, p = 0.01
}

TEST(Predict, ClampsOutOfUniverseInputs) {
    const Model m;
    const auto rec = m.predict_greedy(12, 130);
    EXPECT_TRUE(rec.clamped);
    EXPECT_EQ(rec.rules[0].row, m.row(2, 2));
    EXPECT_FALSE(m.predict_greedy(10, 100).clamped);
}

TEST(Predict, SameSeedSameTrajectory) {
    auto trajectory = [](std::uint64_t seed) {
        Model m;
        std::mt19937_64 rng(seed);
        std::vector<double> out;
        for (int i = 0; i < 400; ++i) {
            const double s = std::uniform_real_distribution<double>(0, 10)(rng);
            const double a = std::uniform_real_distribution<double>(0, 100)(rng);
            const auto rec = m.predict(s, a, rng);
            out.push_back(rec.predicted_minutes);
            m.update(rec, 10 + 3 * s);
        }
        return std::make_pair(out, m);
    };
    const auto a = trajectory(5), b = trajectory(5);
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second, b.second);
    EXPECT_NE(a.first, trajectory(6).first);
}

TEST(Reward, Examples) {
    EXPECT_EQ(reward(30, 30), 0.0);
    EXPECT_EQ(reward(30, 45), -15.0);
    EXPECT_EQ(reward(10, 0), -10.0);
    EXPECT_THROW(reward(10, -1), ValidationError);
}

TEST(Update, ZeroRewardFixedPoint) {
    Model m;
    auto rec = m.predict_greedy(kSev, kAge);
    rec.rules[0].column = column_of(m, 30);
    m.update(rec, 30);
    for (double v : m.qtable().values()) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(m.epoch(), 1);
    EXPECT_EQ(m.qtable().visits(m.row(1, 1), column_of(m, 30)), 1u);
}

TEST(Update, OneStepArithmetic) {
    Model m;
    auto rec = m.predict_greedy(kSev, kAge);
    rec.rules[0].column = column_of(m, 30);
    m.update(rec, 40);
    const std::size_t row = m.row(1, 1), col = column_of(m, 30);
    EXPECT_DOUBLE_EQ(m.qtable().at(row, col), -1.0);
    for (std::size_t r = 0; r < 9; ++r)
        for (std::size_t c = 0; c < 12; ++c)
            if (r != row || c != col) {
                EXPECT_EQ(m.qtable().at(r, c), 0.0);
            }
}

TEST(Update, BlendedRulesUseOwnBinAndWeight) {
    Model m;
    auto rec = m.predict_greedy(3.5, kAge);
    ASSERT_EQ(rec.rules.size(), 2u);
    rec.rules[0].column = column_of(m, 10);
    rec.rules[1].column = column_of(m, 20);
    m.update(rec, 25);
    // q += alpha * phi * (r - 0): 0.1 * 0.5 * -15 and 0.1 * 0.5 * -5
    EXPECT_NEAR(m.qtable().at(rec.rules[0].row, column_of(m, 10)), -0.75, 1e-12);
    EXPECT_NEAR(m.qtable().at(rec.rules[1].row, column_of(m, 20)), -0.25, 1e-12);
}

TEST(Update, DeterministicTeacherAlignsDominantRow) {
    Model m;
    std::mt19937_64 rng(11);
    for (int i = 0; i < 1000; ++i) m.update(m.predict(kSev, kAge, rng), 30);
    EXPECT_EQ(m.qtable().argmax(m.row(1, 1)), column_of(m, 30));
    EXPECT_EQ(m.predict_greedy(kSev, kAge).predicted_minutes, 30.0);
}

TEST(Update, StaleRecordRejected) {
    Model m;
    std::mt19937_64 rng(1);
    const auto rec = m.predict(kSev, kAge, rng);
    m.update(rec, 20);
    const auto before = m;
    EXPECT_THROW(m.update(rec, 20), StaleRecordError);
    EXPECT_EQ(m, before);
}

TEST(Update, InvalidObservationLeavesModelUntouched) {
    Model m;
    const auto rec = m.predict_greedy(kSev, kAge);
    EXPECT_THROW(m.update(rec, -3), ValidationError);
    EXPECT_THROW(m.update(rec, NAN), ValidationError);
    EXPECT_EQ(m, Model{});
}

TEST(Update, QValuesStayWithinRewardRange) {
    Model m;
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> sev(0, 10), age(0, 100), obs(0, 60);
    for (int i = 0; i < 20000; ++i) {
        const auto rec = m.predict(sev(rng), age(rng), rng);
        const auto before = m.qtable();
        m.update(rec, obs(rng));
        std::set<std::pair<std::size_t, std::size_t>> touched;
        for (const auto& r : rec.rules) touched.insert({r.row, r.column});
        for (std::size_t r = 0; r < 9; ++r) {
            for (std::size_t c = 0; c < 12; ++c) {
                const double q = m.qtable().at(r, c);
                ASSERT_LE(q, 0.0);
                ASSERT_GE(q, -60.0);
                if (!touched.count({r, c})) {
                    ASSERT_EQ(q, before.at(r, c));
                }
            }
        }
    }
    EXPECT_EQ(m.epoch(), 20000);
}

TEST(Persist, RoundTripIsExact) {
    Model m;
    std::mt19937_64 rng(8);
    for (int i = 0; i < 500; ++i) {
        const auto rec = m.predict(std::fmod(i * 0.37, 10.0), std::fmod(i * 7.3, 100.0), rng);
        m.update(rec, 5 + (i % 50));
    }
    const auto doc = nlohmann::json::parse(m.persist().dump());
    const auto back = Model::restore(doc);
    EXPECT_EQ(back, m);
    EXPECT_EQ(back.qtable().values(), m.qtable().values());
}

TEST(Persist, FreshModelIsZero) {
    const auto doc = Model{}.persist();
    EXPECT_EQ(doc.at("epoch"), 0);
    for (const auto& v : doc.at("q")) EXPECT_EQ(v.get<double>(), 0.0);
    EXPECT_EQ(doc.at("q").size(), 108u);
}

TEST(Persist, CorruptedDocuments) {
    const auto good = Model{}.persist();
    auto versioned = good;
    versioned["schema_version"] = 99;
    EXPECT_THROW(Model::restore(versioned), ParseError);
    auto short_q = good;
    short_q["q"].erase(0);
    EXPECT_THROW(Model::restore(short_q), ParseError);
    auto missing = good;
    missing.erase("bins");
    EXPECT_THROW(Model::restore(missing), ParseError);
    EXPECT_THROW(Model::restore(nlohmann::json::array()), ParseError);
    auto bad_alpha = good;
    bad_alpha["alpha"] = 0;
    EXPECT_THROW(Model::restore(bad_alpha), ValidationError);
}

TEST(Params, Validation) {
    for (double alpha : {0.0, 1.5}) {
        Params bad;
        bad.alpha = alpha;
        EXPECT_THROW(Model{bad}, ValidationError);
    }
    Params p;
    p.eef.floor = 1.0;
    EXPECT_THROW(Model{p}, ValidationError);
    p = {};
    p.eef.cutoff = 0;
    EXPECT_THROW(Model{p}, ValidationError);
    EXPECT_EQ(params_from_json(to_json(Params{})), Params{});
}

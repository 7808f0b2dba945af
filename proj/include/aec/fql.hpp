#pragma once

// Online fuzzy Q-learning predictor of consultation length. Each q-table row
// is one antecedent combination of the input labels, each column a candidate
// consequent time bin. The learner is a contextual bandit (no successor
// state, discount 0): every active rule picks a bin epsilon-greedily and is
// rewarded with the negative absolute error of its own bin.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "aec/error.hpp"
#include "aec/fuzzy.hpp"

namespace aec::fql {

/// Linear exploration decay with a floor: 1 - slope*t before `cutoff`.
struct Eef {
    double slope = 0.0038;
    double floor = 0.05;
    std::int64_t cutoff = 250;

    double operator()(std::int64_t t) const noexcept {
        if (t < cutoff) return std::max(floor, 1.0 - slope * static_cast<double>(t));
        return floor;
    }

    friend bool operator==(const Eef&, const Eef&) = default;
};

inline double epsilon(std::int64_t t, const Eef& eef = {}) { return eef(t); }

struct TimeBin {
    std::string label;
    double minutes;
    fuzzy::MembershipFunction mf;

    friend bool operator==(const TimeBin&, const TimeBin&) = default;
};

/// 12 triangular bins at 5-minute spacing, 5..60 min.
inline std::vector<TimeBin> default_bins() {
    std::vector<TimeBin> bins;
    for (int m = 5; m <= 60; m += 5) {
        bins.push_back({"m" + std::to_string(m), static_cast<double>(m),
                        fuzzy::MembershipFunction::triangle(m, 5.0, 5.0)});
    }
    return bins;
}

// Narrow transitions between labels: each q-row learns against the global
// observation, so wide overlaps pull a row toward its neighbours' bins.
inline fuzzy::LinguisticVariable default_severity() {
    using fuzzy::MembershipFunction;
    return {"severity", 0, 10,
            {{"low", MembershipFunction::gaussian_plateau(0, 3.4, 0.06, 0.06)},
             {"medium", MembershipFunction::gaussian_plateau(3.6, 6.4, 0.06, 0.06)},
             {"high", MembershipFunction::gaussian_plateau(6.6, 10, 0.06, 0.06)}}};
}

inline fuzzy::LinguisticVariable default_age() {
    using fuzzy::MembershipFunction;
    return {"age", 0, 100,
            {{"child", MembershipFunction::gaussian_plateau(0, 17, 0.3, 0.3)},
             {"adult", MembershipFunction::gaussian_plateau(18, 62, 0.3, 0.3)},
             {"elderly", MembershipFunction::gaussian_plateau(63, 100, 0.3, 0.3)}}};
}

/// Output variable spanning the bins; used for teacher systems and export.
inline fuzzy::LinguisticVariable bins_variable(const std::vector<TimeBin>& bins) {
    std::vector<fuzzy::Label> labels;
    for (const auto& b : bins) labels.push_back({b.label, b.mf});
    return {"minutes", bins.front().minutes, bins.back().minutes, std::move(labels)};
}

class QTable {
public:
    QTable() = default;
    QTable(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), values_(rows * cols, 0.0), visits_(rows * cols, 0) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& at(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
    std::uint64_t& visits(std::size_t r, std::size_t c) { return visits_[r * cols_ + c]; }
    std::uint64_t visits(std::size_t r, std::size_t c) const { return visits_[r * cols_ + c]; }

    std::uint64_t row_visits(std::size_t r) const {
        std::uint64_t n = 0;
        for (std::size_t c = 0; c < cols_; ++c) n += visits(r, c);
        return n;
    }

    /// Highest-valued column; ties go to the lowest index.
    std::size_t argmax(std::size_t r) const {
        std::size_t best = 0;
        for (std::size_t c = 1; c < cols_; ++c) {
            if (at(r, c) > at(r, best)) best = c;
        }
        return best;
    }

    const std::vector<double>& values() const noexcept { return values_; }
    const std::vector<std::uint64_t>& visit_counts() const noexcept { return visits_; }

    friend bool operator==(const QTable&, const QTable&) = default;

private:
    friend class Model;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
    std::vector<std::uint64_t> visits_;
};

enum class Mode { learn, greedy };
enum class ChosenBy { exploration, exploitation };

struct RuleActivation {
    std::size_t row;
    double strength;  // normalized over active rules
    std::size_t column;
    ChosenBy chosen_by;
};

struct ActivationRecord {
    std::int64_t epoch = 0;
    std::vector<RuleActivation> rules;
    double predicted_minutes = 0.0;
    bool clamped = false;  // an input lay outside its universe
};

class StaleRecordError : public Error {
public:
    using Error::Error;
};

struct Params {
    double alpha = 0.1;
    Eef eef;
    /// Rules firing below this strength are treated as inactive.
    double min_firing = 0.01;

    friend bool operator==(const Params&, const Params&) = default;
};

inline constexpr int kSchemaVersion = 1;

class Model {
public:
    explicit Model(Params params = {}, fuzzy::LinguisticVariable severity = default_severity(),
                   fuzzy::LinguisticVariable age = default_age(),
                   std::vector<TimeBin> bins = default_bins())
        : params_(params),
          severity_(std::move(severity)),
          age_(std::move(age)),
          bins_(std::move(bins)),
          q_(severity_.size() * age_.size(), bins_.size()) {
        if (!(params_.alpha > 0.0 && params_.alpha <= 1.0)) {
            throw ValidationError("alpha", "learning rate must lie in (0, 1]");
        }
        if (!(params_.eef.floor > 0.0 && params_.eef.floor < 1.0)) {
            throw ValidationError("eef.floor", "exploration floor must lie in (0, 1)");
        }
        if (params_.eef.cutoff <= 0) throw ValidationError("eef.cutoff", "cutoff must be > 0");
        if (!(params_.min_firing > 0.0 && params_.min_firing <= 1.0)) {
            throw ValidationError("min_firing", "min_firing must lie in (0, 1]");
        }
        if (bins_.empty()) throw ValidationError("bins", "at least one time bin is required");
        for (std::size_t i = 1; i < bins_.size(); ++i) {
            if (!(bins_[i].minutes > bins_[i - 1].minutes)) {
                throw ValidationError("bins", "time bins must be strictly increasing");
            }
        }
    }

    const Params& params() const noexcept { return params_; }
    const fuzzy::LinguisticVariable& severity() const noexcept { return severity_; }
    const fuzzy::LinguisticVariable& age() const noexcept { return age_; }
    const std::vector<TimeBin>& bins() const noexcept { return bins_; }
    const QTable& qtable() const noexcept { return q_; }
    std::int64_t epoch() const noexcept { return epoch_; }
    double epsilon() const noexcept { return params_.eef(epoch_); }

    /// Row index for a (severity label, age label) pair.
    std::size_t row(std::size_t severity_label, std::size_t age_label) const noexcept {
        return severity_label * age_.size() + age_label;
    }

    /// Normalized firing strengths of the active rules, as (row, strength).
    std::vector<std::pair<std::size_t, double>> active_rules(double severity, double age) const {
        std::vector<std::pair<std::size_t, double>> active;
        double total = 0.0;
        for (std::size_t s = 0; s < severity_.size(); ++s) {
            const double ms = severity_.labels()[s].mf(severity);
            for (std::size_t a = 0; a < age_.size(); ++a) {
                const double phi = std::min(ms, age_.labels()[a].mf(age));
                if (phi >= params_.min_firing) {
                    active.emplace_back(row(s, a), phi);
                    total += phi;
                }
            }
        }
        if (active.empty()) throw fuzzy::NoRuleFiredError("no FQL rule is active for the inputs");
        for (auto& [r, phi] : active) phi /= total;
        return active;
    }

    template <class Rng>
    ActivationRecord predict(double severity, double age, Rng& rng, Mode mode = Mode::learn) const {
        ActivationRecord rec;
        rec.epoch = epoch_;
        const double s = severity_.clamp(severity);
        const double a = age_.clamp(age);
        rec.clamped = s != severity || a != age;
        const double eps = mode == Mode::learn ? epsilon() : 0.0;
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        std::uniform_int_distribution<std::size_t> pick(0, bins_.size() - 1);
        for (const auto& [r, phi] : active_rules(s, a)) {
            RuleActivation act{r, phi, q_.argmax(r), ChosenBy::exploitation};
            if (mode == Mode::learn && coin(rng) < eps) {
                act.column = pick(rng);
                act.chosen_by = ChosenBy::exploration;
            }
            rec.predicted_minutes += phi * bins_[act.column].minutes;
            rec.rules.push_back(act);
        }
        // rounding in the convex blend can step just outside the bin range
        rec.predicted_minutes =
            std::clamp(rec.predicted_minutes, bins_.front().minutes, bins_.back().minutes);
        return rec;
    }

    /// Greedy prediction; read-only and RNG-free.
    ActivationRecord predict_greedy(double severity, double age) const {
        std::mt19937_64 unused(0);
        return predict(severity, age, unused, Mode::greedy);
    }

    void update(const ActivationRecord& record, double observed) {
        if (!std::isfinite(observed) || observed < 0.0) {
            throw ValidationError("observed", "observed minutes must be finite and >= 0");
        }
        if (record.epoch != epoch_) {
            throw StaleRecordError("activation record from epoch " + std::to_string(record.epoch) +
                                   " applied at epoch " + std::to_string(epoch_));
        }
        for (const auto& act : record.rules) {
            if (act.row >= q_.rows() || act.column >= q_.cols()) {
                throw ValidationError("record", "activation record does not match this model");
            }
        }
        for (const auto& act : record.rules) {
            const double r = reward(bins_[act.column].minutes, observed);
            double& q = q_.at(act.row, act.column);
            q += params_.alpha * act.strength * (r - q);
            ++q_.visits(act.row, act.column);
        }
        ++epoch_;
    }

    static double reward(double predicted, double observed) {
        if (!(observed >= 0.0)) throw ValidationError("observed", "observed minutes must be >= 0");
        return -std::abs(predicted - observed);
    }

    nlohmann::json persist() const;
    static Model restore(const nlohmann::json& doc);

    friend bool operator==(const Model&, const Model&) = default;

private:
    Params params_;
    fuzzy::LinguisticVariable severity_;
    fuzzy::LinguisticVariable age_;
    std::vector<TimeBin> bins_;
    QTable q_;
    std::int64_t epoch_ = 0;
};

inline double reward(double predicted, double observed) { return Model::reward(predicted, observed); }

inline nlohmann::json to_json(const Params& p) {
    return {{"alpha", p.alpha},
            {"eef", {{"slope", p.eef.slope}, {"floor", p.eef.floor}, {"cutoff", p.eef.cutoff}}},
            {"min_firing", p.min_firing}};
}

inline Params params_from_json(const nlohmann::json& j) {
    Params p;
    p.alpha = j.value("alpha", p.alpha);
    p.min_firing = j.value("min_firing", p.min_firing);
    if (j.contains("eef")) {
        const auto& e = j.at("eef");
        p.eef.slope = e.value("slope", p.eef.slope);
        p.eef.floor = e.value("floor", p.eef.floor);
        p.eef.cutoff = e.value("cutoff", p.eef.cutoff);
    }
    return p;
}

inline nlohmann::json Model::persist() const {
    auto bins = nlohmann::json::array();
    for (const auto& b : bins_) {
        bins.push_back({{"label", b.label}, {"minutes", b.minutes}, {"mf", fuzzy::to_json(b.mf)}});
    }
    auto p = to_json(params_);
    return {{"schema_version", kSchemaVersion},
            {"inputs", {fuzzy::to_json(severity_), fuzzy::to_json(age_)}},
            {"bins", bins},
            {"q", q_.values()},
            {"visits", q_.visit_counts()},
            {"epoch", epoch_},
            {"alpha", p["alpha"]},
            {"eef", p["eef"]},
            {"min_firing", p["min_firing"]}};
}

inline Model Model::restore(const nlohmann::json& doc) {
    return fuzzy::detail::parse_guard("fql model", [&] {
        if (!doc.is_object()) throw ParseError("fql model document must be an object");
        const int version = doc.at("schema_version").get<int>();
        if (version != kSchemaVersion) {
            throw ParseError("unsupported fql schema_version " + std::to_string(version) +
                             " (expected " + std::to_string(kSchemaVersion) + ")");
        }
        const auto& inputs = doc.at("inputs");
        if (!inputs.is_array() || inputs.size() != 2) throw ParseError("fql model needs 2 inputs");
        std::vector<TimeBin> bins;
        for (const auto& b : doc.at("bins")) {
            bins.push_back({b.at("label").get<std::string>(), b.at("minutes").get<double>(),
                            fuzzy::mf_from_json(b.at("mf"))});
        }
        Model m(params_from_json(doc), fuzzy::variable_from_json(inputs[0]),
                fuzzy::variable_from_json(inputs[1]), std::move(bins));
        auto q = doc.at("q").get<std::vector<double>>();
        auto visits = doc.at("visits").get<std::vector<std::uint64_t>>();
        const std::size_t cells = m.q_.rows() * m.q_.cols();
        if (q.size() != cells || visits.size() != cells) {
            throw ParseError("q-table size does not match model dimensions");
        }
        if (!std::all_of(q.begin(), q.end(), [](double v) { return std::isfinite(v); })) {
            throw ParseError("q-table holds non-finite values");
        }
        m.q_.values_ = std::move(q);
        m.q_.visits_ = std::move(visits);
        m.epoch_ = doc.at("epoch").get<std::int64_t>();
        if (m.epoch_ < 0) throw ParseError("epoch must be >= 0");
        return m;
    });
}

}  // namespace aec::fql

#pragma once

// Triage scoring: Cape Triage Score vital bands, regional pain, the fuzzy
// triage score and post-inference colour overrides.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "aec/error.hpp"
#include "aec/fuzzy.hpp"

namespace aec::triage {

enum class Vital { sbp, hr, temp, rr };

inline constexpr std::array<Vital, 4> kVitals{Vital::sbp, Vital::hr, Vital::temp, Vital::rr};

inline const char* to_string(Vital v) {
    switch (v) {
        case Vital::sbp: return "sbp";
        case Vital::hr: return "hr";
        case Vital::temp: return "temp";
        case Vital::rr: return "rr";
    }
    return "?";
}

/// Open plausibility interval accepted at intake.
struct Bounds {
    double lo;
    double hi;
};

constexpr Bounds plausibility(Vital v) {
    switch (v) {
        case Vital::sbp: return {20, 350};
        case Vital::hr: return {10, 300};
        case Vital::temp: return {25, 45};
        case Vital::rr: return {1, 80};
    }
    return {0, 0};
}

inline void validate_vital(Vital v, double value) {
    const auto b = plausibility(v);
    if (!std::isfinite(value) || !(value > b.lo && value < b.hi)) {
        throw ValidationError(to_string(v), std::string(to_string(v)) + " value " +
                                                std::to_string(value) + " outside plausible range (" +
                                                std::to_string(b.lo) + ", " +
                                                std::to_string(b.hi) + ")");
    }
}

struct VitalScore {
    int score = 0;
    bool out_of_table = false;  // beyond the most extreme listed band; clamped to 2

    friend bool operator==(const VitalScore&, const VitalScore&) = default;
};

/// Score band lookup. Bands are read with integer-inclusive upper edges
/// (SBP 80 -> "71-80", 80.5 -> "81-100"). HR 40 and T 38.4..38.5 fall in the
/// gaps of the abridged table and resolve to the more severe/adjacent band.
inline VitalScore score_vital(Vital v, double x) {
    validate_vital(v, x);
    switch (v) {
        case Vital::sbp:
            if (x < 71) return {2, true};
            if (x <= 80) return {2, false};
            if (x <= 100) return {1, false};
            if (x <= 199) return {0, false};
            return {2, false};
        case Vital::hr:
            if (x <= 40) return {2, false};
            if (x <= 50) return {1, false};
            if (x <= 100) return {0, false};
            if (x <= 110) return {1, false};
            if (x <= 129) return {2, false};
            return {2, true};
        case Vital::temp:
            if (x < 35) return {2, false};
            if (x < 38.5) return {0, false};
            return {2, false};
        case Vital::rr:
            if (x < 9) return {2, false};
            if (x <= 14) return {0, false};
            if (x <= 20) return {1, false};
            if (x <= 29) return {2, false};
            return {2, true};
    }
    return {};
}

struct VitalSet {
    double sbp = 0;
    double hr = 0;
    double temp = 0;
    double rr = 0;

    double get(Vital v) const {
        switch (v) {
            case Vital::sbp: return sbp;
            case Vital::hr: return hr;
            case Vital::temp: return temp;
            case Vital::rr: return rr;
        }
        return 0;
    }
    void validate() const {
        for (auto v : kVitals) validate_vital(v, get(v));
    }

    friend bool operator==(const VitalSet&, const VitalSet&) = default;
};

// ---------------------------------------------------------------------------
// Pain

enum class Region { head, chest, abdomen, pelvis, back, left_arm, right_arm, left_leg, right_leg };
enum class Severity { mild = 1, severe = 2 };

inline constexpr std::array<std::pair<Region, std::string_view>, 9> kRegionNames{{
    {Region::head, "head"},
    {Region::chest, "chest"},
    {Region::abdomen, "abdomen"},
    {Region::pelvis, "pelvis"},
    {Region::back, "back"},
    {Region::left_arm, "left-arm"},
    {Region::right_arm, "right-arm"},
    {Region::left_leg, "left-leg"},
    {Region::right_leg, "right-leg"},
}};

inline std::string_view to_string(Region r) {
    for (const auto& [region, name] : kRegionNames) {
        if (region == r) return name;
    }
    return "?";
}

inline Region region_from_string(std::string_view s) {
    for (const auto& [region, name] : kRegionNames) {
        if (name == s) return region;
    }
    throw ValidationError("pain", "unknown pain region '" + std::string(s) + "'");
}

constexpr bool is_limb(Region r) {
    return r == Region::left_arm || r == Region::right_arm || r == Region::left_leg ||
           r == Region::right_leg;
}

class PainMap {
public:
    void add(Region region, Severity severity) {
        if (entries_.count(region) != 0) {
            throw ValidationError("pain", "duplicate pain entry for region '" +
                                              std::string(to_string(region)) + "'");
        }
        entries_.emplace(region, severity);
    }
    const std::map<Region, Severity>& entries() const noexcept { return entries_; }
    bool empty() const noexcept { return entries_.empty(); }

    friend bool operator==(const PainMap&, const PainMap&) = default;

private:
    std::map<Region, Severity> entries_;
};

/// Per-region weights for the non-limb pain sum.
struct PainWeights {
    std::map<Region, double> weight{{Region::head, 2.0},
                                    {Region::chest, 2.0},
                                    {Region::abdomen, 2.0},
                                    {Region::pelvis, 1.0},
                                    {Region::back, 1.0}};

    double of(Region r) const {
        const auto it = weight.find(r);
        return it == weight.end() ? 0.0 : it->second;
    }
};

inline double pain_score(const PainMap& pain, const PainWeights& weights = {}) {
    double sum = 0.0;
    for (const auto& [region, severity] : pain.entries()) {
        if (is_limb(region)) continue;
        sum += weights.of(region) * static_cast<int>(severity);
    }
    return sum;
}

// ---------------------------------------------------------------------------
// Assessment and colours

enum class Avpu { alert = 0, voice = 1, pain = 2, unresponsive = 3 };

struct Assessment {
    VitalSet vitals;
    Avpu avpu = Avpu::alert;
    PainMap pain;
    std::set<std::string> flags;

    void validate() const { vitals.validate(); }

    friend bool operator==(const Assessment&, const Assessment&) = default;
};

enum class Colour { green = 0, yellow = 1, orange = 2, red = 3 };

inline const char* to_string(Colour c) {
    switch (c) {
        case Colour::green: return "green";
        case Colour::yellow: return "yellow";
        case Colour::orange: return "orange";
        case Colour::red: return "red";
    }
    return "?";
}

inline Colour colour_from_string(std::string_view s) {
    if (s == "green") return Colour::green;
    if (s == "yellow") return Colour::yellow;
    if (s == "orange") return Colour::orange;
    if (s == "red") return Colour::red;
    throw ValidationError("colour", "unknown colour '" + std::string(s) + "'");
}

/// Lower edges of the yellow/orange/red bands on the score axis. A score
/// within `tolerance` below an edge counts as reaching it, which absorbs the
/// centroid's sampling error around integer point sums.
struct ColourThresholds {
    double yellow = 3.0;
    double orange = 5.0;
    double red = 7.0;
    double tolerance = 0.01;

    Colour colour_for(double score) const {
        const double s = score + tolerance;
        if (s >= red) return Colour::red;
        if (s >= orange) return Colour::orange;
        if (s >= yellow) return Colour::yellow;
        return Colour::green;
    }
};

/// If `flag` is present, raise the colour to at least `min_colour`.
struct OverrideRule {
    std::string flag;
    Colour min_colour;
};

inline std::vector<OverrideRule> default_overrides() { return {{"pvb", Colour::yellow}}; }

struct Transition {
    std::string flag;
    Colour from;
    Colour to;

    friend bool operator==(const Transition&, const Transition&) = default;
};

struct OverrideOutcome {
    Colour colour;
    std::vector<Transition> transitions;
};

inline OverrideOutcome apply_overrides(Colour colour, const std::set<std::string>& flags,
                                       const std::vector<OverrideRule>& rules) {
    OverrideOutcome out{colour, {}};
    for (const auto& rule : rules) {
        if (flags.count(rule.flag) == 0) continue;
        if (rule.min_colour > out.colour) {
            out.transitions.push_back({rule.flag, out.colour, rule.min_colour});
            out.colour = rule.min_colour;
        }
    }
    return out;
}

struct TriageResult {
    double crisp_ts = 0.0;
    std::map<Vital, VitalScore> vital_scores;
    double pain_score = 0.0;
    Colour base_colour = Colour::green;
    Colour colour = Colour::green;
    std::vector<Transition> applied_overrides;

    /// Point sum of the discrete rubric (vitals + AVPU), for comparison.
    int cts_points(Avpu avpu) const {
        int sum = static_cast<int>(avpu);
        for (const auto& [v, s] : vital_scores) sum += s.score;
        return sum;
    }
};

// ---------------------------------------------------------------------------
// Default fuzzy rule base

namespace detail {

struct Band {
    const char* label;
    double lo;  // plateau edges
    double hi;
    int points;
    double width;  // listed band width; open-ended bands borrow their neighbour's
};

inline fuzzy::LinguisticVariable banded_variable(const std::string& name, double lo, double hi,
                                                 const std::vector<Band>& bands, double fraction) {
    std::vector<fuzzy::Label> labels;
    for (std::size_t i = 0; i < bands.size(); ++i) {
        const double left = i == 0 ? fraction * bands[i].width
                                   : fraction * std::min(bands[i].width, bands[i - 1].width);
        const double right = i + 1 == bands.size()
                                 ? fraction * bands[i].width
                                 : fraction * std::min(bands[i].width, bands[i + 1].width);
        labels.push_back({bands[i].label,
                          fuzzy::MembershipFunction::gaussian_plateau(bands[i].lo, bands[i].hi,
                                                                      left, right)});
    }
    return fuzzy::LinguisticVariable(name, lo, hi, std::move(labels));
}

inline const std::vector<Band>& sbp_bands() {
    static const std::vector<Band> b{{"s2_low", 20, 80, 2, 9},
                                     {"s1_low", 81, 100, 1, 19},
                                     {"s0", 101, 199, 0, 98},
                                     {"s2_high", 200, 350, 2, 98}};
    return b;
}
inline const std::vector<Band>& hr_bands() {
    static const std::vector<Band> b{{"s2_low", 10, 40, 2, 9},
                                     {"s1_low", 41, 50, 1, 9},
                                     {"s0", 51, 100, 0, 49},
                                     {"s1_high", 101, 110, 1, 9},
                                     {"s2_high", 111, 300, 2, 18}};
    return b;
}
inline const std::vector<Band>& temp_bands() {
    static const std::vector<Band> b{{"s2_low", 25, 34.9, 2, 3.4},
                                     {"s0", 35, 38.4, 0, 3.4},
                                     {"s2_high", 38.5, 45, 2, 3.4}};
    return b;
}
inline const std::vector<Band>& rr_bands() {
    static const std::vector<Band> b{{"s2_low", 1, 8, 2, 5},
                                     {"s0", 9, 14, 0, 5},
                                     {"s1", 15, 20, 1, 5},
                                     {"s2_high", 21, 80, 2, 8}};
    return b;
}
inline const std::vector<Band>& avpu_bands() {
    static const std::vector<Band> b{{"alert", 0, 0, 0, 1},
                                     {"voice", 1, 1, 1, 1},
                                     {"pain", 2, 2, 2, 1},
                                     {"unresponsive", 3, 3, 3, 1}};
    return b;
}
/// Pain-sum classes; these also define the agreement-report strata.
inline const std::vector<Band>& pain_bands() {
    static const std::vector<Band> b{{"none", 0, 0, 0, 1},
                                     {"low", 1, 2, 1, 1},
                                     {"medium", 3, 5, 2, 1},
                                     {"high", 6, 16, 3, 1}};
    return b;
}

}  // namespace detail

inline constexpr int kMaxPoints = 14;

/// Mamdani triage FIS whose full rule base maps every combination of vital
/// bands, AVPU level and pain class onto the output label of its point sum.
/// Plateaus follow the vital bands; spreads are 10% of the narrower of two
/// adjacent bands.
inline fuzzy::Fis default_triage_fis() {
    using detail::Band;
    constexpr double kSpread = 0.1;
    std::vector<fuzzy::LinguisticVariable> inputs{
        detail::banded_variable("sbp", 20, 350, detail::sbp_bands(), kSpread),
        detail::banded_variable("hr", 10, 300, detail::hr_bands(), kSpread),
        detail::banded_variable("temp", 25, 45, detail::temp_bands(), kSpread),
        detail::banded_variable("rr", 1, 80, detail::rr_bands(), kSpread),
        detail::banded_variable("avpu", 0, 3, detail::avpu_bands(), kSpread),
        detail::banded_variable("pain", 0, 16, detail::pain_bands(), kSpread),
    };
    std::vector<fuzzy::Label> out_labels;
    for (int k = 0; k <= kMaxPoints; ++k) {
        out_labels.push_back(
            {"ts" + std::to_string(k), fuzzy::MembershipFunction::triangle(k, 1.0, 1.0)});
    }
    fuzzy::LinguisticVariable output("ts", 0, kMaxPoints, std::move(out_labels));

    const std::array<const std::vector<Band>*, 6> tables{
        &detail::sbp_bands(),  &detail::hr_bands(),   &detail::temp_bands(),
        &detail::rr_bands(),   &detail::avpu_bands(), &detail::pain_bands()};
    const std::array<const char*, 6> names{"sbp", "hr", "temp", "rr", "avpu", "pain"};

    std::vector<fuzzy::Rule> rules;
    std::array<std::size_t, 6> idx{};
    while (true) {
        fuzzy::Rule rule;
        int points = 0;
        for (std::size_t v = 0; v < tables.size(); ++v) {
            const Band& b = (*tables[v])[idx[v]];
            rule.antecedent.emplace_back(names[v], b.label);
            points += b.points;
        }
        rule.consequent = "ts" + std::to_string(points);
        rules.push_back(std::move(rule));
        std::size_t v = 0;
        while (v < tables.size() && ++idx[v] == tables[v]->size()) idx[v++] = 0;
        if (v == tables.size()) break;
    }
    return fuzzy::Fis(std::move(inputs), std::move(output), std::move(rules));
}

struct TriageConfig {
    ColourThresholds thresholds;
    PainWeights pain_weights;
    std::vector<OverrideRule> overrides = default_overrides();
};

inline fuzzy::InputMap fis_inputs(const Assessment& a, const PainWeights& weights) {
    return {{"sbp", a.vitals.sbp},
            {"hr", a.vitals.hr},
            {"temp", a.vitals.temp},
            {"rr", a.vitals.rr},
            {"avpu", static_cast<double>(a.avpu)},
            {"pain", pain_score(a.pain, weights)}};
}

inline TriageResult triage(const Assessment& a, const fuzzy::Fis& fis,
                           const TriageConfig& config = {}) {
    a.validate();
    TriageResult r;
    for (auto v : kVitals) r.vital_scores[v] = score_vital(v, a.vitals.get(v));
    r.pain_score = pain_score(a.pain, config.pain_weights);
    r.crisp_ts = fis.infer(fis_inputs(a, config.pain_weights));
    r.base_colour = config.thresholds.colour_for(r.crisp_ts);
    auto outcome = apply_overrides(r.base_colour, a.flags, config.overrides);
    r.colour = outcome.colour;
    r.applied_overrides = std::move(outcome.transitions);
    return r;
}

/// Bundles a FIS with its configuration; the FIS is built once.
class Engine {
public:
    explicit Engine(TriageConfig config = {}, std::optional<fuzzy::Fis> fis = std::nullopt)
        : config_(std::move(config)), fis_(fis ? std::move(*fis) : default_triage_fis()) {}

    TriageResult operator()(const Assessment& a) const { return triage(a, fis_, config_); }

    const fuzzy::Fis& fis() const noexcept { return fis_; }
    const TriageConfig& config() const noexcept { return config_; }

private:
    TriageConfig config_;
    fuzzy::Fis fis_;
};

// ---------------------------------------------------------------------------
// JSON

inline Assessment assessment_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("assessment", "assessment must be a JSON object");
    Assessment a;
    auto number = [&](const char* field) {
        if (!j.contains(field)) throw ValidationError(field, std::string("missing field '") + field + "'");
        const auto& v = j.at(field);
        if (!v.is_number()) throw ValidationError(field, std::string("field '") + field + "' must be a number");
        return v.get<double>();
    };
    a.vitals = {number("sbp"), number("hr"), number("temp"), number("rr")};
    const double avpu = j.contains("avpu") ? number("avpu") : 0.0;
    if (avpu != 0 && avpu != 1 && avpu != 2 && avpu != 3) {
        throw ValidationError("avpu", "avpu must be 0 (alert), 1 (voice), 2 (pain) or 3 (unresponsive)");
    }
    a.avpu = static_cast<Avpu>(static_cast<int>(avpu));
    if (j.contains("pain")) {
        const auto& pain = j.at("pain");
        if (!pain.is_array()) throw ValidationError("pain", "pain must be an array");
        for (const auto& e : pain) {
            if (!e.is_object() || !e.contains("region") || !e.contains("severity") ||
                !e.at("region").is_string()) {
                throw ValidationError("pain", "pain entries need 'region' and 'severity'");
            }
            const auto& sev = e.at("severity");
            Severity s;
            if (sev == "mild" || sev == 1) {
                s = Severity::mild;
            } else if (sev == "severe" || sev == 2) {
                s = Severity::severe;
            } else {
                throw ValidationError("pain", "severity must be 'mild' or 'severe'");
            }
            a.pain.add(region_from_string(e.at("region").get<std::string>()), s);
        }
    }
    if (j.contains("flags")) {
        const auto& flags = j.at("flags");
        if (!flags.is_array()) throw ValidationError("flags", "flags must be an array of strings");
        for (const auto& f : flags) {
            if (!f.is_string()) throw ValidationError("flags", "flags must be strings");
            a.flags.insert(f.get<std::string>());
        }
    }
    a.validate();
    return a;
}

inline nlohmann::json to_json(const Assessment& a) {
    auto pain = nlohmann::json::array();
    for (const auto& [region, sev] : a.pain.entries()) {
        pain.push_back({{"region", to_string(region)},
                        {"severity", sev == Severity::mild ? "mild" : "severe"}});
    }
    return {{"sbp", a.vitals.sbp},
            {"hr", a.vitals.hr},
            {"temp", a.vitals.temp},
            {"rr", a.vitals.rr},
            {"avpu", static_cast<int>(a.avpu)},
            {"pain", pain},
            {"flags", a.flags}};
}

inline nlohmann::json to_json(const TriageResult& r) {
    nlohmann::json scores = nlohmann::json::object();
    nlohmann::json out_of_table = nlohmann::json::array();
    for (const auto& [v, s] : r.vital_scores) {
        scores[to_string(v)] = s.score;
        if (s.out_of_table) out_of_table.push_back(to_string(v));
    }
    auto transitions = nlohmann::json::array();
    for (const auto& t : r.applied_overrides) {
        transitions.push_back({{"flag", t.flag}, {"from", to_string(t.from)}, {"to", to_string(t.to)}});
    }
    return {{"crisp_ts", r.crisp_ts},
            {"vital_scores", scores},
            {"out_of_table", out_of_table},
            {"pain_score", r.pain_score},
            {"base_colour", to_string(r.base_colour)},
            {"colour", to_string(r.colour)},
            {"applied_overrides", transitions}};
}

inline TriageResult triage_result_from_json(const nlohmann::json& j) {
    return fuzzy::detail::parse_guard("triage result", [&] {
        TriageResult r;
        r.crisp_ts = j.at("crisp_ts").get<double>();
        const auto oot = j.value("out_of_table", std::vector<std::string>{});
        for (auto v : kVitals) {
            const std::string name = to_string(v);
            r.vital_scores[v] = {j.at("vital_scores").at(name).get<int>(),
                                 std::find(oot.begin(), oot.end(), name) != oot.end()};
        }
        r.pain_score = j.at("pain_score").get<double>();
        r.base_colour = colour_from_string(j.at("base_colour").get<std::string>());
        r.colour = colour_from_string(j.at("colour").get<std::string>());
        for (const auto& t : j.at("applied_overrides")) {
            r.applied_overrides.push_back({t.at("flag").get<std::string>(),
                                           colour_from_string(t.at("from").get<std::string>()),
                                           colour_from_string(t.at("to").get<std::string>())});
        }
        return r;
    });
}

inline TriageConfig triage_config_from_json(const nlohmann::json& j) {
    TriageConfig c;
    return fuzzy::detail::parse_guard("triage config", [&] {
        if (j.contains("thresholds")) {
            const auto& t = j.at("thresholds");
            c.thresholds = {t.value("yellow", 3.0), t.value("orange", 5.0), t.value("red", 7.0),
                            t.value("tolerance", 0.01)};
            if (!(c.thresholds.yellow <= c.thresholds.orange && c.thresholds.orange <= c.thresholds.red)) {
                throw ValidationError("thresholds", "colour thresholds must be non-decreasing");
            }
        }
        if (j.contains("pain_weights")) {
            c.pain_weights.weight.clear();
            for (const auto& [region, w] : j.at("pain_weights").items()) {
                c.pain_weights.weight[region_from_string(region)] = w.get<double>();
            }
        }
        if (j.contains("overrides")) {
            c.overrides.clear();
            for (const auto& o : j.at("overrides")) {
                c.overrides.push_back({o.at("flag").get<std::string>(),
                                       colour_from_string(o.at("min_colour").get<std::string>())});
            }
        }
        return c;
    });
}

inline nlohmann::json to_json(const TriageConfig& c) {
    nlohmann::json weights = nlohmann::json::object();
    for (const auto& [region, w] : c.pain_weights.weight) weights[std::string(to_string(region))] = w;
    auto overrides = nlohmann::json::array();
    for (const auto& o : c.overrides) {
        overrides.push_back({{"flag", o.flag}, {"min_colour", to_string(o.min_colour)}});
    }
    return {{"thresholds",
             {{"yellow", c.thresholds.yellow},
              {"orange", c.thresholds.orange},
              {"red", c.thresholds.red},
              {"tolerance", c.thresholds.tolerance}}},
            {"pain_weights", weights},
            {"overrides", overrides}};
}

}  // namespace aec::triage

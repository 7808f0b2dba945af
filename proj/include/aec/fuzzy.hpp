#pragma once

// Mamdani fuzzy inference: membership functions, linguistic variables,
// rule firing, max aggregation of clipped consequents and defuzzification.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "aec/error.hpp"
#include "aec/json_enum.hpp"

namespace aec::fuzzy {

enum class MfKind { gaussian_plateau, trapezoid, triangle };

/// A membership curve that is exactly 1 on [center_low, center_high] and
/// decays on either side. For Gaussian-plateau curves the spreads are
/// standard deviations; for trapezoids and triangles they are the distances
/// from the plateau edge to the zero foot.
class MembershipFunction {
public:
    static MembershipFunction gaussian_plateau(double center_low, double center_high,
                                               double spread_left, double spread_right) {
        return {MfKind::gaussian_plateau, center_low, center_high, spread_left, spread_right};
    }
    static MembershipFunction gaussian(double center, double spread) {
        return {MfKind::gaussian_plateau, center, center, spread, spread};
    }
    static MembershipFunction trapezoid(double foot_left, double center_low, double center_high,
                                        double foot_right) {
        return {MfKind::trapezoid, center_low, center_high, center_low - foot_left,
                foot_right - center_high};
    }
    static MembershipFunction triangle(double center, double half_left, double half_right) {
        return {MfKind::triangle, center, center, half_left, half_right};
    }

    MembershipFunction(MfKind kind, double center_low, double center_high, double spread_left,
                       double spread_right)
        : kind_(kind),
          center_low_(center_low),
          center_high_(center_high),
          spread_left_(spread_left),
          spread_right_(spread_right) {
        if (!std::isfinite(center_low) || !std::isfinite(center_high) ||
            !std::isfinite(spread_left) || !std::isfinite(spread_right)) {
            throw ValidationError("mf", "membership function parameters must be finite");
        }
        if (!(spread_left > 0.0) || !(spread_right > 0.0)) {
            throw ValidationError("mf", "membership function spreads must be > 0");
        }
        if (center_low > center_high) {
            throw ValidationError("mf", "membership function requires center_low <= center_high");
        }
        if (kind == MfKind::triangle && center_low != center_high) {
            throw ValidationError("mf", "triangle requires center_low == center_high");
        }
    }

    double operator()(double x) const noexcept {
        if (x >= center_low_ && x <= center_high_) return 1.0;
        const bool left = x < center_low_;
        const double distance = left ? center_low_ - x : x - center_high_;
        const double spread = left ? spread_left_ : spread_right_;
        if (kind_ == MfKind::gaussian_plateau) {
            const double z = distance / spread;
            return std::exp(-0.5 * z * z);
        }
        return std::max(0.0, 1.0 - distance / spread);
    }

    MfKind kind() const noexcept { return kind_; }
    double center_low() const noexcept { return center_low_; }
    double center_high() const noexcept { return center_high_; }
    double spread_left() const noexcept { return spread_left_; }
    double spread_right() const noexcept { return spread_right_; }
    /// Midpoint of the plateau; the representative value of the label.
    double center() const noexcept { return 0.5 * (center_low_ + center_high_); }

    friend bool operator==(const MembershipFunction&, const MembershipFunction&) = default;

private:
    MfKind kind_;
    double center_low_;
    double center_high_;
    double spread_left_;
    double spread_right_;
};

inline double mf_eval(const MembershipFunction& mf, double x) noexcept { return mf(x); }

struct Label {
    std::string name;
    MembershipFunction mf;

    friend bool operator==(const Label&, const Label&) = default;
};

/// Samples used when checking that a universe is fully covered.
inline constexpr std::size_t kCoverageSamples = 201;

class LinguisticVariable {
public:
    LinguisticVariable(std::string name, double lo, double hi, std::vector<Label> labels)
        : name_(std::move(name)), lo_(lo), hi_(hi), labels_(std::move(labels)) {
        if (name_.empty()) throw ValidationError("name", "linguistic variable needs a name");
        if (!(lo_ < hi_)) {
            throw ValidationError(name_, "universe of '" + name_ + "' must satisfy lo < hi");
        }
        if (labels_.empty()) {
            throw ValidationError(name_, "variable '" + name_ + "' needs at least one label");
        }
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            for (std::size_t j = i + 1; j < labels_.size(); ++j) {
                if (labels_[i].name == labels_[j].name) {
                    throw ValidationError(name_, "duplicate label '" + labels_[i].name +
                                                     "' in variable '" + name_ + "'");
                }
            }
        }
        for (std::size_t s = 0; s < kCoverageSamples; ++s) {
            const double x = lo_ + (hi_ - lo_) * static_cast<double>(s) /
                                       static_cast<double>(kCoverageSamples - 1);
            const bool covered = std::any_of(labels_.begin(), labels_.end(),
                                             [x](const Label& l) { return l.mf(x) > 0.0; });
            if (!covered) {
                throw ValidationError(name_, "variable '" + name_ + "' leaves x=" +
                                                 std::to_string(x) + " uncovered");
            }
        }
    }

    const std::string& name() const noexcept { return name_; }
    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }
    const std::vector<Label>& labels() const noexcept { return labels_; }
    std::size_t size() const noexcept { return labels_.size(); }

    std::optional<std::size_t> find(const std::string& label) const {
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (labels_[i].name == label) return i;
        }
        return std::nullopt;
    }

    double clamp(double x) const noexcept { return std::clamp(x, lo_, hi_); }

    friend bool operator==(const LinguisticVariable&, const LinguisticVariable&) = default;

private:
    std::string name_;
    double lo_;
    double hi_;
    std::vector<Label> labels_;
};

/// Degree of membership of `x` in every label of `var`, in label order.
inline std::vector<std::pair<std::string, double>> fuzzify(const LinguisticVariable& var,
                                                           double x) {
    std::vector<std::pair<std::string, double>> out;
    out.reserve(var.size());
    for (const auto& l : var.labels()) out.emplace_back(l.name, l.mf(x));
    return out;
}

struct Rule {
    std::vector<std::pair<std::string, std::string>> antecedent;  // conjunctive
    std::string consequent;                                       // output label
    double weight = 1.0;

    friend bool operator==(const Rule&, const Rule&) = default;
};

enum class TNorm { min, product };
enum class Defuzz { centroid, mean_of_maxima };
/// How a rule's strength shapes its consequent: clip (min) or scale (product).
enum class Implication { clip, scale };

/// Raised by `infer` when no rule fires; indicates a coverage gap.
class NoRuleFiredError : public Error {
public:
    using Error::Error;
};

class MissingInputError : public ValidationError {
public:
    explicit MissingInputError(const std::string& variable)
        : ValidationError(variable, "missing input for variable '" + variable + "'") {}
};

using InputMap = std::map<std::string, double>;

class Fis {
public:
    static constexpr std::size_t kDefaultResolution = 1001;

    Fis(std::vector<LinguisticVariable> inputs, LinguisticVariable output, std::vector<Rule> rules,
        TNorm tnorm = TNorm::min, Defuzz defuzz = Defuzz::centroid,
        std::size_t resolution = kDefaultResolution, Implication implication = Implication::clip)
        : inputs_(std::move(inputs)),
          output_(std::move(output)),
          rules_(std::move(rules)),
          tnorm_(tnorm),
          defuzz_(defuzz),
          resolution_(resolution),
          implication_(implication) {
        if (inputs_.empty()) throw ValidationError("inputs", "FIS needs at least one input");
        if (rules_.empty()) throw ValidationError("rules", "FIS needs at least one rule");
        if (resolution_ < 2) throw ValidationError("resolution", "resolution must be >= 2");
        for (std::size_t i = 0; i < inputs_.size(); ++i) {
            for (std::size_t j = i + 1; j < inputs_.size(); ++j) {
                if (inputs_[i].name() == inputs_[j].name()) {
                    throw ValidationError(inputs_[i].name(), "duplicate input variable");
                }
            }
        }
        compiled_.reserve(rules_.size());
        for (std::size_t r = 0; r < rules_.size(); ++r) compiled_.push_back(compile(r));
    }

    const std::vector<LinguisticVariable>& inputs() const noexcept { return inputs_; }
    const LinguisticVariable& output() const noexcept { return output_; }
    const std::vector<Rule>& rules() const noexcept { return rules_; }
    TNorm tnorm() const noexcept { return tnorm_; }
    Defuzz defuzz() const noexcept { return defuzz_; }
    std::size_t resolution() const noexcept { return resolution_; }
    Implication implication() const noexcept { return implication_; }

    /// Firing strength of every rule, in rule order.
    std::vector<std::pair<std::size_t, double>> rule_strengths(const InputMap& in) const {
        const auto degrees = fuzzify_all(in);
        std::vector<std::pair<std::size_t, double>> out;
        out.reserve(compiled_.size());
        for (std::size_t r = 0; r < compiled_.size(); ++r) {
            out.emplace_back(r, strength(compiled_[r], degrees));
        }
        return out;
    }

    /// Crisp output for `in`. Throws NoRuleFiredError when every strength is 0.
    double infer(const InputMap& in) const {
        const auto degrees = fuzzify_all(in);
        std::vector<double> activation(output_.size(), 0.0);
        for (const auto& rule : compiled_) {
            const double s = strength(rule, degrees);
            activation[rule.consequent] = std::max(activation[rule.consequent], s);
        }
        return defuzzify(activation);
    }

    /// Defuzzifies the max-aggregate of consequents clipped at `activation`
    /// (one entry per output label).
    double defuzzify(const std::vector<double>& activation) const {
        if (std::all_of(activation.begin(), activation.end(), [](double a) { return a <= 0.0; })) {
            throw NoRuleFiredError("no rule fired; membership coverage gap");
        }
        const auto& labels = output_.labels();
        const double lo = output_.lo();
        const double step = (output_.hi() - lo) / static_cast<double>(resolution_ - 1);
        double num = 0.0;
        double den = 0.0;
        double peak = 0.0;
        double peak_sum = 0.0;
        std::size_t peak_count = 0;
        for (std::size_t s = 0; s < resolution_; ++s) {
            const double y = lo + step * static_cast<double>(s);
            double mu = 0.0;
            for (std::size_t l = 0; l < labels.size(); ++l) {
                if (activation[l] <= 0.0) continue;
                const double m = labels[l].mf(y);
                mu = std::max(mu, implication_ == Implication::clip ? std::min(activation[l], m)
                                                                    : activation[l] * m);
            }
            num += y * mu;
            den += mu;
            if (mu > peak + 1e-12) {
                peak = mu;
                peak_sum = y;
                peak_count = 1;
            } else if (mu > 0.0 && std::abs(mu - peak) <= 1e-12) {
                peak_sum += y;
                ++peak_count;
            }
        }
        if (den <= 0.0) throw NoRuleFiredError("aggregated output set is empty");
        if (defuzz_ == Defuzz::mean_of_maxima) return peak_sum / static_cast<double>(peak_count);
        return num / den;
    }

private:
    struct CompiledRule {
        std::vector<std::pair<std::size_t, std::size_t>> terms;  // (input index, label index)
        std::size_t consequent;
        double weight;
    };

    CompiledRule compile(std::size_t r) const {
        const Rule& rule = rules_[r];
        const std::string where = "rule " + std::to_string(r);
        if (!(rule.weight >= 0.0 && rule.weight <= 1.0)) {
            throw ValidationError("rules", where + ": weight must be in [0, 1]");
        }
        if (rule.antecedent.empty()) throw ValidationError("rules", where + ": empty antecedent");
        CompiledRule c{{}, 0, rule.weight};
        for (const auto& [var, label] : rule.antecedent) {
            const auto it = std::find_if(inputs_.begin(), inputs_.end(),
                                         [&](const LinguisticVariable& v) { return v.name() == var; });
            if (it == inputs_.end()) {
                throw ValidationError("rules", where + ": unknown variable '" + var + "'");
            }
            const auto idx = it->find(label);
            if (!idx) {
                throw ValidationError("rules", where + ": unknown label '" + label + "' for '" +
                                                   var + "'");
            }
            c.terms.emplace_back(static_cast<std::size_t>(it - inputs_.begin()), *idx);
        }
        const auto out = output_.find(rule.consequent);
        if (!out) {
            throw ValidationError("rules", where + ": unknown output label '" + rule.consequent + "'");
        }
        c.consequent = *out;
        return c;
    }

    std::vector<std::vector<double>> fuzzify_all(const InputMap& in) const {
        std::vector<std::vector<double>> degrees;
        degrees.reserve(inputs_.size());
        for (const auto& var : inputs_) {
            const auto it = in.find(var.name());
            if (it == in.end()) throw MissingInputError(var.name());
            std::vector<double> d;
            d.reserve(var.size());
            for (const auto& l : var.labels()) d.push_back(l.mf(it->second));
            degrees.push_back(std::move(d));
        }
        return degrees;
    }

    double strength(const CompiledRule& rule,
                     const std::vector<std::vector<double>>& degrees) const noexcept {
        double s = 1.0;
        for (const auto& [var, label] : rule.terms) {
            const double d = degrees[var][label];
            s = tnorm_ == TNorm::min ? std::min(s, d) : s * d;
            if (s == 0.0) break;
        }
        return rule.weight * s;
    }

    std::vector<LinguisticVariable> inputs_;
    LinguisticVariable output_;
    std::vector<Rule> rules_;
    TNorm tnorm_;
    Defuzz defuzz_;
    std::size_t resolution_;
    Implication implication_;
    std::vector<CompiledRule> compiled_;
};

// ---------------------------------------------------------------------------
// JSON

NLOHMANN_JSON_SERIALIZE_ENUM(MfKind, {{MfKind::gaussian_plateau, "gaussian-plateau"},
                                      {MfKind::trapezoid, "trapezoid"},
                                      {MfKind::triangle, "triangle"}})
NLOHMANN_JSON_SERIALIZE_ENUM(TNorm, {{TNorm::min, "min"}, {TNorm::product, "product"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Defuzz, {{Defuzz::centroid, "centroid"},
                                      {Defuzz::mean_of_maxima, "mean-of-maxima"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Implication, {{Implication::clip, "clip"}, {Implication::scale, "scale"}})

inline nlohmann::json to_json(const MembershipFunction& mf) {
    return {{"kind", mf.kind()},
            {"center_low", mf.center_low()},
            {"center_high", mf.center_high()},
            {"spread_left", mf.spread_left()},
            {"spread_right", mf.spread_right()}};
}

inline nlohmann::json to_json(const LinguisticVariable& var) {
    auto labels = nlohmann::json::array();
    for (const auto& l : var.labels()) labels.push_back({{"name", l.name}, {"mf", to_json(l.mf)}});
    return {{"name", var.name()}, {"universe", {var.lo(), var.hi()}}, {"labels", labels}};
}

inline nlohmann::json to_json(const Fis& fis) {
    auto inputs = nlohmann::json::array();
    for (const auto& v : fis.inputs()) inputs.push_back(to_json(v));
    auto rules = nlohmann::json::array();
    for (const auto& r : fis.rules()) {
        rules.push_back({{"if", r.antecedent}, {"then", r.consequent}, {"weight", r.weight}});
    }
    return {{"inputs", inputs},       {"output", to_json(fis.output())}, {"rules", rules},
            {"tnorm", fis.tnorm()},   {"defuzz", fis.defuzz()},
            {"resolution", fis.resolution()}, {"implication", fis.implication()}};
}

namespace detail {

template <class F>
auto parse_guard(const char* what, F&& f) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid ") + what + ": " + e.what());
    }
}

}  // namespace detail

inline MembershipFunction mf_from_json(const nlohmann::json& j) {
    return detail::parse_guard("membership function", [&] {
        if (!j.contains("kind")) throw ParseError("membership function needs a kind");
        const auto kind = enum_value(j, "kind", MfKind::triangle);
        return MembershipFunction(kind, j.at("center_low").get<double>(),
                                  j.at("center_high").get<double>(),
                                  j.at("spread_left").get<double>(),
                                  j.at("spread_right").get<double>());
    });
}

inline LinguisticVariable variable_from_json(const nlohmann::json& j) {
    return detail::parse_guard("linguistic variable", [&] {
        std::vector<Label> labels;
        for (const auto& l : j.at("labels")) {
            labels.push_back({l.at("name").get<std::string>(), mf_from_json(l.at("mf"))});
        }
        const auto& u = j.at("universe");
        if (!u.is_array() || u.size() != 2) throw ParseError("universe must be [lo, hi]");
        return LinguisticVariable(j.at("name").get<std::string>(), u[0].get<double>(),
                                  u[1].get<double>(), std::move(labels));
    });
}

inline Fis fis_from_json(const nlohmann::json& j) {
    return detail::parse_guard("fis", [&] {
        std::vector<LinguisticVariable> inputs;
        for (const auto& v : j.at("inputs")) inputs.push_back(variable_from_json(v));
        std::vector<Rule> rules;
        for (const auto& r : j.at("rules")) {
            rules.push_back({r.at("if").get<std::vector<std::pair<std::string, std::string>>>(),
                             r.at("then").get<std::string>(), r.value("weight", 1.0)});
        }
        return Fis(std::move(inputs), variable_from_json(j.at("output")), std::move(rules),
                   enum_value(j, "tnorm", TNorm::min), enum_value(j, "defuzz", Defuzz::centroid),
                   j.value("resolution", Fis::kDefaultResolution),
                   enum_value(j, "implication", Implication::clip));
    });
}

}  // namespace aec::fuzzy

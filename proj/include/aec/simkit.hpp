#pragma once

// Desk-scale experiments: triage agreement against the discrete point-sum
// rubric, teacher-FIS learning curves for the consult-time predictor, and
// FIFO-versus-GA replays of an arrival trace.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aec/error.hpp"
#include "aec/fql.hpp"
#include "aec/fuzzy.hpp"
#include "aec/scheduler.hpp"
#include "aec/triage.hpp"

namespace aec::sim {

// ---------------------------------------------------------------------------
// Teacher experiment

/// Random FIS over the predictor's inputs with one random time bin per rule.
/// Defuzzified by mean of maxima, so the output is the dominant rule's bin;
/// a centroid would let a weakly firing rule with a far bin drag the output
/// by several minutes.
inline fuzzy::Fis generate_teacher(std::uint64_t seed, const fql::Model& shape = fql::Model{}) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, shape.bins().size() - 1);
    std::vector<fuzzy::Rule> rules;
    for (const auto& s : shape.severity().labels()) {
        for (const auto& a : shape.age().labels()) {
            rules.push_back({{{shape.severity().name(), s.name}, {shape.age().name(), a.name}},
                             shape.bins()[pick(rng)].label,
                             1.0});
        }
    }
    return fuzzy::Fis({shape.severity(), shape.age()}, fql::bins_variable(shape.bins()),
                      std::move(rules), fuzzy::TNorm::min, fuzzy::Defuzz::mean_of_maxima);
}

struct CurvePoint {
    std::int64_t epoch;
    double predicted;
    double observed;
    double abs_error;
};

struct LearningCurve {
    static constexpr std::size_t kWindow = 100;

    std::vector<CurvePoint> points;

    /// Mean absolute error over the `kWindow` epochs ending at `i`; empty
    /// until a full window is available.
    std::optional<double> sliding_average(std::size_t i) const {
        if (i >= points.size() || i + 1 < kWindow) return std::nullopt;
        double sum = 0.0;
        for (std::size_t k = i + 1 - kWindow; k <= i; ++k) sum += points[k].abs_error;
        return sum / static_cast<double>(kWindow);
    }

    /// Sliding average over the final window.
    std::optional<double> final_average() const {
        if (points.empty()) return std::nullopt;
        return sliding_average(points.size() - 1);
    }
};

struct TeacherRun {
    fuzzy::Fis teacher;
    fql::Model model;
    LearningCurve curve;
};

inline TeacherRun run_teacher_experiment(std::uint64_t seed, std::size_t epochs, double noise_sigma,
                                         const fql::Params& params = {}) {
    if (epochs < 300) throw ValidationError("epochs", "teacher experiment needs at least 300 epochs");
    if (!(noise_sigma >= 0.0)) throw ValidationError("noise_sigma", "noise sigma must be >= 0");
    fql::Model model(params);
    TeacherRun run{generate_teacher(seed, model), model, {}};
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> sev(model.severity().lo(), model.severity().hi());
    std::uniform_real_distribution<double> age(model.age().lo(), model.age().hi());
    std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
    run.curve.points.reserve(epochs);
    for (std::size_t e = 0; e < epochs; ++e) {
        const double s = sev(rng);
        const double a = age(rng);
        const auto rec = run.model.predict(s, a, rng, fql::Mode::learn);
        double observed = run.teacher.infer({{"severity", s}, {"age", a}});
        if (noise_sigma > 0.0) observed = std::max(0.0, observed + noise(rng));
        run.curve.points.push_back({rec.epoch, rec.predicted_minutes, observed,
                                    std::abs(rec.predicted_minutes - observed)});
        run.model.update(rec, observed);
    }
    return run;
}

/// Rows visited at least `min_visits` times whose greedy bin differs from
/// the bin nearest the teacher rule's consequent centre.
inline std::vector<std::size_t> misaligned_rows(const TeacherRun& run, std::uint64_t min_visits = 50) {
    const auto& m = run.model;
    std::vector<std::size_t> bad;
    for (std::size_t r = 0; r < run.teacher.rules().size(); ++r) {
        if (m.qtable().row_visits(r) < min_visits) continue;
        const auto& label = run.teacher.rules()[r].consequent;
        const auto idx = run.teacher.output().find(label);
        const double target = run.teacher.output().labels()[*idx].mf.center();
        std::size_t nearest = 0;
        for (std::size_t c = 1; c < m.bins().size(); ++c) {
            if (std::abs(m.bins()[c].minutes - target) < std::abs(m.bins()[nearest].minutes - target)) {
                nearest = c;
            }
        }
        if (m.qtable().argmax(r) != nearest) bad.push_back(r);
    }
    return bad;
}

inline std::string curve_csv(const LearningCurve& c) {
    std::ostringstream os;
    os << "epoch,predicted,observed,abs_error,sliding_avg\n";
    for (std::size_t i = 0; i < c.points.size(); ++i) {
        const auto& p = c.points[i];
        os << p.epoch << ',' << p.predicted << ',' << p.observed << ',' << p.abs_error << ',';
        if (auto s = c.sliding_average(i)) os << *s;
        os << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Triage agreement

enum class PainLevel { none, low, medium, high };

inline const char* to_string(PainLevel p) {
    switch (p) {
        case PainLevel::none: return "none";
        case PainLevel::low: return "low";
        case PainLevel::medium: return "medium";
        case PainLevel::high: return "high";
    }
    return "?";
}

inline PainLevel pain_level(double pain_score) {
    if (pain_score <= 0.0) return PainLevel::none;
    if (pain_score <= 2.0) return PainLevel::low;
    if (pain_score <= 5.0) return PainLevel::medium;
    return PainLevel::high;
}

/// Representative values per vital: one or more per score band plus the
/// clamped out-of-table extremes, and sample pain maps per stratum.
struct GridSpec {
    std::vector<double> sbp{60, 75, 90, 150, 250};
    std::vector<double> hr{30, 45, 75, 105, 120, 150};
    std::vector<double> temp{32, 37, 40};
    std::vector<double> rr{5, 11, 17, 25, 40};
    std::vector<triage::Avpu> avpu{triage::Avpu::alert};
    std::vector<triage::PainMap> pain = default_pain_maps();

    static std::vector<triage::PainMap> default_pain_maps() {
        using triage::Region;
        using triage::Severity;
        auto make = [](std::initializer_list<std::pair<Region, Severity>> entries) {
            triage::PainMap m;
            for (const auto& [r, s] : entries) m.add(r, s);
            return m;
        };
        return {
            make({}),
            make({{Region::pelvis, Severity::mild}}),
            make({{Region::back, Severity::severe}}),
            make({{Region::chest, Severity::mild}, {Region::pelvis, Severity::mild}}),
            make({{Region::head, Severity::severe}}),
            make({{Region::chest, Severity::severe}, {Region::pelvis, Severity::mild}}),
            make({{Region::chest, Severity::severe}, {Region::back, Severity::severe}}),
            make({{Region::chest, Severity::severe}, {Region::abdomen, Severity::severe}}),
            make({{Region::head, Severity::severe},
                  {Region::chest, Severity::severe},
                  {Region::abdomen, Severity::severe},
                  {Region::pelvis, Severity::severe},
                  {Region::back, Severity::severe}}),
        };
    }
};

struct AgreementCounts {
    std::size_t under = 0;
    std::size_t correct = 0;
    std::size_t over = 0;

    std::size_t total() const noexcept { return under + correct + over; }
    double pct(std::size_t k) const {
        return total() == 0 ? 0.0 : 100.0 * static_cast<double>(k) / static_cast<double>(total());
    }
    double under_pct() const { return pct(under); }
    double correct_pct() const { return pct(correct); }
    double over_pct() const { return pct(over); }
};

struct AgreementReport {
    std::map<PainLevel, AgreementCounts> strata;
};

/// Colour of the discrete rubric: vital-sign points plus AVPU points.
inline triage::Colour oracle_colour(const triage::Assessment& a, const triage::ColourThresholds& t) {
    int points = static_cast<int>(a.avpu);
    for (auto v : triage::kVitals) points += triage::score_vital(v, a.vitals.get(v)).score;
    return t.colour_for(points);
}

inline AgreementReport triage_agreement(const triage::Engine& engine, const GridSpec& grid = {}) {
    AgreementReport report;
    for (auto level : {PainLevel::none, PainLevel::low, PainLevel::medium, PainLevel::high}) {
        report.strata[level];
    }
    for (double sbp : grid.sbp)
        for (double hr : grid.hr)
            for (double temp : grid.temp)
                for (double rr : grid.rr)
                    for (auto avpu : grid.avpu)
                        for (const auto& pain : grid.pain) {
                            triage::Assessment a{{sbp, hr, temp, rr}, avpu, pain, {}};
                            const auto expected = oracle_colour(a, engine.config().thresholds);
                            const auto got = engine(a).colour;
                            auto& c = report.strata[pain_level(
                                triage::pain_score(pain, engine.config().pain_weights))];
                            if (got < expected) {
                                ++c.under;
                            } else if (got > expected) {
                                ++c.over;
                            } else {
                                ++c.correct;
                            }
                        }
    return report;
}

inline nlohmann::json to_json(const AgreementReport& r) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [level, c] : r.strata) {
        out[to_string(level)] = {{"under", c.under},
                                 {"correct", c.correct},
                                 {"over", c.over},
                                 {"total", c.total()},
                                 {"under_pct", c.under_pct()},
                                 {"correct_pct", c.correct_pct()},
                                 {"over_pct", c.over_pct()}};
    }
    return out;
}

// ---------------------------------------------------------------------------
// Arrival traces and schedule replay

struct TraceRow {
    std::string patient_id;
    double arrival_min;
    double ts;
    double consult_min;
};

struct ArrivalTrace {
    enum class Source { generated, file };

    std::vector<TraceRow> rows;
    Source source = Source::generated;

    void validate() const {
        if (rows.empty()) throw ValidationError("trace", "trace is empty");
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            if (i > 0 && r.arrival_min < rows[i - 1].arrival_min) {
                throw ValidationError("arrival_min", "arrivals must be non-decreasing (row " +
                                                         std::to_string(i + 1) + ")");
            }
            if (!(r.consult_min > 0.0)) {
                throw ValidationError("consult_min", "consult_min must be > 0 (row " +
                                                         std::to_string(i + 1) + ")");
            }
            if (!(r.ts >= 0.0)) throw ValidationError("ts", "ts must be >= 0");
        }
    }
};

/// Synthetic trace parameters. Arrivals are Poisson; colour counts follow
/// `colour_mix` by largest-remainder apportionment and are shuffled; each
/// patient's ts is uniform within its colour band; consult times are
/// log-normal.
struct TraceGenerator {
    std::size_t n = 17;
    double mean_interarrival_min = 8.0;
    std::array<double, 4> colour_mix{0.60, 0.25, 0.10, 0.05};
    double consult_median_min = 15.0;
    double consult_log_sigma = 0.5;
    std::uint64_t seed = 17;
};

inline ArrivalTrace generate_trace(const TraceGenerator& g,
                                   const triage::ColourThresholds& thresholds = {}) {
    if (g.n == 0) throw ValidationError("n", "trace needs at least one patient");
    std::mt19937_64 rng(g.seed);
    const double total = std::accumulate(g.colour_mix.begin(), g.colour_mix.end(), 0.0);
    std::array<std::size_t, 4> counts{};
    std::array<double, 4> remainder{};
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < 4; ++c) {
        const double exact = static_cast<double>(g.n) * g.colour_mix[c] / total;
        counts[c] = static_cast<std::size_t>(std::floor(exact));
        remainder[c] = exact - static_cast<double>(counts[c]);
        assigned += counts[c];
    }
    while (assigned < g.n) {
        const auto c = static_cast<std::size_t>(std::max_element(remainder.begin(), remainder.end()) -
                                                remainder.begin());
        ++counts[c];
        remainder[c] = -1.0;
        ++assigned;
    }
    std::vector<int> colours;
    for (std::size_t c = 0; c < 4; ++c) colours.insert(colours.end(), counts[c], static_cast<int>(c));
    std::shuffle(colours.begin(), colours.end(), rng);

    const std::array<double, 5> edges{0.0, thresholds.yellow, thresholds.orange, thresholds.red,
                                      static_cast<double>(triage::kMaxPoints)};
    std::exponential_distribution<double> gap(1.0 / g.mean_interarrival_min);
    std::lognormal_distribution<double> consult(std::log(g.consult_median_min), g.consult_log_sigma);
    ArrivalTrace trace;
    double t = 0.0;
    for (std::size_t i = 0; i < g.n; ++i) {
        if (i > 0) t += gap(rng);
        const auto c = static_cast<std::size_t>(colours[i]);
        std::uniform_real_distribution<double> ts(edges[c], std::nextafter(edges[c + 1], edges[c]));
        const double arrival = std::round(t * 100.0) / 100.0;
        const double ts_v = ts(rng);
        const double consult_v = std::max(1.0, std::round(consult(rng) * 100.0) / 100.0);
        trace.rows.push_back({"P" + std::to_string(i + 1), arrival, ts_v, consult_v});
    }
    return trace;
}

/// Consult durations from the times patients were seen, assuming each gap
/// between consecutive consultation starts is the earlier patient's consult.
/// The last patient gets the median of the derived durations.
inline std::vector<double> consults_from_seen_times(const std::vector<double>& seen) {
    if (seen.size() < 2) throw ValidationError("seen", "need at least two consultation start times");
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < seen.size(); ++i) {
        const double d = seen[i + 1] - seen[i];
        if (!(d > 0.0)) throw ValidationError("seen", "consultation start times must increase");
        out.push_back(d);
    }
    auto sorted = out;
    std::sort(sorted.begin(), sorted.end());
    out.push_back(sorted[sorted.size() / 2]);
    return out;
}

inline ArrivalTrace read_trace_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("trace CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "patient_id,arrival_min,ts,consult_min") {
        throw ParseError("trace CSV header must be 'patient_id,arrival_min,ts,consult_min'");
    }
    ArrivalTrace trace;
    trace.source = ArrivalTrace::Source::file;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 4) {
            throw ParseError("trace CSV line " + std::to_string(lineno) + ": expected 4 fields");
        }
        try {
            trace.rows.push_back({cells[0], std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3])});
        } catch (const std::exception&) {
            throw ParseError("trace CSV line " + std::to_string(lineno) + ": bad number");
        }
    }
    trace.validate();
    return trace;
}

inline ArrivalTrace read_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open trace file '" + path + "'");
    return read_trace_csv(in);
}

inline std::string trace_csv(const ArrivalTrace& t) {
    // shortest text that reads back to the same double
    auto num = [](double v) {
        char buf[32];
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, res.ptr);
    };
    std::ostringstream os;
    os << "patient_id,arrival_min,ts,consult_min\n";
    for (const auto& r : t.rows) {
        os << r.patient_id << ',' << num(r.arrival_min) << ',' << num(r.ts) << ',' << num(r.consult_min) << '\n';
    }
    return os.str();
}

enum class Policy { fifo, ga };

struct PatientOutcome {
    std::string id;
    double arrival;
    double start;
    double end;
    double wait;
    triage::Colour colour;
};

struct Decision {
    double time;
    std::size_t waiting;
    std::string chosen;
    double policy_fitness;  // cost of the order acted on, with estimated consults
    double fifo_fitness;
};

struct BenchmarkReport {
    Policy policy;
    std::vector<PatientOutcome> patients;  // in consultation order
    std::vector<Decision> decisions;
    double mean_wait = 0.0;
    std::map<triage::Colour, double> mean_wait_by_colour;
    double makespan = 0.0;
    double idle = 0.0;
    double total_consult = 0.0;
};

/// Replays `trace` with one doctor. Whenever the doctor frees up, the policy
/// picks among those already waiting; the GA policy re-optimizes the waiting
/// queue using consult estimates perturbed by zero-mean Gaussian noise.
inline BenchmarkReport run_schedule_benchmark(const ArrivalTrace& trace, Policy policy,
                                              double prediction_noise_sigma, std::uint64_t seed,
                                              const sched::GaParams& ga = {},
                                              const triage::ColourThresholds& thresholds = {}) {
    trace.validate();
    const auto& rows = trace.rows;
    const std::size_t n = rows.size();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, prediction_noise_sigma > 0.0 ? prediction_noise_sigma : 1.0);
    std::vector<double> estimate(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double e = prediction_noise_sigma > 0.0 ? rows[i].consult_min + noise(rng) : rows[i].consult_min;
        estimate[i] = std::max(1.0, e);
    }

    BenchmarkReport report;
    report.policy = policy;
    std::vector<bool> seen(n, false);
    std::size_t next_arrival = 0;  // first row not yet arrived
    std::vector<std::size_t> waiting;
    double clock = rows.front().arrival_min;
    for (std::size_t served = 0; served < n; ++served) {
        while (next_arrival < n && rows[next_arrival].arrival_min <= clock) waiting.push_back(next_arrival++);
        if (waiting.empty()) {
            report.idle += rows[next_arrival].arrival_min - clock;
            clock = rows[next_arrival].arrival_min;
            while (next_arrival < n && rows[next_arrival].arrival_min <= clock) waiting.push_back(next_arrival++);
        }
        sched::Queue q;
        q.now = clock;
        for (auto i : waiting) q.patients.push_back({rows[i].patient_id, rows[i].ts, rows[i].arrival_min, estimate[i]});
        const auto fifo = sched::fifo_order(q.size());
        const double fifo_cost = sched::fitness(q, fifo);
        std::size_t pick = 0;  // index into waiting
        double policy_cost = fifo_cost;
        if (policy == Policy::ga && q.size() > 1) {
            auto params = ga;
            params.seed = ga.seed + seed * 1000003ULL + served;
            const auto res = sched::optimize(q, params);
            pick = res.order.front() - 1;
            policy_cost = res.fitness;
        }
        const std::size_t row = waiting[pick];
        report.decisions.push_back({clock, waiting.size(), rows[row].patient_id, policy_cost, fifo_cost});
        waiting.erase(waiting.begin() + static_cast<std::ptrdiff_t>(pick));
        seen[row] = true;
        const double start = clock;
        const double end = start + rows[row].consult_min;
        report.patients.push_back({rows[row].patient_id, rows[row].arrival_min, start, end,
                                   start - rows[row].arrival_min, thresholds.colour_for(rows[row].ts)});
        report.total_consult += rows[row].consult_min;
        clock = end;
    }
    report.makespan = clock - rows.front().arrival_min;

    std::map<triage::Colour, std::pair<double, std::size_t>> by_colour;
    double sum = 0.0;
    for (const auto& p : report.patients) {
        sum += p.wait;
        auto& [s, k] = by_colour[p.colour];
        s += p.wait;
        ++k;
    }
    report.mean_wait = sum / static_cast<double>(n);
    for (const auto& [c, sk] : by_colour) report.mean_wait_by_colour[c] = sk.first / static_cast<double>(sk.second);
    return report;
}

inline const char* to_string(Policy p) { return p == Policy::fifo ? "fifo" : "ga"; }

inline nlohmann::json to_json(const BenchmarkReport& r) {
    auto patients = nlohmann::json::array();
    for (const auto& p : r.patients) {
        patients.push_back({{"id", p.id},
                            {"arrival_min", p.arrival},
                            {"start_min", p.start},
                            {"end_min", p.end},
                            {"wait_min", p.wait},
                            {"colour", triage::to_string(p.colour)}});
    }
    nlohmann::json by_colour = nlohmann::json::object();
    for (const auto& [c, w] : r.mean_wait_by_colour) by_colour[triage::to_string(c)] = w;
    return {{"policy", to_string(r.policy)},
            {"patients", patients},
            {"mean_wait_min", r.mean_wait},
            {"mean_wait_by_colour", by_colour},
            {"makespan_min", r.makespan},
            {"idle_min", r.idle},
            {"total_consult_min", r.total_consult},
            {"decisions", r.decisions.size()}};
}

inline std::string waits_csv(const BenchmarkReport& r) {
    std::ostringstream os;
    os << "patient_id,arrival_min,start_min,wait_min,colour\n";
    for (const auto& p : r.patients) {
        os << p.id << ',' << p.arrival << ',' << p.start << ',' << p.wait << ',' << triage::to_string(p.colour) << '\n';
    }
    return os.str();
}

}  // namespace aec::sim

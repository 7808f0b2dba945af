#pragma once

// Event-sourced centre state: nurse submissions, the live queue, per-doctor
// consult-time models and the doctor's "next patient" action. Every mutation
// is an event; live operation and crash recovery run the same `apply`.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "aec/config.hpp"
#include "aec/error.hpp"
#include "aec/fql.hpp"
#include "aec/scheduler.hpp"
#include "aec/triage.hpp"

namespace aec::service {

/// Minutes on the centre timeline.
using Clock = std::function<double()>;

inline Clock system_clock() {
    return [] {
        using namespace std::chrono;
        return duration<double, std::ratio<60>>(system_clock::now().time_since_epoch()).count();
    };
}

class PersistenceError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Storage

class Storage {
public:
    virtual ~Storage() = default;
    virtual std::vector<nlohmann::json> load_events() = 0;
    virtual void append(const nlohmann::json& event) = 0;
    virtual std::optional<nlohmann::json> load_snapshot() = 0;
    virtual void save_snapshot(const nlohmann::json& state) = 0;
};

class MemoryStorage : public Storage {
public:
    std::vector<nlohmann::json> load_events() override { return events_; }
    void append(const nlohmann::json& event) override { events_.push_back(event); }
    std::optional<nlohmann::json> load_snapshot() override { return snapshot_; }
    void save_snapshot(const nlohmann::json& state) override { snapshot_ = state; }

    const std::vector<nlohmann::json>& events() const noexcept { return events_; }

private:
    std::vector<nlohmann::json> events_;
    std::optional<nlohmann::json> snapshot_;
};

/// JSON-lines event log plus an atomically replaced snapshot file.
class FileStorage : public Storage {
public:
    explicit FileStorage(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw PersistenceError("cannot create data dir '" + dir_.string() + "': " + ec.message());
    }

    std::filesystem::path log_path() const { return dir_ / "events.jsonl"; }
    std::filesystem::path snapshot_path() const { return dir_ / "snapshot.json"; }

    std::vector<nlohmann::json> load_events() override {
        std::vector<nlohmann::json> events;
        std::ifstream in(log_path());
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            try {
                events.push_back(nlohmann::json::parse(line));
            } catch (const nlohmann::json::parse_error&) {
                // A torn final write from a crash; anything after it is unreachable.
                break;
            }
        }
        return events;
    }

    void append(const nlohmann::json& event) override {
        std::ofstream out(log_path(), std::ios::app);
        out << event.dump() << '\n';
        out.flush();
        if (!out) throw PersistenceError("failed to append to '" + log_path().string() + "'");
    }

    std::optional<nlohmann::json> load_snapshot() override {
        std::ifstream in(snapshot_path());
        if (!in) return std::nullopt;
        try {
            return nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error&) {
            return std::nullopt;
        }
    }

    void save_snapshot(const nlohmann::json& state) override {
        const auto tmp = dir_ / "snapshot.json.tmp";
        {
            std::ofstream out(tmp, std::ios::trunc);
            out << state.dump();
            if (!out) throw PersistenceError("failed to write snapshot");
        }
        std::filesystem::rename(tmp, snapshot_path());
    }

private:
    std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// State

struct Demographics {
    std::string name;
    double age = 0.0;
};

enum class Status { waiting, in_consultation, done };

inline const char* to_string(Status s) {
    switch (s) {
        case Status::waiting: return "waiting";
        case Status::in_consultation: return "in-consultation";
        case Status::done: return "done";
    }
    return "?";
}

inline Status status_from_string(const std::string& s) {
    if (s == "waiting") return Status::waiting;
    if (s == "in-consultation") return Status::in_consultation;
    if (s == "done") return Status::done;
    throw ParseError("unknown status '" + s + "'");
}

struct PatientCase {
    std::string id;
    Demographics demographics;
    triage::Assessment assessment;
    triage::TriageResult triage;
    double arrival = 0.0;
    double predicted_consult = 0.0;
    Status status = Status::waiting;
    std::string doctor;
    std::string notes;  // append-only
    std::optional<double> consultation_start;
    std::optional<double> consultation_end;
};

struct DoctorState {
    std::optional<std::string> current;
    std::uint64_t completed = 0;
    fql::Model model;
};

struct CentreState {
    std::uint64_t seq = 0;  // last applied event
    std::uint64_t next_id = 1;
    std::map<std::string, PatientCase> cases;
    std::vector<std::string> queue;  // waiting ids in service order
    std::map<std::string, DoctorState> doctors;
    fql::Model pool_model;  // pooled over all doctors; predicts at intake
};

struct QueueEntry {
    std::size_t position;
    std::string id;
    std::string name;
    triage::Colour colour;
    double crisp_ts;
    double waited;
    double projected_start;  // minutes from now
    double expected_consult;
};

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const PatientCase& c) {
    nlohmann::json j{{"id", c.id},
                     {"name", c.demographics.name},
                     {"age", c.demographics.age},
                     {"assessment", triage::to_json(c.assessment)},
                     {"triage", triage::to_json(c.triage)},
                     {"arrival_min", c.arrival},
                     {"predicted_consult_min", c.predicted_consult},
                     {"status", to_string(c.status)},
                     {"doctor", c.doctor},
                     {"notes", c.notes},
                     {"consultation_start_min", nullptr},
                     {"consultation_end_min", nullptr}};
    if (c.consultation_start) j["consultation_start_min"] = *c.consultation_start;
    if (c.consultation_end) j["consultation_end_min"] = *c.consultation_end;
    return j;
}

inline PatientCase case_from_json(const nlohmann::json& j) {
    PatientCase c;
    c.id = j.at("id").get<std::string>();
    c.demographics = {j.at("name").get<std::string>(), j.at("age").get<double>()};
    c.assessment = triage::assessment_from_json(j.at("assessment"));
    c.triage = triage::triage_result_from_json(j.at("triage"));
    c.arrival = j.at("arrival_min").get<double>();
    c.predicted_consult = j.at("predicted_consult_min").get<double>();
    c.status = status_from_string(j.at("status").get<std::string>());
    c.doctor = j.at("doctor").get<std::string>();
    c.notes = j.at("notes").get<std::string>();
    if (!j.at("consultation_start_min").is_null()) c.consultation_start = j.at("consultation_start_min").get<double>();
    if (!j.at("consultation_end_min").is_null()) c.consultation_end = j.at("consultation_end_min").get<double>();
    return c;
}

inline nlohmann::json to_json(const CentreState& s) {
    auto cases = nlohmann::json::array();
    for (const auto& [id, c] : s.cases) cases.push_back(to_json(c));
    nlohmann::json doctors = nlohmann::json::object();
    for (const auto& [id, d] : s.doctors) {
        doctors[id] = {{"current", d.current ? nlohmann::json(*d.current) : nlohmann::json(nullptr)},
                       {"completed", d.completed},
                       {"model", d.model.persist()}};
    }
    return {{"seq", s.seq},
            {"next_id", s.next_id},
            {"cases", cases},
            {"queue", s.queue},
            {"doctors", doctors},
            {"pool_model", s.pool_model.persist()}};
}

inline CentreState state_from_json(const nlohmann::json& j) {
    try {
        CentreState s;
        s.seq = j.at("seq").get<std::uint64_t>();
        s.next_id = j.at("next_id").get<std::uint64_t>();
        for (const auto& c : j.at("cases")) {
            auto pc = case_from_json(c);
            s.cases.emplace(pc.id, std::move(pc));
        }
        s.queue = j.at("queue").get<std::vector<std::string>>();
        for (const auto& [id, d] : j.at("doctors").items()) {
            DoctorState ds{std::nullopt, d.at("completed").get<std::uint64_t>(), fql::Model::restore(d.at("model"))};
            if (!d.at("current").is_null()) ds.current = d.at("current").get<std::string>();
            s.doctors.emplace(id, std::move(ds));
        }
        s.pool_model = fql::Model::restore(j.at("pool_model"));
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid centre snapshot: ") + e.what());
    }
}

inline nlohmann::json to_json(const QueueEntry& e) {
    return {{"position", e.position},
            {"id", e.id},
            {"name", e.name},
            {"colour", triage::to_string(e.colour)},
            {"crisp_ts", e.crisp_ts},
            {"waited_min", e.waited},
            {"projected_start_min", e.projected_start},
            {"expected_consult_min", e.expected_consult}};
}

// ---------------------------------------------------------------------------
// Centre

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace detail

/// Severity input of the consult-time model: the crisp triage score clamped
/// to the model's severity universe.
inline double severity_of(const triage::TriageResult& r, const fql::Model& m) {
    return m.severity().clamp(r.crisp_ts);
}

class Centre {
public:
    explicit Centre(EngineConfig config = {}, std::shared_ptr<Storage> storage = std::make_shared<MemoryStorage>(),
           Clock clock = system_clock())
        : config_(std::move(config)),
          engine_(config_.make_triage_engine()),
          storage_(std::move(storage)),
          clock_(std::move(clock)) {
        state_.pool_model = fql::Model(config_.fql);
        if (auto snap = storage_->load_snapshot()) state_ = state_from_json(*snap);
        for (const auto& event : storage_->load_events()) {
            if (event.at("seq").get<std::uint64_t>() <= state_.seq) continue;
            apply(state_, event);
        }
    }

    /// Runs triage and the intake prediction, enqueues the case and
    /// re-optimizes the queue.
    PatientCase submit_triage(const triage::Assessment& assessment, const Demographics& demographics) {
        if (!(demographics.age >= 0.0 && demographics.age <= 130.0)) {
            throw ValidationError("age", "age must lie in [0, 130]");
        }
        assessment.validate();
        nlohmann::json event{{"type", "submit"},
                             {"name", demographics.name},
                             {"age", demographics.age},
                             {"assessment", triage::to_json(assessment)}};
        const auto id = commit(std::move(event));
        std::shared_lock lock(mutex_);
        return state_.cases.at(*id);
    }

    /// Closes the doctor's current consultation (if any), learns from its
    /// duration, re-optimizes and hands the doctor the head of the queue.
    std::optional<PatientCase> next_patient(const std::string& doctor_id, const std::string& notes = {}) {
        if (doctor_id.empty()) throw ValidationError("doctor", "doctor id must not be empty");
        const auto id = commit({{"type", "next"}, {"doctor", doctor_id}, {"notes", notes}});
        if (!id) return std::nullopt;
        std::shared_lock lock(mutex_);
        return state_.cases.at(*id);
    }

    std::vector<QueueEntry> queue_state() const {
        std::shared_lock lock(mutex_);
        const double now = clock_();
        std::vector<QueueEntry> out;
        double ahead = 0.0;
        for (std::size_t i = 0; i < state_.queue.size(); ++i) {
            const auto& c = state_.cases.at(state_.queue[i]);
            out.push_back({i + 1, c.id, c.demographics.name, c.triage.colour, c.triage.crisp_ts,
                           now - c.arrival, ahead, c.predicted_consult});
            ahead += c.predicted_consult;
        }
        return out;
    }

    PatientCase get_patient(const std::string& id) const {
        std::shared_lock lock(mutex_);
        const auto it = state_.cases.find(id);
        if (it == state_.cases.end()) throw NotFoundError("no patient with id '" + id + "'");
        return it->second;
    }

    std::vector<PatientCase> search_patients(const std::string& query) const {
        std::shared_lock lock(mutex_);
        const auto q = detail::lower(query);
        std::vector<PatientCase> out;
        for (const auto& [id, c] : state_.cases) {
            if (detail::lower(id).find(q) != std::string::npos ||
                detail::lower(c.demographics.name).find(q) != std::string::npos) {
                out.push_back(c);
            }
        }
        return out;
    }

    std::optional<DoctorState> doctor(const std::string& id) const {
        std::shared_lock lock(mutex_);
        const auto it = state_.doctors.find(id);
        if (it == state_.doctors.end()) return std::nullopt;
        return it->second;
    }

    CentreState snapshot() const {
        std::shared_lock lock(mutex_);
        return state_;
    }

    nlohmann::json state_json() const { return to_json(snapshot()); }

    const EngineConfig& config() const noexcept { return config_; }
    double now() const { return clock_(); }

private:
    /// Applies the event to a copy, persists it, then swaps the copy in;
    /// a failure at any step leaves the live state untouched.
    std::optional<std::string> commit(nlohmann::json event) {
        std::unique_lock lock(mutex_);
        event["seq"] = state_.seq + 1;
        event["time"] = clock_();
        CentreState next = state_;
        auto result = apply(next, event);
        storage_->append(event);
        state_ = std::move(next);
        if (config_.service.snapshot_every > 0 && state_.seq % config_.service.snapshot_every == 0) {
            try {
                storage_->save_snapshot(to_json(state_));
            } catch (const std::exception&) {
                // the log alone is sufficient for recovery
            }
        }
        return result;
    }

    std::optional<std::string> apply(CentreState& s, const nlohmann::json& event) const {
        const auto seq = event.at("seq").get<std::uint64_t>();
        if (seq != s.seq + 1) {
            throw PersistenceError("event log gap: expected seq " + std::to_string(s.seq + 1) + ", found " +
                                   std::to_string(seq));
        }
        const double time = event.at("time").get<double>();
        const auto type = event.at("type").get<std::string>();
        std::optional<std::string> result;
        if (type == "submit") {
            result = apply_submit(s, event, time);
        } else if (type == "next") {
            result = apply_next(s, event, time);
        } else {
            throw PersistenceError("unknown event type '" + type + "'");
        }
        s.seq = seq;
        return result;
    }

    std::string apply_submit(CentreState& s, const nlohmann::json& e, double time) const {
        PatientCase c;
        c.id = "P" + std::to_string(s.next_id);
        c.demographics = {e.at("name").get<std::string>(), e.at("age").get<double>()};
        c.assessment = triage::assessment_from_json(e.at("assessment"));
        c.triage = engine_(c.assessment);
        c.arrival = time;
        const auto rec = s.pool_model.predict_greedy(severity_of(c.triage, s.pool_model), c.demographics.age);
        c.predicted_consult = rec.predicted_minutes;
        ++s.next_id;
        const auto id = c.id;
        s.cases.emplace(id, std::move(c));
        s.queue.push_back(id);
        reorder(s, time, e.at("seq").get<std::uint64_t>());
        return id;
    }

    std::optional<std::string> apply_next(CentreState& s, const nlohmann::json& e, double time) const {
        const auto doctor_id = e.at("doctor").get<std::string>();
        auto [it, created] = s.doctors.try_emplace(doctor_id, DoctorState{std::nullopt, 0, fql::Model(config_.fql)});
        DoctorState& doc = it->second;
        if (doc.current) {
            PatientCase& c = s.cases.at(*doc.current);
            c.consultation_end = time;
            const auto notes = e.at("notes").get<std::string>();
            if (!notes.empty()) c.notes += c.notes.empty() ? notes : "\n" + notes;
            c.status = Status::done;
            const double observed = std::max(0.0, time - *c.consultation_start);
            learn(doc.model, c, observed, doctor_id);
            learn(s.pool_model, c, observed, "");
            ++doc.completed;
            doc.current.reset();
        }
        if (s.queue.empty()) return std::nullopt;
        reorder(s, time, e.at("seq").get<std::uint64_t>());
        const auto id = s.queue.front();
        s.queue.erase(s.queue.begin());
        PatientCase& c = s.cases.at(id);
        c.status = Status::in_consultation;
        c.doctor = doctor_id;
        c.consultation_start = time;
        doc.current = id;
        return id;
    }

    void learn(fql::Model& model, const PatientCase& c, double observed, const std::string& key) const {
        std::mt19937_64 rng(config_.ga.seed ^ detail::fnv1a(key) ^
                            (static_cast<std::uint64_t>(model.epoch()) * 0x9e3779b97f4a7c15ULL));
        const auto rec = model.predict(severity_of(c.triage, model), c.demographics.age, rng, fql::Mode::learn);
        model.update(rec, observed);
    }

    /// Re-optimizes the waiting queue (arrival order in, service order out).
    void reorder(CentreState& s, double now, std::uint64_t seq) const {
        if (s.queue.size() < 2) return;
        std::vector<std::string> by_arrival = s.queue;
        std::sort(by_arrival.begin(), by_arrival.end(), [&](const std::string& a, const std::string& b) {
            const auto& ca = s.cases.at(a);
            const auto& cb = s.cases.at(b);
            if (ca.arrival != cb.arrival) return ca.arrival < cb.arrival;
            return std::stoull(a.substr(1)) < std::stoull(b.substr(1));
        });
        sched::Queue q;
        q.now = now;
        for (const auto& id : by_arrival) {
            const auto& c = s.cases.at(id);
            q.patients.push_back({id, c.triage.crisp_ts, c.arrival, std::max(c.predicted_consult, 1e-3)});
        }
        auto params = config_.ga;
        params.seed = config_.ga.seed + seq;
        const auto result = sched::optimize(q, params);
        std::vector<std::string> order;
        for (auto pos : result.order) order.push_back(by_arrival[pos - 1]);
        if (config_.service.red_bypass) {
            std::stable_partition(order.begin(), order.end(), [&](const std::string& id) {
                return s.cases.at(id).triage.colour == triage::Colour::red;
            });
        }
        s.queue = std::move(order);
    }

    EngineConfig config_;
    triage::Engine engine_;
    std::shared_ptr<Storage> storage_;
    Clock clock_;
    mutable std::shared_mutex mutex_;
    CentreState state_;
};

}  // namespace aec::service

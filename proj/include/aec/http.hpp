#pragma once

// HTTP/JSON front end for the centre.

#include <string>

#include <httplib.h>
#include <json.hpp>

#include "aec/error.hpp"
#include "aec/service.hpp"

namespace aec::http {

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                       const std::string& field = {}) {
    nlohmann::json body{{"code", code}, {"message", message}};
    if (!field.empty()) body["field"] = field;
    send_json(res, status, body);
}

/// Runs `handler`, mapping library errors onto status codes.
template <class F>
void guarded(httplib::Response& res, F&& handler) {
    try {
        handler();
    } catch (const ValidationError& e) {
        send_error(res, 400, "validation_error", e.what(), e.field());
    } catch (const NotFoundError& e) {
        send_error(res, 404, "not_found", e.what());
    } catch (const ParseError& e) {
        send_error(res, 400, "parse_error", e.what());
    } catch (const nlohmann::json::exception& e) {
        send_error(res, 400, "parse_error", e.what());
    } catch (const service::PersistenceError& e) {
        send_error(res, 503, "persistence_error", e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, "internal_error", e.what());
    }
}

inline nlohmann::json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    try {
        return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("request body is not valid JSON: ") + e.what());
    }
}

inline nlohmann::json case_view(const service::Centre& centre, const service::PatientCase& c) {
    auto j = service::to_json(c);
    j["queue_position"] = nullptr;
    for (const auto& e : centre.queue_state()) {
        if (e.id == c.id) j["queue_position"] = e.position;
    }
    return j;
}

/// Registers the API routes on `server`. `centre` must outlive the server.
inline void register_routes(httplib::Server& server, service::Centre& centre) {
    server.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"status", "ok"}});
    });

    server.Post("/api/patients", [&centre](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto body = parse_body(req);
            if (!body.is_object()) throw ValidationError("body", "request body must be an object");
            if (!body.contains("assessment")) throw ValidationError("assessment", "missing field 'assessment'");
            const auto assessment = triage::assessment_from_json(body.at("assessment"));
            service::Demographics demo;
            if (body.contains("name")) {
                if (!body.at("name").is_string()) throw ValidationError("name", "name must be a string");
                demo.name = body.at("name").get<std::string>();
            }
            if (!body.contains("age") || !body.at("age").is_number()) {
                throw ValidationError("age", "age must be a number");
            }
            demo.age = body.at("age").get<double>();
            const auto c = centre.submit_triage(assessment, demo);
            send_json(res, 201, case_view(centre, c));
        });
    });

    server.Post(R"(/api/doctors/([^/]+)/next)", [&centre](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto body = parse_body(req);
            std::string notes;
            if (body.is_object() && body.contains("notes")) {
                if (!body.at("notes").is_string()) throw ValidationError("notes", "notes must be a string");
                notes = body.at("notes").get<std::string>();
            }
            const auto next = centre.next_patient(req.matches[1], notes);
            if (!next) {
                send_json(res, 200, {{"status", "empty"}, {"patient", nullptr}});
            } else {
                send_json(res, 200, {{"status", "ok"}, {"patient", service::to_json(*next)}});
            }
        });
    });

    server.Get("/api/queue", [&centre](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] {
            auto rows = nlohmann::json::array();
            for (const auto& e : centre.queue_state()) rows.push_back(service::to_json(e));
            send_json(res, 200, {{"now_min", centre.now()}, {"queue", rows}});
        });
    });

    server.Get(R"(/api/patients/([^/]+))", [&centre](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, case_view(centre, centre.get_patient(req.matches[1]))); });
    });

    server.Get("/api/patients", [&centre](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto out = nlohmann::json::array();
            for (const auto& c : centre.search_patients(req.get_param_value("q"))) out.push_back(service::to_json(c));
            send_json(res, 200, {{"patients", out}});
        });
    });

    server.Get(R"(/api/doctors/([^/]+)/model)", [&centre](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = req.matches[1];
            const auto doc = centre.doctor(id);
            if (!doc) throw NotFoundError("no doctor with id '" + id + "'");
            const auto& m = doc->model;
            auto greedy = nlohmann::json::array();
            for (std::size_t r = 0; r < m.qtable().rows(); ++r) {
                greedy.push_back({{"row", r},
                                  {"visits", m.qtable().row_visits(r)},
                                  {"greedy_minutes", m.bins()[m.qtable().argmax(r)].minutes}});
            }
            send_json(res, 200,
                      {{"doctor", id},
                       {"epoch", m.epoch()},
                       {"epsilon", m.epsilon()},
                       {"completed", doc->completed},
                       {"current", doc->current ? nlohmann::json(*doc->current) : nlohmann::json(nullptr)},
                       {"rows", greedy},
                       {"model", m.persist()}});
        });
    });
}

}  // namespace aec::http

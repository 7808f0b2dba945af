// aec: command-line entry point for the triage and queue engine.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "aec/commands.hpp"
#include "aec/config.hpp"
#include "aec/http.hpp"
#include "aec/service.hpp"

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw aec::NotFoundError("cannot write '" + path + "'");
    out << content;
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
    if (g_server != nullptr) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Emergency-centre triage, consult-time learning and queue optimization"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "Engine config JSON")->envname("AEC_CONFIG")->check(CLI::ExistingFile);

    auto* serve = app.add_subcommand("serve", "Run the HTTP/JSON service");
    int port = 8080;
    std::string host = "0.0.0.0";
    std::string data_dir;
    std::string static_dir;
    serve->add_option("--port", port, "Listen port")->envname("AEC_PORT");
    serve->add_option("--host", host, "Listen address");
    serve->add_option("--data-dir", data_dir, "Event log directory (in-memory when omitted)")->envname("AEC_DATA_DIR");
    serve->add_option("--static-dir", static_dir, "Serve UI assets from this directory");

    auto* triage = app.add_subcommand("triage", "Score one assessment");
    std::string input;
    triage->add_option("--input", input, "Assessment JSON")->required()->check(CLI::ExistingFile);

    auto* schedule = app.add_subcommand("schedule", "Order one queue");
    std::string queue_path;
    bool brute = false;
    schedule->add_option("--queue", queue_path, "Queue JSON")->required()->check(CLI::ExistingFile);
    schedule->add_flag("--brute-force", brute, "Exhaustive search (at most 9 patients)");

    auto* sim_fql = app.add_subcommand("sim-fql", "Teacher-FIS learning experiment");
    std::size_t epochs = 1000;
    std::uint64_t seed = 1;
    double noise = 0.0;
    std::string out_path;
    sim_fql->add_option("--epochs", epochs, "Epochs (>= 300)");
    sim_fql->add_option("--seed", seed, "Seed");
    sim_fql->add_option("--noise-sigma", noise, "Teacher noise sigma (minutes)");
    sim_fql->add_option("--out", out_path, "Learning-curve CSV");

    auto* sim_schedule = app.add_subcommand("sim-schedule", "Replay a trace under FIFO or GA ordering");
    std::string trace_path;
    bool generate = false;
    std::optional<std::size_t> gen_n;
    std::optional<std::uint64_t> gen_seed;
    std::string policy = "ga";
    std::optional<double> sched_noise;
    std::string waits_csv;
    auto* trace_opt = sim_schedule->add_option("--trace", trace_path, "Trace CSV")->check(CLI::ExistingFile);
    auto* gen_opt = sim_schedule->add_flag("--generate", generate, "Use the synthetic trace generator");
    trace_opt->excludes(gen_opt);
    sim_schedule->add_option("--n", gen_n, "Generated patients")->needs(gen_opt);
    sim_schedule->add_option("--seed", gen_seed, "Generator and noise seed");
    sim_schedule->add_option("--policy", policy, "fifo or ga")->check(CLI::IsMember({"fifo", "ga"}));
    sim_schedule->add_option("--noise-sigma", sched_noise, "Consult-estimate noise sigma (minutes)");
    sim_schedule->add_option("--out", out_path, "Report JSON");
    sim_schedule->add_option("--waits-csv", waits_csv, "Per-patient waits CSV");

    auto* sim_triage = app.add_subcommand("sim-triage", "Triage agreement against the point-sum rubric");
    sim_triage->add_option("--out", out_path, "Report JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        const aec::EngineConfig config = config_path.empty() ? aec::EngineConfig{} : aec::load_config(config_path);
        auto emit = [&](const nlohmann::json& j) {
            if (!out_path.empty()) write_file(out_path, j.dump(2) + "\n");
            std::cout << j.dump(2) << '\n';
        };

        if (*serve) {
            std::shared_ptr<aec::service::Storage> storage;
            if (data_dir.empty()) {
                storage = std::make_shared<aec::service::MemoryStorage>();
            } else {
                storage = std::make_shared<aec::service::FileStorage>(data_dir);
            }
            aec::service::Centre centre(config, storage);
            httplib::Server server;
            aec::http::register_routes(server, centre);
            if (!static_dir.empty() && !server.set_mount_point("/", static_dir)) {
                throw aec::NotFoundError("static dir '" + static_dir + "' does not exist");
            }
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "aec: listening on " << host << ':' << port << '\n';
            if (!server.listen(host, port)) {
                std::cerr << "aec: cannot listen on " << host << ':' << port << '\n';
                return 1;
            }
            return 0;
        }
        if (*triage) {
            std::cout << aec::commands::triage(config, aec::read_json_file(input)).dump(2) << '\n';
        } else if (*schedule) {
            std::cout << aec::commands::schedule(config, aec::read_json_file(queue_path), brute).dump(2) << '\n';
        } else if (*sim_fql) {
            const auto run = aec::commands::sim_fql(config, epochs, seed, noise);
            if (!out_path.empty()) write_file(out_path, run.curve_csv);
            std::cout << run.summary.dump(2) << '\n';
        } else if (*sim_schedule) {
            if (trace_path.empty() && !generate) {
                throw aec::ValidationError("trace", "sim-schedule needs --trace FILE or --generate");
            }
            const auto trace = generate ? aec::commands::generated_trace(config, gen_n, gen_seed)
                                        : aec::sim::read_trace_csv(trace_path);
            const auto p = policy == "fifo" ? aec::sim::Policy::fifo : aec::sim::Policy::ga;
            const double sigma = sched_noise.value_or(config.sim.prediction_noise_sigma);
            const auto report = aec::commands::sim_schedule(config, trace, p, sigma, gen_seed.value_or(1));
            if (!waits_csv.empty()) {
                write_file(waits_csv, aec::sim::waits_csv(aec::sim::run_schedule_benchmark(
                                          trace, p, sigma, gen_seed.value_or(1), config.ga, config.triage.thresholds)));
            }
            emit(report);
        } else if (*sim_triage) {
            emit(aec::commands::sim_triage(config));
        }
    } catch (const aec::ValidationError& e) {
        std::cerr << "aec: validation error";
        if (!e.field().empty()) std::cerr << " (" << e.field() << ")";
        std::cerr << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "aec: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

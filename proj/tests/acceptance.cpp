// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "aec/fql.hpp"
#include "aec/permutation.hpp"
#include "aec/scheduler.hpp"
#include "aec/service.hpp"
#include "aec/simkit.hpp"
#include "aec/triage.hpp"

using namespace aec;
using Seq = std::vector<std::size_t>;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

Outcome table_two() {
    const std::vector<Seq> reference = {{1, 2, 3, 4}, {1, 2, 4, 3}, {1, 3, 2, 4}, {1, 3, 4, 2},
                                        {1, 4, 2, 3}, {1, 4, 3, 2}, {2, 1, 3, 4}, {2, 1, 4, 3}};
    // independent enumeration: all 24 arrangements, sorted
    std::vector<Seq> all;
    for (Seq a{1, 2, 3, 4};;) {
        all.push_back(a);
        if (!std::next_permutation(a.begin(), a.end())) break;
    }
    std::sort(all.begin(), all.end());

    const auto t0 = std::chrono::steady_clock::now();
    perm::Mapper<std::uint64_t> m(4);
    bool ok = true;
    for (std::uint64_t i = 1; i <= 8; ++i) ok = ok && m.decode(i) == reference[i - 1];
    for (std::uint64_t i = 1; i <= 24; ++i) ok = ok && m.decode(i) == all[i - 1];
    const double secs = seconds_since(t0);
    ok = ok && secs < 1e-3;
    return {ok, "8 reference pairs + 24-permutation sort, " + fmt("%.3f ms", secs * 1e3)};
}

Outcome bijectivity() {
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t total = 0, mismatches = 0;
    for (std::size_t n = 1; n <= 7; ++n) {
        perm::Mapper<std::uint64_t> m(n);
        for (std::uint64_t i = 1; i <= m.count(); ++i, ++total) {
            if (m.encode(m.decode(i)) != i) ++mismatches;
        }
    }
    const double secs = seconds_since(t0);
    return {total == 5913 && mismatches == 0 && secs < 1.0,
            std::to_string(total) + " indices, " + std::to_string(mismatches) + " mismatches, " +
                fmt("%.3f s", secs)};
}

Outcome epsilon_schedule() {
    const double tol = 1e-12;
    bool ok = std::abs(fql::epsilon(0) - 1.0) <= tol && std::abs(fql::epsilon(249) - 0.0538) <= tol &&
              std::abs(fql::epsilon(250) - 0.05) <= tol && std::abs(fql::epsilon(10000) - 0.05) <= tol;
    bool monotone = true;
    for (std::int64_t t = 1; t <= 10000; ++t) monotone = monotone && fql::epsilon(t) <= fql::epsilon(t - 1);
    return {ok && monotone, "eps(249)=" + fmt("%.16g", fql::epsilon(249)) + (monotone ? ", monotone" : ", NOT monotone")};
}

Outcome table_one() {
    using triage::Vital;
    struct Case {
        Vital v;
        double x;
        int score;
    };
    const std::vector<Case> cases = {
        {Vital::sbp, 71, 2},   {Vital::sbp, 80, 2},   {Vital::sbp, 81, 1},   {Vital::sbp, 100, 1},
        {Vital::sbp, 101, 0},  {Vital::sbp, 199, 0},  {Vital::sbp, 200, 2},  {Vital::sbp, 60, 2},
        {Vital::hr, 40, 2},    {Vital::hr, 41, 1},    {Vital::hr, 50, 1},    {Vital::hr, 51, 0},
        {Vital::hr, 100, 0},   {Vital::hr, 101, 1},   {Vital::hr, 110, 1},   {Vital::hr, 111, 2},
        {Vital::hr, 129, 2},   {Vital::hr, 130, 2},   {Vital::hr, 30, 2},    {Vital::temp, 34.9, 2},
        {Vital::temp, 35.0, 0}, {Vital::temp, 38.4, 0}, {Vital::temp, 38.5, 2}, {Vital::temp, 40, 2},
        {Vital::rr, 8, 2},     {Vital::rr, 9, 0},     {Vital::rr, 14, 0},    {Vital::rr, 15, 1},
        {Vital::rr, 20, 1},    {Vital::rr, 21, 2},    {Vital::rr, 29, 2},    {Vital::rr, 30, 2},
    };
    std::size_t bad = 0;
    for (const auto& c : cases) {
        if (triage::score_vital(c.v, c.x).score != c.score) ++bad;
    }
    return {bad == 0, std::to_string(cases.size() - bad) + "/" + std::to_string(cases.size()) + " boundary values"};
}

sched::Queue random_queue(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ts(0.0, 14.0), arr(0.0, 120.0), te(5.0, 60.0);
    sched::Queue q;
    q.now = 120.0;
    for (std::size_t i = 0; i < n; ++i) q.patients.push_back({"p" + std::to_string(i), ts(rng), arr(rng), te(rng)});
    std::sort(q.patients.begin(), q.patients.end(), [](const auto& a, const auto& b) { return a.arrival < b.arrival; });
    return q;
}

Outcome ga_vs_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    int hits = 0;
    double worst = 1.0;
    for (std::uint64_t s = 1; s <= 100; ++s) {
        const auto q = random_queue(8, 1000 + s);
        sched::GaParams p;
        p.seed = s;
        const double ga = sched::optimize(q, p).fitness;
        const double bf = sched::brute_force(q).fitness;
        if (ga <= bf * (1 + 1e-12)) ++hits;
        worst = std::max(worst, ga / bf);
    }
    const double secs = seconds_since(t0);
    return {hits >= 95 && worst <= 1.05 && secs < 60.0,
            std::to_string(hits) + "/100 optimal, worst ratio " + fmt("%.4f", worst) + ", " + fmt("%.2f s", secs)};
}

Outcome runtime_envelope() {
    const auto q = random_queue(100, 3);
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = sched::optimize(q);
    const double secs = seconds_since(t0);
    return {secs <= 30.0 && r.fitness <= sched::fitness(q, sched::fifo_order(100)), fmt("n=100 in %.2f s", secs)};
}

Outcome fql_learning() {
    int ok = 0;
    double slowest = 0.0;
    std::ostringstream errs;
    for (std::uint64_t s = 1; s <= 10; ++s) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto run = sim::run_teacher_experiment(s, 1000, 0.0);
        slowest = std::max(slowest, seconds_since(t0));
        const double e = *run.curve.final_average();
        if (e < 4.0) ++ok;
        errs << (s > 1 ? " " : "") << fmt("%.2f", e);
    }
    return {ok >= 8 && slowest < 10.0,
            std::to_string(ok) + "/10 seeds < 4 min [" + errs.str() + "], slowest " + fmt("%.2f s", slowest)};
}

Outcome scheduling_benefit() {
    const auto trace = sim::generate_trace({});
    const auto fifo = sim::run_schedule_benchmark(trace, sim::Policy::fifo, 4.0, 17);
    const auto ga = sim::run_schedule_benchmark(trace, sim::Policy::ga, 4.0, 17);
    const double red_f = fifo.mean_wait_by_colour.at(triage::Colour::red);
    const double red_g = ga.mean_wait_by_colour.at(triage::Colour::red);
    return {trace.rows.size() == 17 && ga.mean_wait <= 0.8 * fifo.mean_wait && red_g < red_f,
            "mean wait " + fmt("%.1f", fifo.mean_wait) + " -> " + fmt("%.1f", ga.mean_wait) + " min (ratio " +
                fmt("%.3f", ga.mean_wait / fifo.mean_wait) + "), red " + fmt("%.1f", red_f) + " -> " +
                fmt("%.1f", red_g)};
}

Outcome triage_agreement() {
    const auto r = sim::triage_agreement(triage::Engine{});
    const auto& none = r.strata.at(sim::PainLevel::none);
    const auto& high = r.strata.at(sim::PainLevel::high);
    return {none.under_pct() <= 5.0 && none.correct_pct() >= 90.0 && high.under == 0,
            "no pain: under " + fmt("%.1f%%", none.under_pct()) + ", correct " + fmt("%.1f%%", none.correct_pct()) +
                "; high pain under " + fmt("%.1f%%", high.under_pct())};
}

Outcome service_flow() {
    const auto dir = std::filesystem::temp_directory_path() / "aec_acceptance_service";
    std::filesystem::remove_all(dir);
    double t = 0.0;
    auto clock = [&t] { return t; };
    nlohmann::json live;
    bool red_first = false, epoch_ok = false;
    {
        service::Centre centre({}, std::make_shared<service::FileStorage>(dir), clock);
        centre.submit_triage({{120, 75, 37, 12}, triage::Avpu::alert, {}, {}}, {"green", 35});
        t = 1;
        const auto red = centre.submit_triage({{75, 120, 40, 25}, triage::Avpu::alert, {}, {}}, {"red", 60});
        t = 2;
        const auto first = centre.next_patient("d1");
        red_first = first && first->id == red.id && red.triage.colour == triage::Colour::red;
        const bool before = centre.doctor("d1")->model.epoch() == 0;
        t = 20;
        centre.next_patient("d1");
        epoch_ok = before && centre.doctor("d1")->model.epoch() == 1;
        live = centre.state_json();
    }  // process "dies": only the files remain
    service::Centre replayed({}, std::make_shared<service::FileStorage>(dir), clock);
    const bool same = replayed.state_json() == live;
    std::filesystem::remove_all(dir);
    return {red_first && epoch_ok && same, std::string("red first: ") + (red_first ? "yes" : "no") +
                                               ", epoch after 2nd next: " + (epoch_ok ? "1" : "wrong") +
                                               ", replay equal: " + (same ? "yes" : "no")};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"1 permutation table for n=4", table_two},
        {"2 bijectivity n=1..7", bijectivity},
        {"3 exploration schedule", epsilon_schedule},
        {"4 vital-sign score bands", table_one},
        {"5 GA vs brute-force oracle", ga_vs_oracle},
        {"6 runtime envelope n=100", runtime_envelope},
        {"7 consult-time learning", fql_learning},
        {"8 scheduling benefit", scheduling_benefit},
        {"9 triage agreement", triage_agreement},
        {"10 service flow and replay", service_flow},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("%s criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}

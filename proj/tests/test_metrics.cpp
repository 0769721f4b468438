#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sskp/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

using namespace sskp;

namespace {

RunLog make_log(std::initializer_list<EpisodeRecord> eps) {
    RunLog log;
    log.episodes = eps;
    return log;
}

}  // namespace

TEST_CASE("ptr divides total reward by total timesteps") {
    RunLog log = make_log({{40, 10.0, 0}, {100, 20.0, 1}});
    CHECK(ptr(log, 100) == doctest::Approx(0.3));

    // Independent path: re-sum.
    double total = 0.0;
    for (const auto& e : log.episodes) total += e.episode_reward;
    CHECK(ptr(log, 100) == doctest::Approx(total / 100.0));

    RunLog empty;
    CHECK(ptr(empty, 50) == doctest::Approx(0.0));
    CHECK_THROWS(ptr(log, 0));
}

TEST_CASE("ptr is invariant to how episodes split the same rewards") {
    RunLog a = make_log({{10, 4.0, 0}, {20, 6.0, 0}});
    RunLog b = make_log({{5, 1.0, 0}, {12, 3.0, 0}, {16, 2.0, 0}, {20, 4.0, 0}});
    CHECK(ptr(a, 20) == doctest::Approx(ptr(b, 20)));
}

TEST_CASE("total_violations counts violated episodes") {
    RunLog log = make_log({{1, 0.0, 1}, {2, 0.0, 0}, {3, 0.0, 1}, {4, 0.0, 1}});
    CHECK(total_violations(log) == 3);
    CHECK(total_violations(RunLog{}) == 0);
}

TEST_CASE("ptr_over_violations divides by the violation count") {
    RunLog log = make_log({{40, 10.0, 1}, {70, 10.0, 1}, {100, 10.0, 1}});
    auto r = ptr_over_violations(log, 100);
    CHECK(r.value == doctest::Approx(0.1));  // ptr 0.3 over 3 violations
    CHECK_FALSE(r.zero_violations);

    RunLog safe = make_log({{50, 15.0, 0}, {100, 15.0, 0}});
    auto s = ptr_over_violations(safe, 100);
    CHECK(s.value == doctest::Approx(0.3));  // divide by 1 by convention
    CHECK(s.zero_violations);
}

TEST_CASE("curve follows a hand-traced example at window 1") {
    RunLog log = make_log({{10, 1.0, 1}, {20, 2.0, 0}, {30, 3.0, 1}});
    auto curve = reward_vs_violations_curve(log, 1);
    REQUIRE(curve.size() == 3);
    CHECK(curve[0].x == doctest::Approx(1.0));
    CHECK(curve[0].y == doctest::Approx(1.0));
    CHECK(curve[1].x == doctest::Approx(1.0));
    CHECK(curve[1].y == doctest::Approx(2.0));
    CHECK(curve[2].x == doctest::Approx(2.0));
    CHECK(curve[2].y == doctest::Approx(3.0));
}

TEST_CASE("curve x is the running violation count and never decreases") {
    RunLog log;
    long long step = 0;
    for (int i = 0; i < 40; ++i) {
        step += 10;
        log.episodes.push_back({step, static_cast<double>(i % 7), i % 3 == 0 ? 1 : 0});
    }
    auto curve = reward_vs_violations_curve(log, 10);
    REQUIRE(curve.size() == 40);
    int cum = 0;
    for (int i = 0; i < 40; ++i) {
        cum += log.episodes[static_cast<std::size_t>(i)].violated;
        CHECK(curve[static_cast<std::size_t>(i)].x == doctest::Approx(cum));
        if (i > 0) CHECK(curve[static_cast<std::size_t>(i)].x >= curve[static_cast<std::size_t>(i) - 1].x);
    }
}

TEST_CASE("curve y matches an independent trailing moving average") {
    RunLog log;
    long long step = 0;
    for (int i = 0; i < 25; ++i) {
        step += 5;
        log.episodes.push_back({step, std::sin(0.7 * i) * 3.0, i % 4 == 1 ? 1 : 0});
    }
    const int window = 10;
    auto curve = reward_vs_violations_curve(log, window);
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const std::size_t lo = i + 1 >= static_cast<std::size_t>(window) ? i + 1 - window : 0;
        double sum = 0.0;
        for (std::size_t j = lo; j <= i; ++j) sum += log.episodes[j].episode_reward;
        CHECK(curve[i].y == doctest::Approx(sum / static_cast<double>(i - lo + 1)).epsilon(1e-12));
    }
}

TEST_CASE("aggregate of a single curve is the curve itself with zero std") {
    std::vector<CurvePoint> c = {{0.0, 1.0}, {1.0, 2.0}, {3.0, 1.5}};
    auto agg = aggregate_seeds({c});
    REQUIRE(agg.x.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(agg.x[i] == doctest::Approx(c[i].x));
        CHECK(agg.mean[i] == doctest::Approx(c[i].y));
        CHECK(agg.std_dev[i] == doctest::Approx(0.0));
    }
}

TEST_CASE("identical curves aggregate with zero std") {
    std::vector<CurvePoint> c = {{0.0, 1.0}, {2.0, 3.0}};
    auto agg = aggregate_seeds({c, c, c});
    for (std::size_t i = 0; i < agg.x.size(); ++i) {
        CHECK(agg.std_dev[i] == doctest::Approx(0.0));
    }
}

TEST_CASE("aggregation interpolates onto the union grid with clamped ends") {
    // Curve A: y = x on [0, 2]; curve B: constant 4 at x = 1 only.
    std::vector<CurvePoint> a = {{0.0, 0.0}, {2.0, 2.0}};
    std::vector<CurvePoint> b = {{1.0, 4.0}};
    auto agg = aggregate_seeds({a, b});

    REQUIRE(agg.x.size() == 3);  // union {0, 1, 2}
    CHECK(agg.x[0] == doctest::Approx(0.0));
    CHECK(agg.x[1] == doctest::Approx(1.0));
    CHECK(agg.x[2] == doctest::Approx(2.0));

    // At x=0: A gives 0, B clamps to 4 -> mean 2, std 2.
    CHECK(agg.mean[0] == doctest::Approx(2.0));
    CHECK(agg.std_dev[0] == doctest::Approx(2.0));
    // At x=1: A interpolates to 1, B gives 4 -> mean 2.5.
    CHECK(agg.mean[1] == doctest::Approx(2.5));
    CHECK(agg.std_dev[1] == doctest::Approx(1.5));
    // At x=2: A gives 2, B clamps to 4 -> mean 3.
    CHECK(agg.mean[2] == doctest::Approx(3.0));
    CHECK(agg.std_dev[2] == doctest::Approx(1.0));
}

TEST_CASE("duplicate x within a curve collapse to the last y") {
    // Two episodes without new violations share x; the later one wins.
    std::vector<CurvePoint> c = {{0.0, 1.0}, {1.0, 2.0}, {1.0, 6.0}, {2.0, 3.0}};
    auto agg = aggregate_seeds({c});
    REQUIRE(agg.x.size() == 3);
    CHECK(agg.mean[1] == doctest::Approx(6.0));
}

TEST_CASE("run log validation rejects malformed logs") {
    RunLog bad_flag = make_log({{10, 1.0, 2}});
    CHECK_THROWS(bad_flag.validate());

    RunLog bad_order = make_log({{10, 1.0, 0}, {10, 1.0, 0}});
    CHECK_THROWS(bad_order.validate());

    RunLog ok = make_log({{10, 1.0, 0}, {11, -2.0, 1}});
    CHECK_NOTHROW(ok.validate());
}

TEST_CASE("curve csv round-trips through the pinned header") {
    std::vector<CurvePoint> c = {{0.0, 1.5}, {2.0, -0.5}};
    const std::string path = "test_curve.csv";
    write_curve_csv(c, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "cum_violations,avg_episode_reward");
    std::getline(in, line);
    CHECK(line == "0,1.5");
    std::getline(in, line);
    CHECK(line == "2,-0.5");
    in.close();
    std::remove(path.c_str());
}

TEST_CASE("aggregate csv uses the pinned header") {
    AggregatedCurve agg;
    agg.x = {0.0, 1.0};
    agg.mean = {2.0, 3.5};
    agg.std_dev = {0.0, 0.25};
    const std::string path = "test_agg.csv";
    write_aggregate_csv(agg, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "cum_violations,mean_reward,std_reward");
    std::getline(in, line);
    CHECK(line == "0,2,0");
    std::getline(in, line);
    CHECK(line == "1,3.5,0.25");
    in.close();
    std::remove(path.c_str());
}

TEST_CASE("summary json exports the ratio scaled by 1e3") {
    std::vector<SummaryRow> rows = {{"SSkP", "hazard_world_2d", 0.012, 12.0, false, 3},
                                    {"SSkP-NP", "hazard_world_2d", 0.010, 10.0, true, 0}};
    const std::string path = "test_summary.json";
    write_summary_json(rows, path);

    std::ifstream in(path);
    nlohmann::json j = nlohmann::json::parse(in);
    in.close();
    std::remove(path.c_str());

    REQUIRE(j.is_array());
    REQUIRE(j.size() == 2);
    CHECK(j[0].at("method") == "SSkP");
    CHECK(j[0].at("ptr_over_v_times_1e3").get<double>() == doctest::Approx(12.0));
    CHECK(j[1].at("zero_violations").get<bool>() == true);
    CHECK(j[0].at("violations").get<int>() == 3);
}

TEST_CASE("load_run_log_csv reads named columns and ignores extras") {
    const std::string path = "test_runlog.csv";
    {
        std::ofstream out(path);
        out << "env_step,episode,episode_reward,episode_len,violated,cum_violations\n";
        out << "40,0,10.5,40,0,0\n";
        out << "95,1,-2.25,55,1,1\n";
    }
    RunLog log = load_run_log_csv(path);
    std::remove(path.c_str());

    REQUIRE(log.episodes.size() == 2);
    CHECK(log.episodes[0].env_step == 40);
    CHECK(log.episodes[0].episode_reward == doctest::Approx(10.5));
    CHECK(log.episodes[0].violated == 0);
    CHECK(log.episodes[1].env_step == 95);
    CHECK(log.episodes[1].violated == 1);
}

TEST_CASE("load_run_log_csv rejects missing columns and ragged rows") {
    const std::string path = "test_runlog_bad.csv";
    {
        std::ofstream out(path);
        out << "env_step,episode_reward\n40,1.0\n";
    }
    CHECK_THROWS(load_run_log_csv(path));
    {
        std::ofstream out(path);
        out << "env_step,episode_reward,violated\n40,1.0\n";
    }
    CHECK_THROWS(load_run_log_csv(path));
    std::remove(path.c_str());
    CHECK_THROWS(load_run_log_csv("nonexistent_runlog.csv"));
}

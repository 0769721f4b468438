#include "sskp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "sskp/csv.hpp"
#include "sskp/errors.hpp"

#include "json.hpp"

namespace sskp {

void RunLog::validate() const {
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        const auto& e = episodes[i];
        if (e.violated != 0 && e.violated != 1)
            throw std::invalid_argument("RunLog: violated must be 0 or 1");
        if (i > 0 && e.env_step <= episodes[i - 1].env_step)
            throw std::invalid_argument("RunLog: env_step must be strictly increasing");
    }
}

int total_violations(const RunLog& log) {
    int n = 0;
    for (const auto& e : log.episodes) n += e.violated;
    return n;
}

double ptr(const RunLog& log, long long total_timesteps) {
    if (total_timesteps < 1) throw std::invalid_argument("ptr: total_timesteps must be >= 1");
    double sum = 0.0;
    for (const auto& e : log.episodes) sum += e.episode_reward;
    return sum / static_cast<double>(total_timesteps);
}

PtrOverViolations ptr_over_violations(const RunLog& log, long long total_timesteps) {
    PtrOverViolations out;
    const double p = ptr(log, total_timesteps);
    const int v = total_violations(log);
    out.zero_violations = (v == 0);
    out.value = out.zero_violations ? p : p / static_cast<double>(v);
    return out;
}

std::vector<CurvePoint> reward_vs_violations_curve(const RunLog& log, int window) {
    if (log.episodes.empty())
        throw std::invalid_argument("reward_vs_violations_curve: empty run log");
    if (window < 1) throw std::invalid_argument("reward_vs_violations_curve: window must be >= 1");

    std::vector<CurvePoint> curve(log.episodes.size());
    int cum = 0;
    double window_sum = 0.0;
    for (std::size_t i = 0; i < log.episodes.size(); ++i) {
        cum += log.episodes[i].violated;
        window_sum += log.episodes[i].episode_reward;
        if (i >= static_cast<std::size_t>(window))
            window_sum -= log.episodes[i - window].episode_reward;
        const int in_window = static_cast<int>(std::min<std::size_t>(i + 1, window));
        curve[i].x = static_cast<double>(cum);
        curve[i].y = window_sum / in_window;
    }
    return curve;
}

namespace {

// Collapse duplicate x (keep the last y) so the curve is a function of x.
std::vector<CurvePoint> collapse_x(const std::vector<CurvePoint>& curve) {
    std::vector<CurvePoint> out;
    for (const auto& p : curve) {
        if (!out.empty() && out.back().x == p.x) out.back().y = p.y;
        else out.push_back(p);
    }
    return out;
}

double interp_clamped(const std::vector<CurvePoint>& curve, double x) {
    if (x <= curve.front().x) return curve.front().y;
    if (x >= curve.back().x) return curve.back().y;
    auto hi = std::lower_bound(curve.begin(), curve.end(), x,
                               [](const CurvePoint& p, double v) { return p.x < v; });
    if (hi->x == x) return hi->y;
    auto lo = hi - 1;
    const double t = (x - lo->x) / (hi->x - lo->x);
    return lo->y + t * (hi->y - lo->y);
}

}  // namespace

AggregatedCurve aggregate_seeds(const std::vector<std::vector<CurvePoint>>& curves) {
    if (curves.empty()) throw std::invalid_argument("aggregate_seeds: no curves");

    std::vector<std::vector<CurvePoint>> collapsed;
    std::vector<double> grid;
    for (const auto& c : curves) {
        if (c.empty()) throw std::invalid_argument("aggregate_seeds: empty curve");
        collapsed.push_back(collapse_x(c));
        for (const auto& p : collapsed.back()) grid.push_back(p.x);
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    AggregatedCurve out;
    out.x = grid;
    out.mean.resize(grid.size());
    out.std_dev.resize(grid.size());
    const double n = static_cast<double>(collapsed.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double sum = 0.0, sum_sq = 0.0;
        for (const auto& c : collapsed) {
            const double y = interp_clamped(c, grid[i]);
            sum += y;
            sum_sq += y * y;
        }
        out.mean[i] = sum / n;
        out.std_dev[i] = std::sqrt(std::max(0.0, sum_sq / n - out.mean[i] * out.mean[i]));
    }
    return out;
}

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_curve_csv: cannot open " + path);
    out << "cum_violations,avg_episode_reward\n";
    for (const auto& p : curve) out << csv_num(p.x) << "," << csv_num(p.y) << "\n";
}

void write_aggregate_csv(const AggregatedCurve& agg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_aggregate_csv: cannot open " + path);
    out << "cum_violations,mean_reward,std_reward\n";
    for (std::size_t i = 0; i < agg.x.size(); ++i)
        out << csv_num(agg.x[i]) << "," << csv_num(agg.mean[i]) << ","
            << csv_num(agg.std_dev[i]) << "\n";
}

void write_summary_json(const std::vector<SummaryRow>& rows, const std::string& path) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows)
        j.push_back({{"method", r.method},
                     {"env", r.env},
                     {"ptr", r.ptr},
                     {"ptr_over_v_times_1e3", r.ptr_over_v_times_1e3},
                     {"zero_violations", r.zero_violations},
                     {"violations", r.violations}});
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_summary_json: cannot open " + path);
    out << j.dump(2) << "\n";
}

RunLog load_run_log_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("load_run_log_csv: cannot open " + path);

    auto split = [](const std::string& line) {
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        return fields;
    };

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_run_log_csv: empty file " + path);
    const auto header = split(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* required : {"env_step", "episode_reward", "violated"})
        if (!col.count(required))
            throw std::runtime_error(std::string("load_run_log_csv: missing column '") + required +
                                     "' in " + path);

    RunLog log;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split(line);
        if (fields.size() != header.size())
            throw std::runtime_error("load_run_log_csv: ragged row in " + path);
        EpisodeRecord e;
        e.env_step = std::stoll(fields[col["env_step"]]);
        e.episode_reward = std::stod(fields[col["episode_reward"]]);
        e.violated = std::stoi(fields[col["violated"]]);
        log.episodes.push_back(e);
    }
    log.validate();
    return log;
}

}  // namespace sskp

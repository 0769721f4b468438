#pragma once

#include <string>
#include <vector>

namespace sskp {

struct EpisodeRecord {
    long long env_step = 0;  // env step count at episode end
    double episode_reward = 0.0;
    int violated = 0;  // 0/1
};

struct RunLog {
    std::vector<EpisodeRecord> episodes;

    // env_step strictly increasing, violated in {0,1}.
    void validate() const;
};

int total_violations(const RunLog& log);

// Per-timestep reward: sum of episode rewards / total timesteps.
double ptr(const RunLog& log, long long total_timesteps);

struct PtrOverViolations {
    double value = 0.0;
    bool zero_violations = false;  // #V = 0: value is PtR / 1 by convention
};
PtrOverViolations ptr_over_violations(const RunLog& log, long long total_timesteps);

struct CurvePoint {
    double x = 0.0;  // cumulative violations
    double y = 0.0;  // trailing-window average episode reward
};

// One point per episode: x = running violation count, y = mean reward over the
// trailing `window` episodes.
std::vector<CurvePoint> reward_vs_violations_curve(const RunLog& log, int window = 10);

struct AggregatedCurve {
    std::vector<double> x;
    std::vector<double> mean;
    std::vector<double> std_dev;  // population std across curves
};

// Shared grid = sorted unique union of all curves' x values (duplicate x within a
// curve collapse to the last y); each curve is linearly interpolated onto the grid
// with constant extension beyond its endpoints.
AggregatedCurve aggregate_seeds(const std::vector<std::vector<CurvePoint>>& curves);

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path);
void write_aggregate_csv(const AggregatedCurve& agg, const std::string& path);

// Summary entry in the style of a results table; ratio exported ×10³.
struct SummaryRow {
    std::string method;
    std::string env;
    double ptr = 0.0;
    double ptr_over_v_times_1e3 = 0.0;
    bool zero_violations = false;
    int violations = 0;
};
void write_summary_json(const std::vector<SummaryRow>& rows, const std::string& path);

// Reads a metrics CSV with named columns; requires env_step, episode_reward,
// violated (extra columns ignored).
RunLog load_run_log_csv(const std::string& path);

}  // namespace sskp

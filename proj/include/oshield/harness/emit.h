#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "oshield/harness/experiment.h"

namespace oshield::harness {

// rollouts.csv: run_id,t,<state...>,<action...>,branch,safe,wall_ns
std::string rollouts_header(const dyn::Environment& env);
void write_rollouts_csv(std::ostream& os, const dyn::Environment& env, const std::vector<RolloutResult>& rollouts);

// summary.csv: env,variant,mode,T,reward_mean,reward_se,p_safe_state,p_safe_traj,reject_rate
extern const char* const kSummaryHeader;
void write_summary_csv(std::ostream& os, const std::vector<Metrics>& rows);
// Fills the summary.csv columns; the remaining Metrics fields stay default.
std::vector<Metrics> read_summary_csv(std::istream& is);

// usage.csv: t,frac_learned,frac_recovery,frac_lqr
extern const char* const kUsageHeader;
void write_usage_csv(std::ostream& os, const std::vector<std::array<double, 3>>& usage);
std::vector<std::array<double, 3>> read_usage_csv(std::istream& is);

// latency.csv: T,mean_ns,se_ns,samples
void write_latency_csv(std::ostream& os, const std::vector<LatencyPoint>& points);

void write_usage_svg(std::ostream& os, const std::vector<std::array<double, 3>>& usage, const std::string& title);
// Reward (with standard-error bars) against T.
void write_sweep_svg(std::ostream& os, const std::vector<Metrics>& rows, const std::string& title);
void write_latency_svg(std::ostream& os, const std::vector<LatencyPoint>& points, const std::string& title);

// Opens path for writing, runs fn, raises IoError on failure.
void write_file(const std::string& path, const std::function<void(std::ostream&)>& fn);

}  // namespace oshield::harness

#pragma once

// Serialization of run artifacts: RFC 4180 trajectory CSV and JSON summaries.

#include "adaptobs/experiments.hpp"

#include <json.hpp>

#include <ostream>
#include <string>
#include <vector>

namespace adaptobs {

// Quotes a field when it contains a comma, a double quote, CR or LF.
std::string csv_escape(const std::string& field);

// t, x0, x0_hat, theta_hat_1..d, lambda_hat_1..s, e_deadzone, then <channel>, <channel>_hat.
std::vector<std::string> trajectory_header(const ExperimentResult& res);

// CRLF-terminated records, header first, numbers with 12 significant digits.
void write_trajectory_csv(std::ostream& out, const ExperimentResult& res);

struct ChannelError {
  std::string name;
  double max_relative = 0.0;  // max |est - truth| / |truth| over the window
  double rms_relative = 0.0;  // rms(est - truth) / rms(truth) over the window
  double peak_relative = 0.0; // max_relative over the whole run, for trend reporting
};

// Tracking error of each reconstruction channel over the final `fraction` of the samples.
std::vector<ChannelError> channel_errors(const ExperimentResult& res, double fraction);

nlohmann::json summary_json(const ExperimentConfig& cfg, const ExperimentResult& res);
nlohmann::json pe_json(const ExperimentConfig& cfg, const PEAnalysis& pe);
nlohmann::json bounds_json(const ExperimentConfig& cfg, const BoundsReport& b);

}  // namespace adaptobs

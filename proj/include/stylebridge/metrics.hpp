#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "stylebridge/losses.hpp"

namespace stylebridge {

struct BatchRecord {
  std::size_t step = 0;
  std::string domain_kind;
  int severity = 0;
  double batch_error = 0.0;
  double cum_error = 0.0;
  LossBreakdown losses;
};

struct DomainError {
  std::string tag;  // "<kind>:<severity>"
  double mean_error = 0.0;
  std::size_t batches = 0;
};

struct MetricsReport {
  std::vector<BatchRecord> rows;
  std::vector<DomainError> per_domain;  // first-appearance order
  double overall_error = 0.0;
  double wall_seconds = 0.0;
  std::string stream_hash;
};

/// Columns: step, domain_kind, severity, batch_error, cum_error, loss_pce,
/// loss_scl, loss_st, loss_total, lr, seed. Formatting is fixed-width
/// scientific, so identical runs produce byte-identical files.
void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report, double lr,
                       std::uint64_t seed);

/// Per-domain and overall mean errors, the full resolved config, and wall
/// time.
void write_summary_json(const std::filesystem::path& path, const MetricsReport& report,
                        const nlohmann::json& config_echo);

nlohmann::json summary_to_json(const MetricsReport& report, const nlohmann::json& config_echo);

}  // namespace stylebridge

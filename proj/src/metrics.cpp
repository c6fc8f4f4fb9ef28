#include "stylebridge/metrics.hpp"

#include <cstdio>
#include <fstream>

namespace stylebridge {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report, double lr,
                       std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "step,domain_kind,severity,batch_error,cum_error,loss_pce,loss_scl,loss_st,loss_total,lr,seed\n";
  for (const BatchRecord& r : report.rows) {
    out << r.step << ',' << r.domain_kind << ',' << r.severity << ',' << fmt(r.batch_error) << ','
        << fmt(r.cum_error) << ',' << fmt(r.losses.pce) << ',' << fmt(r.losses.scl) << ','
        << fmt(r.losses.st) << ',' << fmt(r.losses.total) << ',' << fmt(lr) << ',' << seed << '\n';
  }
  if (!out) throw std::runtime_error("short write to " + path.string());
}

nlohmann::json summary_to_json(const MetricsReport& report, const nlohmann::json& config_echo) {
  nlohmann::json j;
  j["overall_error"] = report.overall_error;
  j["per_domain"] = nlohmann::json::array();
  for (const DomainError& d : report.per_domain)
    j["per_domain"].push_back(
        {{"domain", d.tag}, {"mean_error", d.mean_error}, {"batches", d.batches}});
  j["batches"] = report.rows.size();
  j["wall_seconds"] = report.wall_seconds;
  j["stream_hash"] = report.stream_hash;
  j["config"] = config_echo;
  return j;
}

void write_summary_json(const std::filesystem::path& path, const MetricsReport& report,
                        const nlohmann::json& config_echo) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << summary_to_json(report, config_echo).dump(2) << "\n";
}

}  // namespace stylebridge

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stylebridge/engine.hpp"

namespace stylebridge {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitAbort = 3;
inline constexpr int kExitIo = 4;

/// Everything an adaptation run needs: the adapt config plus stream, source
/// and knowledge-base specs. Values resolve as flag > config file > default.
struct RunConfig {
  AdaptConfig adapt;
  std::optional<UpdateScope> explicit_scope;  // unset -> variant-dependent default

  // stream spec
  int severity = 5;
  std::vector<std::string> domain_names;  // empty -> all 8 kinds
  std::size_t batches_per_domain = 20;
  bool mixed = false;
  std::uint64_t stream_seed = 7;
  std::uint64_t mixed_seed = 99;

  // knowledge-base spec
  std::string kb_dir;  // non-empty -> load instead of procedural build
  std::size_t kb_classes = 10;
  std::size_t kb_per_class = 2;
  std::uint64_t kb_seed = 5;

  std::string checkpoint;
  std::string out_dir = "runs/adapt";
  std::string precision = "float32";

  void resolve();  // applies variant-dependent defaults, validates
  std::vector<DomainSpec> domains() const;
  nlohmann::json to_json() const;  // full echo, no hidden defaults

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::filesystem::path& path);
};

KnowledgeBase build_kb(const RunConfig& cfg);
std::vector<Batch> build_stream(const RunConfig& cfg);

/// Runs one episode per the config and writes metrics.csv + summary.json
/// under out_dir. Returns a process exit code.
int cmd_adapt(const RunConfig& cfg);

/// Entry point used by the binary; parses subcommands and flags.
int run_cli(int argc, char** argv);

}  // namespace stylebridge

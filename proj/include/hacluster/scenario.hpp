#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hacluster/config.hpp"
#include "hacluster/fabric.hpp"

namespace hacluster {

/// One scripted step. `at` is virtual milliseconds from boot; `jitter` adds a
/// seeded uniform offset in [0, jitter).
struct ScriptStep {
  enum class Kind { Inject, Probe };
  Kind kind = Kind::Probe;
  Millis at{0};
  Millis jitter{0};
  std::vector<std::string> args;  // verb first
  int line = 0;
};

struct Expectation {
  std::string metric;
  std::string op;  // == != <= >= < >
  std::string value;
  int line = 0;
};

/// Parsed scenario script.
///
///   TOPOLOGY two_tier|three_tier     BACKENDS <n>    MEMBERS <n>
///   SEED <n>    LATENCY <ms>    DROP <p>    DURATION <ms>    CONFIG <path>
///   AT <ms>[+<jitter>] INJECT crash|restart|partition|heal|kill|detach-volume|
///                             reattach-volume|fence-off|fence-on ...
///   AT <ms>[+<jitter>] PROBE load|bench|write|check-content|relocate|status ...
///   EXPECT <metric> <op> <value>
struct Scenario {
  std::string name;
  std::optional<std::filesystem::path> config;
  std::optional<TopologyKind> topology;
  std::optional<int> backends;
  std::optional<int> members;
  std::optional<std::uint64_t> seed;
  std::optional<Millis> latency;
  std::optional<double> drop_rate;
  Millis duration{30000};
  std::vector<ScriptStep> steps;
  std::vector<Expectation> expectations;

  /// Throws Error(ScriptParseError) naming the offending line.
  static Scenario parse(std::string_view text, std::string name = "scenario");
  static Scenario load(const std::filesystem::path& path);
};

/// Fault named by INJECT arguments (verb first). Throws ScriptParseError.
Fault parse_fault(const std::vector<std::string>& args);

struct ExpectationResult {
  Expectation expectation;
  bool passed = false;
  std::string actual;
};

struct ScenarioReport {
  std::string name;
  std::map<std::string, std::string> metrics;
  std::vector<ExpectationResult> results;
  std::vector<std::string> violations;
  std::vector<std::string> log;  // timeline of injections and probe results
  std::uint64_t digest = 0;

  bool passed() const;
  std::optional<double> number(const std::string& metric) const;
  std::string render() const;
};

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides SEED
  FabricMode mode = FabricMode::Simulated;
  std::optional<int> base_port;       // loopback mode
  bool keep_trace = false;
};

/// Boots the configured topology, drives the script, evaluates EXPECT lines.
ScenarioReport run_scenario(const Scenario& scenario, const Deployment& base,
                            const RunOptions& options = {});
ScenarioReport run_scenario(const Scenario& scenario, const RunOptions& options = {});

}  // namespace hacluster

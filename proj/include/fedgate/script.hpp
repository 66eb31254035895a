#pragma once

// Line-oriented scenario scripts driving a broker built from a config.
//
//   tick <seconds>
//   login <var> <user> <password> <source>        must succeed
//   try-login <user> <password> <source>          failure is audited, not fatal
//   read <var> <nn> <path> <node>
//   write <var> <nn> <path> <sizeMB> <node>
//   call <var> <nn> <path> <op> <node>            metadata-only operation
//   direct-read <user> <source> <nn> <path> <node>
//   direct-write <user> <source> <nn> <path> <sizeMB> <node>
//   expect allow|deny [ErrorCode]                 checks the last request
//   mkdir <nn> <path> <owner> <group> <mode> [tag...]
//   policy create <json> | policy enable <id> | policy disable <id>
//   grant|revoke <principal> <service> <op>
//   member|unmember <user> <group>
//   skew <node> <offsetSeconds> | silence <node> | resume <node>
//   query <name> <start> <end> [none|source|decision]
//   spike <start> <end> <baselineStart> <baselineEnd> <factor>
//   denylist [unauthorized-only]
//   repeat <n> [as <var>] ... end                 {var} expands to 0..n-1 (default var i)
//
// "#" starts a comment line.

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedgate/audit.hpp"
#include "fedgate/config.hpp"

namespace fedgate {

struct ScenarioOutcome {
  std::size_t commands = 0;
  /// Attempts that produce an audit record (requests and failed logins).
  std::size_t requests = 0;
  std::size_t allowed = 0;
  std::size_t denied = 0;
  CentralAuditStore audit;
  std::map<std::string, std::map<std::string, std::size_t>> queries;
  std::optional<SpikeReport> spike;
  bool spikeChecked = false;
  std::optional<std::vector<std::string>> denylist;
};

/// Errors carry "<scriptName>:<line>: ". With a non-empty outDir, writes
/// audit.jsonl, query-<name>.json, spike.json, denylist.txt and summary.json.
ScenarioOutcome run_scenario(const ClusterConfig& config, std::istream& script,
                             const std::string& scriptName, const std::string& outDir = {});

std::string summary_json(const ScenarioOutcome& outcome);

}  // namespace fedgate

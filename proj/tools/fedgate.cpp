#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fedgate/bench.hpp"
#include "fedgate/config.hpp"
#include "fedgate/script.hpp"
#include "fedgate/service.hpp"

using namespace fedgate;

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << text;
}

int cmd_init(const std::string& configPath) {
  const auto config = load_config(configPath);
  const auto broker = build_broker(config);
  const auto& cluster = broker->cluster();
  std::cout << "namenodes " << cluster.namenode_ids().size() << ", datanodes " << cluster.datanode_ids().size()
            << ", secure " << (cluster.config().secureMode ? "yes" : "no") << ", policies "
            << broker->policies()->policies().size() << ", enforcers " << broker->registry().enforcers().size()
            << ", registration auth events " << cluster.counters().registrationAuthEvents << "\n";
  return 0;
}

int cmd_run(const std::string& configPath, const std::string& scriptPath, const std::string& outDir) {
  const auto config = load_config(configPath);
  std::ifstream script(scriptPath);
  if (!script) throw Error(ErrorCode::InvalidArgument, "cannot read " + scriptPath);
  const auto outcome = run_scenario(config, script, scriptPath, outDir);
  std::cout << summary_json(outcome);
  if (outcome.denylist) {
    for (const auto& line : *outcome.denylist) std::cout << line << "\n";
  }
  return 0;
}

int cmd_bench(const std::string& configPath, const std::vector<double>& sizes, const std::string& outDir,
              bool intercept) {
  const auto config = load_config(configPath);
  const auto report = bench_overhead(config, sizes);
  std::cout << format_report("read", report.read, intercept) << "\n"
            << format_report("write", report.write, intercept);
  if (!outDir.empty()) {
    std::filesystem::create_directories(outDir);
    write_text(std::filesystem::path(outDir) / "bench_read.csv", to_csv(report.read));
    write_text(std::filesystem::path(outDir) / "bench_write.csv", to_csv(report.write));
  }
  return 0;
}

int cmd_fit(const std::string& csvPath, bool intercept) {
  const auto result = ingest_paper_table(csvPath);
  std::cout << format_report(csvPath, result, intercept);
  return 0;
}

struct SpikeArgs {
  ClusterTime start = 0, end = 0, baselineStart = 0, baselineEnd = 0;
  double factor = 10.0;
};

std::optional<SpikeReport> spike_of(const std::string& store, const SpikeArgs& a) {
  return CentralAuditStore::load(store).detect_spike(a.start, a.end, a.baselineStart, a.baselineEnd, a.factor);
}

void add_spike_flags(CLI::App* cmd, SpikeArgs& a) {
  cmd->add_option("--start", a.start, "observed window start")->required();
  cmd->add_option("--end", a.end, "observed window end")->required();
  cmd->add_option("--baseline-start", a.baselineStart, "baseline window start")->required();
  cmd->add_option("--baseline-end", a.baselineEnd, "baseline window end")->required();
  cmd->add_option("--factor", a.factor, "threshold factor")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedgate: federated access broker and HDFS federation simulator"};
  app.require_subcommand(1);

  std::string configPath, scriptPath, outDir, csvPath, storePath, host = "127.0.0.1", groupBy = "none";
  std::vector<double> sizes{100, 200, 300, 400, 500};
  bool intercept = false, unauthorizedOnly = false;
  int port = 8080;
  ClusterTime qStart = 0, qEnd = 0;
  SpikeArgs spikeArgs;

  auto* init = app.add_subcommand("init", "bootstrap a cluster from a config and print its shape");
  init->add_option("config", configPath)->required()->check(CLI::ExistingFile);

  auto* run = app.add_subcommand("run", "run a scenario script");
  run->add_option("config", configPath)->required()->check(CLI::ExistingFile);
  run->add_option("script", scriptPath)->required()->check(CLI::ExistingFile);
  run->add_option("--out", outDir, "artifact directory");

  auto* bench = app.add_subcommand("bench", "broker-vs-native overhead benchmark");
  bench->add_option("config", configPath)->required()->check(CLI::ExistingFile);
  bench->add_option("--sizes", sizes, "file sizes in MB")->delimiter(',')->capture_default_str();
  bench->add_option("--out", outDir, "directory for CSV plot data");
  bench->add_flag("--intercept", intercept, "also print the ordinary fit");

  auto* fit = app.add_subcommand("fit", "fit slopes and statistics from a size,native,broker CSV");
  fit->add_option("csv", csvPath)->required()->check(CLI::ExistingFile);
  fit->add_flag("--intercept", intercept, "also print the ordinary fit");

  auto* audit = app.add_subcommand("audit", "forensic queries over a JSONL audit store");
  audit->require_subcommand(1);
  auto* query = audit->add_subcommand("query", "count records in [start, end)");
  query->add_option("store", storePath)->required()->check(CLI::ExistingFile);
  query->add_option("--start", qStart)->required();
  query->add_option("--end", qEnd)->required();
  query->add_option("--group-by", groupBy, "none|source|decision")->capture_default_str();
  auto* spike = audit->add_subcommand("spike", "compare a window against a baseline");
  spike->add_option("store", storePath)->required()->check(CLI::ExistingFile);
  add_spike_flags(spike, spikeArgs);
  auto* deny = audit->add_subcommand("denylist", "emit deny rules for spike sources");
  deny->add_option("store", storePath)->required()->check(CLI::ExistingFile);
  add_spike_flags(deny, spikeArgs);
  deny->add_flag("--unauthorized-only", unauthorizedOnly, "skip sources whose requests were all allowed");

  auto* serve = app.add_subcommand("serve", "serve the broker over HTTP");
  serve->add_option("config", configPath)->required()->check(CLI::ExistingFile);
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--host", host)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*init) return cmd_init(configPath);
    if (*run) return cmd_run(configPath, scriptPath, outDir);
    if (*bench) return cmd_bench(configPath, sizes, outDir, intercept);
    if (*fit) return cmd_fit(csvPath, intercept);
    if (*query) {
      const auto counts = CentralAuditStore::load(storePath).query_window(qStart, qEnd, parse_group_by(groupBy));
      std::cout << nlohmann::json(counts).dump() << "\n";
      return 0;
    }
    if (*spike) {
      const auto report = spike_of(storePath, spikeArgs);
      std::cout << (report ? to_json(*report) : "null") << "\n";
      return 0;
    }
    if (*deny) {
      const auto report = spike_of(storePath, spikeArgs);
      if (!report) throw Error(ErrorCode::EmptyReport, "no spike in the given window");
      for (const auto& line : emit_denylist(*report, unauthorizedOnly)) std::cout << line << "\n";
      return 0;
    }
    if (*serve) {
      const auto config = load_config(configPath);
      auto broker = build_broker(config);
      BrokerService service(*broker);
      std::cerr << "listening on " << host << ":" << port << "\n";
      service.listen(host, port);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "fedgate: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

#pragma once

// Cluster configuration document: topology, host table, permission model,
// policies, token lifetimes and cost-model parameters. Unknown fields are
// rejected with the offending field path.

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedgate/authz.hpp"
#include "fedgate/broker.hpp"
#include "fedgate/cluster.hpp"
#include "fedgate/tokens.hpp"

namespace fedgate {

struct NodeSpec {
  std::string id;
  std::string rack;
};

struct DirectorySpec {
  std::string nameNode;
  std::string path;
  FileAttrs attrs;
  std::set<std::string> tags;
};

struct FileSpec {
  std::string nameNode;
  std::string path;
  double sizeMB = 0.0;
  std::string owner;
  std::string writerNode;
};

struct HostSpec {
  std::string username;
  std::string password;
  std::set<std::string> sources;
};

struct BenchSpec {
  std::string user;
  std::string password;
  std::string source;
  std::string nameNode;
  std::string directory;
  std::string clientNode;
};

struct ClusterConfig {
  std::uint64_t seed = 1;
  SimConfig sim;
  TokenConfig tokens;
  ClusterTime sessionLifetime = 10 * kHour;
  ClusterTime defaultCertificateLifetime = kHour;

  std::vector<NodeSpec> clientNodes;
  std::vector<NodeSpec> nameNodes;
  std::vector<FileAttrs> nameNodeRoots;
  std::vector<NodeSpec> dataNodes;
  std::vector<DirectorySpec> directories;
  std::vector<FileSpec> files;

  std::vector<HostSpec> hostTable;
  std::map<std::string, std::string> countries;

  std::vector<std::string> users;
  std::vector<std::string> groups;
  std::vector<ServiceId> extraServices;
  std::vector<ModelEdit> edits;
  std::vector<Policy> policies;

  std::optional<BenchSpec> bench;
};

ClusterConfig parse_config(const nlohmann::json& doc);
ClusterConfig parse_config_text(std::string_view text);
ClusterConfig load_config(const std::string& path);

/// Boots the cluster (DataNodes authenticate per NameNode in secure mode),
/// seeds model, policies and host table, and wraps everything in a broker.
std::unique_ptr<Broker> build_broker(const ClusterConfig& config,
                                     std::optional<bool> secureOverride = std::nullopt);

}  // namespace fedgate

#pragma once

// Deterministic discrete-time simulator of an HDFS federation: independent
// NameNodes (namespace + block pool), DataNodes registered with every
// NameNode, heartbeat liveness, rack-aware placement and a transfer cost model.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fedgate/audit.hpp"
#include "fedgate/namespace_tree.hpp"
#include "fedgate/tokens.hpp"

namespace fedgate {

struct SimConfig {
  ClusterTime heartbeatInterval = 3;
  ClusterTime expiryCheckInterval = 200;
  ClusterTime heartbeatTimeout = 200;
  double blockSizeMB = 128.0;
  double bandwidthMBps = 40.0;
  double remoteRackPenalty = 0.05;
  double perCallAuthLatency = 0.02;
  std::size_t replicationFactor = 3;
  bool secureMode = false;
  std::uint64_t seed = 1;
};

struct Block {
  std::string blockId;
  std::string fileId;
  double sizeMB = 0.0;
  std::vector<std::string> replicas;
};

struct NameNodeState {
  std::string namespaceId;
  NamespaceTree tree;
  std::map<std::string, Block> blockPool;
  LocalAuditLog auditLog;
  /// Key shared with every DataNode for block access tokens.
  Secret blockKey{};
};

struct DataNodeState {
  std::string nodeId;
  std::set<std::string> storedReplicas;
  std::map<std::string, ClusterTime> lastHeartbeat;
  std::map<std::string, bool> alivePerNN;
  /// Fault injection: a silenced node stops sending heartbeats.
  bool silenced = false;
};

struct FileEntry {
  std::string namespaceId;
  std::string path;
  double sizeMB = 0.0;
  std::vector<std::string> blocks;
  FileAttrs attrs;
  double elapsedSeconds = 0.0;
};

struct ReadResult {
  double bytesMB = 0.0;
  double elapsedSeconds = 0.0;
  std::size_t remoteBlocks = 0;
  std::vector<std::string> servedBy;
};

/// Reader-to-replica distance; lower is preferred.
enum class Proximity : std::uint8_t { Local = 0, SameRack = 1, RemoteRack = 2 };

struct SimCounters {
  std::uint64_t registrationAuthEvents = 0;
  std::uint64_t clientCalls = 0;
  std::uint64_t blockTokenChecks = 0;
  std::map<std::pair<std::string, std::string>, std::uint64_t> heartbeats;  // (dn, nn)
};

class Cluster {
 public:
  explicit Cluster(SimConfig config = {});

  [[nodiscard]] const SimConfig& config() const { return config_; }
  [[nodiscard]] ClusterTime now() const { return now_; }

  /// Any host: client machines, NameNode and DataNode hosts.
  void add_node(const std::string& nodeId, const std::string& rackId);
  [[nodiscard]] bool has_node(const std::string& nodeId) const { return nodes_.contains(nodeId); }
  [[nodiscard]] const std::string& rack_of(const std::string& nodeId) const;
  [[nodiscard]] std::vector<std::string> racks() const;

  /// Adds a NameNode hosting namespace `namespaceId` on a new node of that id.
  /// Already-registered DataNodes register with it too.
  void add_namenode(const std::string& namespaceId, const std::string& rackId,
                    FileAttrs rootAttrs = {"hdfs", "supergroup", Mode(0755), {}});

  /// Key under which secure-mode registration tickets must verify.
  void set_authority_secret(const Secret& secret) { authoritySecret_ = secret; }

  /// Registers the DataNode with every NameNode, one authentication event
  /// each. In secure mode a valid ticket per NameNode is required.
  void register_datanode(const std::string& nodeId, const std::string& rackId,
                         const std::map<std::string, HandshakeTicket>* tickets = nullptr);

  /// Advances simulation time, emitting heartbeats and running expiry checks.
  void tick(ClusterTime dtSeconds);

  void silence_datanode(const std::string& nodeId);
  void resume_datanode(const std::string& nodeId);

  void set_node_clock_offset(const std::string& nodeId, ClusterTime offsetSeconds);
  [[nodiscard]] ClusterTime node_now(const std::string& nodeId) const;

  [[nodiscard]] bool is_live(const std::string& namespaceId, const std::string& dataNode) const;
  [[nodiscard]] std::vector<std::string> live_datanodes(const std::string& namespaceId) const;

  [[nodiscard]] Proximity proximity(const std::string& reader, const std::string& node) const;

  /// First replica on the writer, second off-rack, third on the writer's
  /// rack, further ones round-robin over racks. Falls back to any distinct
  /// live node when a rack constraint cannot be met.
  std::vector<std::string> place_replicas(const std::string& namespaceId,
                                          const std::string& writerNode, std::size_t factor);

  /// Live replica with the best proximity, ties to the smallest node id.
  [[nodiscard]] std::string select_replica(const std::string& namespaceId, const std::string& readerNode,
                                           const Block& block) const;

  void mkdir(const std::string& namespaceId, const std::string& path, FileAttrs attrs,
             std::set<std::string> tags = {});

  /// Write-once: fails with FileExists for any existing path.
  FileEntry write_file(const std::string& namespaceId, const std::string& path, double sizeMB,
                       const std::string& creator, const std::string& writerNode,
                       std::size_t authEvents);

  /// In secure mode every block needs a valid Read token, checked at the
  /// serving DataNode's clock before any bytes move.
  ReadResult read_file(const std::string& readerNode, const std::string& namespaceId,
                       const std::string& path,
                       const std::map<std::string, BlockToken>* blockTokens, std::size_t authEvents);

  [[nodiscard]] const NameNodeState& namenode(const std::string& namespaceId) const;
  NameNodeState& namenode(const std::string& namespaceId);
  [[nodiscard]] bool has_namenode(const std::string& namespaceId) const {
    return nameNodes_.contains(namespaceId);
  }
  [[nodiscard]] std::vector<std::string> namenode_ids() const;
  [[nodiscard]] const DataNodeState& datanode(const std::string& nodeId) const;
  [[nodiscard]] std::vector<std::string> datanode_ids() const;
  [[nodiscard]] const SimCounters& counters() const { return counters_; }

 private:
  void register_with(DataNodeState& dn, const std::string& namespaceId);
  std::string pick(std::vector<std::string> candidates);

  SimConfig config_;
  ClusterTime now_ = 0;
  std::mt19937_64 rng_;
  std::map<std::string, std::string> nodes_;  // node -> rack
  std::map<std::string, ClusterTime> clockOffsets_;
  std::map<std::string, NameNodeState> nameNodes_;
  std::map<std::string, DataNodeState> dataNodes_;
  std::optional<Secret> authoritySecret_;
  SimCounters counters_;
  std::uint64_t nextBlock_ = 1;
};

}  // namespace fedgate

#pragma once

// Access broker: the single entry point chaining gateway login, handshake,
// delegation token, session certificate, per-NameNode enforcer and
// per-DataNode agents in front of the simulated cluster.

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fedgate/audit.hpp"
#include "fedgate/authz.hpp"
#include "fedgate/cluster.hpp"
#include "fedgate/gateway.hpp"
#include "fedgate/policy_model.hpp"
#include "fedgate/tokens.hpp"

namespace fedgate {

struct Enforcer {
  std::string nameNode;
  std::set<std::string> agents;
  LocalAuditLog log;
  std::uint64_t calls = 0;
};

struct Agent {
  std::string service;
  std::uint64_t calls = 0;
};

/// One enforcer per NameNode, one agent per DataNode. Agents are shared by
/// every enforcer that lists them.
class EnforcerRegistry {
 public:
  void register_enforcement(const Cluster& cluster, const std::string& nameNode,
                            const std::vector<std::string>& dataNodes);

  [[nodiscard]] const std::map<std::string, Enforcer>& enforcers() const { return enforcers_; }
  [[nodiscard]] const std::map<std::string, Agent>& agents() const { return agents_; }
  Enforcer* find_enforcer(const std::string& nameNode);
  Agent* find_agent(const std::string& dataNode);

 private:
  std::map<std::string, Enforcer> enforcers_;
  std::map<std::string, Agent> agents_;
};

struct BrokerConfig {
  Secret authoritySecret{};
  TokenConfig tokens;
  ClusterTime sessionLifetime = 10 * kHour;
  ClusterTime defaultCertificateLifetime = kHour;
  /// Static source address -> country table used to label audit records.
  std::map<std::string, std::string> countries;
  std::uint64_t seed = 1;
};

struct OpenedSession {
  std::string sessionId;
  SessionCertificate certificate;
};

struct BrokerRequest {
  std::string sessionId;
  std::string service;  // NameNode / namespace id
  std::string path;
  OpKind op = OpKind::Read;
  double sizeMB = 0.0;  // writes only
  std::string clientNode;
};

/// Native access without any security layer.
struct DirectRequest {
  std::string user;
  std::string sourceAddr;
  std::string service;
  std::string path;
  OpKind op = OpKind::Read;
  double sizeMB = 0.0;
  std::string clientNode;
};

struct ServiceResult {
  Effect decision = Effect::Deny;
  AuditStage stage = AuditStage::Service;
  std::optional<ErrorCode> error;
  std::string message;
  std::optional<Provenance> provenance;
  std::string policyId;
  double bytesMB = 0.0;
  double elapsedSeconds = 0.0;
  std::size_t blocks = 0;

  [[nodiscard]] bool ok() const { return decision == Effect::Allow; }
};

struct BrokerCounters {
  std::uint64_t handleRequests = 0;
  std::uint64_t directRequests = 0;
  std::uint64_t failedOpens = 0;
  std::uint64_t authorizeCalls = 0;
  /// Messages that reached an enforcer, agent or simulated daemon.
  std::uint64_t daemonMessages = 0;
};

class Broker {
 public:
  /// Registers an enforcer for every NameNode with agents for every DataNode.
  Broker(Cluster cluster, PermissionModel model, PolicyRepository repo, HostTable hosts,
         BrokerConfig config);

  /// Login, handshake, delegation token, then certificate. Any failure is
  /// audited and rethrown; nothing reaches the enforcers.
  OpenedSession open_session(const Credential& credential);

  /// Exactly one audit record per call, whatever the outcome.
  ServiceResult handle_request(const BrokerRequest& request);

  /// Bypasses every security stage; requires a non-secure cluster. Writes
  /// one record to the NameNode's local audit log.
  ServiceResult direct_request(const DirectRequest& request);

  void register_enforcement(const std::string& nameNode, const std::vector<std::string>& dataNodes);

  void create_policy(Policy policy);
  void set_policy_enabled(const std::string& policyId, bool enabled);
  void update_model(std::span<const ModelEdit> edits);

  void tick(ClusterTime dtSeconds);
  void set_node_clock_offset(const std::string& nodeId, ClusterTime offset);

  [[nodiscard]] std::shared_ptr<const PermissionModel> model() const;
  [[nodiscard]] std::shared_ptr<const PolicyRepository> policies() const;

  /// Fresh aggregation of every local log (gateway, CPA, enforcers, NameNodes).
  [[nodiscard]] CentralAuditStore central_audit() const;
  [[nodiscard]] std::size_t audit_record_count() const;

  [[nodiscard]] BrokerCounters counters() const;
  [[nodiscard]] GatewayCounters gateway_counters() const;
  [[nodiscard]] IssuerCounters issuer_counters() const;
  [[nodiscard]] const EnforcerRegistry& registry() const { return registry_; }
  [[nodiscard]] const BrokerConfig& config() const { return config_; }

  /// Direct access to the simulator; callers must not race service-mode requests.
  Cluster& cluster() { return cluster_; }
  [[nodiscard]] const Cluster& cluster() const { return cluster_; }
  [[nodiscard]] std::mutex& mutex() const { return mutex_; }

 private:
  struct BrokerSession {
    std::string user;
    std::string sourceAddr;
    SubjectId subject;
    DelegationToken token;
    SessionCertificate certificate;
  };

  std::optional<std::string> country_of(const std::string& sourceAddr) const;
  AuditRecord make_record(const std::string& client, const std::string& source,
                          const std::string& service, OpKind op, std::optional<std::string> path,
                          Effect decision, AuditStage stage, const std::string& enforcer) const;
  ClusterTime certificate_lifetime(const std::string& user) const;

  mutable std::mutex mutex_;
  Cluster cluster_;
  std::shared_ptr<const PermissionModel> model_;
  std::shared_ptr<const PolicyRepository> repo_;
  Gateway gateway_;
  TokenIssuer authority_;
  BrokerConfig config_;
  EnforcerRegistry registry_;
  std::map<std::string, BrokerSession> sessions_;
  LocalAuditLog gatewayLog_{"gateway"};
  LocalAuditLog cpaLog_{"cpa"};
  LocalAuditLog nativeLog_{"native"};
  BrokerCounters counters_;
  std::uint64_t nextCertificate_ = 1;
};

std::string to_json(const ServiceResult& result);

}  // namespace fedgate

#pragma once

// Central policy repository, local ACL evaluation and the combined
// authorization pipeline (service gate -> central policy -> local ACL).

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedgate/common.hpp"
#include "fedgate/namespace_tree.hpp"
#include "fedgate/policy_model.hpp"

namespace fedgate {

/// Resource selector of a central policy. Every present field must match.
///   service: exact service name
///   path:    glob where "*" is one component and "**" any number of them
///   tag:     classification label carried by the resource
struct ResourceMatcher {
  std::string service;
  std::string path;
  std::string tag;

  [[nodiscard]] bool empty() const { return service.empty() && path.empty() && tag.empty(); }
  /// Higher is more specific; used to order matching policies.
  [[nodiscard]] int specificity() const;

  bool operator==(const ResourceMatcher&) const = default;
};

bool glob_match(std::string_view pattern, std::string_view path);

struct TimeWindow {
  ClusterTime start = 0;
  ClusterTime end = 0;
  bool operator==(const TimeWindow&) const = default;
};

struct PolicyConstraints {
  std::optional<TimeWindow> timeWindow;
  /// Allowed source addresses or location labels; empty means any.
  std::set<std::string> sourcePredicate;
  bool operator==(const PolicyConstraints&) const = default;
};

struct Policy {
  std::string policyId;
  std::set<PrincipalId> principals;
  ResourceMatcher resources;
  std::set<OpKind> ops;
  Effect effect = Effect::Allow;
  bool enabled = true;
  PolicyConstraints constraints;
  ClusterTime certificateLifetime = kHour;
  ClusterTime startDate = 0;

  bool operator==(const Policy&) const = default;
};

nlohmann::json policy_to_json(const Policy& policy);
/// Rejects unknown keys; "enabled" defaults to true when absent.
Policy policy_from_json(const nlohmann::json& doc);

/// Identity plus the services a session may contact. Decisions are still
/// evaluated per request against the live policy set.
struct SessionCertificate {
  std::string certId;
  std::string clientId;
  std::set<ServiceId> permittedServices;
  ClusterTime issuedAt = 0;
  ClusterTime lifetime = kHour;

  [[nodiscard]] bool valid_at(ClusterTime now) const { return now <= issuedAt + lifetime; }
};

class PolicyRepository {
 public:
  void create_policy(Policy policy);
  void set_policy_enabled(const std::string& policyId, bool enabled);

  [[nodiscard]] const Policy& policy(const std::string& policyId) const;
  [[nodiscard]] const std::map<std::string, Policy>& policies() const { return policies_; }

  void record_certificate(const SessionCertificate& certificate);
  [[nodiscard]] const std::map<std::string, SessionCertificate>& issued_certificates() const {
    return issued_;
  }

 private:
  std::map<std::string, Policy> policies_;
  std::map<std::string, SessionCertificate> issued_;
};

struct AccessRequest {
  SubjectId subject;
  std::string sourceAddr;
  /// Location label (e.g. country) of the source, when known.
  std::string location;
  ServiceId service;
  std::optional<std::string> path;
  OpKind op = OpKind::Read;
  ClusterTime atTime = 0;
  /// Classification tags of the target; authorize() fills these from the tree.
  std::set<std::string> tags;
};

struct CentralMatch {
  Decision decision;
  std::string policyId;
};

/// Does `policy` apply to the request issued by a subject of `creator`?
bool policy_matches(const Policy& policy, const PermissionModel& model, const std::string& creator,
                    const AccessRequest& request);

/// Deny-overrides among matching enabled policies, then most specific
/// resource matcher, then smallest policyId. nullopt when nothing matches.
std::optional<CentralMatch> evaluate_central(const PolicyRepository& repo,
                                             const PermissionModel& model,
                                             const AccessRequest& request);

/// Owner triple, else group triple, else extra ACL entries (deny wins),
/// else the other triple.
Decision evaluate_acl(const PermissionModel& model, const FileAttrs& attrs, const std::string& user,
                      OpKind op);

/// Execute on every proper ancestor, then `op` on the final component.
/// A Deny names the first failing component.
Decision check_path_access(const PermissionModel& model, const NamespaceTree& tree,
                           const std::string& path, const std::string& user, OpKind op);

/// Attributes for a new entry created by `creator` under `parent`.
FileAttrs inherit_acl_on_create(const Inode& parent, const std::string& creator);

enum class Provenance : std::uint8_t { CentralPolicy, LocalAcl, ServiceModel };

std::string_view to_string(Provenance provenance);

struct AuthzOutcome {
  Decision decision;
  Provenance provenance = Provenance::ServiceModel;
  std::string policyId;

  bool operator==(const AuthzOutcome&) const = default;
};

/// `tree` may be null for pathless service calls.
AuthzOutcome authorize(const PolicyRepository& repo, const PermissionModel& model,
                       const NamespaceTree* tree, const AccessRequest& request);

}  // namespace fedgate

#pragma once

// Federation-aware service permission model: users, groups, subjects,
// services, direct assignments and the service-access decision rule.

#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fedgate/common.hpp"

namespace fedgate {

enum class PrincipalKind : std::uint8_t { User, Group };

struct PrincipalId {
  PrincipalKind kind = PrincipalKind::User;
  std::string name;

  static PrincipalId user(std::string name) { return {PrincipalKind::User, std::move(name)}; }
  static PrincipalId group(std::string name) { return {PrincipalKind::Group, std::move(name)}; }

  auto operator<=>(const PrincipalId&) const = default;
};

/// "user:alice" / "group:staff".
std::string to_string(const PrincipalId& principal);
PrincipalId parse_principal(std::string_view text);

enum class ServiceKind : std::uint8_t {
  NameNode,
  DataNode,
  ResourceManager,
  NodeManager,
  Gateway,
  OtherService,
};

std::string_view to_string(ServiceKind kind);
ServiceKind parse_service_kind(std::string_view text);

struct ServiceId {
  ServiceKind kind = ServiceKind::OtherService;
  std::string name;

  // Names are unique cluster-wide, so they order services on their own.
  bool operator==(const ServiceId& other) const { return name == other.name && kind == other.kind; }
  std::strong_ordering operator<=>(const ServiceId& other) const {
    if (auto c = name <=> other.name; c != 0) return c;
    return kind <=> other.kind;
  }
};

struct Permission {
  ServiceId service;
  OpKind op = OpKind::Read;

  auto operator<=>(const Permission&) const = default;
};

using PermissionSet = std::set<Permission>;

struct SubjectId {
  std::string value;
  auto operator<=>(const SubjectId&) const = default;
};

/// Which part of the creator's permissions a subject may exercise.
struct SubjectMask {
  bool all = true;
  PermissionSet permissions;  // used when !all

  static SubjectMask everything() { return {}; }
  static SubjectMask only(PermissionSet permissions) { return {false, std::move(permissions)}; }

  [[nodiscard]] bool admits(const Permission& p) const { return all || permissions.contains(p); }
};

struct SubjectRecord {
  std::string creator;
  SubjectMask mask;
};

enum class DenyReason : std::uint8_t {
  None,
  NoAssignment,
  MaskedOut,
  PolicyDeny,
  AclDeny,
  TraversalDeny,
};

std::string_view to_string(DenyReason reason);

struct Decision {
  Effect effect = Effect::Deny;
  DenyReason reason = DenyReason::None;
  /// Path component that failed a traversal check, when relevant.
  std::string component;

  static Decision allow() { return {Effect::Allow, DenyReason::None, {}}; }
  static Decision deny(DenyReason reason, std::string component = {}) {
    return {Effect::Deny, reason, std::move(component)};
  }

  [[nodiscard]] bool allowed() const { return effect == Effect::Allow; }
  bool operator==(const Decision&) const = default;
};

struct MembershipEdit {
  std::string user;
  std::string group;
};

struct AssignmentEdit {
  PrincipalId principal;
  Permission permission;
};

struct ModelEdit {
  enum class Action : std::uint8_t { Add, Remove };
  Action action = Action::Add;
  std::variant<MembershipEdit, AssignmentEdit> target;

  static ModelEdit add_membership(std::string user, std::string group) {
    return {Action::Add, MembershipEdit{std::move(user), std::move(group)}};
  }
  static ModelEdit remove_membership(std::string user, std::string group) {
    return {Action::Remove, MembershipEdit{std::move(user), std::move(group)}};
  }
  static ModelEdit add_assignment(PrincipalId principal, Permission permission) {
    return {Action::Add, AssignmentEdit{std::move(principal), std::move(permission)}};
  }
  static ModelEdit remove_assignment(PrincipalId principal, Permission permission) {
    return {Action::Remove, AssignmentEdit{std::move(principal), std::move(permission)}};
  }
};

/// Value-semantic snapshot of the permission model. Copies are independent;
/// readers hold a snapshot while a single writer derives the next one.
class PermissionModel {
 public:
  void add_user(const std::string& name);
  void add_group(const std::string& name);
  void add_service(const ServiceId& service);

  [[nodiscard]] bool has_user(const std::string& name) const { return users_.contains(name); }
  [[nodiscard]] bool has_group(const std::string& name) const { return groups_.contains(name); }
  [[nodiscard]] bool has_principal(const PrincipalId& principal) const;
  [[nodiscard]] bool has_service(const ServiceId& service) const;
  /// Resolves a service by its unique name; throws UnknownService.
  [[nodiscard]] ServiceId service(const std::string& name) const;

  [[nodiscard]] const std::set<std::string>& users() const { return users_; }
  [[nodiscard]] const std::set<std::string>& groups() const { return groups_; }
  [[nodiscard]] std::vector<ServiceId> services() const;
  [[nodiscard]] const std::set<std::pair<std::string, std::string>>& memberships() const {
    return memberships_;
  }
  [[nodiscard]] const std::set<std::pair<PrincipalId, Permission>>& assignments() const {
    return assignments_;
  }
  [[nodiscard]] const std::map<SubjectId, SubjectRecord>& subjects() const { return subjects_; }

  /// Groups the user directly belongs to, in name order.
  [[nodiscard]] std::set<std::string> groups_of(const std::string& user) const;

  /// Applies every edit or none of them.
  [[nodiscard]] PermissionModel update_assignments(std::span<const ModelEdit> edits) const;

  /// Permissions assigned directly to the entity, without group expansion.
  [[nodiscard]] PermissionSet hs_prms(const PrincipalId& entity) const;

  /// Direct user permissions plus those of every group the user belongs to.
  [[nodiscard]] PermissionSet effective_permissions(const std::string& user) const;

  SubjectId create_subject(const std::string& user, SubjectMask mask);

  [[nodiscard]] const SubjectRecord& subject(const SubjectId& id) const;

  /// Allow iff (service, op) is in the creator's current effective
  /// permissions and the subject's mask admits it.
  [[nodiscard]] Decision decide_service_access(const SubjectId& subject, const ServiceId& service,
                                               OpKind op) const;

 private:
  void require_principal(const PrincipalId& principal) const;
  void require_service(const ServiceId& service) const;

  std::set<std::string> users_;
  std::set<std::string> groups_;
  std::map<std::string, ServiceKind> services_;
  std::set<std::pair<std::string, std::string>> memberships_;
  std::set<std::pair<PrincipalId, Permission>> assignments_;
  std::map<SubjectId, SubjectRecord> subjects_;
  std::uint64_t nextSubject_ = 1;
};

}  // namespace fedgate

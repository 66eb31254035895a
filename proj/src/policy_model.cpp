#include "fedgate/policy_model.hpp"

#include <algorithm>

namespace fedgate {

std::string to_string(const PrincipalId& principal) {
  return (principal.kind == PrincipalKind::User ? "user:" : "group:") + principal.name;
}

PrincipalId parse_principal(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos || colon + 1 == text.size()) {
    throw Error(ErrorCode::ParseError, "principal must be user:<name> or group:<name>, got '" +
                                           std::string(text) + "'");
  }
  auto kind = text.substr(0, colon);
  auto name = std::string(text.substr(colon + 1));
  if (kind == "user") return PrincipalId::user(name);
  if (kind == "group") return PrincipalId::group(name);
  throw Error(ErrorCode::ParseError, "unknown principal kind '" + std::string(kind) + "'");
}

std::string_view to_string(ServiceKind kind) {
  switch (kind) {
    case ServiceKind::NameNode: return "NameNode";
    case ServiceKind::DataNode: return "DataNode";
    case ServiceKind::ResourceManager: return "ResourceManager";
    case ServiceKind::NodeManager: return "NodeManager";
    case ServiceKind::Gateway: return "Gateway";
    case ServiceKind::OtherService: return "OtherService";
  }
  return "?";
}

ServiceKind parse_service_kind(std::string_view text) {
  for (auto kind : {ServiceKind::NameNode, ServiceKind::DataNode, ServiceKind::ResourceManager,
                    ServiceKind::NodeManager, ServiceKind::Gateway, ServiceKind::OtherService}) {
    if (to_string(kind) == text) return kind;
  }
  throw Error(ErrorCode::ParseError, "unknown service kind '" + std::string(text) + "'");
}

std::string_view to_string(DenyReason reason) {
  switch (reason) {
    case DenyReason::None: return "None";
    case DenyReason::NoAssignment: return "NoAssignment";
    case DenyReason::MaskedOut: return "MaskedOut";
    case DenyReason::PolicyDeny: return "PolicyDeny";
    case DenyReason::AclDeny: return "AclDeny";
    case DenyReason::TraversalDeny: return "TraversalDeny";
  }
  return "?";
}

void PermissionModel::add_user(const std::string& name) {
  if (name.empty()) throw Error(ErrorCode::InvalidArgument, "empty user name");
  if (!users_.insert(name).second) throw Error(ErrorCode::DuplicateEntry, "user " + name);
}

void PermissionModel::add_group(const std::string& name) {
  if (name.empty()) throw Error(ErrorCode::InvalidArgument, "empty group name");
  if (!groups_.insert(name).second) throw Error(ErrorCode::DuplicateEntry, "group " + name);
}

void PermissionModel::add_service(const ServiceId& service) {
  if (service.name.empty()) throw Error(ErrorCode::InvalidArgument, "empty service name");
  if (!services_.emplace(service.name, service.kind).second) {
    throw Error(ErrorCode::DuplicateEntry, "service " + service.name);
  }
}

bool PermissionModel::has_principal(const PrincipalId& principal) const {
  return principal.kind == PrincipalKind::User ? has_user(principal.name)
                                               : has_group(principal.name);
}

bool PermissionModel::has_service(const ServiceId& service) const {
  auto it = services_.find(service.name);
  return it != services_.end() && it->second == service.kind;
}

ServiceId PermissionModel::service(const std::string& name) const {
  auto it = services_.find(name);
  if (it == services_.end()) throw Error(ErrorCode::UnknownService, name);
  return {it->second, it->first};
}

std::vector<ServiceId> PermissionModel::services() const {
  std::vector<ServiceId> out;
  out.reserve(services_.size());
  for (const auto& [name, kind] : services_) out.push_back({kind, name});
  return out;
}

void PermissionModel::require_principal(const PrincipalId& principal) const {
  if (!has_principal(principal)) throw Error(ErrorCode::UnknownPrincipal, to_string(principal));
}

void PermissionModel::require_service(const ServiceId& service) const {
  if (!has_service(service)) throw Error(ErrorCode::UnknownService, service.name);
}

std::set<std::string> PermissionModel::groups_of(const std::string& user) const {
  std::set<std::string> out;
  for (auto it = memberships_.lower_bound({user, std::string{}});
       it != memberships_.end() && it->first == user; ++it) {
    out.insert(it->second);
  }
  return out;
}

PermissionModel PermissionModel::update_assignments(std::span<const ModelEdit> edits) const {
  PermissionModel next = *this;
  for (const auto& edit : edits) {
    const bool adding = edit.action == ModelEdit::Action::Add;
    if (const auto* m = std::get_if<MembershipEdit>(&edit.target)) {
      next.require_principal(PrincipalId::user(m->user));
      next.require_principal(PrincipalId::group(m->group));
      std::pair key{m->user, m->group};
      if (adding) {
        if (!next.memberships_.insert(key).second) {
          throw Error(ErrorCode::DuplicateEntry, "membership " + m->user + " in " + m->group);
        }
      } else if (next.memberships_.erase(key) == 0) {
        throw Error(ErrorCode::MissingEntry, "membership " + m->user + " in " + m->group);
      }
    } else {
      const auto& a = std::get<AssignmentEdit>(edit.target);
      next.require_principal(a.principal);
      next.require_service(a.permission.service);
      std::pair key{a.principal, a.permission};
      const auto label = to_string(a.principal) + " -> (" + a.permission.service.name + ", " +
                         std::string(to_string(a.permission.op)) + ")";
      if (adding) {
        if (!next.assignments_.insert(key).second) {
          throw Error(ErrorCode::DuplicateEntry, "assignment " + label);
        }
      } else if (next.assignments_.erase(key) == 0) {
        throw Error(ErrorCode::MissingEntry, "assignment " + label);
      }
    }
  }
  return next;
}

PermissionSet PermissionModel::hs_prms(const PrincipalId& entity) const {
  require_principal(entity);
  PermissionSet out;
  for (auto it = assignments_.lower_bound({entity, Permission{}});
       it != assignments_.end() && it->first == entity; ++it) {
    out.insert(it->second);
  }
  return out;
}

PermissionSet PermissionModel::effective_permissions(const std::string& user) const {
  PermissionSet out = hs_prms(PrincipalId::user(user));
  for (const auto& group : groups_of(user)) {
    out.merge(hs_prms(PrincipalId::group(group)));
  }
  return out;
}

SubjectId PermissionModel::create_subject(const std::string& user, SubjectMask mask) {
  require_principal(PrincipalId::user(user));
  if (!mask.all) {
    const auto held = effective_permissions(user);
    for (const auto& p : mask.permissions) {
      if (!held.contains(p)) {
        throw Error(ErrorCode::MaskExceedsCreator,
                    user + " lacks (" + p.service.name + ", " + std::string(to_string(p.op)) + ")");
      }
    }
  }
  SubjectId id{"s" + std::to_string(nextSubject_++)};
  subjects_.emplace(id, SubjectRecord{user, std::move(mask)});
  return id;
}

const SubjectRecord& PermissionModel::subject(const SubjectId& id) const {
  auto it = subjects_.find(id);
  if (it == subjects_.end()) throw Error(ErrorCode::UnknownSubject, id.value);
  return it->second;
}

Decision PermissionModel::decide_service_access(const SubjectId& subjectId,
                                                const ServiceId& service, OpKind op) const {
  const auto& record = subject(subjectId);
  require_service(service);
  const Permission wanted{service, op};
  if (!effective_permissions(record.creator).contains(wanted)) {
    return Decision::deny(DenyReason::NoAssignment);
  }
  if (!record.mask.admits(wanted)) return Decision::deny(DenyReason::MaskedOut);
  return Decision::allow();
}

}  // namespace fedgate

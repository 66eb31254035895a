#include "fedgate/authz.hpp"

#include <algorithm>

namespace fedgate {

namespace {

std::vector<std::string_view> split_components(std::string_view path) {
  std::vector<std::string_view> parts;
  std::size_t start = 1;
  while (start < path.size()) {
    auto end = path.find('/', start);
    if (end == std::string_view::npos) end = path.size();
    parts.push_back(path.substr(start, end - start));
    start = end + 1;
  }
  return parts;
}

bool glob_match_parts(std::span<const std::string_view> pattern,
                      std::span<const std::string_view> path) {
  if (pattern.empty()) return path.empty();
  if (pattern.front() == "**") {
    for (std::size_t skip = 0; skip <= path.size(); ++skip) {
      if (glob_match_parts(pattern.subspan(1), path.subspan(skip))) return true;
    }
    return false;
  }
  if (path.empty()) return false;
  if (pattern.front() != "*" && pattern.front() != path.front()) return false;
  return glob_match_parts(pattern.subspan(1), path.subspan(1));
}

const std::set<std::string> kPolicyKeys = {
    "policyId", "principals", "resources",           "ops",       "effect",
    "enabled",  "constraints", "certificateLifetime", "startDate"};

void reject_unknown_keys(const nlohmann::json& doc, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, _] : doc.items()) {
    if (!allowed.contains(key)) {
      throw Error(ErrorCode::ParseError, "unknown field '" + key + "' in " + where);
    }
  }
}

}  // namespace

int ResourceMatcher::specificity() const {
  int score = 0;
  if (!path.empty()) {
    for (auto part : split_components(path)) {
      score += part == "**" ? 1 : part == "*" ? 2 : 4;
    }
  }
  if (!service.empty()) score += 1;
  if (!tag.empty()) score += 1;
  return score;
}

bool glob_match(std::string_view pattern, std::string_view path) {
  auto p = split_components(pattern);
  auto s = split_components(path);
  return glob_match_parts(p, s);
}

nlohmann::json policy_to_json(const Policy& policy) {
  nlohmann::ordered_json doc;
  doc["policyId"] = policy.policyId;
  auto principals = nlohmann::ordered_json::array();
  for (const auto& p : policy.principals) principals.push_back(to_string(p));
  doc["principals"] = principals;
  nlohmann::ordered_json resources = nlohmann::ordered_json::object();
  if (!policy.resources.service.empty()) resources["service"] = policy.resources.service;
  if (!policy.resources.path.empty()) resources["path"] = policy.resources.path;
  if (!policy.resources.tag.empty()) resources["tag"] = policy.resources.tag;
  doc["resources"] = resources;
  auto ops = nlohmann::ordered_json::array();
  for (auto op : policy.ops) ops.push_back(std::string(to_string(op)));
  doc["ops"] = ops;
  doc["effect"] = std::string(to_string(policy.effect));
  doc["enabled"] = policy.enabled;
  nlohmann::ordered_json constraints = nlohmann::ordered_json::object();
  if (policy.constraints.timeWindow) {
    constraints["timeWindow"] = {policy.constraints.timeWindow->start,
                                 policy.constraints.timeWindow->end};
  }
  if (!policy.constraints.sourcePredicate.empty()) {
    constraints["sourcePredicate"] = policy.constraints.sourcePredicate;
  }
  doc["constraints"] = constraints;
  doc["certificateLifetime"] = policy.certificateLifetime;
  doc["startDate"] = policy.startDate;
  return nlohmann::json::parse(doc.dump());
}

Policy policy_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::ParseError, "policy must be a JSON object");
  reject_unknown_keys(doc, kPolicyKeys, "policy");
  Policy policy;
  try {
    policy.policyId = doc.at("policyId").get<std::string>();
    for (const auto& p : doc.at("principals")) policy.principals.insert(parse_principal(p.get<std::string>()));
    const auto& res = doc.at("resources");
    reject_unknown_keys(res, {"service", "path", "tag"}, "policy.resources");
    policy.resources.service = res.value("service", "");
    policy.resources.path = res.value("path", "");
    policy.resources.tag = res.value("tag", "");
    for (const auto& op : doc.at("ops")) policy.ops.insert(parse_op(op.get<std::string>()));
    policy.effect = parse_effect(doc.at("effect").get<std::string>());
    policy.enabled = doc.value("enabled", true);
    if (doc.contains("constraints")) {
      const auto& c = doc.at("constraints");
      reject_unknown_keys(c, {"timeWindow", "sourcePredicate"}, "policy.constraints");
      if (c.contains("timeWindow")) {
        const auto& w = c.at("timeWindow");
        if (!w.is_array() || w.size() != 2) {
          throw Error(ErrorCode::ParseError, "timeWindow must be [start, end]");
        }
        policy.constraints.timeWindow = TimeWindow{w[0].get<ClusterTime>(), w[1].get<ClusterTime>()};
      }
      if (c.contains("sourcePredicate")) {
        policy.constraints.sourcePredicate = c.at("sourcePredicate").get<std::set<std::string>>();
      }
    }
    policy.certificateLifetime = doc.value("certificateLifetime", kHour);
    policy.startDate = doc.value("startDate", ClusterTime{0});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("policy: ") + e.what());
  }
  return policy;
}

void PolicyRepository::create_policy(Policy policy) {
  if (policy.policyId.empty()) throw Error(ErrorCode::MalformedConstraint, "empty policyId");
  if (policies_.contains(policy.policyId)) {
    throw Error(ErrorCode::DuplicatePolicyId, policy.policyId);
  }
  if (policy.ops.empty()) throw Error(ErrorCode::MalformedConstraint, policy.policyId + ": no ops");
  if (policy.principals.empty()) {
    throw Error(ErrorCode::MalformedConstraint, policy.policyId + ": no principals");
  }
  if (policy.resources.empty()) {
    throw Error(ErrorCode::MalformedConstraint, policy.policyId + ": no resource matcher");
  }
  if (!policy.resources.path.empty()) {
    try {
      require_normalized(policy.resources.path);
    } catch (const Error&) {
      throw Error(ErrorCode::MalformedConstraint, policy.policyId + ": bad path glob");
    }
  }
  if (policy.constraints.timeWindow &&
      policy.constraints.timeWindow->start > policy.constraints.timeWindow->end) {
    throw Error(ErrorCode::MalformedConstraint, policy.policyId + ": timeWindow start > end");
  }
  if (policy.certificateLifetime <= 0) {
    throw Error(ErrorCode::MalformedConstraint, policy.policyId + ": certificateLifetime <= 0");
  }
  auto id = policy.policyId;
  policies_.emplace(std::move(id), std::move(policy));
}

void PolicyRepository::set_policy_enabled(const std::string& policyId, bool enabled) {
  auto it = policies_.find(policyId);
  if (it == policies_.end()) throw Error(ErrorCode::UnknownPolicy, policyId);
  it->second.enabled = enabled;
}

const Policy& PolicyRepository::policy(const std::string& policyId) const {
  auto it = policies_.find(policyId);
  if (it == policies_.end()) throw Error(ErrorCode::UnknownPolicy, policyId);
  return it->second;
}

void PolicyRepository::record_certificate(const SessionCertificate& certificate) {
  issued_.insert_or_assign(certificate.certId, certificate);
}

bool policy_matches(const Policy& policy, const PermissionModel& model, const std::string& creator,
                    const AccessRequest& request) {
  if (!policy.enabled) return false;
  if (!policy.ops.contains(request.op)) return false;
  if (request.atTime < policy.startDate) return false;

  bool principalHit = policy.principals.contains(PrincipalId::user(creator));
  if (!principalHit) {
    for (const auto& group : model.groups_of(creator)) {
      if (policy.principals.contains(PrincipalId::group(group))) {
        principalHit = true;
        break;
      }
    }
  }
  if (!principalHit) return false;

  const auto& res = policy.resources;
  if (!res.service.empty() && res.service != request.service.name) return false;
  if (!res.path.empty() && (!request.path || !glob_match(res.path, *request.path))) return false;
  if (!res.tag.empty() && !request.tags.contains(res.tag)) return false;

  const auto& c = policy.constraints;
  if (c.timeWindow && (request.atTime < c.timeWindow->start || request.atTime > c.timeWindow->end)) {
    return false;
  }
  if (!c.sourcePredicate.empty() && !c.sourcePredicate.contains(request.sourceAddr) &&
      !(request.location.size() && c.sourcePredicate.contains(request.location))) {
    return false;
  }
  return true;
}

std::optional<CentralMatch> evaluate_central(const PolicyRepository& repo,
                                             const PermissionModel& model,
                                             const AccessRequest& request) {
  const auto& creator = model.subject(request.subject).creator;
  const Policy* best = nullptr;
  auto better = [](const Policy& a, const Policy& b) {
    if (a.effect != b.effect) return a.effect == Effect::Deny;
    const int sa = a.resources.specificity();
    const int sb = b.resources.specificity();
    if (sa != sb) return sa > sb;
    return a.policyId < b.policyId;
  };
  for (const auto& [id, policy] : repo.policies()) {
    if (!policy_matches(policy, model, creator, request)) continue;
    if (best == nullptr || better(policy, *best)) best = &policy;
  }
  if (best == nullptr) return std::nullopt;
  Decision decision = best->effect == Effect::Allow ? Decision::allow()
                                                    : Decision::deny(DenyReason::PolicyDeny);
  return CentralMatch{decision, best->policyId};
}

Decision evaluate_acl(const PermissionModel& model, const FileAttrs& attrs, const std::string& user,
                      OpKind op) {
  if (!model.has_user(user)) throw Error(ErrorCode::UnknownPrincipal, "user:" + user);
  auto from_mode = [&](Mode::Class cls) {
    return attrs.mode.grants(cls, op) ? Decision::allow() : Decision::deny(DenyReason::AclDeny);
  };
  if (attrs.owner == user) return from_mode(Mode::Class::Owner);
  const auto groups = model.groups_of(user);
  if (groups.contains(attrs.group)) return from_mode(Mode::Class::Group);

  bool allowHit = false;
  for (const auto& entry : attrs.extraAcl) {
    if (!entry.ops.contains(op)) continue;
    const bool applies = entry.principal.kind == PrincipalKind::User
                             ? entry.principal.name == user
                             : groups.contains(entry.principal.name);
    if (!applies) continue;
    if (entry.effect == Effect::Deny) return Decision::deny(DenyReason::AclDeny);
    allowHit = true;
  }
  if (allowHit) return Decision::allow();
  return from_mode(Mode::Class::Other);
}

Decision check_path_access(const PermissionModel& model, const NamespaceTree& tree,
                           const std::string& path, const std::string& user, OpKind op) {
  require_normalized(path);
  const auto chain = path_chain(path);
  for (const auto& component : chain) {
    if (!tree.exists(component)) throw Error(ErrorCode::NoSuchPath, component);
  }
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    const auto& inode = tree.at(chain[i]);
    if (!evaluate_acl(model, inode.attrs, user, OpKind::Execute).allowed()) {
      return Decision::deny(DenyReason::TraversalDeny, chain[i]);
    }
  }
  auto final = evaluate_acl(model, tree.at(path).attrs, user, op);
  if (!final.allowed()) final.component = path;
  return final;
}

FileAttrs inherit_acl_on_create(const Inode& parent, const std::string& creator) {
  if (!parent.isDirectory) throw Error(ErrorCode::ParentNotDirectory, "parent is a file");
  return FileAttrs{creator, parent.attrs.group, parent.attrs.mode, parent.attrs.extraAcl};
}

std::string_view to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::CentralPolicy: return "CentralPolicy";
    case Provenance::LocalAcl: return "LocalAcl";
    case Provenance::ServiceModel: return "ServiceModel";
  }
  return "?";
}

AuthzOutcome authorize(const PolicyRepository& repo, const PermissionModel& model,
                       const NamespaceTree* tree, const AccessRequest& request) {
  const auto gate = model.decide_service_access(request.subject, request.service, request.op);
  if (!gate.allowed()) return {gate, Provenance::ServiceModel, {}};

  AccessRequest enriched = request;
  if (request.path && tree != nullptr) {
    require_normalized(*request.path);
    for (const auto& component : path_chain(*request.path)) {
      if (!tree->exists(component)) break;
      const auto& tags = tree->at(component).tags;
      enriched.tags.insert(tags.begin(), tags.end());
    }
  }

  if (auto central = evaluate_central(repo, model, enriched)) {
    return {central->decision, Provenance::CentralPolicy, central->policyId};
  }

  if (!request.path || tree == nullptr) return {Decision::allow(), Provenance::LocalAcl, {}};

  const auto& creator = model.subject(request.subject).creator;
  const auto& path = *request.path;
  // Creating a new entry needs Write on its parent directory.
  if (request.op == OpKind::Write && !tree->exists(path)) {
    auto parent = parent_path(path);
    if (!parent) throw Error(ErrorCode::NoSuchPath, path);
    return {check_path_access(model, *tree, *parent, creator, OpKind::Write), Provenance::LocalAcl,
            {}};
  }
  return {check_path_access(model, *tree, path, creator, request.op), Provenance::LocalAcl, {}};
}

}  // namespace fedgate

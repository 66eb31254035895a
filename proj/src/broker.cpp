#include "fedgate/broker.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace fedgate {

namespace {

constexpr auto kGatewayService = "gateway";

AuditStage stage_for(Provenance provenance) {
  switch (provenance) {
    case Provenance::CentralPolicy: return AuditStage::CentralPolicy;
    case Provenance::LocalAcl: return AuditStage::LocalAcl;
    case Provenance::ServiceModel: return AuditStage::ServiceModel;
  }
  return AuditStage::Service;
}

ServiceResult failure(AuditStage stage, const Error& e) {
  ServiceResult r;
  r.stage = stage;
  r.error = e.code();
  r.message = e.what();
  return r;
}

std::size_t block_count(double sizeMB, double blockSizeMB) {
  if (sizeMB <= 0) return 1;
  return static_cast<std::size_t>(std::ceil(sizeMB / blockSizeMB - 1e-12));
}

}  // namespace

void EnforcerRegistry::register_enforcement(const Cluster& cluster, const std::string& nameNode,
                                            const std::vector<std::string>& dataNodes) {
  if (!cluster.has_namenode(nameNode)) throw Error(ErrorCode::UnknownService, nameNode);
  if (enforcers_.contains(nameNode)) throw Error(ErrorCode::DuplicateEnforcer, nameNode);
  const auto known = cluster.datanode_ids();
  for (const auto& dn : dataNodes) {
    if (std::find(known.begin(), known.end(), dn) == known.end()) {
      throw Error(ErrorCode::UnknownService, dn);
    }
  }
  Enforcer e{nameNode, {dataNodes.begin(), dataNodes.end()}, LocalAuditLog("enforcer/" + nameNode), 0};
  for (const auto& dn : dataNodes) agents_.try_emplace(dn, Agent{dn, 0});
  enforcers_.emplace(nameNode, std::move(e));
}

Enforcer* EnforcerRegistry::find_enforcer(const std::string& nameNode) {
  auto it = enforcers_.find(nameNode);
  return it == enforcers_.end() ? nullptr : &it->second;
}

Agent* EnforcerRegistry::find_agent(const std::string& dataNode) {
  auto it = agents_.find(dataNode);
  return it == agents_.end() ? nullptr : &it->second;
}

Broker::Broker(Cluster cluster, PermissionModel model, PolicyRepository repo, HostTable hosts,
               BrokerConfig config)
    : cluster_(std::move(cluster)),
      model_(std::make_shared<const PermissionModel>(std::move(model))),
      repo_(std::make_shared<const PolicyRepository>(std::move(repo))),
      gateway_(std::move(hosts), config.seed, config.sessionLifetime),
      authority_(config.authoritySecret, config.tokens),
      config_(std::move(config)) {
  const auto dataNodes = cluster_.datanode_ids();
  for (const auto& nn : cluster_.namenode_ids()) registry_.register_enforcement(cluster_, nn, dataNodes);
}

std::optional<std::string> Broker::country_of(const std::string& sourceAddr) const {
  auto it = config_.countries.find(sourceAddr);
  if (it == config_.countries.end()) return std::nullopt;
  return it->second;
}

AuditRecord Broker::make_record(const std::string& client, const std::string& source,
                                const std::string& service, OpKind op,
                                std::optional<std::string> path, Effect decision, AuditStage stage,
                                const std::string& enforcer) const {
  AuditRecord r;
  r.timestamp = cluster_.now();
  r.clientId = client.empty() ? "-" : client;
  r.sourceAddr = source;
  r.country = country_of(source);
  r.service = service;
  r.op = op;
  r.path = std::move(path);
  r.decision = decision;
  r.stage = stage;
  r.enforcerId = enforcer;
  return r;
}

ClusterTime Broker::certificate_lifetime(const std::string& user) const {
  const auto groups = model_->groups_of(user);
  std::optional<ClusterTime> lifetime;
  for (const auto& [id, policy] : repo_->policies()) {
    if (!policy.enabled) continue;
    bool hit = policy.principals.contains(PrincipalId::user(user));
    for (const auto& g : groups) hit = hit || policy.principals.contains(PrincipalId::group(g));
    if (!hit) continue;
    lifetime = lifetime ? std::min(*lifetime, policy.certificateLifetime) : policy.certificateLifetime;
  }
  return lifetime.value_or(config_.defaultCertificateLifetime);
}

OpenedSession Broker::open_session(const Credential& credential) {
  std::lock_guard lock(mutex_);
  const auto now = cluster_.now();
  auto audit_failure = [&](AuditStage stage) {
    ++counters_.failedOpens;
    auto record = make_record(credential.username, credential.sourceAddr, kGatewayService,
                              OpKind::Execute, std::nullopt, Effect::Deny, stage,
                              stage == AuditStage::Certificate ? "cpa" : "gateway");
    if (stage == AuditStage::Certificate) {
      cpaLog_.append(std::move(record));
    } else {
      gatewayLog_.append(std::move(record));
    }
  };

  std::string sessionId;
  try {
    sessionId = gateway_.gateway_login(credential, now);
  } catch (const Error&) {
    audit_failure(AuditStage::Gateway);
    throw;
  }

  HandshakeTicket ticket;
  DelegationToken token;
  try {
    ticket = gateway_.handshake_authenticate(sessionId, authority_, now);
    token = authority_.issue_delegation_token(ticket, credential.username, now);
  } catch (const Error&) {
    audit_failure(AuditStage::Handshake);
    throw;
  }

  SubjectId subject;
  SessionCertificate certificate;
  try {
    auto next = std::make_shared<PermissionModel>(*model_);
    subject = next->create_subject(credential.username, SubjectMask::everything());
    certificate.certId = "cert-" + std::to_string(nextCertificate_++);
    certificate.clientId = credential.username;
    for (const auto& p : next->effective_permissions(credential.username)) {
      certificate.permittedServices.insert(p.service);
    }
    certificate.issuedAt = now;
    model_ = std::move(next);
    certificate.lifetime = certificate_lifetime(credential.username);
  } catch (const Error&) {
    audit_failure(AuditStage::Certificate);
    throw;
  }

  auto repo = std::make_shared<PolicyRepository>(*repo_);
  repo->record_certificate(certificate);
  repo_ = std::move(repo);

  sessions_.emplace(sessionId, BrokerSession{credential.username, credential.sourceAddr, subject,
                                             token, certificate});
  return {sessionId, certificate};
}

ServiceResult Broker::handle_request(const BrokerRequest& request) {
  std::lock_guard lock(mutex_);
  ++counters_.handleRequests;
  const auto now = cluster_.now();
  const std::optional<std::string> path =
      request.path.empty() ? std::nullopt : std::optional<std::string>(request.path);

  auto it = sessions_.find(request.sessionId);
  const std::string client = it == sessions_.end() ? std::string() : it->second.user;
  const std::string source = it == sessions_.end() ? std::string() : it->second.sourceAddr;

  auto finish_at_cpa = [&](ServiceResult r) {
    cpaLog_.append(make_record(client, source, request.service, request.op, path, r.decision,
                               r.stage, "cpa"));
    return r;
  };

  if (it == sessions_.end()) {
    return finish_at_cpa(failure(AuditStage::Certificate, Error(ErrorCode::UnknownSession, request.sessionId)));
  }
  const auto& session = it->second;
  if (!session.certificate.valid_at(now)) {
    return finish_at_cpa(
        failure(AuditStage::Certificate, Error(ErrorCode::CertificateExpired, session.certificate.certId)));
  }
  bool permitted = false;
  for (const auto& s : session.certificate.permittedServices) permitted = permitted || s.name == request.service;
  Enforcer* enforcer = registry_.find_enforcer(request.service);
  if (!permitted || enforcer == nullptr) {
    return finish_at_cpa(failure(AuditStage::Certificate,
                                 Error(ErrorCode::ServiceNotPermitted, request.service)));
  }

  ++enforcer->calls;
  ++counters_.daemonMessages;
  auto finish = [&](ServiceResult r) {
    enforcer->log.append(make_record(client, source, request.service, request.op, path, r.decision,
                                     r.stage, enforcer->log.enforcer_id()));
    return r;
  };

  const auto model = model_;
  const auto repo = repo_;
  AccessRequest access;
  access.subject = session.subject;
  access.sourceAddr = session.sourceAddr;
  access.location = country_of(session.sourceAddr).value_or("");
  access.path = path;
  access.op = request.op;
  access.atTime = now;

  AuthzOutcome outcome;
  try {
    access.service = model->service(request.service);
    ++counters_.authorizeCalls;
    outcome = authorize(*repo, *model, &cluster_.namenode(request.service).tree, access);
  } catch (const Error& e) {
    return finish(failure(AuditStage::LocalAcl, e));
  }
  if (!outcome.decision.allowed()) {
    auto r = failure(stage_for(outcome.provenance),
                     Error(ErrorCode::Unauthorized, std::string(to_string(outcome.decision.reason)) +
                                                        (outcome.decision.component.empty()
                                                             ? ""
                                                             : " at " + outcome.decision.component)));
    r.provenance = outcome.provenance;
    r.policyId = outcome.policyId;
    return finish(r);
  }

  ServiceResult result;
  result.provenance = outcome.provenance;
  result.policyId = outcome.policyId;
  const auto nnNow = cluster_.node_now(request.service);
  try {
    if (request.op == OpKind::Write) {
      const auto blocks = block_count(request.sizeMB, cluster_.config().blockSizeMB);
      if (validate_token(session.token, authority_.secret(), nnNow) != TokenStatus::Valid) {
        throw Error(ErrorCode::TokenExpired, "delegation token of " + session.user);
      }
      auto entry = cluster_.write_file(request.service, request.path, request.sizeMB, session.user,
                                       request.clientNode, 2 + blocks);
      for (const auto& id : entry.blocks) {
        for (const auto& dn : cluster_.namenode(request.service).blockPool.at(id).replicas) {
          if (auto* agent = registry_.find_agent(dn)) ++agent->calls;
        }
      }
      ++counters_.daemonMessages;
      result.blocks = entry.blocks.size();
      result.elapsedSeconds = entry.elapsedSeconds;
      result.bytesMB = request.sizeMB;
    } else if (request.op == OpKind::Read) {
      const auto& nn = cluster_.namenode(request.service);
      const auto& inode = nn.tree.at(request.path);
      std::map<std::string, BlockToken> tokens;
      try {
        for (const auto& id : inode.blocks) {
          tokens.emplace(id, authority_.issue_block_token(session.token, id, {OpKind::Read},
                                                          nn.blockKey, nnNow));
        }
      } catch (const Error& e) {
        return finish(failure(AuditStage::Token, e));
      }
      auto read = cluster_.read_file(request.clientNode, request.service, request.path, &tokens,
                                     2 + inode.blocks.size());
      for (const auto& dn : read.servedBy) {
        if (auto* agent = registry_.find_agent(dn)) ++agent->calls;
      }
      ++counters_.daemonMessages;
      result.blocks = read.servedBy.size();
      result.elapsedSeconds = read.elapsedSeconds;
      result.bytesMB = read.bytesMB;
    } else {
      // Metadata-only call: authorization was the whole operation.
      result.elapsedSeconds = cluster_.config().perCallAuthLatency * 2;
    }
  } catch (const Error& e) {
    auto stage = e.code() == ErrorCode::TokenInvalid || e.code() == ErrorCode::TokenExpired
                     ? AuditStage::Token
                     : AuditStage::Service;
    auto r = failure(stage, e);
    r.provenance = outcome.provenance;
    r.policyId = outcome.policyId;
    return finish(r);
  }
  result.decision = Effect::Allow;
  result.stage = AuditStage::Service;
  return finish(result);
}

ServiceResult Broker::direct_request(const DirectRequest& request) {
  std::lock_guard lock(mutex_);
  ++counters_.directRequests;
  const std::optional<std::string> path =
      request.path.empty() ? std::nullopt : std::optional<std::string>(request.path);
  const bool knownNN = cluster_.has_namenode(request.service);
  auto& log = knownNN ? cluster_.namenode(request.service).auditLog : nativeLog_;
  auto finish = [&](ServiceResult r) {
    log.append(make_record(request.user, request.sourceAddr, request.service, request.op, path,
                           r.decision, r.stage, log.enforcer_id()));
    return r;
  };

  ServiceResult result;
  try {
    if (cluster_.config().secureMode) {
      throw Error(ErrorCode::SecureModeActive, "native access is disabled on a secure cluster");
    }
    if (!knownNN) throw Error(ErrorCode::UnknownService, request.service);
    ++counters_.daemonMessages;
    if (request.op == OpKind::Write) {
      auto entry = cluster_.write_file(request.service, request.path, request.sizeMB, request.user,
                                       request.clientNode, 0);
      result.blocks = entry.blocks.size();
      result.elapsedSeconds = entry.elapsedSeconds;
      result.bytesMB = request.sizeMB;
    } else if (request.op == OpKind::Read) {
      auto read = cluster_.read_file(request.clientNode, request.service, request.path, nullptr, 0);
      result.blocks = read.servedBy.size();
      result.elapsedSeconds = read.elapsedSeconds;
      result.bytesMB = read.bytesMB;
    }
  } catch (const Error& e) {
    return finish(failure(AuditStage::Service, e));
  }
  result.decision = Effect::Allow;
  return finish(result);
}

void Broker::register_enforcement(const std::string& nameNode, const std::vector<std::string>& dataNodes) {
  std::lock_guard lock(mutex_);
  registry_.register_enforcement(cluster_, nameNode, dataNodes);
}

void Broker::create_policy(Policy policy) {
  std::lock_guard lock(mutex_);
  auto next = std::make_shared<PolicyRepository>(*repo_);
  next->create_policy(std::move(policy));
  repo_ = std::move(next);
}

void Broker::set_policy_enabled(const std::string& policyId, bool enabled) {
  std::lock_guard lock(mutex_);
  auto next = std::make_shared<PolicyRepository>(*repo_);
  next->set_policy_enabled(policyId, enabled);
  repo_ = std::move(next);
}

void Broker::update_model(std::span<const ModelEdit> edits) {
  std::lock_guard lock(mutex_);
  model_ = std::make_shared<const PermissionModel>(model_->update_assignments(edits));
}

void Broker::tick(ClusterTime dtSeconds) {
  std::lock_guard lock(mutex_);
  cluster_.tick(dtSeconds);
}

void Broker::set_node_clock_offset(const std::string& nodeId, ClusterTime offset) {
  std::lock_guard lock(mutex_);
  cluster_.set_node_clock_offset(nodeId, offset);
}

std::shared_ptr<const PermissionModel> Broker::model() const {
  std::lock_guard lock(mutex_);
  return model_;
}

std::shared_ptr<const PolicyRepository> Broker::policies() const {
  std::lock_guard lock(mutex_);
  return repo_;
}

CentralAuditStore Broker::central_audit() const {
  std::lock_guard lock(mutex_);
  std::vector<const LocalAuditLog*> logs{&gatewayLog_, &cpaLog_, &nativeLog_};
  for (const auto& [_, e] : registry_.enforcers()) logs.push_back(&e.log);
  for (const auto& nn : cluster_.namenode_ids()) logs.push_back(&cluster_.namenode(nn).auditLog);
  CentralAuditStore store;
  store.aggregate_logs(logs);
  return store;
}

std::size_t Broker::audit_record_count() const {
  std::lock_guard lock(mutex_);
  std::size_t n = gatewayLog_.size() + cpaLog_.size() + nativeLog_.size();
  for (const auto& [_, e] : registry_.enforcers()) n += e.log.size();
  for (const auto& nn : cluster_.namenode_ids()) n += cluster_.namenode(nn).auditLog.size();
  return n;
}

BrokerCounters Broker::counters() const {
  std::lock_guard lock(mutex_);
  return counters_;
}

GatewayCounters Broker::gateway_counters() const {
  std::lock_guard lock(mutex_);
  return gateway_.counters();
}

IssuerCounters Broker::issuer_counters() const {
  std::lock_guard lock(mutex_);
  return authority_.counters();
}

std::string to_json(const ServiceResult& r) {
  nlohmann::ordered_json doc;
  doc["decision"] = std::string(to_string(r.decision));
  doc["stage"] = std::string(to_string(r.stage));
  doc["error"] = r.error ? nlohmann::ordered_json(std::string(to_string(*r.error))) : nlohmann::ordered_json(nullptr);
  doc["message"] = r.message;
  doc["provenance"] = r.provenance ? nlohmann::ordered_json(std::string(to_string(*r.provenance)))
                                   : nlohmann::ordered_json(nullptr);
  doc["policyId"] = r.policyId;
  doc["bytesMB"] = r.bytesMB;
  doc["elapsedSeconds"] = r.elapsedSeconds;
  doc["blocks"] = r.blocks;
  return doc.dump();
}

}  // namespace fedgate

#include "fedgate/config.hpp"

#include <fstream>
#include <random>
#include <sstream>

namespace fedgate {

namespace {

using json = nlohmann::json;

/// Object reader that rejects unknown keys and reports field paths.
class Fields {
 public:
  Fields(const json& obj, std::string where, std::initializer_list<const char*> allowed)
      : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) fail(where_, "expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj_.items()) {
      if (!ok.contains(key)) fail(path(key), "unknown field");
    }
  }

  [[nodiscard]] bool has(const char* key) const { return obj_.contains(key); }
  [[nodiscard]] const json& at(const char* key) const {
    if (!obj_.contains(key)) fail(path(key), "missing required field");
    return obj_.at(key);
  }
  [[nodiscard]] std::string path(const std::string& key) const {
    return where_.empty() ? key : where_ + "." + key;
  }

  template <typename T>
  T get(const char* key) const {
    return convert<T>(at(key), path(key));
  }

  template <typename T>
  T get_or(const char* key, T fallback) const {
    return has(key) ? convert<T>(obj_.at(key), path(key)) : fallback;
  }

  template <typename T>
  static T convert(const json& value, const std::string& where) {
    try {
      return value.get<T>();
    } catch (const json::exception& e) {
      fail(where, e.what());
    }
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw Error(ErrorCode::ParseError, "field '" + where + "': " + what);
  }

 private:
  const json& obj_;
  std::string where_;
};

std::string indexed(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

const json& array_at(const Fields& f, const char* key) {
  const auto& v = f.at(key);
  if (!v.is_array()) Fields::fail(f.path(key), "expected an array");
  return v;
}

template <typename Fn>
void for_each_in(const Fields& f, const char* key, Fn&& fn) {
  if (!f.has(key)) return;
  const auto& arr = array_at(f, key);
  for (std::size_t i = 0; i < arr.size(); ++i) fn(arr[i], indexed(f.path(key), i));
}

NodeSpec parse_node(const json& j, const std::string& where) {
  Fields f(j, where, {"id", "rack"});
  return {f.get<std::string>("id"), f.get<std::string>("rack")};
}

Mode parse_mode_field(const Fields& f, const char* key, Mode fallback) {
  if (!f.has(key)) return fallback;
  try {
    return Mode::parse(f.get<std::string>(key));
  } catch (const Error& e) {
    Fields::fail(f.path(key), e.detail());
  }
}

AclEntry parse_acl_entry(const json& j, const std::string& where) {
  Fields f(j, where, {"principal", "ops", "effect"});
  AclEntry e;
  try {
    e.principal = parse_principal(f.get<std::string>("principal"));
    for (const auto& op : f.get<std::vector<std::string>>("ops")) e.ops.insert(parse_op(op));
    e.effect = parse_effect(f.get_or<std::string>("effect", "Allow"));
  } catch (const Error& err) {
    if (err.code() != ErrorCode::ParseError || std::string(err.what()).find("field '") != std::string::npos) throw;
    Fields::fail(where, err.what());
  }
  return e;
}

}  // namespace

ClusterConfig parse_config(const json& doc) {
  Fields root(doc, "",
              {"seed", "secureMode", "costModel", "heartbeat", "tokens", "topology", "hostTable",
               "countries", "permissions", "policies", "bench"});
  ClusterConfig cfg;
  cfg.seed = root.get_or<std::uint64_t>("seed", 1);
  cfg.sim.seed = cfg.seed;
  cfg.sim.secureMode = root.get_or<bool>("secureMode", false);

  if (root.has("costModel")) {
    Fields f(root.at("costModel"), "costModel",
             {"bandwidthMBps", "perCallAuthLatency", "remoteRackPenalty", "blockSizeMB", "replicationFactor"});
    cfg.sim.bandwidthMBps = f.get_or<double>("bandwidthMBps", cfg.sim.bandwidthMBps);
    cfg.sim.perCallAuthLatency = f.get_or<double>("perCallAuthLatency", cfg.sim.perCallAuthLatency);
    cfg.sim.remoteRackPenalty = f.get_or<double>("remoteRackPenalty", cfg.sim.remoteRackPenalty);
    cfg.sim.blockSizeMB = f.get_or<double>("blockSizeMB", cfg.sim.blockSizeMB);
    cfg.sim.replicationFactor = f.get_or<std::size_t>("replicationFactor", cfg.sim.replicationFactor);
    if (!(cfg.sim.bandwidthMBps > 0)) Fields::fail("costModel.bandwidthMBps", "must be > 0");
    if (!(cfg.sim.blockSizeMB > 0)) Fields::fail("costModel.blockSizeMB", "must be > 0");
    if (cfg.sim.perCallAuthLatency < 0) Fields::fail("costModel.perCallAuthLatency", "must be >= 0");
    if (cfg.sim.remoteRackPenalty < 0) Fields::fail("costModel.remoteRackPenalty", "must be >= 0");
    if (cfg.sim.replicationFactor == 0) Fields::fail("costModel.replicationFactor", "must be >= 1");
  }
  if (root.has("heartbeat")) {
    Fields f(root.at("heartbeat"), "heartbeat", {"intervalSeconds", "checkIntervalSeconds", "timeoutSeconds"});
    cfg.sim.heartbeatInterval = f.get_or<ClusterTime>("intervalSeconds", cfg.sim.heartbeatInterval);
    cfg.sim.expiryCheckInterval = f.get_or<ClusterTime>("checkIntervalSeconds", cfg.sim.expiryCheckInterval);
    cfg.sim.heartbeatTimeout = f.get_or<ClusterTime>("timeoutSeconds", cfg.sim.heartbeatTimeout);
    if (cfg.sim.heartbeatInterval <= 0 || cfg.sim.expiryCheckInterval <= 0 || cfg.sim.heartbeatTimeout <= 0) {
      Fields::fail("heartbeat", "intervals must be > 0");
    }
  }
  if (root.has("tokens")) {
    Fields f(root.at("tokens"), "tokens",
             {"ticketLifetime", "renewInterval", "maxLifetime", "blockTokenLifetime", "sessionLifetime",
              "certificateLifetime"});
    cfg.tokens.ticketLifetime = f.get_or<ClusterTime>("ticketLifetime", cfg.tokens.ticketLifetime);
    cfg.tokens.renewInterval = f.get_or<ClusterTime>("renewInterval", cfg.tokens.renewInterval);
    cfg.tokens.maxLifetime = f.get_or<ClusterTime>("maxLifetime", cfg.tokens.maxLifetime);
    cfg.tokens.blockTokenLifetime = f.get_or<ClusterTime>("blockTokenLifetime", cfg.tokens.blockTokenLifetime);
    cfg.sessionLifetime = f.get_or<ClusterTime>("sessionLifetime", cfg.sessionLifetime);
    cfg.defaultCertificateLifetime = f.get_or<ClusterTime>("certificateLifetime", cfg.defaultCertificateLifetime);
    for (auto v : {cfg.tokens.ticketLifetime, cfg.tokens.renewInterval, cfg.tokens.maxLifetime,
                   cfg.tokens.blockTokenLifetime, cfg.sessionLifetime, cfg.defaultCertificateLifetime}) {
      if (v <= 0) Fields::fail("tokens", "lifetimes must be > 0");
    }
  }

  Fields topo(root.at("topology"), "topology", {"clients", "nameNodes", "dataNodes", "directories", "files"});
  for_each_in(topo, "clients", [&](const json& j, const std::string& w) { cfg.clientNodes.push_back(parse_node(j, w)); });
  for_each_in(topo, "nameNodes", [&](const json& j, const std::string& w) {
    Fields f(j, w, {"id", "rack", "owner", "group", "mode"});
    cfg.nameNodes.push_back({f.get<std::string>("id"), f.get<std::string>("rack")});
    cfg.nameNodeRoots.push_back({f.get_or<std::string>("owner", "hdfs"), f.get_or<std::string>("group", "supergroup"),
                                 parse_mode_field(f, "mode", Mode(0755)), {}});
  });
  for_each_in(topo, "dataNodes", [&](const json& j, const std::string& w) { cfg.dataNodes.push_back(parse_node(j, w)); });
  for_each_in(topo, "directories", [&](const json& j, const std::string& w) {
    Fields f(j, w, {"nameNode", "path", "owner", "group", "mode", "tags", "extraAcl"});
    DirectorySpec d;
    d.nameNode = f.get<std::string>("nameNode");
    d.path = f.get<std::string>("path");
    d.attrs.owner = f.get<std::string>("owner");
    d.attrs.group = f.get_or<std::string>("group", "supergroup");
    d.attrs.mode = parse_mode_field(f, "mode", Mode(0755));
    d.tags = f.get_or<std::set<std::string>>("tags", {});
    for_each_in(f, "extraAcl", [&](const json& e, const std::string& we) { d.attrs.extraAcl.push_back(parse_acl_entry(e, we)); });
    cfg.directories.push_back(std::move(d));
  });
  for_each_in(topo, "files", [&](const json& j, const std::string& w) {
    Fields f(j, w, {"nameNode", "path", "sizeMB", "owner", "writer"});
    cfg.files.push_back({f.get<std::string>("nameNode"), f.get<std::string>("path"), f.get<double>("sizeMB"),
                         f.get<std::string>("owner"), f.get_or<std::string>("writer", "")});
  });

  for_each_in(root, "hostTable", [&](const json& j, const std::string& w) {
    Fields f(j, w, {"username", "password", "sources"});
    cfg.hostTable.push_back({f.get<std::string>("username"), f.get<std::string>("password"),
                             f.get_or<std::set<std::string>>("sources", {"*"})});
  });
  cfg.countries = root.get_or<std::map<std::string, std::string>>("countries", {});

  if (root.has("permissions")) {
    Fields p(root.at("permissions"), "permissions", {"users", "groups", "services", "memberships", "assignments"});
    cfg.users = p.get_or<std::vector<std::string>>("users", {});
    cfg.groups = p.get_or<std::vector<std::string>>("groups", {});
    for_each_in(p, "services", [&](const json& j, const std::string& w) {
      Fields f(j, w, {"name", "kind"});
      try {
        cfg.extraServices.push_back({parse_service_kind(f.get<std::string>("kind")), f.get<std::string>("name")});
      } catch (const Error& e) {
        Fields::fail(w, e.detail());
      }
    });
    for_each_in(p, "memberships", [&](const json& j, const std::string& w) {
      auto pair = Fields::convert<std::vector<std::string>>(j, w);
      if (pair.size() != 2) Fields::fail(w, "membership must be [user, group]");
      cfg.edits.push_back(ModelEdit::add_membership(pair[0], pair[1]));
    });
    for_each_in(p, "assignments", [&](const json& j, const std::string& w) {
      Fields f(j, w, {"principal", "service", "op"});
      try {
        // Service kind is resolved against the model when the broker is built.
        cfg.edits.push_back(ModelEdit::add_assignment(
            parse_principal(f.get<std::string>("principal")),
            Permission{ServiceId{ServiceKind::OtherService, f.get<std::string>("service")},
                       parse_op(f.get<std::string>("op"))}));
      } catch (const Error& e) {
        if (std::string(e.what()).find("field '") != std::string::npos) throw;
        Fields::fail(w, e.detail());
      }
    });
  }

  for_each_in(root, "policies", [&](const json& j, const std::string& w) {
    try {
      cfg.policies.push_back(policy_from_json(j));
    } catch (const Error& e) {
      Fields::fail(w, e.detail());
    }
  });

  if (root.has("bench")) {
    Fields f(root.at("bench"), "bench", {"user", "password", "source", "nameNode", "directory", "clientNode"});
    cfg.bench = BenchSpec{f.get<std::string>("user"), f.get<std::string>("password"), f.get<std::string>("source"),
                          f.get<std::string>("nameNode"), f.get<std::string>("directory"),
                          f.get<std::string>("clientNode")};
  }
  return cfg;
}

ClusterConfig parse_config_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return parse_config(doc);
}

ClusterConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_config_text(buffer.str());
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.detail());
  }
}

std::unique_ptr<Broker> build_broker(const ClusterConfig& config, std::optional<bool> secureOverride) {
  SimConfig sim = config.sim;
  if (secureOverride) sim.secureMode = *secureOverride;
  Cluster cluster(sim);

  std::mt19937_64 keys(config.seed ^ 0x5eedf00dULL);
  const Secret authority = random_secret(keys);
  cluster.set_authority_secret(authority);

  for (const auto& n : config.clientNodes) cluster.add_node(n.id, n.rack);
  for (std::size_t i = 0; i < config.nameNodes.size(); ++i) {
    cluster.add_namenode(config.nameNodes[i].id, config.nameNodes[i].rack, config.nameNodeRoots[i]);
  }
  TokenIssuer bootstrap(authority, config.tokens);
  for (const auto& dn : config.dataNodes) {
    std::map<std::string, HandshakeTicket> tickets;
    for (const auto& nn : config.nameNodes) tickets.emplace(nn.id, bootstrap.issue_ticket("dn/" + dn.id, 0));
    cluster.register_datanode(dn.id, dn.rack, &tickets);
  }
  for (const auto& d : config.directories) cluster.mkdir(d.nameNode, d.path, d.attrs, d.tags);
  for (const auto& f : config.files) {
    auto writer = f.writerNode.empty() ? cluster.datanode_ids().front() : f.writerNode;
    cluster.write_file(f.nameNode, f.path, f.sizeMB, f.owner, writer, 0);
  }

  PermissionModel model;
  for (const auto& u : config.users) model.add_user(u);
  for (const auto& g : config.groups) model.add_group(g);
  for (const auto& nn : config.nameNodes) model.add_service({ServiceKind::NameNode, nn.id});
  for (const auto& dn : config.dataNodes) model.add_service({ServiceKind::DataNode, dn.id});
  model.add_service({ServiceKind::Gateway, "gateway"});
  for (const auto& s : config.extraServices) model.add_service(s);
  std::vector<ModelEdit> edits = config.edits;
  for (auto& e : edits) {
    if (auto* a = std::get_if<AssignmentEdit>(&e.target)) a->permission.service = model.service(a->permission.service.name);
  }
  model = model.update_assignments(edits);

  PolicyRepository repo;
  for (const auto& p : config.policies) repo.create_policy(p);

  HostTable hosts;
  for (const auto& h : config.hostTable) hosts.add(h.username, h.password, h.sources);

  BrokerConfig bc;
  bc.authoritySecret = authority;
  bc.tokens = config.tokens;
  bc.sessionLifetime = config.sessionLifetime;
  bc.defaultCertificateLifetime = config.defaultCertificateLifetime;
  bc.countries = config.countries;
  bc.seed = config.seed;
  return std::make_unique<Broker>(std::move(cluster), std::move(model), std::move(repo), std::move(hosts),
                                  std::move(bc));
}

}  // namespace fedgate

#include "fedgate/service.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace fedgate {

namespace {

using json = nlohmann::json;

HttpReply error_reply(int status, ErrorCode code, const std::string& message) {
  nlohmann::ordered_json doc;
  doc["error"] = std::string(to_string(code));
  doc["message"] = message;
  return {status, doc.dump()};
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownUser:
    case ErrorCode::BadPassword:
    case ErrorCode::SourceNotAllowed:
    case ErrorCode::HandshakeFailure:
    case ErrorCode::UnknownSession:
    case ErrorCode::SessionExpired:
      return 401;
    case ErrorCode::Unauthorized:
    case ErrorCode::ServiceNotPermitted:
    case ErrorCode::CertificateExpired:
    case ErrorCode::TokenExpired:
    case ErrorCode::TokenInvalid:
      return 403;
    case ErrorCode::UnknownPolicy:
      return 404;
    case ErrorCode::DuplicatePolicyId:
      return 409;
    default:
      return 400;
  }
}

json parse_body(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

template <typename T>
T field(const json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) throw Error(ErrorCode::ParseError, std::string("missing field ") + key);
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("field ") + key + ": " + e.what());
  }
}

ClusterTime query_int(const std::map<std::string, std::string>& q, const std::string& key) {
  const auto it = q.find(key);
  if (it == q.end()) throw Error(ErrorCode::ParseError, "missing query parameter " + key);
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(it->second, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != it->second.size()) throw Error(ErrorCode::ParseError, "bad integer for " + key);
  return v;
}

}  // namespace

BrokerService::BrokerService(Broker& broker) : broker_(broker), server_(std::make_unique<httplib::Server>()) {}
BrokerService::~BrokerService() = default;

HttpReply BrokerService::handle(const std::string& method, const std::string& path, const std::string& body,
                                const std::map<std::string, std::string>& query) {
  try {
    if (method == "POST" && path == "/session") {
      const auto doc = parse_body(body);
      const auto opened = broker_.open_session({field<std::string>(doc, "username"), field<std::string>(doc, "password"),
                                                field<std::string>(doc, "sourceAddr")});
      nlohmann::ordered_json out;
      out["sessionId"] = opened.sessionId;
      out["certId"] = opened.certificate.certId;
      out["issuedAt"] = opened.certificate.issuedAt;
      out["lifetime"] = opened.certificate.lifetime;
      auto services = nlohmann::ordered_json::array();
      for (const auto& s : opened.certificate.permittedServices) services.push_back(s.name);
      out["permittedServices"] = services;
      return {200, out.dump()};
    }
    if (method == "POST" && path == "/request") {
      const auto doc = parse_body(body);
      BrokerRequest req;
      req.sessionId = field<std::string>(doc, "sessionId");
      req.service = field<std::string>(doc, "service");
      req.path = field<std::string>(doc, "path");
      req.op = parse_op(field<std::string>(doc, "op"));
      req.sizeMB = doc.contains("sizeMB") ? field<double>(doc, "sizeMB") : 0.0;
      req.clientNode = field<std::string>(doc, "clientNode");
      const auto result = broker_.handle_request(req);
      return {result.ok() ? 200 : status_for(result.error.value_or(ErrorCode::Unauthorized)), to_json(result)};
    }
    if (method == "POST" && path == "/admin/policy") {
      const auto doc = parse_body(body);
      const auto action = field<std::string>(doc, "action");
      if (action == "create") {
        broker_.create_policy(policy_from_json(field<json>(doc, "policy")));
      } else if (action == "enable" || action == "disable") {
        broker_.set_policy_enabled(field<std::string>(doc, "policyId"), action == "enable");
      } else {
        return error_reply(400, ErrorCode::InvalidArgument, "unknown action " + action);
      }
      return {200, R"({"ok":true})"};
    }
    if (method == "POST" && path == "/admin/tick") {
      broker_.tick(field<ClusterTime>(parse_body(body), "seconds"));
      return {200, R"({"ok":true})"};
    }
    if (method == "GET" && path == "/audit/query") {
      const auto it = query.find("groupBy");
      const auto group = it == query.end() ? GroupBy::None : parse_group_by(it->second);
      const auto counts =
          broker_.central_audit().query_window(query_int(query, "start"), query_int(query, "end"), group);
      return {200, json(counts).dump()};
    }
    return error_reply(404, ErrorCode::InvalidArgument, "no route " + method + " " + path);
  } catch (const Error& e) {
    return error_reply(status_for(e.code()), e.code(), e.detail());
  }
}

void BrokerService::listen(const std::string& host, int port) {
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query[k] = v;
    const auto reply = handle(req.method, req.path, req.body, query);
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  };
  for (const char* p : {"/session", "/request", "/admin/policy", "/admin/tick"}) server_->Post(p, route);
  server_->Get("/audit/query", route);
  if (!server_->listen(host, port)) {
    throw Error(ErrorCode::InvalidArgument, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void BrokerService::stop() {
  server_->stop();
}

}  // namespace fedgate

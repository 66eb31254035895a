#include "fedgate/script.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fedgate {

namespace {

struct Statement {
  std::size_t line = 0;
  std::string text;
  std::size_t count = 0;  // repeat only
  std::string var;        // repeat only
  std::vector<Statement> body;
  bool repeat = false;
};

std::vector<std::string> split(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

// {min, max} argument counts after the command word; max of -1 is unbounded.
const std::map<std::string, std::pair<int, int>>& arity() {
  static const std::map<std::string, std::pair<int, int>> table = {
      {"tick", {1, 1}},        {"login", {4, 4}},       {"try-login", {3, 3}},   {"read", {4, 4}},
      {"write", {5, 5}},       {"call", {5, 5}},        {"direct-read", {5, 5}}, {"direct-write", {6, 6}},
      {"expect", {1, 2}},      {"mkdir", {5, -1}},      {"policy", {2, -1}},     {"grant", {3, 3}},
      {"revoke", {3, 3}},      {"member", {2, 2}},      {"unmember", {2, 2}},    {"skew", {2, 2}},
      {"silence", {1, 1}},     {"resume", {1, 1}},      {"query", {3, 4}},       {"spike", {5, 5}},
      {"denylist", {0, 1}},
  };
  return table;
}

[[noreturn]] void parse_fail(const std::string& name, std::size_t line, const std::string& what) {
  throw Error(ErrorCode::ParseError, name + ":" + std::to_string(line) + ": " + what);
}

std::vector<Statement> parse_script(std::istream& in, const std::string& name) {
  std::vector<std::vector<Statement>> stack(1);
  std::vector<Statement> open;
  std::size_t lineNo = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++lineNo;
    auto words = split(raw);
    if (words.empty() || words[0].front() == '#') continue;
    const auto& cmd = words[0];
    if (cmd == "repeat") {
      Statement s;
      s.line = lineNo;
      s.repeat = true;
      s.var = "i";
      if (words.size() != 2 && !(words.size() == 4 && words[2] == "as")) {
        parse_fail(name, lineNo, "usage: repeat <n> [as <var>]");
      }
      try {
        std::size_t used = 0;
        const long long n = std::stoll(words[1], &used);
        if (used != words[1].size() || n < 0) throw std::invalid_argument("count");
        s.count = static_cast<std::size_t>(n);
      } catch (const std::exception&) {
        parse_fail(name, lineNo, "bad repeat count '" + words[1] + "'");
      }
      if (words.size() == 4) s.var = words[3];
      open.push_back(std::move(s));
      stack.emplace_back();
      continue;
    }
    if (cmd == "end") {
      if (open.empty()) parse_fail(name, lineNo, "'end' without 'repeat'");
      Statement s = std::move(open.back());
      open.pop_back();
      s.body = std::move(stack.back());
      stack.pop_back();
      stack.back().push_back(std::move(s));
      continue;
    }
    const auto it = arity().find(cmd);
    if (it == arity().end()) parse_fail(name, lineNo, "unknown command '" + cmd + "'");
    const int args = static_cast<int>(words.size()) - 1;
    if (args < it->second.first || (it->second.second >= 0 && args > it->second.second)) {
      parse_fail(name, lineNo, "wrong number of arguments for '" + cmd + "'");
    }
    stack.back().push_back({lineNo, raw, 0, {}, {}, false});
  }
  if (!open.empty()) parse_fail(name, open.back().line, "'repeat' without 'end'");
  return std::move(stack.front());
}

std::string substitute(std::string text, const std::map<std::string, std::size_t>& vars) {
  for (const auto& [var, value] : vars) {
    const std::string key = "{" + var + "}";
    const std::string val = std::to_string(value);
    for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + val.size())) {
      text.replace(pos, key.size(), val);
    }
  }
  return text;
}

long long to_int(const std::string& s) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw Error(ErrorCode::InvalidArgument, "not an integer '" + s + "'");
  return v;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw Error(ErrorCode::InvalidArgument, "not a number '" + s + "'");
  return v;
}

class Runner {
 public:
  Runner(const ClusterConfig& config, std::string name) : broker_(build_broker(config)), name_(std::move(name)) {}

  void run(const std::vector<Statement>& program, std::map<std::string, std::size_t>& vars) {
    for (const auto& s : program) {
      if (s.repeat) {
        const bool shadowed = vars.contains(s.var);
        const auto saved = shadowed ? vars[s.var] : 0;
        for (std::size_t i = 0; i < s.count; ++i) {
          vars[s.var] = i;
          run(s.body, vars);
        }
        if (shadowed) vars[s.var] = saved; else vars.erase(s.var);
        continue;
      }
      try {
        execute(substitute(s.text, vars));
      } catch (const Error& e) {
        throw Error(e.code(), name_ + ":" + std::to_string(s.line) + ": " + e.detail());
      }
    }
  }

  ScenarioOutcome finish() {
    outcome_.audit = broker_->central_audit();
    return std::move(outcome_);
  }

 private:
  const OpenedSession& session(const std::string& var) {
    const auto it = sessions_.find(var);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session named '" + var + "'");
    return it->second;
  }

  void record(ServiceResult r) {
    ++outcome_.requests;
    ++(r.ok() ? outcome_.allowed : outcome_.denied);
    last_ = std::move(r);
  }

  Permission permission(const std::string& service, const std::string& op) {
    return {broker_->model()->service(service), parse_op(op)};
  }

  void execute(const std::string& text) {
    const auto w = split(text);
    const auto& cmd = w[0];
    ++outcome_.commands;
    if (cmd == "tick") {
      broker_->tick(to_int(w[1]));
    } else if (cmd == "login") {
      sessions_[w[1]] = broker_->open_session({w[2], w[3], w[4]});
    } else if (cmd == "try-login") {
      try {
        broker_->open_session({w[1], w[2], w[3]});
      } catch (const Error& e) {
        ServiceResult r;
        r.error = e.code();
        r.message = e.what();
        record(std::move(r));
      }
    } else if (cmd == "read" || cmd == "write" || cmd == "call") {
      BrokerRequest req;
      req.sessionId = session(w[1]).sessionId;
      req.service = w[2];
      req.path = w[3];
      if (cmd == "read") {
        req.op = OpKind::Read;
        req.clientNode = w[4];
      } else if (cmd == "write") {
        req.op = OpKind::Write;
        req.sizeMB = to_double(w[4]);
        req.clientNode = w[5];
      } else {
        req.op = parse_op(w[4]);
        req.clientNode = w[5];
      }
      record(broker_->handle_request(req));
    } else if (cmd == "direct-read" || cmd == "direct-write") {
      DirectRequest req{w[1], w[2], w[3], w[4], OpKind::Read, 0.0, w[5]};
      if (cmd == "direct-write") {
        req.op = OpKind::Write;
        req.sizeMB = to_double(w[5]);
        req.clientNode = w[6];
      }
      record(broker_->direct_request(req));
    } else if (cmd == "expect") {
      if (!last_) throw Error(ErrorCode::InvalidArgument, "expect before any request");
      const bool wantAllow = w[1] == "allow";
      if (!wantAllow && w[1] != "deny") throw Error(ErrorCode::InvalidArgument, "expect allow|deny");
      if (last_->ok() != wantAllow) {
        throw Error(ErrorCode::InvalidArgument, "expected " + w[1] + ", got " + to_json(*last_));
      }
      if (w.size() == 3 && (!last_->error || to_string(*last_->error) != w[2])) {
        throw Error(ErrorCode::InvalidArgument, "expected error " + w[2] + ", got " + to_json(*last_));
      }
    } else if (cmd == "mkdir") {
      FileAttrs attrs{w[3], w[4], Mode::parse(w[5]), {}};
      std::set<std::string> tags(w.begin() + 6, w.end());
      std::lock_guard lock(broker_->mutex());
      broker_->cluster().mkdir(w[1], w[2], attrs, tags);
    } else if (cmd == "policy") {
      if (w[1] == "create") {
        const auto pos = text.find("create");
        nlohmann::json doc;
        try {
          doc = nlohmann::json::parse(text.substr(pos + 6));
        } catch (const nlohmann::json::parse_error& e) {
          throw Error(ErrorCode::ParseError, e.what());
        }
        broker_->create_policy(policy_from_json(doc));
      } else if ((w[1] == "enable" || w[1] == "disable") && w.size() == 3) {
        broker_->set_policy_enabled(w[2], w[1] == "enable");
      } else {
        throw Error(ErrorCode::InvalidArgument, "usage: policy create <json> | policy enable|disable <id>");
      }
    } else if (cmd == "grant" || cmd == "revoke") {
      const auto principal = parse_principal(w[1]);
      const auto perm = permission(w[2], w[3]);
      const ModelEdit edit = cmd == "grant" ? ModelEdit::add_assignment(principal, perm)
                                            : ModelEdit::remove_assignment(principal, perm);
      broker_->update_model(std::span(&edit, 1));
    } else if (cmd == "member" || cmd == "unmember") {
      const ModelEdit edit = cmd == "member" ? ModelEdit::add_membership(w[1], w[2])
                                             : ModelEdit::remove_membership(w[1], w[2]);
      broker_->update_model(std::span(&edit, 1));
    } else if (cmd == "skew") {
      broker_->set_node_clock_offset(w[1], to_int(w[2]));
    } else if (cmd == "silence" || cmd == "resume") {
      std::lock_guard lock(broker_->mutex());
      if (cmd == "silence") broker_->cluster().silence_datanode(w[1]);
      else broker_->cluster().resume_datanode(w[1]);
    } else if (cmd == "query") {
      const auto group = w.size() == 5 ? parse_group_by(w[4]) : GroupBy::None;
      outcome_.queries[w[1]] = broker_->central_audit().query_window(to_int(w[2]), to_int(w[3]), group);
    } else if (cmd == "spike") {
      outcome_.spike = broker_->central_audit().detect_spike(to_int(w[1]), to_int(w[2]), to_int(w[3]),
                                                             to_int(w[4]), to_double(w[5]));
      outcome_.spikeChecked = true;
    } else if (cmd == "denylist") {
      const bool unauthorizedOnly = w.size() == 2;
      if (unauthorizedOnly && w[1] != "unauthorized-only") {
        throw Error(ErrorCode::InvalidArgument, "usage: denylist [unauthorized-only]");
      }
      if (!outcome_.spikeChecked) throw Error(ErrorCode::EmptyReport, "denylist before spike");
      outcome_.denylist = outcome_.spike ? emit_denylist(*outcome_.spike, unauthorizedOnly)
                                         : std::vector<std::string>{};
    }
  }

  std::unique_ptr<Broker> broker_;
  std::string name_;
  std::map<std::string, OpenedSession> sessions_;
  std::optional<ServiceResult> last_;
  ScenarioOutcome outcome_;
};

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << content;
}

}  // namespace

std::string summary_json(const ScenarioOutcome& o) {
  nlohmann::ordered_json doc;
  doc["commands"] = o.commands;
  doc["requests"] = o.requests;
  doc["allowed"] = o.allowed;
  doc["denied"] = o.denied;
  doc["auditRecords"] = o.audit.size();
  doc["spike"] = o.spike.has_value();
  doc["denylist"] = o.denylist ? nlohmann::ordered_json(o.denylist->size()) : nlohmann::ordered_json(nullptr);
  return doc.dump(2) + "\n";
}

ScenarioOutcome run_scenario(const ClusterConfig& config, std::istream& script, const std::string& scriptName,
                             const std::string& outDir) {
  const auto program = parse_script(script, scriptName);
  Runner runner(config, scriptName);
  std::map<std::string, std::size_t> vars;
  runner.run(program, vars);
  auto outcome = runner.finish();

  if (!outDir.empty()) {
    const std::filesystem::path dir(outDir);
    std::filesystem::create_directories(dir);
    outcome.audit.save((dir / "audit.jsonl").string());
    for (const auto& [name, counts] : outcome.queries) {
      write_file(dir / ("query-" + name + ".json"), nlohmann::json(counts).dump(2) + "\n");
    }
    if (outcome.spikeChecked) write_file(dir / "spike.json", (outcome.spike ? to_json(*outcome.spike) : "null") + std::string("\n"));
    if (outcome.denylist) {
      std::string text;
      for (const auto& line : *outcome.denylist) text += line + "\n";
      write_file(dir / "denylist.txt", text);
    }
    write_file(dir / "summary.json", summary_json(outcome));
  }
  return outcome;
}

}  // namespace fedgate

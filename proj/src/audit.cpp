#include "fedgate/audit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

namespace fedgate {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::array<std::string_view, 8> kStageNames = {
    "Gateway", "Handshake", "Certificate", "CentralPolicy",
    "LocalAcl", "ServiceModel", "Token", "Service"};

void require_window(ClusterTime start, ClusterTime end) {
  if (start > end) {
    throw Error(ErrorCode::InvalidWindow,
                "[" + std::to_string(start) + ", " + std::to_string(end) + ")");
  }
}

void require_nonempty_window(ClusterTime start, ClusterTime end) {
  if (start >= end) {
    throw Error(ErrorCode::InvalidWindow,
                "rate window [" + std::to_string(start) + ", " + std::to_string(end) + ") is empty");
  }
}

const std::vector<std::size_t> kNoOffsets;

}  // namespace

std::string_view to_string(AuditStage stage) { return kStageNames[static_cast<std::size_t>(stage)]; }

AuditStage parse_stage(std::string_view text) {
  for (std::size_t i = 0; i < kStageNames.size(); ++i) {
    if (kStageNames[i] == text) return static_cast<AuditStage>(i);
  }
  throw Error(ErrorCode::ParseError, "unknown audit stage '" + std::string(text) + "'");
}

std::string to_json_line(const AuditRecord& r) {
  ojson doc;
  doc["timestamp"] = r.timestamp;
  doc["clientId"] = r.clientId;
  doc["sourceAddr"] = r.sourceAddr;
  doc["country"] = r.country ? ojson(*r.country) : ojson(nullptr);
  doc["service"] = r.service;
  doc["op"] = std::string(to_string(r.op));
  doc["path"] = r.path ? ojson(*r.path) : ojson(nullptr);
  doc["decision"] = std::string(to_string(r.decision));
  doc["stage"] = std::string(to_string(r.stage));
  doc["enforcerId"] = r.enforcerId;
  return doc.dump();
}

AuditRecord parse_json_line(std::string_view line) {
  AuditRecord r;
  try {
    const auto doc = nlohmann::json::parse(line);
    if (!doc.is_object()) throw Error(ErrorCode::MalformedRecord, "record is not an object");
    for (const char* key : {"timestamp", "clientId", "sourceAddr", "service", "op", "decision",
                            "stage", "enforcerId"}) {
      if (!doc.contains(key) || doc.at(key).is_null()) {
        throw Error(ErrorCode::MalformedRecord, std::string("missing field '") + key + "'");
      }
    }
    r.timestamp = doc.at("timestamp").get<ClusterTime>();
    r.clientId = doc.at("clientId").get<std::string>();
    r.sourceAddr = doc.at("sourceAddr").get<std::string>();
    if (doc.contains("country") && !doc.at("country").is_null()) {
      r.country = doc.at("country").get<std::string>();
    }
    r.service = doc.at("service").get<std::string>();
    r.op = parse_op(doc.at("op").get<std::string>());
    if (doc.contains("path") && !doc.at("path").is_null()) r.path = doc.at("path").get<std::string>();
    r.decision = parse_effect(doc.at("decision").get<std::string>());
    r.stage = parse_stage(doc.at("stage").get<std::string>());
    r.enforcerId = doc.at("enforcerId").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedRecord) throw;
    throw Error(ErrorCode::MalformedRecord, e.detail());
  }
  return r;
}

void LocalAuditLog::append(AuditRecord record) {
  if (!records_.empty() && record.timestamp < records_.back().timestamp) {
    throw Error(ErrorCode::UnorderedLocalLog,
                enforcerId_ + ": timestamp " + std::to_string(record.timestamp) + " after " +
                    std::to_string(records_.back().timestamp));
  }
  records_.push_back(std::move(record));
}

void CentralAuditStore::append_record(AuditRecord record) {
  if (record.clientId.empty() || record.service.empty() || record.enforcerId.empty()) {
    throw Error(ErrorCode::MalformedRecord, "clientId, service and enforcerId are required");
  }
  sourceIndex_[record.sourceAddr].push_back(records_.size());
  records_.push_back(std::move(record));
}

void CentralAuditStore::aggregate_logs(const std::vector<std::vector<AuditRecord>>& logs) {
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const auto& log = logs[i];
    for (std::size_t j = 1; j < log.size(); ++j) {
      if (log[j].timestamp < log[j - 1].timestamp) {
        throw Error(ErrorCode::UnorderedLocalLog,
                    "log " + std::to_string(i) + " record " + std::to_string(j));
      }
    }
  }
  for (const auto& log : logs) {
    for (const auto& r : log) {
      if (r.clientId.empty() || r.service.empty() || r.enforcerId.empty()) {
        throw Error(ErrorCode::MalformedRecord, "clientId, service and enforcerId are required");
      }
    }
  }

  struct Cursor {
    std::size_t log;
    std::size_t pos;
  };
  auto key = [&](const Cursor& c) {
    const auto& r = logs[c.log][c.pos];
    return std::tie(r.timestamp, r.enforcerId, c.log);
  };
  auto later = [&](const Cursor& a, const Cursor& b) { return key(a) > key(b); };
  std::priority_queue<Cursor, std::vector<Cursor>, decltype(later)> heap(later);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    if (!logs[i].empty()) heap.push({i, 0});
  }
  while (!heap.empty()) {
    auto c = heap.top();
    heap.pop();
    append_record(logs[c.log][c.pos]);
    if (c.pos + 1 < logs[c.log].size()) heap.push({c.log, c.pos + 1});
  }
}

void CentralAuditStore::aggregate_logs(const std::vector<const LocalAuditLog*>& logs) {
  std::vector<std::vector<AuditRecord>> copies;
  copies.reserve(logs.size());
  for (const auto* log : logs) copies.push_back(log->records());
  aggregate_logs(copies);
}

const std::vector<std::size_t>& CentralAuditStore::offsets_for(const std::string& sourceAddr) const {
  auto it = sourceIndex_.find(sourceAddr);
  return it == sourceIndex_.end() ? kNoOffsets : it->second;
}

std::map<std::string, std::size_t> CentralAuditStore::query_window(ClusterTime start, ClusterTime end,
                                                                   GroupBy groupBy) const {
  require_window(start, end);
  std::map<std::string, std::size_t> counts;
  if (groupBy == GroupBy::None) counts["total"] = 0;
  if (groupBy == GroupBy::Decision) {
    counts["Allow"] = 0;
    counts["Deny"] = 0;
  }
  for (const auto& r : records_) {
    if (r.timestamp < start || r.timestamp >= end) continue;
    switch (groupBy) {
      case GroupBy::None: ++counts["total"]; break;
      case GroupBy::Source: ++counts[r.sourceAddr]; break;
      case GroupBy::Decision: ++counts[std::string(to_string(r.decision))]; break;
    }
  }
  return counts;
}

GroupBy parse_group_by(std::string_view text) {
  if (text.empty() || text == "none") return GroupBy::None;
  if (text == "source") return GroupBy::Source;
  if (text == "decision") return GroupBy::Decision;
  throw Error(ErrorCode::ParseError, "group-by must be none, source or decision");
}

std::optional<SpikeReport> CentralAuditStore::detect_spike(ClusterTime start, ClusterTime end,
                                                           ClusterTime baselineStart,
                                                           ClusterTime baselineEnd,
                                                           double thresholdFactor) const {
  require_nonempty_window(start, end);
  require_nonempty_window(baselineStart, baselineEnd);
  if (!(thresholdFactor > 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold factor must be > 0");

  struct Tally {
    std::size_t window = 0;
    std::size_t allowed = 0;
    std::size_t baseline = 0;
  };
  std::map<std::string, Tally> perSource;
  std::size_t observed = 0;
  std::size_t baseline = 0;
  for (const auto& r : records_) {
    if (r.timestamp >= start && r.timestamp < end) {
      ++observed;
      auto& t = perSource[r.sourceAddr];
      ++t.window;
      if (r.decision == Effect::Allow) ++t.allowed;
    }
    if (r.timestamp >= baselineStart && r.timestamp < baselineEnd) {
      ++baseline;
      ++perSource[r.sourceAddr].baseline;
    }
  }

  const double windowSeconds = static_cast<double>(end - start);
  const double baselineSeconds = static_cast<double>(baselineEnd - baselineStart);
  auto exceeds = [&](std::size_t windowCount, std::size_t baselineCount) {
    if (windowCount == 0) return false;
    if (baselineCount == 0) return static_cast<double>(windowCount) >= thresholdFactor;
    return static_cast<double>(windowCount) / windowSeconds >=
           thresholdFactor * (static_cast<double>(baselineCount) / baselineSeconds);
  };
  if (!exceeds(observed, baseline)) return std::nullopt;

  SpikeReport report;
  report.windowStart = start;
  report.windowEnd = end;
  report.observedRate = static_cast<double>(observed) / windowSeconds;
  report.baselineRate = static_cast<double>(baseline) / baselineSeconds;
  report.factor = baseline == 0 ? std::numeric_limits<double>::infinity()
                                : report.observedRate / report.baselineRate;
  for (const auto& [source, t] : perSource) {
    if (!exceeds(t.window, t.baseline)) continue;
    report.offendingSources.push_back(
        {source, t.window, static_cast<double>(t.allowed) / static_cast<double>(t.window)});
  }
  std::sort(report.offendingSources.begin(), report.offendingSources.end(),
            [](const SourceActivity& a, const SourceActivity& b) {
              if (a.count != b.count) return a.count > b.count;
              return a.sourceAddr < b.sourceAddr;
            });
  return report;
}

std::string to_json(const SpikeReport& report) {
  ojson doc;
  doc["window"] = {report.windowStart, report.windowEnd};
  doc["baselineRate"] = report.baselineRate;
  doc["observedRate"] = report.observedRate;
  doc["factor"] = std::isinf(report.factor) ? ojson("inf") : ojson(report.factor);
  auto sources = ojson::array();
  for (const auto& s : report.offendingSources) {
    ojson entry;
    entry["sourceAddr"] = s.sourceAddr;
    entry["count"] = s.count;
    entry["authorizedFraction"] = s.authorizedFraction;
    sources.push_back(entry);
  }
  doc["offendingSources"] = sources;
  return doc.dump(2);
}

void CentralAuditStore::write(std::ostream& out) const {
  for (const auto& r : records_) out << to_json_line(r) << '\n';
}

void CentralAuditStore::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  write(out);
}

CentralAuditStore CentralAuditStore::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read " + path);
  CentralAuditStore store;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    try {
      store.append_record(parse_json_line(line));
    } catch (const Error& e) {
      throw Error(e.code(), path + ":" + std::to_string(lineNo) + ": " + e.detail());
    }
  }
  return store;
}

std::vector<std::string> emit_denylist(const SpikeReport& report, bool denyUnauthorizedOnly) {
  if (report.offendingSources.empty()) throw Error(ErrorCode::EmptyReport, "no offending sources");
  std::vector<std::string> rules;
  for (const auto& s : report.offendingSources) {
    if (denyUnauthorizedOnly && s.authorizedFraction >= 1.0) continue;
    rules.push_back("deny " + s.sourceAddr);
  }
  return rules;
}

}  // namespace fedgate

#pragma once

// Audit records, the append-only central store, windowed forensic queries,
// request-spike detection and deny-list emission.
//
// Store file format: UTF-8, one JSON object per line, keys in the order
// timestamp, clientId, sourceAddr, country, service, op, path, decision,
// stage, enforcerId. Absent optional fields are written as null.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedgate/common.hpp"

namespace fedgate {

enum class AuditStage : std::uint8_t {
  Gateway,
  Handshake,
  Certificate,
  CentralPolicy,
  LocalAcl,
  ServiceModel,
  Token,
  Service,
};

std::string_view to_string(AuditStage stage);
AuditStage parse_stage(std::string_view text);

struct AuditRecord {
  ClusterTime timestamp = 0;
  std::string clientId;
  std::string sourceAddr;
  std::optional<std::string> country;
  std::string service;
  OpKind op = OpKind::Read;
  std::optional<std::string> path;
  Effect decision = Effect::Deny;
  AuditStage stage = AuditStage::Service;
  std::string enforcerId;

  bool operator==(const AuditRecord&) const = default;
};

std::string to_json_line(const AuditRecord& record);
/// Throws MalformedRecord when a required field is missing or ill-typed.
AuditRecord parse_json_line(std::string_view line);

/// Per-enforcer append-only log. Timestamps never decrease.
class LocalAuditLog {
 public:
  explicit LocalAuditLog(std::string enforcerId) : enforcerId_(std::move(enforcerId)) {}

  void append(AuditRecord record);
  [[nodiscard]] const std::string& enforcer_id() const { return enforcerId_; }
  [[nodiscard]] const std::vector<AuditRecord>& records() const { return records_; }
  [[nodiscard]] std::size_t size() const { return records_.size(); }

 private:
  std::string enforcerId_;
  std::vector<AuditRecord> records_;
};

enum class GroupBy : std::uint8_t { None, Source, Decision };

GroupBy parse_group_by(std::string_view text);

struct SourceActivity {
  std::string sourceAddr;
  std::size_t count = 0;
  double authorizedFraction = 0.0;

  bool operator==(const SourceActivity&) const = default;
};

struct SpikeReport {
  ClusterTime windowStart = 0;
  ClusterTime windowEnd = 0;
  double baselineRate = 0.0;
  double observedRate = 0.0;
  /// observed / baseline; +inf when the baseline window was silent.
  double factor = 0.0;
  /// Sorted by count descending, then address.
  std::vector<SourceActivity> offendingSources;
};

std::string to_json(const SpikeReport& report);

class CentralAuditStore {
 public:
  /// Throws MalformedRecord for records lacking clientId, service or enforcerId.
  void append_record(AuditRecord record);

  /// k-way merge by (timestamp, enforcerId). Every input record lands exactly
  /// once; nothing is appended if any log is out of order.
  void aggregate_logs(const std::vector<const LocalAuditLog*>& logs);
  void aggregate_logs(const std::vector<std::vector<AuditRecord>>& logs);

  [[nodiscard]] const std::vector<AuditRecord>& records() const { return records_; }
  [[nodiscard]] std::size_t size() const { return records_.size(); }
  [[nodiscard]] const std::vector<std::size_t>& offsets_for(const std::string& sourceAddr) const;

  /// Counts over start <= timestamp < end. Keys: "total" for None,
  /// source addresses for Source, "Allow"/"Deny" for Decision.
  [[nodiscard]] std::map<std::string, std::size_t> query_window(ClusterTime start, ClusterTime end,
                                                                GroupBy groupBy) const;

  /// Report iff observedRate >= thresholdFactor * baselineRate. With a silent
  /// baseline, a window holding at least thresholdFactor requests counts as a spike.
  [[nodiscard]] std::optional<SpikeReport> detect_spike(ClusterTime start, ClusterTime end,
                                                        ClusterTime baselineStart,
                                                        ClusterTime baselineEnd,
                                                        double thresholdFactor) const;

  void write(std::ostream& out) const;
  void save(const std::string& path) const;
  static CentralAuditStore load(const std::string& path);

 private:
  std::vector<AuditRecord> records_;
  std::map<std::string, std::vector<std::size_t>> sourceIndex_;
};

/// One "deny <addr>" rule per offending source. With denyUnauthorizedOnly,
/// sources whose traffic was entirely authorized are skipped.
std::vector<std::string> emit_denylist(const SpikeReport& report, bool denyUnauthorizedOnly);

}  // namespace fedgate

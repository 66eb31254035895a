#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fedgate {

/// Simulation time in whole seconds since cluster start.
using ClusterTime = std::int64_t;

constexpr ClusterTime kHour = 3600;
constexpr ClusterTime kDay = 24 * kHour;

enum class ErrorCode {
  InvalidArgument,
  // policy_core
  UnknownPrincipal,
  UnknownService,
  DuplicateEntry,
  MissingEntry,
  MaskExceedsCreator,
  UnknownSubject,
  // authz_engine
  DuplicatePolicyId,
  MalformedConstraint,
  UnknownPolicy,
  NoSuchPath,
  ParentNotDirectory,
  // authn_tokens
  UnknownUser,
  BadPassword,
  SourceNotAllowed,
  UnknownSession,
  SessionExpired,
  HandshakeFailure,
  TicketExpired,
  InvalidMac,
  NotRenewer,
  TokenExpired,
  MaxLifetimeExceeded,
  UnknownNode,
  // federation_sim
  DuplicateNode,
  AuthenticationRequired,
  InsufficientNodes,
  NoLiveReplica,
  FileExists,
  Unauthorized,
  TokenInvalid,
  // broker_pipeline
  CertificateExpired,
  ServiceNotPermitted,
  DuplicateEnforcer,
  SecureModeActive,
  // audit_forensics
  MalformedRecord,
  UnorderedLocalLog,
  InvalidWindow,
  EmptyReport,
  // cli_bench
  ParseError,
  DegenerateInput,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

enum class OpKind : std::uint8_t { Read, Write, Execute, Admin };

inline constexpr std::array<OpKind, 4> kAllOps = {OpKind::Read, OpKind::Write,
                                                  OpKind::Execute, OpKind::Admin};

std::string_view to_string(OpKind op);
OpKind parse_op(std::string_view text);

enum class Effect : std::uint8_t { Allow, Deny };

std::string_view to_string(Effect effect);
Effect parse_effect(std::string_view text);

}  // namespace fedgate

#include "fedgate/common.hpp"

namespace fedgate {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnknownPrincipal: return "UnknownPrincipal";
    case ErrorCode::UnknownService: return "UnknownService";
    case ErrorCode::DuplicateEntry: return "DuplicateEntry";
    case ErrorCode::MissingEntry: return "MissingEntry";
    case ErrorCode::MaskExceedsCreator: return "MaskExceedsCreator";
    case ErrorCode::UnknownSubject: return "UnknownSubject";
    case ErrorCode::DuplicatePolicyId: return "DuplicatePolicyId";
    case ErrorCode::MalformedConstraint: return "MalformedConstraint";
    case ErrorCode::UnknownPolicy: return "UnknownPolicy";
    case ErrorCode::NoSuchPath: return "NoSuchPath";
    case ErrorCode::ParentNotDirectory: return "ParentNotDirectory";
    case ErrorCode::UnknownUser: return "UnknownUser";
    case ErrorCode::BadPassword: return "BadPassword";
    case ErrorCode::SourceNotAllowed: return "SourceNotAllowed";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::SessionExpired: return "SessionExpired";
    case ErrorCode::HandshakeFailure: return "HandshakeFailure";
    case ErrorCode::TicketExpired: return "TicketExpired";
    case ErrorCode::InvalidMac: return "InvalidMac";
    case ErrorCode::NotRenewer: return "NotRenewer";
    case ErrorCode::TokenExpired: return "TokenExpired";
    case ErrorCode::MaxLifetimeExceeded: return "MaxLifetimeExceeded";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::DuplicateNode: return "DuplicateNode";
    case ErrorCode::AuthenticationRequired: return "AuthenticationRequired";
    case ErrorCode::InsufficientNodes: return "InsufficientNodes";
    case ErrorCode::NoLiveReplica: return "NoLiveReplica";
    case ErrorCode::FileExists: return "FileExists";
    case ErrorCode::Unauthorized: return "Unauthorized";
    case ErrorCode::TokenInvalid: return "TokenInvalid";
    case ErrorCode::CertificateExpired: return "CertificateExpired";
    case ErrorCode::ServiceNotPermitted: return "ServiceNotPermitted";
    case ErrorCode::DuplicateEnforcer: return "DuplicateEnforcer";
    case ErrorCode::SecureModeActive: return "SecureModeActive";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::UnorderedLocalLog: return "UnorderedLocalLog";
    case ErrorCode::InvalidWindow: return "InvalidWindow";
    case ErrorCode::EmptyReport: return "EmptyReport";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
  }
  return "Unknown";
}

std::string_view to_string(OpKind op) {
  switch (op) {
    case OpKind::Read: return "Read";
    case OpKind::Write: return "Write";
    case OpKind::Execute: return "Execute";
    case OpKind::Admin: return "Admin";
  }
  return "?";
}

OpKind parse_op(std::string_view text) {
  for (auto op : kAllOps) {
    if (to_string(op) == text) return op;
  }
  throw Error(ErrorCode::ParseError, "unknown operation '" + std::string(text) + "'");
}

std::string_view to_string(Effect effect) {
  return effect == Effect::Allow ? "Allow" : "Deny";
}

Effect parse_effect(std::string_view text) {
  if (text == "Allow") return Effect::Allow;
  if (text == "Deny") return Effect::Deny;
  throw Error(ErrorCode::ParseError, "unknown effect '" + std::string(text) + "'");
}

}  // namespace fedgate

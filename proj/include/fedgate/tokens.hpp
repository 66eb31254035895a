#pragma once

// Lifetime-bounded, MAC-protected credentials: handshake tickets,
// delegation tokens and block access tokens.
//
// Wire layout (big-endian, length-prefixed strings, MAC last):
//   u8 type tag | fields in declaration order | u32 len | mac bytes

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedgate/common.hpp"

namespace fedgate {

using Bytes = std::vector<std::uint8_t>;
using Secret = std::array<std::uint8_t, 32>;

Secret random_secret(std::mt19937_64& rng);

Bytes hmac_sha256(const Secret& key, std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view data);

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void str(std::string_view s);
  void bytes(std::span<const std::uint8_t> b);

  [[nodiscard]] const Bytes& data() const { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

/// Throws ParseError on truncated input.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  std::string str();
  Bytes bytes();

  [[nodiscard]] bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

enum class TokenStatus : std::uint8_t { Valid, Expired, Forged };

std::string_view to_string(TokenStatus status);

struct HandshakeTicket {
  std::string principal;
  ClusterTime issuedAt = 0;
  ClusterTime lifetime = 0;
  Bytes mac;

  [[nodiscard]] Bytes signed_bytes() const;
  [[nodiscard]] Bytes encode() const;
  static HandshakeTicket decode(std::span<const std::uint8_t> wire);
  [[nodiscard]] ClusterTime expiry() const { return issuedAt + lifetime; }
  bool operator==(const HandshakeTicket&) const = default;
};

struct DelegationToken {
  std::string owner;
  std::optional<std::string> renewer;
  ClusterTime issuedAt = 0;
  ClusterTime currentExpiry = 0;
  ClusterTime maxLifetime = 0;
  std::uint64_t sequence = 0;
  Bytes mac;

  [[nodiscard]] Bytes signed_bytes() const;
  [[nodiscard]] Bytes encode() const;
  static DelegationToken decode(std::span<const std::uint8_t> wire);
  /// The earlier of the renewal deadline and the hard lifetime bound.
  [[nodiscard]] ClusterTime expiry() const { return std::min(currentExpiry, issuedAt + maxLifetime); }
  bool operator==(const DelegationToken&) const = default;
};

struct BlockToken {
  std::string blockId;
  std::set<OpKind> modes;
  ClusterTime expiry = 0;
  Bytes mac;

  [[nodiscard]] Bytes signed_bytes() const;
  [[nodiscard]] Bytes encode() const;
  static BlockToken decode(std::span<const std::uint8_t> wire);
  bool operator==(const BlockToken&) const = default;
};

/// Forged on MAC mismatch, Expired when validatorNow is past expiry.
TokenStatus validate_token(const HandshakeTicket& token, const Secret& secret, ClusterTime validatorNow);
TokenStatus validate_token(const DelegationToken& token, const Secret& secret, ClusterTime validatorNow);
TokenStatus validate_token(const BlockToken& token, const Secret& secret, ClusterTime validatorNow);

struct TokenConfig {
  ClusterTime ticketLifetime = 10 * kHour;
  ClusterTime renewInterval = kDay;
  ClusterTime maxLifetime = 7 * kDay;
  ClusterTime blockTokenLifetime = 10 * kHour;
};

struct IssuerCounters {
  std::uint64_t tickets = 0;
  std::uint64_t delegationTokens = 0;
  std::uint64_t renewals = 0;
  std::uint64_t blockTokens = 0;
};

/// Authority that mints tickets and delegation tokens under one secret.
/// Issuance is serialized per issuer; the DT sequence is strictly increasing.
class TokenIssuer {
 public:
  TokenIssuer(Secret secret, TokenConfig config) : secret_(secret), config_(config) {}

  [[nodiscard]] const Secret& secret() const { return secret_; }
  [[nodiscard]] const TokenConfig& config() const { return config_; }
  [[nodiscard]] const IssuerCounters& counters() const { return counters_; }

  HandshakeTicket issue_ticket(const std::string& principal, ClusterTime now);

  DelegationToken issue_delegation_token(const HandshakeTicket& ticket,
                                         std::optional<std::string> renewer, ClusterTime now);

  DelegationToken renew_delegation_token(const DelegationToken& token, const std::string& renewer,
                                         ClusterTime now);

  /// MAC keyed by `sharedSecret`, the key the NameNode shares with its DataNodes.
  BlockToken issue_block_token(const DelegationToken& token, const std::string& blockId,
                               std::set<OpKind> modes, const Secret& sharedSecret, ClusterTime now);

 private:
  void require_live(const DelegationToken& token, ClusterTime now) const;

  Secret secret_;
  TokenConfig config_;
  IssuerCounters counters_;
  std::uint64_t nextSequence_ = 1;
};

}  // namespace fedgate

#pragma once

// Perimeter authentication: host-table login and the simulated three-way
// (request -> challenge -> proof) handshake that yields a ticket.

#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fedgate/tokens.hpp"

namespace fedgate {

struct Credential {
  std::string username;
  std::string password;
  std::string sourceAddr;
};

struct HostEntry {
  std::string passwordHash;
  /// Exact addresses; "*" admits any source.
  std::set<std::string> sources;
};

class HostTable {
 public:
  void add(const std::string& username, const std::string& password, std::set<std::string> sources);
  [[nodiscard]] const HostEntry* find(const std::string& username) const;
  [[nodiscard]] const std::map<std::string, HostEntry>& entries() const { return entries_; }

 private:
  std::map<std::string, HostEntry> entries_;
};

enum class HandshakeStep : std::uint8_t { Request, Challenge, Proof };

struct HandshakeMessage {
  HandshakeStep step;
  Bytes payload;
};

struct Session {
  std::string id;
  std::string user;
  std::string sourceAddr;
  ClusterTime openedAt = 0;
  ClusterTime expiresAt = 0;
  /// Client-side key, derived from the password the client logged in with.
  Secret clientKey{};
  Bytes clientNonce;
  Bytes serverNonce;
  std::vector<HandshakeMessage> transcript;
};

struct GatewayCounters {
  std::uint64_t logins = 0;
  std::uint64_t failedLogins = 0;
  std::uint64_t handshakes = 0;
  std::uint64_t failedHandshakes = 0;
};

/// Key both sides derive from the password; the gateway only stores its hash.
Secret derive_user_key(std::string_view passwordHash);

/// Proof the client sends in the third handshake message.
Bytes handshake_proof(const Secret& userKey, const std::string& user, const Bytes& clientNonce,
                      const Bytes& serverNonce);

class Gateway {
 public:
  Gateway(HostTable hosts, std::uint64_t seed, ClusterTime sessionLifetime = 10 * kHour);

  /// Session id iff the user is listed, the password matches and the source
  /// is allowed. Failures never produce a handshake.
  std::string gateway_login(const Credential& credential, ClusterTime now);

  /// Message 1 and 2: records the client request and returns the challenge nonce.
  Bytes begin_handshake(const std::string& sessionId, ClusterTime now);
  /// Message 3: verifies the proof and asks `authority` for a ticket.
  HandshakeTicket complete_handshake(const std::string& sessionId, const Bytes& proof,
                                     TokenIssuer& authority, ClusterTime now);
  /// All three messages with an honest client proof.
  HandshakeTicket handshake_authenticate(const std::string& sessionId, TokenIssuer& authority,
                                         ClusterTime now);

  [[nodiscard]] const Session& session(const std::string& sessionId) const;
  [[nodiscard]] const GatewayCounters& counters() const { return counters_; }
  [[nodiscard]] const HostTable& hosts() const { return hosts_; }

 private:
  Session& live_session(const std::string& sessionId, ClusterTime now);
  Bytes nonce();

  HostTable hosts_;
  std::mt19937_64 rng_;
  ClusterTime sessionLifetime_;
  std::map<std::string, Session> sessions_;
  GatewayCounters counters_;
  std::uint64_t nextSession_ = 1;
};

}  // namespace fedgate

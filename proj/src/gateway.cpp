#include "fedgate/gateway.hpp"

namespace fedgate {

void HostTable::add(const std::string& username, const std::string& password,
                    std::set<std::string> sources) {
  if (username.empty()) throw Error(ErrorCode::InvalidArgument, "empty username in host table");
  if (!entries_.emplace(username, HostEntry{sha256_hex(password), std::move(sources)}).second) {
    throw Error(ErrorCode::DuplicateEntry, "host table user " + username);
  }
}

const HostEntry* HostTable::find(const std::string& username) const {
  auto it = entries_.find(username);
  return it == entries_.end() ? nullptr : &it->second;
}

Secret derive_user_key(std::string_view passwordHash) {
  Secret key{};
  const auto hex = sha256_hex(std::string("fedgate-user-key:") + std::string(passwordHash));
  for (std::size_t i = 0; i < key.size(); ++i) {
    key[i] = static_cast<std::uint8_t>(std::stoi(hex.substr(2 * i, 2), nullptr, 16));
  }
  return key;
}

Bytes handshake_proof(const Secret& userKey, const std::string& user, const Bytes& clientNonce,
                      const Bytes& serverNonce) {
  ByteWriter w;
  w.str("proof");
  w.str(user);
  w.bytes(clientNonce);
  w.bytes(serverNonce);
  return hmac_sha256(userKey, w.data());
}

Gateway::Gateway(HostTable hosts, std::uint64_t seed, ClusterTime sessionLifetime)
    : hosts_(std::move(hosts)), rng_(seed), sessionLifetime_(sessionLifetime) {}

std::string Gateway::gateway_login(const Credential& credential, ClusterTime now) {
  ++counters_.logins;
  const auto* entry = hosts_.find(credential.username);
  if (credential.username.empty() || entry == nullptr) {
    ++counters_.failedLogins;
    throw Error(ErrorCode::UnknownUser, credential.username);
  }
  if (sha256_hex(credential.password) != entry->passwordHash) {
    ++counters_.failedLogins;
    throw Error(ErrorCode::BadPassword, credential.username);
  }
  if (!entry->sources.contains("*") && !entry->sources.contains(credential.sourceAddr)) {
    ++counters_.failedLogins;
    throw Error(ErrorCode::SourceNotAllowed, credential.username + " from " + credential.sourceAddr);
  }
  Session s;
  s.id = "sess-" + std::to_string(nextSession_++);
  s.user = credential.username;
  s.sourceAddr = credential.sourceAddr;
  s.openedAt = now;
  s.expiresAt = now + sessionLifetime_;
  s.clientKey = derive_user_key(sha256_hex(credential.password));
  auto id = s.id;
  sessions_.emplace(id, std::move(s));
  return id;
}

Bytes Gateway::nonce() {
  Bytes b(16);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng_() & 0xFF);
  return b;
}

Session& Gateway::live_session(const std::string& sessionId, ClusterTime now) {
  auto it = sessions_.find(sessionId);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, sessionId);
  if (now > it->second.expiresAt) throw Error(ErrorCode::SessionExpired, sessionId);
  return it->second;
}

const Session& Gateway::session(const std::string& sessionId) const {
  auto it = sessions_.find(sessionId);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, sessionId);
  return it->second;
}

Bytes Gateway::begin_handshake(const std::string& sessionId, ClusterTime now) {
  auto& s = live_session(sessionId, now);
  s.transcript.clear();
  s.clientNonce = nonce();
  ByteWriter request;
  request.str(s.user);
  request.bytes(s.clientNonce);
  s.transcript.push_back({HandshakeStep::Request, request.take()});
  s.serverNonce = nonce();
  s.transcript.push_back({HandshakeStep::Challenge, s.serverNonce});
  return s.serverNonce;
}

HandshakeTicket Gateway::complete_handshake(const std::string& sessionId, const Bytes& proof,
                                            TokenIssuer& authority, ClusterTime now) {
  auto& s = live_session(sessionId, now);
  if (s.transcript.size() != 2) {
    ++counters_.failedHandshakes;
    throw Error(ErrorCode::HandshakeFailure, "no outstanding challenge for " + sessionId);
  }
  s.transcript.push_back({HandshakeStep::Proof, proof});
  const auto* entry = hosts_.find(s.user);
  const auto expected = handshake_proof(derive_user_key(entry->passwordHash), s.user,
                                        s.clientNonce, s.serverNonce);
  if (proof != expected) {
    ++counters_.failedHandshakes;
    throw Error(ErrorCode::HandshakeFailure, "proof rejected for " + s.user);
  }
  ++counters_.handshakes;
  return authority.issue_ticket(s.user, now);
}

HandshakeTicket Gateway::handshake_authenticate(const std::string& sessionId,
                                                TokenIssuer& authority, ClusterTime now) {
  begin_handshake(sessionId, now);
  const auto& s = session(sessionId);
  auto proof = handshake_proof(s.clientKey, s.user, s.clientNonce, s.serverNonce);
  return complete_handshake(sessionId, proof, authority, now);
}

}  // namespace fedgate

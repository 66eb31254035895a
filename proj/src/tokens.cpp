#include "fedgate/tokens.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/sha.h>

#include <algorithm>

namespace fedgate {

namespace {

enum class TokenTag : std::uint8_t { Ticket = 1, Delegation = 2, Block = 3 };

void expect_tag(ByteReader& in, TokenTag tag) {
  if (in.u8() != static_cast<std::uint8_t>(tag)) {
    throw Error(ErrorCode::ParseError, "unexpected token type tag");
  }
}

bool mac_matches(const Secret& secret, const Bytes& body, const Bytes& mac) {
  const auto expected = hmac_sha256(secret, body);
  return mac.size() == expected.size() &&
         CRYPTO_memcmp(mac.data(), expected.data(), expected.size()) == 0;
}

Bytes with_mac(Bytes body, const Bytes& mac) {
  ByteWriter w;
  w.bytes(mac);
  body.insert(body.end(), w.data().begin(), w.data().end());
  return body;
}

std::uint8_t encode_modes(const std::set<OpKind>& modes) {
  std::uint8_t bits = 0;
  for (auto op : modes) bits |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(op));
  return bits;
}

std::set<OpKind> decode_modes(std::uint8_t bits) {
  if (bits & 0xF0) throw Error(ErrorCode::ParseError, "unknown block token mode bits");
  std::set<OpKind> modes;
  for (auto op : kAllOps) {
    if (bits & (1u << static_cast<unsigned>(op))) modes.insert(op);
  }
  return modes;
}

}  // namespace

Secret random_secret(std::mt19937_64& rng) {
  Secret s{};
  for (auto& b : s) b = static_cast<std::uint8_t>(rng() & 0xFF);
  return s;
}

Bytes hmac_sha256(const Secret& key, std::span<const std::uint8_t> data) {
  Bytes out(EVP_MAX_MD_SIZE);
  unsigned int len = 0;
  HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(), data.size(), out.data(),
       &len);
  out.resize(len);
  return out;
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest.data());
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(digest.size() * 2);
  for (auto b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xF]);
  }
  return out;
}

void ByteWriter::u32(std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  out_.insert(out_.end(), s.begin(), s.end());
}

void ByteWriter::bytes(std::span<const std::uint8_t> b) {
  u32(static_cast<std::uint32_t>(b.size()));
  out_.insert(out_.end(), b.begin(), b.end());
}

void ByteReader::need(std::size_t n) const {
  if (in_.size() - pos_ < n) throw Error(ErrorCode::ParseError, "truncated token bytes");
}

std::uint8_t ByteReader::u8() {
  need(1);
  return in_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | in_[pos_++];
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | in_[pos_++];
  return v;
}

std::string ByteReader::str() {
  const auto n = u32();
  need(n);
  std::string s(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
  pos_ += n;
  return s;
}

Bytes ByteReader::bytes() {
  const auto n = u32();
  need(n);
  Bytes b(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
          in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
  pos_ += n;
  return b;
}

std::string_view to_string(TokenStatus status) {
  switch (status) {
    case TokenStatus::Valid: return "Valid";
    case TokenStatus::Expired: return "Expired";
    case TokenStatus::Forged: return "Forged";
  }
  return "?";
}

Bytes HandshakeTicket::signed_bytes() const {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(TokenTag::Ticket));
  w.str(principal);
  w.i64(issuedAt);
  w.i64(lifetime);
  return w.take();
}

Bytes HandshakeTicket::encode() const { return with_mac(signed_bytes(), mac); }

HandshakeTicket HandshakeTicket::decode(std::span<const std::uint8_t> wire) {
  ByteReader in(wire);
  expect_tag(in, TokenTag::Ticket);
  HandshakeTicket t;
  t.principal = in.str();
  t.issuedAt = in.i64();
  t.lifetime = in.i64();
  t.mac = in.bytes();
  if (!in.done()) throw Error(ErrorCode::ParseError, "trailing bytes after ticket");
  return t;
}

Bytes DelegationToken::signed_bytes() const {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(TokenTag::Delegation));
  w.str(owner);
  w.u8(renewer ? 1 : 0);
  if (renewer) w.str(*renewer);
  w.i64(issuedAt);
  w.i64(currentExpiry);
  w.i64(maxLifetime);
  w.u64(sequence);
  return w.take();
}

Bytes DelegationToken::encode() const { return with_mac(signed_bytes(), mac); }

DelegationToken DelegationToken::decode(std::span<const std::uint8_t> wire) {
  ByteReader in(wire);
  expect_tag(in, TokenTag::Delegation);
  DelegationToken t;
  t.owner = in.str();
  const auto hasRenewer = in.u8();
  if (hasRenewer > 1) throw Error(ErrorCode::ParseError, "bad renewer flag");
  if (hasRenewer) t.renewer = in.str();
  t.issuedAt = in.i64();
  t.currentExpiry = in.i64();
  t.maxLifetime = in.i64();
  t.sequence = in.u64();
  t.mac = in.bytes();
  if (!in.done()) throw Error(ErrorCode::ParseError, "trailing bytes after delegation token");
  return t;
}

Bytes BlockToken::signed_bytes() const {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(TokenTag::Block));
  w.str(blockId);
  w.u8(encode_modes(modes));
  w.i64(expiry);
  return w.take();
}

Bytes BlockToken::encode() const { return with_mac(signed_bytes(), mac); }

BlockToken BlockToken::decode(std::span<const std::uint8_t> wire) {
  ByteReader in(wire);
  expect_tag(in, TokenTag::Block);
  BlockToken t;
  t.blockId = in.str();
  t.modes = decode_modes(in.u8());
  t.expiry = in.i64();
  t.mac = in.bytes();
  if (!in.done()) throw Error(ErrorCode::ParseError, "trailing bytes after block token");
  return t;
}

TokenStatus validate_token(const HandshakeTicket& token, const Secret& secret, ClusterTime validatorNow) {
  if (!mac_matches(secret, token.signed_bytes(), token.mac)) return TokenStatus::Forged;
  return validatorNow > token.expiry() ? TokenStatus::Expired : TokenStatus::Valid;
}

TokenStatus validate_token(const DelegationToken& token, const Secret& secret, ClusterTime validatorNow) {
  if (!mac_matches(secret, token.signed_bytes(), token.mac)) return TokenStatus::Forged;
  return validatorNow > token.expiry() ? TokenStatus::Expired : TokenStatus::Valid;
}

TokenStatus validate_token(const BlockToken& token, const Secret& secret, ClusterTime validatorNow) {
  if (!mac_matches(secret, token.signed_bytes(), token.mac)) return TokenStatus::Forged;
  return validatorNow > token.expiry ? TokenStatus::Expired : TokenStatus::Valid;
}

HandshakeTicket TokenIssuer::issue_ticket(const std::string& principal, ClusterTime now) {
  if (config_.ticketLifetime <= 0) throw Error(ErrorCode::InvalidArgument, "ticket lifetime must be > 0");
  HandshakeTicket t{principal, now, config_.ticketLifetime, {}};
  t.mac = hmac_sha256(secret_, t.signed_bytes());
  ++counters_.tickets;
  return t;
}

DelegationToken TokenIssuer::issue_delegation_token(const HandshakeTicket& ticket,
                                                    std::optional<std::string> renewer,
                                                    ClusterTime now) {
  switch (validate_token(ticket, secret_, now)) {
    case TokenStatus::Forged: throw Error(ErrorCode::InvalidMac, "handshake ticket");
    case TokenStatus::Expired: throw Error(ErrorCode::TicketExpired, ticket.principal);
    case TokenStatus::Valid: break;
  }
  DelegationToken dt;
  dt.owner = ticket.principal;
  dt.renewer = std::move(renewer);
  dt.issuedAt = now;
  dt.maxLifetime = config_.maxLifetime;
  dt.currentExpiry = std::min(now + config_.renewInterval, now + config_.maxLifetime);
  dt.sequence = nextSequence_++;
  dt.mac = hmac_sha256(secret_, dt.signed_bytes());
  ++counters_.delegationTokens;
  return dt;
}

DelegationToken TokenIssuer::renew_delegation_token(const DelegationToken& token,
                                                    const std::string& renewer, ClusterTime now) {
  if (validate_token(token, secret_, now) == TokenStatus::Forged) {
    throw Error(ErrorCode::InvalidMac, "delegation token");
  }
  if (!token.renewer || *token.renewer != renewer) {
    throw Error(ErrorCode::NotRenewer, renewer + " may not renew token of " + token.owner);
  }
  const ClusterTime hardLimit = token.issuedAt + token.maxLifetime;
  if (now > hardLimit) throw Error(ErrorCode::MaxLifetimeExceeded, token.owner);
  if (now > token.currentExpiry) throw Error(ErrorCode::TokenExpired, token.owner);
  DelegationToken renewed = token;
  renewed.currentExpiry = std::min(now + config_.renewInterval, hardLimit);
  renewed.mac = hmac_sha256(secret_, renewed.signed_bytes());
  ++counters_.renewals;
  return renewed;
}

void TokenIssuer::require_live(const DelegationToken& token, ClusterTime now) const {
  switch (validate_token(token, secret_, now)) {
    case TokenStatus::Forged: throw Error(ErrorCode::InvalidMac, "delegation token");
    case TokenStatus::Expired: throw Error(ErrorCode::TokenExpired, token.owner);
    case TokenStatus::Valid: break;
  }
}

BlockToken TokenIssuer::issue_block_token(const DelegationToken& token, const std::string& blockId,
                                          std::set<OpKind> modes, const Secret& sharedSecret,
                                          ClusterTime now) {
  require_live(token, now);
  if (modes.empty()) throw Error(ErrorCode::InvalidArgument, "block token needs at least one mode");
  BlockToken bt{blockId, std::move(modes), now + config_.blockTokenLifetime, {}};
  bt.mac = hmac_sha256(sharedSecret, bt.signed_bytes());
  ++counters_.blockTokens;
  return bt;
}

}  // namespace fedgate

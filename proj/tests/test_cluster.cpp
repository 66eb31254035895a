#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fedgate/cluster.hpp"
#include "oracles.hpp"

using namespace fedgate;

namespace {

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

const FileAttrs kOpen{"hdfs", "supergroup", Mode(0777), {}};

// rack1 {n1, n2}, rack2 {n3}, one namespace with an open /d.
Cluster canonical(SimConfig cfg = {}) {
  Cluster c(cfg);
  c.add_namenode("ns1", "rack1", kOpen);
  c.register_datanode("n1", "rack1");
  c.register_datanode("n2", "rack1");
  c.register_datanode("n3", "rack2");
  c.mkdir("ns1", "/d", kOpen);
  return c;
}

}  // namespace

TEST_CASE("registration") {
  Cluster c;
  c.add_namenode("a", "r1");
  c.add_namenode("b", "r1");
  c.add_namenode("c", "r2");
  c.register_datanode("dn", "r1");
  CHECK(c.counters().registrationAuthEvents == 3);
  for (const auto& ns : c.namenode_ids()) CHECK(c.is_live(ns, "dn"));
  CHECK(code_of([&] { c.register_datanode("dn", "r2"); }) == ErrorCode::DuplicateNode);
  CHECK(code_of([&] { c.add_namenode("a", "r1"); }) == ErrorCode::DuplicateNode);
  // a late NameNode picks up existing DataNodes
  c.add_namenode("d", "r2");
  CHECK(c.counters().registrationAuthEvents == 4);
  CHECK(c.is_live("d", "dn"));
}

TEST_CASE("secure registration needs a valid ticket per NameNode") {
  SimConfig cfg;
  cfg.secureMode = true;
  Cluster c(cfg);
  std::mt19937_64 rng(3);
  const auto secret = random_secret(rng);
  c.set_authority_secret(secret);
  c.add_namenode("a", "r1");
  c.add_namenode("b", "r1");
  TokenIssuer issuer(secret, {});
  CHECK(code_of([&] { c.register_datanode("dn", "r1"); }) == ErrorCode::AuthenticationRequired);
  std::map<std::string, HandshakeTicket> tickets{{"a", issuer.issue_ticket("dn/dn", 0)}};
  CHECK(code_of([&] { c.register_datanode("dn", "r1", &tickets); }) == ErrorCode::AuthenticationRequired);
  tickets.emplace("b", issuer.issue_ticket("dn/dn", 0));
  c.register_datanode("dn", "r1", &tickets);
  CHECK(c.counters().registrationAuthEvents == 2);

  TokenIssuer rogue(random_secret(rng), {});
  std::map<std::string, HandshakeTicket> bad{{"a", rogue.issue_ticket("dn/x", 0)}, {"b", rogue.issue_ticket("dn/x", 0)}};
  CHECK(code_of([&] { c.register_datanode("x", "r1", &bad); }) == ErrorCode::AuthenticationRequired);
  CHECK_FALSE(c.has_node("x"));
}

TEST_CASE("heartbeats and liveness") {
  Cluster c;
  c.add_namenode("a", "r1");
  c.add_namenode("b", "r1");
  c.register_datanode("d1", "r1");
  c.register_datanode("d2", "r1");

  SUBCASE("every pair beats once per interval") {
    c.tick(600);
    for (const auto& dn : {"d1", "d2"}) {
      for (const auto& ns : {"a", "b"}) CHECK(c.counters().heartbeats.at({dn, ns}) == 200);
    }
  }
  SUBCASE("a silenced node dies at the first check past the timeout") {
    c.silence_datanode("d2");
    c.tick(199);
    CHECK(c.is_live("a", "d2"));
    c.tick(1);
    CHECK_FALSE(c.is_live("a", "d2"));
    CHECK_FALSE(c.is_live("b", "d2"));
    CHECK(c.is_live("a", "d1"));
    CHECK(c.live_datanodes("a") == std::vector<std::string>{"d1"});
    c.resume_datanode("d2");
    c.tick(3);
    CHECK(c.is_live("a", "d2"));
  }
  SUBCASE("silenced late, dead one check later") {
    c.tick(150);
    c.silence_datanode("d1");
    c.tick(50);  // t=200, last beat at 150
    CHECK(c.is_live("a", "d1"));
    c.tick(200);  // t=400
    CHECK_FALSE(c.is_live("a", "d1"));
  }
  CHECK(code_of([&] { c.tick(0); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { c.silence_datanode("zz"); }) == ErrorCode::UnknownNode);
}

TEST_CASE("canonical placement") {
  auto c = canonical();
  CHECK(c.place_replicas("ns1", "n1", 3) == std::vector<std::string>{"n1", "n3", "n2"});
  CHECK(c.place_replicas("ns1", "n1", 1) == std::vector<std::string>{"n1"});
  const auto two = c.place_replicas("ns1", "n3", 2);
  CHECK(two.front() == "n3");
  CHECK(c.rack_of(two.back()) == "rack1");
  CHECK(code_of([&] { c.place_replicas("ns1", "n1", 4); }) == ErrorCode::InsufficientNodes);
  CHECK(code_of([&] { c.place_replicas("ns1", "n1", 0); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { c.place_replicas("nsX", "n1", 1); }) == ErrorCode::UnknownService);
}

TEST_CASE("single-rack placement falls back to distinct nodes") {
  Cluster c;
  c.add_namenode("ns", "r");
  for (const auto& id : {"a", "b", "c"}) c.register_datanode(id, "r");
  auto picks = c.place_replicas("ns", "b", 3);
  CHECK(picks.front() == "b");
  std::sort(picks.begin(), picks.end());
  CHECK(picks == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("canonical selection") {
  auto c = canonical();
  c.add_node("edge", "rack2");
  Block b{"blk", "f", 1.0, {"n1", "n2", "n3"}};
  CHECK(c.select_replica("ns1", "n2", b) == "n2");
  CHECK(c.select_replica("ns1", "edge", b) == "n3");
  CHECK(c.proximity("edge", "n1") == Proximity::RemoteRack);
  c.silence_datanode("n3");
  c.tick(200);
  CHECK(c.select_replica("ns1", "edge", b) == "n1");
  c.silence_datanode("n1");
  c.silence_datanode("n2");
  c.tick(200);
  CHECK(code_of([&] { (void)c.select_replica("ns1", "edge", b); }) == ErrorCode::NoLiveReplica);
}

TEST_CASE("property: selection matches the brute-force oracle") {
  std::mt19937_64 rng(41);
  for (int iter = 0; iter < 500; ++iter) {
    Cluster c;
    c.add_namenode("ns", "r0");
    const std::size_t racks = 1 + oracle::pick(rng, 4);
    const std::size_t nodes = 1 + oracle::pick(rng, 8);
    std::map<std::string, std::string> rackOf{{"ns", "r0"}};
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < nodes; ++i) {
      const auto id = "d" + std::to_string(i);
      const auto rack = "r" + std::to_string(oracle::pick(rng, racks));
      c.register_datanode(id, rack);
      rackOf[id] = rack;
      ids.push_back(id);
    }
    c.add_node("client", "r" + std::to_string(oracle::pick(rng, racks)));
    rackOf["client"] = c.rack_of("client");

    std::set<std::string> live(ids.begin(), ids.end());
    for (const auto& id : ids) {
      if (oracle::pick(rng, 4) == 0) {
        c.silence_datanode(id);
        live.erase(id);
      }
    }
    c.tick(200);

    Block b;
    b.blockId = "blk";
    for (const auto& id : ids) {
      if (oracle::coin(rng)) b.replicas.push_back(id);
    }
    std::shuffle(b.replicas.begin(), b.replicas.end(), rng);

    const auto reader = oracle::coin(rng) ? std::string("client") : ids[oracle::pick(rng, ids.size())];
    const auto expected = oracle::best_replica(rackOf, reader, b.replicas, live);
    if (expected.empty()) {
      CHECK(code_of([&] { (void)c.select_replica("ns", reader, b); }) == ErrorCode::NoLiveReplica);
    } else {
      REQUIRE(c.select_replica("ns", reader, b) == expected);
    }
  }
}

TEST_CASE("property: placement invariants on random topologies") {
  std::mt19937_64 rng(42);
  for (int iter = 0; iter < 500; ++iter) {
    SimConfig cfg;
    cfg.seed = iter;
    Cluster c(cfg);
    c.add_namenode("ns", "r0");
    const std::size_t racks = 1 + oracle::pick(rng, 4);
    const std::size_t nodes = 3 + oracle::pick(rng, 8);
    std::set<std::string> allRacks;
    for (std::size_t i = 0; i < nodes; ++i) {
      const auto rack = "r" + std::to_string(oracle::pick(rng, racks));
      c.register_datanode("d" + std::to_string(i), rack);
      allRacks.insert(rack);
    }
    const auto writer = "d" + std::to_string(oracle::pick(rng, nodes));
    const std::size_t factor = 1 + oracle::pick(rng, std::min<std::size_t>(nodes, 5));
    const auto picks = c.place_replicas("ns", writer, factor);

    REQUIRE(picks.size() == factor);
    CHECK(std::set<std::string>(picks.begin(), picks.end()).size() == factor);
    CHECK(picks[0] == writer);
    const auto& home = c.rack_of(writer);
    if (factor >= 2 && allRacks.size() > 1) CHECK(c.rack_of(picks[1]) != home);
    if (factor >= 3) {
      bool sameRackSpare = false;
      for (std::size_t i = 0; i < nodes; ++i) {
        const auto id = "d" + std::to_string(i);
        if (id != picks[0] && id != picks[1] && c.rack_of(id) == home) sameRackSpare = true;
      }
      if (sameRackSpare) CHECK(c.rack_of(picks[2]) == home);
    }
  }
}

TEST_CASE("writes split into blocks") {
  auto c = canonical();
  const auto f = c.write_file("ns1", "/d/f", 300, "alice", "n1", 0);
  REQUIRE(f.blocks.size() == 3);
  const auto& pool = c.namenode("ns1").blockPool;
  CHECK(pool.at(f.blocks[0]).sizeMB == 128);
  CHECK(pool.at(f.blocks[1]).sizeMB == 128);
  CHECK(pool.at(f.blocks[2]).sizeMB == doctest::Approx(44));
  for (const auto& id : f.blocks) CHECK(pool.at(id).replicas.size() == 3);
  CHECK(f.elapsedSeconds == doctest::Approx(300.0 / 40.0));
  CHECK(f.attrs.owner == "alice");

  const auto empty = c.write_file("ns1", "/d/empty", 0, "alice", "n1", 2);
  REQUIRE(empty.blocks.size() == 1);
  CHECK(pool.at(empty.blocks[0]).sizeMB == 0);
  CHECK(empty.elapsedSeconds == doctest::Approx(0.04));

  CHECK(code_of([&] { c.write_file("ns1", "/d/f", 1, "alice", "n1", 0); }) == ErrorCode::FileExists);
  CHECK(code_of([&] { c.write_file("ns1", "/d/neg", -1, "alice", "n1", 0); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { c.write_file("ns1", "/nope/f", 1, "alice", "n1", 0); }) == ErrorCode::NoSuchPath);
  CHECK(code_of([&] { c.write_file("ns1", "/d/../f", 1, "alice", "n1", 0); }) == ErrorCode::InvalidArgument);
  for (const auto& id : f.blocks) CHECK(c.datanode("n1").storedReplicas.contains(id));
}

TEST_CASE("read cost model") {
  auto c = canonical();
  c.add_node("edge", "rack2");
  SimConfig one;
  one.replicationFactor = 1;
  auto solo = canonical(one);
  solo.add_node("edge", "rack2");
  solo.write_file("ns1", "/d/f", 200, "alice", "n1", 0);

  const auto r = solo.read_file("edge", "ns1", "/d/f", nullptr, 3);
  CHECK(r.bytesMB == doctest::Approx(200));
  CHECK(r.remoteBlocks == 2);
  CHECK(r.elapsedSeconds == doctest::Approx(200.0 / 40.0 + 2 * 0.05 + 3 * 0.02));
  CHECK(r.servedBy == std::vector<std::string>{"n1", "n1"});

  c.write_file("ns1", "/d/g", 100, "alice", "n1", 0);
  const auto local = c.read_file("n3", "ns1", "/d/g", nullptr, 0);
  CHECK(local.remoteBlocks == 0);
  CHECK(local.elapsedSeconds == doctest::Approx(2.5));
  CHECK(code_of([&] { c.read_file("n3", "ns1", "/d", nullptr, 0); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { c.read_file("n3", "ns1", "/d/zz", nullptr, 0); }) == ErrorCode::NoSuchPath);
}

TEST_CASE("secure reads check block tokens at the serving node's clock") {
  SimConfig cfg;
  cfg.secureMode = true;
  std::mt19937_64 rng(5);
  const auto secret = random_secret(rng);
  Cluster c(cfg);
  c.set_authority_secret(secret);
  c.add_namenode("ns1", "rack1", kOpen);
  TokenIssuer issuer(secret, {});
  for (const auto& [id, rack] : std::vector<std::pair<std::string, std::string>>{{"n1", "rack1"}, {"n2", "rack1"}, {"n3", "rack2"}}) {
    std::map<std::string, HandshakeTicket> t{{"ns1", issuer.issue_ticket("dn/" + id, 0)}};
    c.register_datanode(id, rack, &t);
  }
  c.mkdir("ns1", "/d", kOpen);
  const auto f = c.write_file("ns1", "/d/f", 300, "alice", "n1", 0);
  const auto dt = issuer.issue_delegation_token(issuer.issue_ticket("alice", 0), std::nullopt, 0);
  std::map<std::string, BlockToken> tokens;
  for (const auto& id : f.blocks) {
    tokens.emplace(id, issuer.issue_block_token(dt, id, {OpKind::Read}, c.namenode("ns1").blockKey, 0));
  }

  CHECK(c.read_file("n1", "ns1", "/d/f", &tokens, 0).bytesMB == doctest::Approx(300));
  CHECK(c.counters().blockTokenChecks == 3);
  CHECK(code_of([&] { c.read_file("n1", "ns1", "/d/f", nullptr, 0); }) == ErrorCode::TokenInvalid);

  auto forged = tokens;
  forged.begin()->second.expiry += 5;
  CHECK(code_of([&] { c.read_file("n1", "ns1", "/d/f", &forged, 0); }) == ErrorCode::TokenInvalid);

  auto swapped = tokens;
  swapped.begin()->second = std::next(tokens.begin())->second;
  CHECK(code_of([&] { c.read_file("n1", "ns1", "/d/f", &swapped, 0); }) == ErrorCode::TokenInvalid);

  std::map<std::string, BlockToken> writeOnly;
  for (const auto& id : f.blocks) {
    writeOnly.emplace(id, issuer.issue_block_token(dt, id, {OpKind::Write}, c.namenode("ns1").blockKey, 0));
  }
  CHECK(code_of([&] { c.read_file("n1", "ns1", "/d/f", &writeOnly, 0); }) == ErrorCode::TokenInvalid);

  // skew the serving node past the token expiry; the reader is local to n1
  const auto expiry = tokens.begin()->second.expiry;
  c.set_node_clock_offset("n1", expiry + 1);
  CHECK(code_of([&] { c.read_file("n1", "ns1", "/d/f", &tokens, 0); }) == ErrorCode::TokenInvalid);
  c.set_node_clock_offset("n1", 0);
  CHECK(c.read_file("n1", "ns1", "/d/f", &tokens, 0).servedBy.size() == 3);
}

TEST_CASE("same seed, same cluster") {
  auto run = [] {
    SimConfig cfg;
    cfg.seed = 99;
    Cluster c(cfg);
    c.add_namenode("ns", "r0", kOpen);
    for (int i = 0; i < 9; ++i) c.register_datanode("d" + std::to_string(i), "r" + std::to_string(i % 3));
    std::vector<std::vector<std::string>> out;
    for (int i = 0; i < 20; ++i) {
      const auto f = c.write_file("ns", "/f" + std::to_string(i), 300, "u", "d" + std::to_string(i % 9), 0);
      for (const auto& b : f.blocks) out.push_back(c.namenode("ns").blockPool.at(b).replicas);
    }
    return out;
  };
  CHECK(run() == run());
}

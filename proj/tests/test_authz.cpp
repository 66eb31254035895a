#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

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

const ServiceId nn1{ServiceKind::NameNode, "nn1"};

struct World {
  PermissionModel model;
  NamespaceTree tree;
  PolicyRepository repo;
  SubjectId u1, u2, u3;

  World() {
    for (auto u : {"u1", "u2", "u3"}) model.add_user(u);
    model.add_group("g1");
    model.add_group("g2");
    model.add_service(nn1);
    std::vector<ModelEdit> edits{ModelEdit::add_membership("u2", "g1")};
    for (auto u : {"u1", "u2", "u3"}) {
      for (auto op : kAllOps) edits.push_back(ModelEdit::add_assignment(PrincipalId::user(u), {nn1, op}));
    }
    model = model.update_assignments(edits);
    u1 = model.create_subject("u1", SubjectMask::everything());
    u2 = model.create_subject("u2", SubjectMask::everything());
    u3 = model.create_subject("u3", SubjectMask::everything());
    tree.insert("/a", Inode{true, {"u1", "g1", Mode(0755), {}}, {}, 0, {}});
    tree.insert("/a/b", Inode{true, {"u1", "g1", Mode(0755), {}}, {"pii"}, 0, {}});
    tree.insert("/a/b/f", Inode{false, {"u1", "g1", Mode(0644), {}}, {}, 1, {}});
  }

  AccessRequest request(const SubjectId& s, std::optional<std::string> path, OpKind op, ClusterTime t = 0) {
    AccessRequest r;
    r.subject = s;
    r.sourceAddr = "10.0.0.1";
    r.service = nn1;
    r.path = std::move(path);
    r.op = op;
    r.atTime = t;
    return r;
  }
};

Policy allow_policy(std::string id, PrincipalId who, std::string glob, std::set<OpKind> ops) {
  Policy p;
  p.policyId = std::move(id);
  p.principals = {std::move(who)};
  p.resources.path = std::move(glob);
  p.ops = std::move(ops);
  return p;
}

}  // namespace

TEST_CASE("glob matching") {
  CHECK(glob_match("/a/*", "/a/b"));
  CHECK_FALSE(glob_match("/a/*", "/a/b/c"));
  CHECK(glob_match("/a/**", "/a"));
  CHECK(glob_match("/a/**", "/a/b/c"));
  CHECK(glob_match("/**", "/"));
  CHECK(glob_match("/*/b/*", "/x/b/y"));
  CHECK_FALSE(glob_match("/a/b", "/a/bc"));
}

TEST_CASE("specificity ordering") {
  CHECK(ResourceMatcher{"", "/a/b", ""}.specificity() > ResourceMatcher{"", "/a/*", ""}.specificity());
  CHECK(ResourceMatcher{"", "/a/*", ""}.specificity() > ResourceMatcher{"", "/a/**", ""}.specificity());
  CHECK(ResourceMatcher{"nn1", "/a/**", ""}.specificity() > ResourceMatcher{"", "/a/**", ""}.specificity());
}

TEST_CASE("create_policy") {
  PolicyRepository repo;
  auto p = allow_policy("P1", PrincipalId::user("u1"), "/a/**", {OpKind::Read});
  repo.create_policy(p);
  CHECK(repo.policy("P1").enabled);
  CHECK(code_of([&] { repo.create_policy(p); }) == ErrorCode::DuplicatePolicyId);

  auto bad = allow_policy("P2", PrincipalId::user("u1"), "/a/**", {});
  CHECK(code_of([&] { repo.create_policy(bad); }) == ErrorCode::MalformedConstraint);
  bad = allow_policy("P3", PrincipalId::user("u1"), "/a/**", {OpKind::Read});
  bad.constraints.timeWindow = TimeWindow{10, 5};
  CHECK(code_of([&] { repo.create_policy(bad); }) == ErrorCode::MalformedConstraint);
  bad = allow_policy("P4", PrincipalId::user("u1"), "/a/**", {OpKind::Read});
  bad.certificateLifetime = 0;
  CHECK(code_of([&] { repo.create_policy(bad); }) == ErrorCode::MalformedConstraint);
  CHECK(repo.policies().size() == 1);
}

TEST_CASE("policy JSON") {
  const auto doc = nlohmann::json::parse(R"({"policyId":"p","principals":["group:g1"],
      "resources":{"path":"/a/**"},"ops":["Read"],"effect":"Deny"})");
  const auto p = policy_from_json(doc);
  CHECK(p.enabled);
  CHECK(p.effect == Effect::Deny);
  CHECK(policy_from_json(policy_to_json(p)) == p);
  auto extra = doc;
  extra["colour"] = "red";
  CHECK(code_of([&] { policy_from_json(extra); }) == ErrorCode::ParseError);
}

TEST_CASE("set_policy_enabled") {
  World w;
  w.repo.create_policy(allow_policy("P1", PrincipalId::user("u3"), "/a/b/f", {OpKind::Write}));
  const auto req = w.request(w.u3, "/a/b/f", OpKind::Write);
  auto out = authorize(w.repo, w.model, &w.tree, req);
  CHECK(out.decision.allowed());
  CHECK(out.provenance == Provenance::CentralPolicy);
  CHECK(out.policyId == "P1");

  w.repo.set_policy_enabled("P1", false);
  out = authorize(w.repo, w.model, &w.tree, req);
  CHECK_FALSE(out.decision.allowed());
  CHECK(out.provenance == Provenance::LocalAcl);

  w.repo.set_policy_enabled("P1", true);
  w.repo.set_policy_enabled("P1", true);
  CHECK(w.repo.policy("P1").enabled);
  CHECK(code_of([&] { w.repo.set_policy_enabled("nope", true); }) == ErrorCode::UnknownPolicy);
}

TEST_CASE("evaluate_central") {
  World w;
  const auto req = w.request(w.u2, "/a/b/f", OpKind::Read, 50);
  CHECK_FALSE(evaluate_central(w.repo, w.model, req));

  auto p = allow_policy("A", PrincipalId::group("g1"), "", {OpKind::Read});
  p.resources.service = "nn1";
  p.constraints.timeWindow = TimeWindow{0, 100};
  w.repo.create_policy(p);
  auto m = evaluate_central(w.repo, w.model, req);
  REQUIRE(m);
  CHECK(m->decision.allowed());

  CHECK_FALSE(evaluate_central(w.repo, w.model, w.request(w.u2, "/a/b/f", OpKind::Read, 101)));
  CHECK(evaluate_central(w.repo, w.model, w.request(w.u2, "/a/b/f", OpKind::Read, 100)));

  auto d = allow_policy("Z", PrincipalId::user("u2"), "/**", {OpKind::Read});
  d.effect = Effect::Deny;
  w.repo.create_policy(d);
  m = evaluate_central(w.repo, w.model, req);
  REQUIRE(m);
  CHECK(m->decision.effect == Effect::Deny);
  CHECK(m->policyId == "Z");
}

TEST_CASE("source predicate matches address or location") {
  World w;
  auto p = allow_policy("L", PrincipalId::user("u3"), "/**", {OpKind::Read});
  p.constraints.sourcePredicate = {"ES"};
  w.repo.create_policy(p);
  auto req = w.request(w.u3, "/a", OpKind::Read);
  CHECK_FALSE(evaluate_central(w.repo, w.model, req));
  req.location = "ES";
  CHECK(evaluate_central(w.repo, w.model, req));
}

TEST_CASE("evaluate_acl") {
  World w;
  SUBCASE("owner full access") {
    FileAttrs a{"u1", "g2", Mode(0700), {}};
    CHECK(evaluate_acl(w.model, a, "u1", OpKind::Write).allowed());
  }
  SUBCASE("group triple") {
    FileAttrs a{"u1", "g1", Mode(0740), {}};
    CHECK_FALSE(evaluate_acl(w.model, a, "u2", OpKind::Write).allowed());
    CHECK(evaluate_acl(w.model, a, "u2", OpKind::Read).allowed());
  }
  SUBCASE("extra entry") {
    FileAttrs a{"u1", "g2", Mode(0700), {{PrincipalId::user("u2"), {OpKind::Read}, Effect::Allow}}};
    CHECK(evaluate_acl(w.model, a, "u2", OpKind::Read).allowed());
    CHECK_FALSE(evaluate_acl(w.model, a, "u2", OpKind::Write).allowed());
  }
  SUBCASE("deny entry beats allow entry") {
    FileAttrs a{"u1", "g2", Mode(0707),
                {{PrincipalId::user("u2"), {OpKind::Read}, Effect::Allow},
                 {PrincipalId::group("g1"), {OpKind::Read}, Effect::Deny}}};
    CHECK_FALSE(evaluate_acl(w.model, a, "u2", OpKind::Read).allowed());
  }
  SUBCASE("admin never from mode bits") {
    FileAttrs a{"u1", "g1", Mode(0777), {}};
    CHECK_FALSE(evaluate_acl(w.model, a, "u1", OpKind::Admin).allowed());
  }
  SUBCASE("unknown user") {
    CHECK(code_of([&] { (void)evaluate_acl(w.model, FileAttrs{}, "ghost", OpKind::Read); }) ==
          ErrorCode::UnknownPrincipal);
  }
}

TEST_CASE("check_path_access") {
  World w;
  CHECK(check_path_access(w.model, w.tree, "/a/b/f", "u1", OpKind::Read).allowed());

  w.tree.at("/a").attrs.mode = Mode(0700);
  auto d = check_path_access(w.model, w.tree, "/a/b/f", "u3", OpKind::Read);
  CHECK(d.reason == DenyReason::TraversalDeny);
  CHECK(d.component == "/a");

  w.tree.at("/a").attrs.mode = Mode(0755);
  w.tree.at("/a/b").attrs.mode = Mode(0744);
  d = check_path_access(w.model, w.tree, "/a/b/f", "u3", OpKind::Read);
  CHECK(d.component == "/a/b");
  CHECK(w.tree.at("/a/b/f").attrs.mode.grants(Mode::Class::Other, OpKind::Read));

  CHECK(code_of([&] { (void)check_path_access(w.model, w.tree, "/a/zz", "u1", OpKind::Read); }) ==
        ErrorCode::NoSuchPath);
  CHECK(code_of([&] { (void)check_path_access(w.model, w.tree, "/a/../b", "u1", OpKind::Read); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("inherit_acl_on_create") {
  Inode parent{true, {"u1", "g1", Mode(0750), {{PrincipalId::user("u2"), {OpKind::Read}, Effect::Allow}}}, {}, 0, {}};
  const auto child = inherit_acl_on_create(parent, "u3");
  CHECK(child.owner == "u3");
  CHECK(child.group == "g1");
  CHECK(child.mode == Mode(0750));
  CHECK(child.extraAcl == parent.attrs.extraAcl);

  parent.attrs.extraAcl.clear();
  CHECK(inherit_acl_on_create(parent, "u1").extraAcl.empty());

  Inode file{false, {"u1", "g1", Mode(0644), {}}, {}, 0, {}};
  CHECK(code_of([&] { (void)inherit_acl_on_create(file, "u1"); }) == ErrorCode::ParentNotDirectory);
}

TEST_CASE("authorize pipeline") {
  World w;
  SUBCASE("central deny beats permissive ACL") {
    auto p = allow_policy("D", PrincipalId::user("u1"), "/a/**", {OpKind::Read});
    p.effect = Effect::Deny;
    w.repo.create_policy(p);
    const auto out = authorize(w.repo, w.model, &w.tree, w.request(w.u1, "/a/b/f", OpKind::Read));
    CHECK_FALSE(out.decision.allowed());
    CHECK(out.provenance == Provenance::CentralPolicy);
  }
  SUBCASE("no policy, ACL allows") {
    const auto out = authorize(w.repo, w.model, &w.tree, w.request(w.u1, "/a/b/f", OpKind::Read));
    CHECK(out.decision.allowed());
    CHECK(out.provenance == Provenance::LocalAcl);
  }
  SUBCASE("service gate first") {
    const auto rm = ModelEdit::remove_assignment(PrincipalId::user("u1"), {nn1, OpKind::Read});
    w.model = w.model.update_assignments(std::span(&rm, 1));
    w.repo.create_policy(allow_policy("A", PrincipalId::user("u1"), "/**", {OpKind::Read}));
    const auto out = authorize(w.repo, w.model, &w.tree, w.request(w.u1, "/a/b/f", OpKind::Read));
    CHECK_FALSE(out.decision.allowed());
    CHECK(out.provenance == Provenance::ServiceModel);
    CHECK(out.decision.reason == DenyReason::NoAssignment);
  }
  SUBCASE("pathless call passes after the gate") {
    const auto out = authorize(w.repo, w.model, nullptr, w.request(w.u3, std::nullopt, OpKind::Admin));
    CHECK(out.decision.allowed());
    CHECK(out.provenance == Provenance::LocalAcl);
  }
  SUBCASE("tags are inherited from ancestors") {
    Policy p;
    p.policyId = "T";
    p.principals = {PrincipalId::user("u1")};
    p.resources.tag = "pii";
    p.ops = {OpKind::Read};
    p.effect = Effect::Deny;
    w.repo.create_policy(p);
    CHECK(authorize(w.repo, w.model, &w.tree, w.request(w.u1, "/a/b/f", OpKind::Read)).provenance ==
          Provenance::CentralPolicy);
    CHECK(authorize(w.repo, w.model, &w.tree, w.request(w.u1, "/a", OpKind::Read)).provenance ==
          Provenance::LocalAcl);
  }
  SUBCASE("new file needs write on the parent") {
    CHECK(authorize(w.repo, w.model, &w.tree, w.request(w.u1, "/a/b/new", OpKind::Write)).decision.allowed());
    CHECK_FALSE(authorize(w.repo, w.model, &w.tree, w.request(w.u3, "/a/b/new", OpKind::Write)).decision.allowed());
  }
}

TEST_CASE("property: ACL evaluation matches the lookup oracle") {
  std::mt19937_64 rng(21);
  for (int iter = 0; iter < 300; ++iter) {
    auto inst = oracle::random_authz_instance(rng, 0);
    for (const auto& [path, inode] : inst.tree.entries()) {
      for (const auto& u : inst.users) {
        for (auto op : kAllOps) {
          REQUIRE(evaluate_acl(inst.model, inode.attrs, u, op).allowed() ==
                  oracle::acl_allows(inode.attrs, inst.model.groups_of(u), u, op));
        }
      }
    }
  }
}

TEST_CASE("property: precedence, deny-overrides, transparency, traversal") {
  std::mt19937_64 rng(22);
  std::size_t centralCases = 0, denyCases = 0, disabledCases = 0;
  for (int iter = 0; iter < 700; ++iter) {
    auto inst = oracle::random_authz_instance(rng, 20);
    auto withDisabled = inst.repo;
    auto extra = oracle::random_policy(rng, "zz-disabled", inst.users, {"g0", "g1", "g2"});
    extra.enabled = false;
    withDisabled.create_policy(extra);

    for (const auto& req : inst.requests) {
      const auto out = authorize(inst.repo, inst.model, &inst.tree, req);
      CHECK(out == authorize(withDisabled, inst.model, &inst.tree, req));
      ++disabledCases;

      auto enriched = req;
      if (req.path) enriched.tags = oracle::tags_along(inst.tree, *req.path);
      const auto& creator = inst.model.subject(req.subject).creator;
      const auto central = evaluate_central(inst.repo, inst.model, enriched);
      const auto expected = oracle::central_oracle(inst.repo, inst.model, creator, enriched);
      REQUIRE(central.has_value() == expected.has_value());
      if (central) {
        CHECK(central->decision.effect == expected->first);
        CHECK(central->policyId == expected->second);
      }
      const bool gate = inst.model.decide_service_access(req.subject, req.service, req.op).allowed();
      if (gate && central) {
        ++centralCases;
        CHECK(out.provenance == Provenance::CentralPolicy);
        CHECK(out.decision == central->decision);
      }
      if (expected && expected->first == Effect::Deny) {
        ++denyCases;
        CHECK_FALSE((out.decision.allowed() && out.provenance == Provenance::CentralPolicy));
      }
      if (req.path && inst.tree.exists(*req.path)) {
        if (check_path_access(inst.model, inst.tree, *req.path, creator, req.op).allowed()) {
          const auto chain = path_chain(*req.path);
          for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
            CHECK(check_path_access(inst.model, inst.tree, chain[i], creator, OpKind::Execute).allowed());
          }
        }
      }
    }
  }
  CHECK(centralCases >= 500);
  CHECK(denyCases >= 500);
  CHECK(disabledCases >= 500);
}

TEST_CASE("property: time window inclusive bounds") {
  std::mt19937_64 rng(23);
  World w;
  for (int i = 0; i < 500; ++i) {
    const ClusterTime s = static_cast<ClusterTime>(oracle::pick(rng, 1000));
    const ClusterTime e = s + static_cast<ClusterTime>(oracle::pick(rng, 100));
    const ClusterTime t = static_cast<ClusterTime>(oracle::pick(rng, 1200));
    auto p = allow_policy("W", PrincipalId::user("u1"), "/**", {OpKind::Read});
    p.constraints.timeWindow = TimeWindow{s, e};
    PolicyRepository repo;
    repo.create_policy(p);
    CHECK(evaluate_central(repo, w.model, w.request(w.u1, "/a", OpKind::Read, t)).has_value() == (s <= t && t <= e));
  }
}

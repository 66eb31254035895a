#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"

using namespace fedgate;

namespace {

const ServiceId nn1{ServiceKind::NameNode, "namenode1"};
const ServiceId nn2{ServiceKind::NameNode, "namenode2"};

PermissionModel small_model() {
  PermissionModel m;
  m.add_user("u1");
  m.add_user("u2");
  m.add_group("g1");
  m.add_service(nn1);
  m.add_service(nn2);
  return m;
}

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

}  // namespace

TEST_CASE("principal strings round-trip") {
  CHECK(to_string(PrincipalId::user("alice")) == "user:alice");
  CHECK(parse_principal("group:staff") == PrincipalId::group("staff"));
  CHECK(code_of([] { parse_principal("alice"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_principal("user:"); }) == ErrorCode::ParseError);
}

TEST_CASE("update_assignments") {
  auto m = small_model();

  SUBCASE("single assignment on an empty model") {
    const auto e = ModelEdit::add_assignment(PrincipalId::user("u1"), {nn1, OpKind::Read});
    const auto next = m.update_assignments(std::span(&e, 1));
    CHECK(next.assignments().size() == 1);
    CHECK(m.assignments().empty());
  }
  SUBCASE("removing an absent pair leaves the model unchanged") {
    const auto e = ModelEdit::remove_assignment(PrincipalId::user("u1"), {nn1, OpKind::Read});
    CHECK(code_of([&] { (void)m.update_assignments(std::span(&e, 1)); }) == ErrorCode::MissingEntry);
    CHECK(m.assignments().empty());
  }
  SUBCASE("batch membership plus group assignment") {
    const std::vector<ModelEdit> edits{ModelEdit::add_membership("u1", "g1"),
                                       ModelEdit::add_assignment(PrincipalId::group("g1"), {nn2, OpKind::Write})};
    const auto next = m.update_assignments(edits);
    CHECK(next.memberships().contains({"u1", "g1"}));
    CHECK(next.hs_prms(PrincipalId::group("g1")) == PermissionSet{{nn2, OpKind::Write}});
  }
  SUBCASE("batch is all-or-nothing") {
    const std::vector<ModelEdit> edits{ModelEdit::add_membership("u1", "g1"),
                                       ModelEdit::add_membership("u1", "nosuch")};
    CHECK(code_of([&] { (void)m.update_assignments(edits); }) == ErrorCode::UnknownPrincipal);
    CHECK(m.memberships().empty());
  }
  SUBCASE("duplicate add and unknown service") {
    const auto e = ModelEdit::add_membership("u1", "g1");
    const auto once = m.update_assignments(std::span(&e, 1));
    CHECK(code_of([&] { (void)once.update_assignments(std::span(&e, 1)); }) == ErrorCode::DuplicateEntry);
    const auto bad = ModelEdit::add_assignment(PrincipalId::user("u1"), {{ServiceKind::NameNode, "nn9"}, OpKind::Read});
    CHECK(code_of([&] { (void)m.update_assignments(std::span(&bad, 1)); }) == ErrorCode::UnknownService);
  }
  SUBCASE("duplicate within one batch") {
    const std::vector<ModelEdit> edits{ModelEdit::add_membership("u1", "g1"), ModelEdit::add_membership("u1", "g1")};
    CHECK(code_of([&] { (void)m.update_assignments(edits); }) == ErrorCode::DuplicateEntry);
  }
}

TEST_CASE("hs_prms has no group expansion") {
  auto m = small_model();
  CHECK(m.hs_prms(PrincipalId::user("u1")).empty());
  const std::vector<ModelEdit> edits{ModelEdit::add_assignment(PrincipalId::user("u1"), {nn1, OpKind::Read}),
                                     ModelEdit::add_membership("u2", "g1"),
                                     ModelEdit::add_assignment(PrincipalId::group("g1"), {nn2, OpKind::Read})};
  m = m.update_assignments(edits);
  CHECK(m.hs_prms(PrincipalId::user("u1")) == PermissionSet{{nn1, OpKind::Read}});
  CHECK(m.hs_prms(PrincipalId::user("u2")).empty());
  CHECK(code_of([&] { (void)m.hs_prms(PrincipalId::user("ghost")); }) == ErrorCode::UnknownPrincipal);
}

TEST_CASE("effective_permissions") {
  auto m = small_model();
  CHECK(m.effective_permissions("u1").empty());
  const std::vector<ModelEdit> edits{ModelEdit::add_membership("u1", "g1"),
                                     ModelEdit::add_assignment(PrincipalId::user("u1"), {nn1, OpKind::Read}),
                                     ModelEdit::add_assignment(PrincipalId::group("g1"), {nn2, OpKind::Write}),
                                     ModelEdit::add_assignment(PrincipalId::group("g1"), {nn1, OpKind::Read})};
  m = m.update_assignments(edits);
  CHECK(m.effective_permissions("u1") == PermissionSet{{nn1, OpKind::Read}, {nn2, OpKind::Write}});
  CHECK(code_of([&] { (void)m.effective_permissions("ghost"); }) == ErrorCode::UnknownPrincipal);
}

TEST_CASE("subjects and service decisions") {
  auto m = small_model();
  const std::vector<ModelEdit> edits{ModelEdit::add_assignment(PrincipalId::user("u1"), {nn1, OpKind::Read}),
                                     ModelEdit::add_assignment(PrincipalId::user("u1"), {nn2, OpKind::Write})};
  m = m.update_assignments(edits);

  SUBCASE("ALL mask mirrors the creator") {
    const auto s = m.create_subject("u1", SubjectMask::everything());
    CHECK(m.decide_service_access(s, nn1, OpKind::Read).allowed());
    CHECK(m.decide_service_access(s, nn1, OpKind::Write) == Decision::deny(DenyReason::NoAssignment));
    CHECK(m.subject(s).creator == "u1");
  }
  SUBCASE("explicit mask narrows") {
    const auto s = m.create_subject("u1", SubjectMask::only({{nn1, OpKind::Read}}));
    CHECK(m.decide_service_access(s, nn1, OpKind::Read).allowed());
    CHECK(m.decide_service_access(s, nn2, OpKind::Write) == Decision::deny(DenyReason::MaskedOut));
  }
  SUBCASE("mask beyond the creator") {
    CHECK(code_of([&] { m.create_subject("u1", SubjectMask::only({{nn1, OpKind::Admin}})); }) ==
          ErrorCode::MaskExceedsCreator);
    CHECK(code_of([&] { m.create_subject("ghost", SubjectMask::everything()); }) == ErrorCode::UnknownPrincipal);
  }
  SUBCASE("unknown subject or service") {
    const auto s = m.create_subject("u2", SubjectMask::everything());
    CHECK(m.decide_service_access(s, nn1, OpKind::Read) == Decision::deny(DenyReason::NoAssignment));
    CHECK(code_of([&] { (void)m.decide_service_access({"nope"}, nn1, OpKind::Read); }) == ErrorCode::UnknownSubject);
    CHECK(code_of([&] { (void)m.decide_service_access(s, {ServiceKind::DataNode, "dn"}, OpKind::Read); }) ==
          ErrorCode::UnknownService);
  }
  SUBCASE("revocation applies to existing subjects") {
    const auto s = m.create_subject("u1", SubjectMask::only({{nn1, OpKind::Read}}));
    const auto rm = ModelEdit::remove_assignment(PrincipalId::user("u1"), {nn1, OpKind::Read});
    auto next = m.update_assignments(std::span(&rm, 1));
    CHECK(next.decide_service_access(s, nn1, OpKind::Read) == Decision::deny(DenyReason::NoAssignment));
  }
}

TEST_CASE("empty model denies everything") {
  PermissionModel m;
  m.add_user("u");
  m.add_service(nn1);
  const auto s = m.create_subject("u", SubjectMask::everything());
  for (auto op : kAllOps) CHECK_FALSE(m.decide_service_access(s, nn1, op).allowed());
}

TEST_CASE("property: engine agrees with the tuple-level formula") {
  std::mt19937_64 rng(11);
  for (int iter = 0; iter < 200; ++iter) {
    const auto raw = oracle::random_raw_model(rng);
    auto model = oracle::build(raw);
    for (const auto& u : raw.users) {
      CHECK(model.effective_permissions(u) == oracle::raw_effective(raw, u));
      const auto eff = oracle::raw_effective(raw, u);
      SubjectMask mask = SubjectMask::everything();
      if (!eff.empty() && oracle::coin(rng)) {
        PermissionSet subset;
        for (const auto& p : eff) {
          if (oracle::coin(rng)) subset.insert(p);
        }
        mask = SubjectMask::only(subset);
      }
      const auto s = model.create_subject(u, mask);
      for (const auto& svc : raw.services) {
        for (auto op : kAllOps) {
          REQUIRE(model.decide_service_access(s, svc, op) == oracle::table2_decision(raw, u, mask, svc, op));
        }
      }
    }
  }
}

TEST_CASE("property: monotonicity and group transparency") {
  std::mt19937_64 rng(12);
  for (int iter = 0; iter < 200; ++iter) {
    const auto raw = oracle::random_raw_model(rng);
    auto model = oracle::build(raw);
    std::vector<SubjectId> subjects;
    for (const auto& u : raw.users) subjects.push_back(model.create_subject(u, SubjectMask::everything()));

    const auto& svc = raw.services[oracle::pick(rng, raw.services.size())];
    const OpKind op = kAllOps[oracle::pick(rng, kAllOps.size())];
    PrincipalId target = PrincipalId::user(raw.users[oracle::pick(rng, raw.users.size())]);
    if (!raw.groups.empty() && oracle::coin(rng)) target = PrincipalId::group(raw.groups[oracle::pick(rng, raw.groups.size())]);
    const Permission perm{svc, op};
    const bool present = model.hs_prms(target).contains(perm);
    const auto edit = present ? ModelEdit::remove_assignment(target, perm) : ModelEdit::add_assignment(target, perm);
    const auto next = model.update_assignments(std::span(&edit, 1));

    for (std::size_t i = 0; i < subjects.size(); ++i) {
      const auto& user = raw.users[i];
      for (const auto& s2 : raw.services) {
        for (auto o2 : kAllOps) {
          const bool before = model.decide_service_access(subjects[i], s2, o2).allowed();
          const bool after = next.decide_service_access(subjects[i], s2, o2).allowed();
          if (!present) CHECK((!before || after));
          if (present) CHECK((before || !after));
        }
      }
      if (!present && target.kind == PrincipalKind::Group) {
        const bool member = model.groups_of(user).contains(target.name);
        CHECK(next.decide_service_access(subjects[i], svc, op).allowed() ==
              (member || model.decide_service_access(subjects[i], svc, op).allowed()));
      }
    }
  }
}

TEST_CASE("property: subject dominance and determinism") {
  std::mt19937_64 rng(13);
  for (int iter = 0; iter < 100; ++iter) {
    const auto raw = oracle::random_raw_model(rng);
    auto model = oracle::build(raw);
    const auto& u = raw.users[oracle::pick(rng, raw.users.size())];
    PermissionSet subset;
    for (const auto& p : model.effective_permissions(u)) {
      if (oracle::coin(rng)) subset.insert(p);
    }
    const auto masked = model.create_subject(u, SubjectMask::only(subset));
    const auto full = model.create_subject(u, SubjectMask::everything());
    for (const auto& svc : raw.services) {
      for (auto op : kAllOps) {
        const auto d = model.decide_service_access(masked, svc, op);
        if (d.allowed()) CHECK(model.decide_service_access(full, svc, op).allowed());
        CHECK(d == model.decide_service_access(masked, svc, op));
      }
    }
  }
}

#include <doctest.h>

#include "gwl/dialogue.hpp"
#include "gwl/ttr.hpp"
#include "oracles.hpp"

using namespace gwl::ttr;

namespace {

RecordType rt(const char* text) { return parse_record_type(text); }

}  // namespace

TEST_CASE("subtype basics") {
  const auto red = rt("[x:Ind, c:red(x)]");
  CHECK(is_subtype(red, RecordType{}));
  CHECK(is_subtype(red, red));
  CHECK(is_subtype(rt("[x:Ind, c:red(x)]"), rt("[x:Ind]")));
  CHECK_FALSE(is_subtype(rt("[x:Ind]"), rt("[x:Ind, c:red(x)]")));
  CHECK(is_subtype(rt("[x=o1:Ind]"), rt("[x:Ind]")));
  CHECK_FALSE(is_subtype(rt("[x:Ind]"), rt("[x=o1:Ind]")));
  CHECK_FALSE(is_subtype(rt("[x=o2:Ind]"), rt("[x=o1:Ind]")));
  CHECK(is_subtype(rt("[r:[x:Ind, c:red(x)]]"), rt("[r:[x:Ind]]")));
}

TEST_CASE("dependent fields must point at earlier entity fields") {
  CHECK_THROWS_AS(rt("[c:red(x)]"), StructuralError);
  CHECK_THROWS_AS(rt("[x:Ind, x:Ind]"), StructuralError);
  CHECK_THROWS_AS(rt("[x:Ind, c:red(x"), StructuralError);
}

TEST_CASE("text form round-trips") {
  for (const char* s : {"[]", "[x:Ind, c:red(x)]", "[x=o1:Ind, y:Ind, p:left_of(x,y), q:?colour(y)]",
                        "[r:[z:Ind, s:square(z)]]"}) {
    CHECK(parse_record_type(to_string(rt(s))) == rt(s));
  }
}

TEST_CASE("witnesses") {
  Record rec({{"l", Entity{"a", "T"}}});
  CHECK(witnesses(rec, RecordType({{"l", BaseType{"T"}}})));
  CHECK(witnesses(Record{}, RecordType{}));
  Record b({{"l", Entity{"b", "T"}}});
  CHECK_FALSE(witnesses(b, RecordType({{"l", SingletonType{"T", "a"}}})));

  Record red({{"x", Entity{"o1", "Ind"}}, {"c", Proof{"red", {"o1"}}}});
  CHECK(witnesses(red, rt("[x:Ind, c:red(x)]")));
  CHECK_FALSE(witnesses(red, rt("[x:Ind, c:blue(x)]")));
  Record wrong_arg({{"x", Entity{"o1", "Ind"}}, {"c", Proof{"red", {"o2"}}}});
  CHECK_FALSE(witnesses(wrong_arg, rt("[x:Ind, c:red(x)]")));
}

TEST_CASE("meet") {
  const auto t = rt("[x:Ind, c:red(x)]");
  CHECK(meet(t, RecordType{}) == t);
  CHECK(meet(t, t) == t);
  CHECK(meet(t, rt("[x:Ind, s:square(x)]")) == rt("[x:Ind, c:red(x), s:square(x)]"));
  CHECK(meet(rt("[x:Ind]"), rt("[x=o1:Ind]")) == rt("[x=o1:Ind]"));
  CHECK_THROWS_AS(meet(t, rt("[x:Ind, c:blue(x)]")), MeetConflict);
}

TEST_CASE("decompose") {
  const auto rs = rt("[x:Ind, c:red(x), s:square(x)]");
  const auto parts = decompose(rs);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0] == rt("[x:Ind, c:red(x)]"));
  CHECK(parts[1] == rt("[x:Ind, s:square(x)]"));
  CHECK(decompose(parts[0]) == std::vector<RecordType>{parts[0]});
  CHECK(decompose(RecordType{}).empty());
  CHECK(decompose(rt("[x:Ind]")).empty());
  CHECK(is_atomic(parts[0]));
  CHECK_FALSE(is_atomic(rs));
}

TEST_CASE("question answering against a visual context") {
  const auto ctx = rt("[x:Ind, c:red(x), s:square(x)]");
  const auto onto = gwl::dialogue::attribute_ontology();
  const auto ans = answer_query(rt("[x:Ind, c:?colour(x)]"), "c", ctx, onto);
  REQUIRE(ans.size() == 1);
  CHECK(ans[0].pred == "red");
  CHECK(answer_query(rt("[x:Ind, s:?shape(x)]"), "s", ctx, onto)[0].pred == "square");
  CHECK_FALSE(answer_polar(rt("[x:Ind, c:blue(x)]"), ctx));
  CHECK(answer_polar(rt("[x:Ind, c:red(x)]"), ctx));
  CHECK(answer_query(rt("[x:Ind, c:?colour(x)]"), "c", rt("[x:Ind, s:square(x)]"), onto).empty());
  CHECK_THROWS_AS(answer_query(rt("[x:Ind, c:red(x)]"), "c", ctx, onto), StructuralError);
}

TEST_CASE("type algebra agrees with the naive oracle") {
  oracle::TypeGen gen(11);
  std::vector<RecordType> sample;
  for (int i = 0; i < 200; ++i) sample.push_back(gen.make());
  for (const auto& a : sample) {
    const auto fa = oracle::flatten(a);
    CHECK(is_subtype(a, a));
    std::set<std::string> got;
    for (const auto& p : decompose(a)) got.insert(oracle::print(oracle::flatten(p)));
    CHECK(got == oracle::decompose_flat(fa));
    for (const auto& b : sample) {
      const auto fb = oracle::flatten(b);
      REQUIRE(is_subtype(a, b) == oracle::sub(fa, fb));
      const auto expected = oracle::meet_flat(fa, fb);
      try {
        const auto m = meet(a, b);
        REQUIRE(expected.has_value());
        CHECK(oracle::flatten(m) == *expected);
        CHECK(is_subtype(m, a));
        CHECK(is_subtype(m, b));
      } catch (const MeetConflict&) {
        CHECK_FALSE(expected.has_value());
      }
    }
  }
}

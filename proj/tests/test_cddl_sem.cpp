#include <catch2/catch_amalgamated.hpp>

#include <detcbor/cddl/parse.hpp>
#include <detcbor/cddl/sem.hpp>

#include "gen.hpp"

using namespace detcbor;
using namespace detcbor::cbor;
using namespace detcbor::cddl;

namespace {

type_ptr parse_type_of(const std::string& text) {
    auto s = parse_cddl("root = " + text);
    REQUIRE(s.ok());
    return inline_root(s.value());
}

std::vector<std::pair<canon_item, canon_item>> entries(
    std::initializer_list<std::pair<canon_item, canon_item>> es) {
    return {es.begin(), es.end()};
}

mgroup_ptr group_of(const type_ptr& t) { return std::get<t_map>(t->v).g; }

}  // namespace

TEST_CASE("type_sem basics") {
    CHECK(type_sem(parse_type_of("uint"), cuint(42)));
    CHECK(!type_sem(parse_type_of("nint"), cuint(42)));
    CHECK(type_sem(parse_type_of("nint"), cnint(41)));
    CHECK(type_sem(parse_type_of("int"), cnint(41)));
    CHECK(!type_sem(parse_type_of("int"), ctext("x")));
    CHECK(type_sem(parse_type_of("\"company\" / \"nonprofit\""), ctext("company")));
    CHECK(!type_sem(parse_type_of("\"company\" / \"nonprofit\""), ctext("other")));
    CHECK(type_sem(parse_type_of("any"), carray({cuint(1)})));
    CHECK(type_sem(parse_type_of("bool"), csimple(21)));
    CHECK(!type_sem(parse_type_of("bool"), csimple(22)));
    CHECK(type_sem(parse_type_of("nil"), csimple(22)));
    CHECK(type_sem(parse_type_of("18"), cuint(18)));
    CHECK(!type_sem(parse_type_of("18"), cnint(17)));
    CHECK(type_sem(parse_type_of("-1"), cnint(0)));

    CHECK(type_sem(parse_type_of("1..10"), cuint(10)));
    CHECK(!type_sem(parse_type_of("1..10"), cuint(11)));
    CHECK(type_sem(parse_type_of("-4..5"), cnint(3)));
    CHECK(!type_sem(parse_type_of("-4..5"), cnint(4)));
    CHECK(!type_sem(parse_type_of("1..0"), cuint(0)));  // empty range matches nothing
    CHECK(!type_sem(parse_type_of("1..0"), cuint(1)));

    CHECK(type_sem(parse_type_of("bstr .size 4"), cbytes({1, 2, 3, 4})));
    CHECK(!type_sem(parse_type_of("bstr .size 4"), cbytes({1, 2, 3})));
    CHECK(!type_sem(parse_type_of("bstr .size 4"), ctext("abcd")));
    CHECK(type_sem(parse_type_of("tstr .size (1..2)"), ctext("ab")));
    CHECK(!type_sem(parse_type_of("tstr .size (1..2)"), ctext("")));
}

TEST_CASE("array group PEG semantics") {
    auto items = [](std::initializer_list<canon_item> xs) {
        return std::vector<canon_item>(xs.begin(), xs.end());
    };

    // greedy star consumes the uints, leaves the text
    auto star_uint = astar(elem(tbase(base_type::uint_)));
    auto xs = items({cuint(1), cuint(2), ctext("a")});
    auto n = array_group_sem(*star_uint, xs);
    REQUIRE(n);
    CHECK(*n == 2);

    // [*uint, uint] never matches: the star already ate the trailing uint
    auto g = acat(star_uint, elem(tbase(base_type::uint_)));
    auto one = items({cuint(1)});
    CHECK(!array_group_sem(*g, one));
    CHECK(!type_sem(parse_type_of("[ * uint, uint ]"), carray({cuint(1)})));

    // committed alternative: uint fails on text, any branch consumes it
    auto alt = aalt(elem(tbase(base_type::uint_)), elem(tbase(base_type::any)));
    auto g2 = acat(alt, elem(tbase(base_type::tstr)));
    auto two = items({ctext("x"), ctext("y")});
    n = array_group_sem(*g2, two);
    REQUIRE(n);
    CHECK(*n == 2);

    // ...but the commitment is not revisited when the suffix fails
    auto g3 = acat(aalt(elem(tbase(base_type::any)), elem(tbase(base_type::uint_))),
                   elem(tbase(base_type::tstr)));
    auto pair = items({cuint(1), cuint(2)});
    CHECK(!array_group_sem(*g3, pair));

    CHECK(type_sem(parse_type_of("[ tstr, (\"a\" / \"b\") ]"),
                   carray({ctext("x"), ctext("a")})));
    CHECK(type_sem(parse_type_of("[ * [ * uint ] ]"),
                   carray({carray({cuint(1)}), carray({})})));
    CHECK(type_sem(parse_type_of("[ ]"), carray({})));
    CHECK(!type_sem(parse_type_of("[ ]"), carray({cuint(0)})));

    // opt and star always succeed
    testgen::rng_t rng(5);
    for (int i = 0; i < 50; ++i) {
        canon_item arr = carray({testgen::gen_canon(rng, 2), testgen::gen_canon(rng, 2)});
        const auto& v = std::get<ci_array>(arr.v).items;
        CHECK(array_group_sem(*aopt(astar(elem(tbase(base_type::any)))), v).has_value());
        CHECK(array_group_sem(*astar(elem(tbase(base_type::uint_))), v).has_value());
    }
}

TEST_CASE("map group semantics: the worked examples") {
    // ?(18 => 42) on {18 |-> 21}: one outcome, nothing consumed
    auto g1 = group_of(parse_type_of("{ ? (18 => 42) }"));
    auto m1 = entries({{cuint(18), cuint(21)}});
    auto r = map_group_sem(*g1, m1);
    CHECK(!r.bot);
    REQUIRE(r.consumed.size() == 1);
    CHECK(r.consumed[0] == 0);

    // ?(18 : 42) on the same map: the cut fires
    auto g2 = group_of(parse_type_of("{ ? (18: 42) }"));
    r = map_group_sem(*g2, m1);
    CHECK(r.bot);

    // (uint => tstr) on a two-entry map: ambiguous, two outcomes
    auto g3 = group_of(parse_type_of("{ uint => tstr }"));
    auto m2 = entries({{cuint(18), ctext("foo")}, {cuint(42), ctext("bar")}});
    r = map_group_sem(*g3, m2);
    CHECK(!r.bot);
    CHECK(r.consumed.size() == 2);

    // matching flavors
    CHECK(type_sem(parse_type_of("{ 18 => 42 }"), {ci_map{entries({{cuint(18), cuint(42)}})}}));
    CHECK(!type_sem(parse_type_of("{ 18 => 42 }"), {ci_map{entries({{cuint(18), cuint(21)}})}}));
    CHECK(type_sem(parse_type_of("{ ? (18 => 42) }"), {ci_map{{}}}));
    CHECK(!type_sem(parse_type_of("{ ? (18 => 42) }"), {ci_map{entries({{cuint(18), cuint(21)}})}}));
    CHECK(type_sem(parse_type_of("{ * (uint => any) }"),
                   {ci_map{entries({{cuint(1), ctext("x")}, {cuint(2), cuint(3)}})}}));
    CHECK(!type_sem(parse_type_of("{ * (uint => tstr) }"),
                    {ci_map{entries({{cuint(1), ctext("x")}, {cuint(2), cuint(3)}})}}));
    CHECK(type_sem(parse_type_of("{ }"), {ci_map{{}}}));
    CHECK(!type_sem(parse_type_of("{ }"), {ci_map{entries({{cuint(1), cuint(1)}})}}));
}

TEST_CASE("map group star terminates on nullable bodies") {
    auto g = mstar(mopt(entry(tuintlit(18), tuintlit(42), false)));
    auto m = entries({{cuint(18), cuint(42)}, {cuint(1), cuint(2)}});
    auto r = map_group_sem(*g, m);
    CHECK(!r.bot);
    CHECK(!r.consumed.empty());
}

TEST_CASE("cut commitment poisons a dying path") {
    // (18: uint), (19 => uint): cut entry consumed, then the concat dies on
    // the missing 19 — the group must fail outright (Bot), not fall back
    auto g = malt(mcat(entry(tuintlit(18), tbase(base_type::uint_), true),
                       entry(tuintlit(19), tbase(base_type::uint_), false)),
                  entry(tuintlit(18), tbase(base_type::any), false));
    auto m = entries({{cuint(18), cuint(5)}});
    auto r = map_group_sem(*g, m);
    CHECK(r.bot);

    // without the cut the same shape falls back to the second alternative
    auto g2 = malt(mcat(entry(tuintlit(18), tbase(base_type::uint_), false),
                        entry(tuintlit(19), tbase(base_type::uint_), false)),
                   entry(tuintlit(18), tbase(base_type::any), false));
    r = map_group_sem(*g2, m);
    CHECK(!r.bot);
    REQUIRE(r.consumed.size() == 1);
    CHECK(r.consumed[0] == 1);
}

TEST_CASE("is_det_form") {
    CHECK(is_det_form(*group_of(parse_type_of("{ ? (18: 42) }"))));
    CHECK(is_det_form(*group_of(parse_type_of("{ * (uint => any) }"))));
    CHECK(is_det_form(*group_of(parse_type_of("{ 1: 1, ? (\"CEO\": tstr) }"))));
    CHECK(is_det_form(*group_of(parse_type_of("{ (1: uint) // (2: tstr) }"))));
    CHECK(!is_det_form(*group_of(parse_type_of("{ uint => tstr }"))));
    CHECK(!is_det_form(*group_of(parse_type_of("{ * (uint: any) }"))));      // starred cut
    CHECK(!is_det_form(*group_of(parse_type_of("{ * (1 => 2, 3 => 4) }"))));  // composite star
}

namespace {

std::vector<canon_item> small_universe() {
    return {cuint(0), cuint(1), cuint(18), cnint(0), ctext("a"), ctext("b")};
}

}  // namespace

TEST_CASE("det_oracle") {
    auto u = small_universe();
    CHECK(det_oracle(*group_of(parse_type_of("{ * (uint => any) }")), u));
    CHECK(det_oracle(*group_of(parse_type_of("{ 18: 42 }")), u));
    CHECK(det_oracle(*group_of(parse_type_of("{ ? (18 => 42) }")), u));
    CHECK(!det_oracle(*group_of(parse_type_of("{ uint => tstr }")), u));
    CHECK(!det_oracle(*group_of(parse_type_of("{ any => any }")), u));
}

TEST_CASE("every deterministic-form group passes the determinism oracle") {
    auto u = small_universe();
    const char* forms[] = {
        "{ 18 => 42 }",
        "{ 18: 42 }",
        "{ 0: uint }",
        "{ * (uint => any) }",
        "{ * (tstr => uint) }",
        "{ 18: 42, 0 => tstr }",
        "{ ? (18: 42) }",
        "{ ? (18 => 42) }",
        "{ ? (\"a\": tstr), * (tstr => uint) }",
        "{ (18: uint) // (0: tstr) }",
        "{ ? ((18: uint) // (0: tstr)) }",
        "{ 18 => any, ? (0 => any), * (tstr => tstr) }",
        "{ (18: 42, 0: 1) // (1: 2) }",
    };
    for (const char* f : forms) {
        CAPTURE(f);
        const auto& g = group_of(parse_type_of(f));
        REQUIRE(is_det_form(*g));
        CHECK(det_oracle(*g, u));
    }
}

TEST_CASE("star of entry alternations splits into concatenated stars") {
    auto u = small_universe();

    struct entry_spec {
        const canon_item* key_lit;  // null = typed key (uint)
        bool cut;
        const canon_item* val_lit;  // null = any
    };

    auto mk_entry = [&](const entry_spec& e) {
        type_ptr k = e.key_lit ? (std::holds_alternative<ci_int>(e.key_lit->v)
                                      ? tuintlit(std::get<ci_int>(e.key_lit->v).arg)
                                      : ttext(std::get<ci_text>(e.key_lit->v).v))
                               : tbase(base_type::uint_);
        type_ptr v = e.val_lit ? (std::holds_alternative<ci_int>(e.val_lit->v)
                                      ? tuintlit(std::get<ci_int>(e.val_lit->v).arg)
                                      : ttext(std::get<ci_text>(e.val_lit->v).v))
                               : tbase(base_type::any);
        return entry(std::move(k), std::move(v), e.cut);
    };

    canon_item k18 = cuint(18), k0 = cuint(0), ta = ctext("a"), v1 = cuint(1);
    std::vector<std::array<entry_spec, 2>> cases = {
        {{{&k18, false, nullptr}, {&k0, false, nullptr}}},
        {{{&k18, true, &v1}, {&k0, false, nullptr}}},
        {{{&k18, false, &v1}, {&k18, true, &ta}}},
        {{{nullptr, false, &v1}, {&k0, true, nullptr}}},
        {{{nullptr, false, nullptr}, {&ta, true, &v1}}},
        {{{&k18, true, &v1}, {&k18, false, nullptr}}},
    };

    size_t maps_checked = 0;
    for (const auto& c : cases) {
        mgroup_ptr e1 = mk_entry(c[0]), e2 = mk_entry(c[1]);
        mgroup_ptr lhs = mstar(malt(e1, e2));
        mgroup_ptr rhs = mcat(mstar(e1), mstar(e2));

        // exhaustive maps: up to 3 distinct keys from the universe
        size_t n = u.size();
        for (size_t a = 0; a <= n; ++a)
            for (size_t b = a; b <= n; ++b)
                for (size_t cix = b; cix <= n; ++cix) {
                    std::vector<size_t> keys;
                    if (a < n) keys.push_back(a);
                    if (b < n && b != a) keys.push_back(b);
                    if (cix < n && cix != b && cix != a) keys.push_back(cix);
                    // value assignment: sweep one value index per key
                    for (size_t vi = 0; vi < (keys.empty() ? 1 : n); ++vi) {
                        std::vector<std::pair<canon_item, canon_item>> m;
                        for (size_t ki = 0; ki < keys.size(); ++ki)
                            m.emplace_back(u[keys[ki]], u[(vi + ki) % n]);
                        auto rl = map_group_sem(*lhs, m);
                        auto rr = map_group_sem(*rhs, m);
                        CAPTURE(keys.size(), vi);
                        REQUIRE(rl.bot == rr.bot);
                        REQUIRE(rl.consumed == rr.consumed);
                        ++maps_checked;
                    }
                }
    }
    CHECK(maps_checked >= 1000);
}

TEST_CASE("entity schema end to end against the oracle") {
    auto t = parse_type_of(
        "[ tstr, (\"company\" / \"nonprofit\"), { ? (\"CEO\": tstr), * (tstr => uint) } ]");

    auto inst = [](canon_item m) {
        return carray({ctext("ACME Corp."), ctext("company"), std::move(m)});
    };

    CHECK(type_sem(t, inst({ci_map{entries({{ctext("CEO"), ctext("J.D.")}})}})));
    CHECK(type_sem(t, inst({ci_map{{}}})));
    CHECK(type_sem(t, inst({ci_map{entries({{ctext("CEO"), ctext("J.D.")},
                                            {ctext("employees"), cuint(50)}})}})));
    CHECK(type_sem(t, inst({ci_map{entries({{ctext("employees"), cuint(50)}})}})));
    // cut: CEO present with a non-text value fails even though the table
    // would otherwise accept a tstr key
    CHECK(!type_sem(t, inst({ci_map{entries({{ctext("CEO"), cuint(1)}})}})));
    // unconsumed entry
    CHECK(!type_sem(t, inst({ci_map{entries({{cuint(5), cuint(1)}})}})));
    // wrong discriminator
    CHECK(!type_sem(t, carray({ctext("ACME"), ctext("co-op"), {ci_map{{}}}})));
}

TEST_CASE("outcome masks stay within the entry count") {
    testgen::rng_t rng(77);
    auto u = small_universe();
    auto g = group_of(parse_type_of("{ ? (18 => 42), * (uint => any) }"));
    for (int t = 0; t < 200; ++t) {
        std::vector<std::pair<canon_item, canon_item>> m;
        size_t n = rng() % 5;
        for (size_t i = 0; i < n; ++i) m.emplace_back(cuint(100 + i), u[rng() % u.size()]);
        auto r = map_group_sem(*g, m);
        std::uint64_t full = (std::uint64_t{1} << m.size()) - 1;
        for (auto mask : r.consumed) CHECK((mask & ~full) == 0);
    }
}

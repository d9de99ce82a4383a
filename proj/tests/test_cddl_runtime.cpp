#include <catch2/catch_amalgamated.hpp>

#include <detcbor/cddl/parse.hpp>
#include <detcbor/cddl/runtime.hpp>

#include "gen.hpp"
#include "gen_values.hpp"

#include <atomic>
#include <cstdlib>
#include <new>
#include <regex>

using namespace detcbor;
using namespace detcbor::cbor;
using namespace detcbor::cddl;

// global allocation counter, used to show validation needs no heap
static std::atomic<std::uint64_t> g_allocs{0};

void* operator new(std::size_t n) {
    g_allocs.fetch_add(1, std::memory_order_relaxed);
    if (void* p = std::malloc(n ? n : 1)) return p;
    throw std::bad_alloc{};
}
void* operator new[](std::size_t n) { return ::operator new(n); }
void operator delete(void* p) noexcept { std::free(p); }
void operator delete[](void* p) noexcept { std::free(p); }
void operator delete(void* p, std::size_t) noexcept { std::free(p); }
void operator delete[](void* p, std::size_t) noexcept { std::free(p); }

namespace {

// accepts a bare type expression or a full multi-rule schema
type_ptr parse_type_of(const std::string& text) {
    static const std::regex rule_start(R"(^\s*[A-Za-z_][A-Za-z0-9_-]*\s*=[^>=])");
    std::string src = std::regex_search(text, rule_start) ? text : "root = " + text;
    auto s = parse_cddl(src);
    REQUIRE(s.ok());
    return inline_root(s.value());
}

elab_schema elab_ok(const std::string& text) {
    auto r = elaborate(parse_type_of(text));
    UNSCOPED_INFO(text);
    if (!r.ok()) UNSCOPED_INFO(to_string(r.error().code) << ": " << r.error().detail);
    REQUIRE(r.ok());
    return r.value();
}

std::vector<byte> enc(const canon_item& x) { return serialize_det(x); }

std::string hex(bview b) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (byte x : b) {
        s += digits[x >> 4];
        s += digits[x &  15];
    }
    return s;
}

const char* entity_text =
    "[ tstr, (\"company\" / \"nonprofit\"), { ? (\"CEO\": tstr), * (tstr => uint) } ]";

canon_item acme_item() {
    return carray({ctext("ACME Corp."), ctext("company"),
                   mk_map({{ctext("CEO"), ctext("J.D.")},
                           {ctext("J.D."), cuint(1842)},
                           {ctext("M.S."), cuint(1729)}})
                       .value()});
}

std::vector<canon_item> small_universe() {
    return {cuint(0),    cuint(1),   cuint(18),  cuint(42),    cnint(0),
            cnint(17),   ctext(""),  ctext("a"), ctext("CEO"), cbytes({1, 2}),
            csimple(20), csimple(22)};
}


}  // namespace

TEST_CASE("validate matches the worked examples") {
    auto entity = elab_ok(entity_text);
    auto acme = enc(acme_item());
    auto ok = validate(entity, as_bview(acme));
    REQUIRE(ok.ok());
    CHECK(ok.value() == acme.size());

    // the CEO entry carries a cut: a mismatched value fails the whole map
    // even though the table alternative would otherwise absorb the entry
    auto bad = enc(carray({ctext("ACME Corp."), ctext("company"),
                           mk_map({{ctext("CEO"), cuint(7)}}).value()}));
    auto r = validate(entity, as_bview(bad));
    REQUIRE(!r.ok());
    CHECK(r.error().code == rt_code::cut_violation);
    CHECK(r.error().path == "[2].\"CEO\"");

    auto s42 = elab_ok("{ 18: 42 }");
    auto m = enc(mk_map({{cuint(18), cuint(21)}}).value());
    auto r2 = validate(s42, as_bview(m));
    REQUIRE(!r2.ok());
    CHECK(r2.error().code == rt_code::cut_violation);
    CHECK(r2.error().path == ".18");

    auto s1 = elab_ok("{ 1: uint }");
    auto extra = enc(mk_map({{cuint(1), cuint(5)}, {cuint(2), cuint(6)}}).value());
    CHECK(validate(s1, as_bview(extra)).error().code == rt_code::unconsumed_entries);

    // a table only counts entries whose value matches; the rest stay unconsumed
    auto st = elab_ok("{ * (uint => uint) }");
    auto mixed = enc(mk_map({{cuint(1), ctext("x")}}).value());
    CHECK(validate(st, as_bview(mixed)).error().code == rt_code::unconsumed_entries);

    std::vector<byte> nonmin{0x18, 0x17};  // uint 23 with an oversized argument
    CHECK(validate(s1, as_bview(nonmin)).error().code == rt_code::not_canonical);
    std::vector<byte> junk{0xFF};
    CHECK(validate(s1, as_bview(junk)).error().code == rt_code::not_canonical);

    CHECK(validate(entity, as_bview(enc(cuint(5)))).error().code == rt_code::schema_mismatch);

    // validation stops after one item; trailing bytes are the caller's business
    std::vector<byte> trailing{0x17, 0x01};
    auto u = elab_ok("uint");
    REQUIRE(validate(u, as_bview(trailing)).ok());
    CHECK(validate(u, as_bview(trailing)).value() == 1);
}

TEST_CASE("validation agrees with the reference semantics") {
    const char* texts[] = {
        "uint",
        "int",
        "tstr",
        "any",
        "18",
        "\"a\"",
        "1..5",
        "-5..5",
        "uint / tstr",
        "[ * uint ]",
        "[ uint, tstr ]",
        "[ * (uint / tstr) ]",
        "{ * (tstr => uint) }",
        "{ 18 => uint, * (uint => tstr) }",
        "{ 1: uint, ? (2: tstr) }",
        "{ (18: 42) // (19: 43) }",
        entity_text,
    };

    std::vector<canon_item> probes = small_universe();
    probes.push_back(acme_item());
    probes.push_back(carray({ctext("x"), ctext("nonprofit"),
                             mk_map({{ctext("a"), cuint(1)}}).value()}));
    probes.push_back(mk_map({{cuint(18), cuint(7)}}).value());
    probes.push_back(mk_map({{cuint(18), cuint(7)}, {cuint(3), ctext("x")}}).value());
    probes.push_back(mk_map({{cuint(1), cuint(5)}, {cuint(2), ctext("t")}}).value());
    probes.push_back(mk_map({{cuint(19), cuint(43)}}).value());
    probes.push_back(carray({cuint(4), ctext("q")}));
    testgen::rng_t rng(515);
    for (int i = 0; i < 300; ++i) probes.push_back(testgen::gen_canon(rng, 3, 3));

    size_t accepted = 0;
    for (const char* text : texts) {
        auto orig = parse_type_of(text);
        auto es = elab_ok(text);
        for (const auto& x : probes) {
            auto bytes = enc(x);
            bool expect = type_sem(*orig, x);
            auto got = validate(es, as_bview(bytes));
            UNSCOPED_INFO(text << " on " << hex(as_bview(bytes)));
            REQUIRE(got.ok() == expect);
            if (!expect) continue;
            accepted++;
            // accepted bytes must round-trip exactly through parse + serialize
            auto p = parse(es, as_bview(bytes));
            REQUIRE(p.ok());
            CHECK(p.value().rest.empty());
            auto b2 = serialize(es, p.value().value);
            REQUIRE(b2.ok());
            REQUIRE(bytes_equal(as_bview(b2.value()), as_bview(bytes)));
        }
    }
    CHECK(accepted >= 300);
}

TEST_CASE("parse extracts typed values") {
    auto u = elab_ok("uint");
    std::vector<byte> b{0x17, 0x01};
    auto p = parse(u, as_bview(b));
    REQUIRE(p.ok());
    CHECK(std::get<tv_uint>(p.value().value.v).v == 23);
    CHECK(p.value().rest.size() == 1);

    auto c = elab_ok("uint / tstr");
    auto tb = enc(ctext("a"));
    auto pc = parse(c, as_bview(tb));
    REQUIRE(pc.ok());
    const auto& right = std::get<tv_right>(pc.value().value.v);
    CHECK(std::get<tv_text>(right.v->v).v == "a");

    auto entity = elab_ok(entity_text);
    auto acme = enc(acme_item());
    auto pe = parse(entity, as_bview(acme));
    REQUIRE(pe.ok());
    const auto& top = std::get<tv_pair>(pe.value().value.v);
    CHECK(std::get<tv_text>(top.a->v).v == "ACME Corp.");
    const auto& second = std::get<tv_pair>(top.b->v);
    REQUIRE(std::holds_alternative<tv_left>(second.a->v));
    CHECK(std::holds_alternative<tv_unit>(std::get<tv_left>(second.a->v).v->v));
    const auto& third = std::get<tv_pair>(second.b->v);
    const auto& ceo = std::get<tv_some>(third.a->v);
    const auto& ceo_pair = std::get<tv_pair>(ceo.v->v);
    CHECK(std::holds_alternative<tv_unit>(ceo_pair.a->v));
    CHECK(std::get<tv_text>(ceo_pair.b->v).v == "J.D.");

    const auto& table = std::get<tv_table>(third.b->v);
    REQUIRE(table.seed.has_value());
    CHECK(table.seed->entries == 3);  // raw map size; CEO is filtered on iteration
    auto entries = table_entries(table);
    REQUIRE(entries.size() == 2);
    CHECK(std::get<tv_text>(entries[0].first.v).v == "J.D.");
    CHECK(std::get<tv_uint>(entries[0].second.v).v == 1842);
    CHECK(std::get<tv_text>(entries[1].first.v).v == "M.S.");
    CHECK(std::get<tv_uint>(entries[1].second.v).v == 1729);

    // payloads view the input, no copies
    auto name = std::get<tv_text>(top.a->v);
    CHECK(name.store == nullptr);
    const byte* sp = reinterpret_cast<const byte*>(name.v.data());
    CHECK(sp >= acme.data());
    CHECK(sp + name.v.size() <= acme.data() + acme.size());
}

TEST_CASE("iteration walks seeds") {
    auto l = elab_ok("[ * uint ]");
    auto arr = enc(carray({cuint(0), cuint(1), cuint(2)}));
    auto pl = parse(l, as_bview(arr));
    REQUIRE(pl.ok());
    const auto& lst = std::get<tv_list>(pl.value().value.v);
    REQUIRE(lst.seed.has_value());
    list_iter it(*lst.seed);
    for (std::uint64_t i = 0; i < 3; ++i) {
        auto v = it.next();
        REQUIRE(v.has_value());
        CHECK(std::get<tv_uint>(v->v).v == i);
    }
    CHECK(!it.next().has_value());

    auto arr0 = enc(carray(std::vector<canon_item>{}));
    auto p0 = parse(l, as_bview(arr0));
    REQUIRE(p0.ok());
    list_iter it0(*std::get<tv_list>(p0.value().value.v).seed);
    CHECK(!it0.next().has_value());

    // a star body spanning two items yields pairs
    auto l2 = elab_ok("[ * (uint, tstr) ]");
    auto arr2 = enc(carray({cuint(1), ctext("a"), cuint(2), ctext("b")}));
    auto p2 = parse(l2, as_bview(arr2));
    REQUIRE(p2.ok());
    auto items = list_items(std::get<tv_list>(p2.value().value.v));
    REQUIRE(items.size() == 2);
    const auto& pr = std::get<tv_pair>(items[0].v);
    CHECK(std::get<tv_uint>(pr.a->v).v == 1);
    CHECK(std::get<tv_text>(pr.b->v).v == "a");
}

TEST_CASE("sigma_check enforces serializability") {
    auto tbl = elab_ok("{ * (uint => uint) }");
    auto dup = sigma_check(tbl, vtable({{vuint(1), vuint(1)}, {vuint(1), vuint(2)}}));
    REQUIRE(dup.has_value());
    CHECK(dup->code == sigma_code::duplicate_table_key);

    CHECK(!sigma_check(elab_ok("uint"), vuint(42)).has_value());

    // the cut entry claims key 18; the table must not smuggle it back in
    auto excl = elab_ok("{ 18: 42, * (uint => any) }");
    auto v = vpair(vpair(vunit(), vunit()), vtable({{vuint(18), vbytes({0x05})}}));
    auto e = sigma_check(excl, v);
    REQUIRE(e.has_value());
    CHECK(e->code == sigma_code::excluded_key);

    CHECK(sigma_check(elab_ok("tstr"), vtext(std::string("\xff\xfe", 2)))->code ==
          sigma_code::invalid_utf8);
    CHECK(sigma_check(elab_ok("1..10"), vuint(42))->code == sigma_code::out_of_range);
    CHECK(sigma_check(elab_ok("uint"), vtext("x"))->code == sigma_code::out_of_range);
    CHECK(sigma_check(elab_ok("42"), vuint(42))->code == sigma_code::out_of_range);
    CHECK(sigma_check(elab_ok("-5..5"), vnint(9))->code == sigma_code::out_of_range);
    CHECK(!sigma_check(elab_ok("-5..5"), vnint(4)).has_value());

    // `any` binds verbatim bytes, which must themselves be one canonical item
    CHECK(sigma_check(elab_ok("any"), vbytes({0x18, 0x17}))->code == sigma_code::out_of_range);
    CHECK(!sigma_check(elab_ok("any"), vbytes({0x17})).has_value());
}

TEST_CASE("serialize produces canonical bytes") {
    auto s11 = elab_ok("{ 1: 1 }");
    auto one = serialize(s11, vpair(vunit(), vunit()));
    REQUIRE(one.ok());
    CHECK(one.value() == std::vector<byte>{0xA1, 0x01, 0x01});

    auto u = serialize(elab_ok("uint"), vuint(23));
    REQUIRE(u.ok());
    CHECK(u.value() == std::vector<byte>{0x17});

    std::array<byte, 2> small{};
    auto tight = serialize(s11, vpair(vunit(), vunit()), small);
    REQUIRE(tight.ok());
    CHECK(tight.value() == 0);  // three bytes needed

    auto entity = elab_ok(entity_text);
    auto v = vpair(vtext("ACME Corp."),
                   vpair(vleft(vunit()),
                         vpair(vsome(vpair(vunit(), vtext("J.D."))),
                               vtable({{vtext("J.D."), vuint(1842)},
                                       {vtext("M.S."), vuint(1729)}}))));
    auto bytes = serialize(entity, v);
    REQUIRE(bytes.ok());
    CHECK(bytes_equal(as_bview(bytes.value()), as_bview(enc(acme_item()))));
    auto back = parse(entity, as_bview(bytes.value()));
    REQUIRE(back.ok());
    CHECK(tv_equal(to_owned(back.value().value), to_owned(v)));

    auto dup = serialize(elab_ok("{ * (uint => uint) }"),
                         vtable({{vuint(1), vuint(1)}, {vuint(1), vuint(2)}}));
    REQUIRE(!dup.ok());
    CHECK(dup.error().code == sigma_code::duplicate_table_key);
}

namespace {

int g_probe_calls = 0;
bool g_probe_sorted = true;

void insert_probe(bview region, std::uint64_t count) {
    g_probe_calls++;
    size_t pos = 0;
    bview prev{};
    for (std::uint64_t i = 0; i < count; ++i) {
        size_t nk = jump(region.subspan(pos));
        bview k = region.subspan(pos, nk);
        if (i > 0 && compare_bytes(prev, k) >= 0) g_probe_sorted = false;
        pos += nk + jump(region.subspan(pos + nk));
        prev = k;
    }
    if (pos != region.size()) g_probe_sorted = false;
}

}  // namespace

TEST_CASE("sorted insertion keeps the entry region ordered at every step") {
    auto tbl = elab_ok("{ * (uint => uint) }");
    std::vector<std::pair<typed_value, typed_value>> entries;
    for (std::uint64_t k : {9, 3, 7, 1, 8, 0, 5, 2, 6, 4})
        entries.emplace_back(vuint(k), vuint(k + 100));

    g_probe_calls = 0;
    g_probe_sorted = true;
    rt_detail::sorted_insert_probe = &insert_probe;
    std::vector<byte> buf(256);
    auto n = serialize(tbl, vtable(std::move(entries)), buf);
    rt_detail::sorted_insert_probe = nullptr;

    REQUIRE(n.ok());
    REQUIRE(n.value() > 0);
    CHECK(g_probe_calls == 10);
    CHECK(g_probe_sorted);
    auto dec = parse_canon(bview(buf.data(), n.value()));
    REQUIRE(dec.ok());
    CHECK(std::get<ci_map>(dec.value().first.v).entries.size() == 10);
}

TEST_CASE("map validation uses constant auxiliary state") {
    auto tbl = elab_ok("{ * (tstr => uint) }");
    std::vector<std::pair<canon_item, canon_item>> small_es, big_es;
    for (int i = 0; i < 3; ++i) small_es.emplace_back(ctext("k" + std::to_string(i)), cuint(i));
    for (int i = 0; i < 400; ++i) big_es.emplace_back(ctext("k" + std::to_string(i)), cuint(i));
    auto sb = enc(mk_map(std::move(small_es)).value());
    auto bb = enc(mk_map(std::move(big_es)).value());

    CHECK(g_allocs.load(std::memory_order_relaxed) > 0);  // the counter does intercept

    auto measure = [&](const elab_schema& es, const std::vector<byte>& in) {
        REQUIRE(validate(es, as_bview(in)).ok());  // warm-up, result checked
        auto before = g_allocs.load(std::memory_order_relaxed);
        auto r = validate(es, as_bview(in));
        auto after = g_allocs.load(std::memory_order_relaxed);
        REQUIRE(r.ok());
        return after - before;
    };

    CHECK(measure(tbl, sb) == 0);
    CHECK(measure(tbl, bb) == 0);

    auto entity = elab_ok(entity_text);
    auto acme = enc(acme_item());
    CHECK(measure(entity, acme) == 0);
}

TEST_CASE("random values round-trip through serialization") {
    const char* texts[] = {
        "uint",
        "-5..5",
        "uint / tstr",
        "[ * uint ]",
        "[ uint, tstr, bstr ]",
        "[ * (uint / tstr) ]",
        "[ ? tstr, uint ]",
        "[ (uint, uint) // (tstr) ]",
        "[ * (uint, tstr) ]",
        "{ * (tstr => uint) }",
        "{ * (uint => tstr) }",
        "{ 1: uint, ? (2: tstr), * (tstr => bstr) }",
        entity_text,
    };

    testgen::rng_t rng(919);
    for (const char* text : texts) {
        auto es = elab_ok(text);
        size_t passes = 0;
        for (int i = 0; i < 60; ++i) {
            typed_value v = testgen::gen_tv(es.root, rng);
            if (sigma_check(es, v)) continue;  // e.g. a random table key collision
            auto bytes = serialize(es, v);
            UNSCOPED_INFO(text);
            REQUIRE(bytes.ok());
            auto p = parse(es, as_bview(bytes.value()));
            REQUIRE(p.ok());
            CHECK(p.value().rest.empty());
            REQUIRE(tv_equal(to_owned(p.value().value), to_owned(v)));
            auto again = serialize(es, p.value().value);
            REQUIRE(again.ok());
            REQUIRE(bytes_equal(as_bview(again.value()), as_bview(bytes.value())));
            passes++;
        }
        UNSCOPED_INFO(text);
        CHECK(passes >= 40);
    }
}

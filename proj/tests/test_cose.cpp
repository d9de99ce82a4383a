#include <catch2/catch_amalgamated.hpp>

#include <detcbor/cose.hpp>
#ifdef DETCBOR_HAVE_OPENSSL
#include <detcbor/cose_openssl.hpp>
#endif

#include "gen.hpp"

#include <regex>

using namespace detcbor;
using namespace detcbor::cbor;
using namespace detcbor::cose;

namespace {

cddl::type_ptr parse_type_of(const std::string& text) {
    static const std::regex rule_start(R"(^\s*[A-Za-z_][A-Za-z0-9_-]*\s*=[^>=])");
    std::string src = std::regex_search(text, rule_start) ? text : "root = " + text;
    auto s = cddl::parse_cddl(src);
    REQUIRE(s.ok());
    return cddl::inline_root(s.value());
}

std::vector<byte> fake_sk(byte seed) {
    std::vector<byte> sk(32);
    for (size_t i = 0; i < sk.size(); ++i) sk[i] = static_cast<byte>(seed + i);
    return sk;
}

}  // namespace

TEST_CASE("embedded schemas elaborate and the backtracking form is rejected") {
    CHECK(cddl::elaborate(parse_type_of(cose_sign1_cddl())).ok());
    CHECK(cddl::elaborate(parse_type_of(sig_structure_cddl())).ok());
    CHECK(cddl::elaborate(parse_type_of(header_map_cddl())).ok());
    CHECK(cddl::elaborate(parse_type_of(header_map_lax_cddl())).ok());
    CHECK(cddl::elaborate(parse_type_of(key_okp_cddl())).ok());
    schemas();  // the embedded singletons agree (would abort otherwise)

    // the general signature structure makes an optional bstr precede a
    // mandatory one; greedy matching cannot honor that, and the checker
    // says so instead of silently mis-parsing
    auto r = cddl::elaborate(
        parse_type_of("[ \"Signature1\", bstr, ? bstr, bstr, bstr ]"));
    REQUIRE(!r.ok());
    CHECK(r.error().code == cddl::elab_code::greedy_star_overlap);

    // spelling the extension table over int-or-tstr keys cannot work: once
    // the 5-or-6 alternative commits to one key, nothing guarantees the
    // other key's absence, so the table has no sound exclusion for it and
    // the checker reports the contested claim instead of guessing
    auto o = cddl::elaborate(parse_type_of(
        "header_map = { ? ( (5: bstr) // (6: bstr) ), * (label => values) }\n"
        "label = int / tstr\n"
        "values = any\n"));
    REQUIRE(!o.ok());
    CHECK(o.error().code == cddl::elab_code::footprint_overlap);
}

TEST_CASE("to_be_signed serializes the signature structure") {
    auto hi = as_bview("hi");

    auto empty_prot = to_be_signed({}, hi, {});
    REQUIRE(empty_prot.ok());
    CHECK(to_hex(as_bview(empty_prot.value())) == "846a5369676e6174757265314040426869");

    std::vector<byte> a0{0xA0};  // serialized empty header map
    auto map_prot = to_be_signed(as_bview(a0), hi, {});
    REQUIRE(map_prot.ok());
    CHECK(to_hex(as_bview(map_prot.value())) == "846a5369676e61747572653141a040426869");

    auto again = to_be_signed(as_bview(a0), hi, {});
    REQUIRE(again.ok());
    CHECK(bytes_equal(as_bview(again.value()), as_bview(map_prot.value())));

    std::vector<byte> nonmin{0x18, 0x17};
    auto bad = to_be_signed(as_bview(nonmin), hi, {});
    REQUIRE(!bad.ok());
    CHECK(bad.error().code == cose_code::parse_failure);

    std::vector<byte> trailing{0xA0, 0x00};
    CHECK(!to_be_signed(as_bview(trailing), hi, {}).ok());
}

TEST_CASE("sign and verify round-trip with the fake provider") {
    auto cp = fake_provider();
    auto sk = fake_sk(1);
    auto pk = fake_public_key(as_bview(sk));

    auto payload = as_bview("attested data");
    auto msg = sign1(cp, as_bview(sk), make_headers(-8), payload);
    REQUIRE(msg.ok());

    // canonical envelope: deterministic check passes and covers every byte
    auto d = det_check(as_bview(msg.value()));
    REQUIRE(d.ok());
    CHECK(d.value() == msg.value().size());
    CHECK(msg.value().front() == 0xD2);  // tag 18

    auto got = verify1(cp, as_bview(pk), as_bview(msg.value()));
    REQUIRE(got.ok());
    CHECK(bytes_equal(got.value(), payload));

    // the body re-serializes byte-identically after a parse
    bview body = as_bview(msg.value()).subspan(1);
    auto p = cddl::parse(schemas().sign1, body);
    REQUIRE(p.ok());
    auto back = cddl::serialize(schemas().sign1, p.value().value);
    REQUIRE(back.ok());
    CHECK(bytes_equal(as_bview(back.value()), body));

    // wrong key fails
    auto pk2 = fake_public_key(as_bview(fake_sk(2)));
    auto bad = verify1(cp, as_bview(pk2), as_bview(msg.value()));
    REQUIRE(!bad.ok());
    CHECK(bad.error().code == cose_code::signature_invalid);

    // span form: too-small output reports 0, exact output round-trips
    std::vector<byte> small(4);
    auto tight = sign1(cp, as_bview(sk), make_headers(-8), payload, std::span<byte>(small));
    REQUIRE(tight.ok());
    CHECK(tight.value() == 0);
    std::vector<byte> room(msg.value().size());
    auto fit = sign1(cp, as_bview(sk), make_headers(-8), payload, std::span<byte>(room));
    REQUIRE(fit.ok());
    REQUIRE(fit.value() == msg.value().size());
    CHECK(bytes_equal(as_bview(room), as_bview(msg.value())));

    // non-deterministic envelopes are refused before any crypto runs
    std::vector<byte> widened = msg.value();
    // widen the tag argument: D2 -> D8 12
    widened[0] = 0xD8;
    widened.insert(widened.begin() + 1, byte{18});
    auto nd = verify1(cp, as_bview(pk), as_bview(widened));
    REQUIRE(!nd.ok());
    CHECK(nd.error().code == cose_code::non_deterministic_encoding);

    std::vector<byte> junk{0xFF, 0x00};
    CHECK(verify1(cp, as_bview(pk), as_bview(junk)).error().code == cose_code::parse_failure);

    std::vector<byte> untagged(msg.value().begin() + 1, msg.value().end());
    CHECK(verify1(cp, as_bview(pk), as_bview(untagged)).error().code ==
          cose_code::parse_failure);
}

TEST_CASE("fake provider envelope golden bytes are stable") {
    auto cp = fake_provider();
    auto sk = fake_sk(1);
    auto msg = sign1(cp, as_bview(sk), make_headers(-8), as_bview("This is the content."),
                     make_headers(std::nullopt, std::vector<byte>{0x31, 0x31}));
    REQUIRE(msg.ok());
    CHECK(to_hex(as_bview(msg.value())) ==
          "d28443a10127a10442313154546869732069732074686520636f6e74656e742e5840eebfeacfcd1a6bc8"
          "c7f122c8b93259de196eea1d83fbb18ef4f4434ade2fd4de12636439b96ad36d3849fbbf13a914828aeb"
          "12e5acab5ade9f85db563085903b");
}

TEST_CASE("header maps carrying both IV labels are rejected") {
    auto cp = fake_provider();
    auto sk = fake_sk(3);

    // through the value side: the extension table is text-keyed, so the
    // integer labels 5 and 6 cannot be smuggled in through it
    auto smuggled = make_headers(-8, std::nullopt,
                                 {{cddl::vuint(5), cddl::vbytes({0x01})},
                                  {cddl::vuint(6), cddl::vbytes({0x02})}});
    auto s = sign1(cp, as_bview(sk), smuggled, as_bview("x"));
    REQUIRE(!s.ok());
    CHECK(s.error().code == cose_code::serialize_failure);

    // text-keyed extension headers still pass through the table; the value
    // slot is `any`, which binds a canonical encoding (here: the int 9)
    auto extended = make_headers(-8, std::nullopt, {{cddl::vtext("app"), cddl::vbytes({0x09})}});
    auto e = sign1(cp, as_bview(sk), extended, as_bview("x"));
    REQUIRE(e.ok());
    CHECK(verify1(cp, as_bview(fake_public_key(as_bview(sk))), as_bview(e.value())).ok());

    // through the byte side: a received envelope with both labels fails
    // validation under the amended schema
    auto both = mk_map({{cuint(5), cbytes({1})}, {cuint(6), cbytes({2})}}).value();
    auto env = serialize_det(
        ctagged(18, carray({cbytes({}), both, cbytes({0x68, 0x69}),
                            cbytes(std::vector<byte>(64, byte{0}))})));
    auto v = verify1(cp, as_bview(fake_public_key(as_bview(sk))), as_bview(env));
    REQUIRE(!v.ok());
    CHECK(v.error().code == cose_code::parse_failure);

    // the appendix reading accepts the same map; the amendment is the
    // only thing standing between the two
    auto both_bytes = serialize_det(both);
    CHECK(cddl::validate(cose_detail::elab_of(header_map_lax_cddl()), as_bview(both_bytes)).ok());
    CHECK(!cddl::validate(schemas().header_map, as_bview(both_bytes)).ok());

    // one of the two alone is fine
    auto only5 = serialize_det(mk_map({{cuint(5), cbytes({1})}}).value());
    CHECK(cddl::validate(schemas().header_map, as_bview(only5)).ok());
}

TEST_CASE("tampered messages are rejected") {
    auto cp = fake_provider();
    testgen::rng_t rng(2718);
    size_t sig_tampers = 0, payload_tampers = 0;
    for (int i = 0; i < 100; ++i) {
        auto sk = fake_sk(static_cast<byte>(rng()));
        auto pk = fake_public_key(as_bview(sk));
        std::vector<byte> payload(1 + rng() % 40);
        for (auto& b : payload) b = static_cast<byte>(rng());
        auto msg = sign1(cp, as_bview(sk), make_headers(-8), as_bview(payload));
        REQUIRE(msg.ok());
        REQUIRE(verify1(cp, as_bview(pk), as_bview(msg.value())).ok());

        // flip a signature byte (the trailing 64)
        auto bad_sig = msg.value();
        size_t si = bad_sig.size() - 1 - rng() % 64;
        bad_sig[si] ^= static_cast<byte>(1 + rng() % 255);
        auto r1 = verify1(cp, as_bview(pk), as_bview(bad_sig));
        REQUIRE(!r1.ok());
        CHECK(r1.error().code == cose_code::signature_invalid);
        sig_tampers++;

        // flip a payload content byte; structure stays valid, signature breaks
        auto bad_pay = msg.value();
        // layout: d2 84 43 a10127 a0 <payload bstr at 7> 5840 <sig>
        size_t pstart;
        if (payload.size() < 24) {
            REQUIRE(bad_pay[7] == 0x40 + payload.size());
            pstart = 8;
        } else {
            REQUIRE(bad_pay[7] == 0x58);
            REQUIRE(bad_pay[8] == payload.size());
            pstart = 9;
        }
        size_t pi = pstart + rng() % payload.size();
        bad_pay[pi] ^= static_cast<byte>(1 + rng() % 255);
        auto r2 = verify1(cp, as_bview(pk), as_bview(bad_pay));
        REQUIRE(!r2.ok());
        CHECK(r2.error().code == cose_code::signature_invalid);
        payload_tampers++;
    }
    CHECK(sig_tampers == 100);
    CHECK(payload_tampers == 100);
}

TEST_CASE("detached payloads verify against caller-supplied bytes") {
    auto cp = fake_provider();
    auto sk = fake_sk(9);
    auto pk = fake_public_key(as_bview(sk));
    auto payload = as_bview("body kept elsewhere");

    auto msg = sign1_detached(cp, as_bview(sk), make_headers(-8), payload);
    REQUIRE(msg.ok());
    REQUIRE(det_check(as_bview(msg.value())).ok());

    auto attached = verify1(cp, as_bview(pk), as_bview(msg.value()));
    REQUIRE(!attached.ok());
    CHECK(attached.error().code == cose_code::parse_failure);

    CHECK(!verify1_detached(cp, as_bview(pk), as_bview(msg.value()), payload).has_value());

    auto wrong = verify1_detached(cp, as_bview(pk), as_bview(msg.value()), as_bview("other"));
    REQUIRE(wrong.has_value());
    CHECK(wrong->code == cose_code::signature_invalid);

    // an attached message is not accepted by the detached path
    auto att = sign1(cp, as_bview(sk), make_headers(-8), payload);
    REQUIRE(att.ok());
    auto mixed = verify1_detached(cp, as_bview(pk), as_bview(att.value()), payload);
    REQUIRE(mixed.has_value());
    CHECK(mixed->code == cose_code::parse_failure);
}

TEST_CASE("OKP key records parse") {
    std::vector<byte> pub(32);
    for (size_t i = 0; i < pub.size(); ++i) pub[i] = static_cast<byte>(i);

    auto k1 = serialize_det(
        mk_map({{cuint(1), cuint(1)}, {cnint(0), cuint(6)}, {cnint(1), cbytes(pub)}}).value());
    auto r1 = parse_key_okp(as_bview(k1));
    REQUIRE(r1.ok());
    const auto& crv = std::get<cddl::tv_left>(r1.value().crv.v);
    CHECK(std::get<cddl::tv_uint>(crv.v->v).v == 6);
    REQUIRE(r1.value().public_key.has_value());
    CHECK(bytes_equal(*r1.value().public_key, as_bview(pub)));
    CHECK(!r1.value().private_key.has_value());
    CHECK(cddl::table_entries(std::get<cddl::tv_table>(r1.value().residual.v)).empty());

    // the required 1:1 entry is missing
    auto k2 = serialize_det(mk_map({{cnint(0), cuint(6)}}).value());
    auto r2 = parse_key_okp(as_bview(k2));
    REQUIRE(!r2.ok());
    CHECK(r2.error().code == cddl::rt_code::schema_mismatch);

    // 1 must map to the literal 1, and the entry is cut
    auto k3 = serialize_det(mk_map({{cuint(1), cuint(2)}, {cnint(0), cuint(6)}}).value());
    CHECK(parse_key_okp(as_bview(k3)).error().code == cddl::rt_code::cut_violation);

    // unclaimed headers surface through the residual table
    auto k4 = serialize_det(
        mk_map({{cuint(1), cuint(1)}, {cuint(99), ctext("x")}, {cnint(0), cuint(6)}}).value());
    auto r4 = parse_key_okp(as_bview(k4));
    REQUIRE(r4.ok());
    auto rest = cddl::table_entries(std::get<cddl::tv_table>(r4.value().residual.v));
    REQUIRE(rest.size() == 1);
    const auto& key99 = std::get<cddl::tv_left>(rest[0].first.v);
    CHECK(std::get<cddl::tv_uint>(key99.v->v).v == 99);
    CHECK(to_hex(std::get<cddl::tv_bytes>(rest[0].second.v).v) == "6178");

    // text curve names ride the right branch
    auto k5 = serialize_det(mk_map({{cuint(1), cuint(1)}, {cnint(0), ctext("Ed25519")}}).value());
    auto r5 = parse_key_okp(as_bview(k5));
    REQUIRE(r5.ok());
    CHECK(std::get<cddl::tv_text>(std::get<cddl::tv_right>(r5.value().crv.v).v->v).v ==
          "Ed25519");

    // non-deterministic key bytes are refused
    std::vector<byte> nonmin{0xA1, 0x18, 0x01, 0x01};
    CHECK(parse_key_okp(as_bview(nonmin)).error().code == cddl::rt_code::not_canonical);
}

#ifdef DETCBOR_HAVE_OPENSSL

namespace {

struct ed_vec {
    const char* sk;
    const char* pk;
    const char* msg;
    const char* sig;
};

// RFC 8032 section 7.1, tests 1-3
const ed_vec ed_vecs[] = {
    {"9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60",
     "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a", "",
     "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065224901555fb8821590a33bacc61e39701c"
     "f9b46bd25bf5f0595bbe24655141438e7a100b"},
    {"4ccd089b28ff96da9db6c346ec114e0f5b8a319f35aba624da8cf6ed4fb8a6fb",
     "3d4017c3e843895a92b70aa74d1b7ebc9c982ccf2ec4968cc0cd55f12af4660c", "72",
     "92a009a9f0d4cab8720e820b5f642540a2b27b5416503f8fb3762223ebdb69da085ac1e43e15996e458f3613d0"
     "f11d8c387b2eaeb4302aeeb00d291612bb0c00"},
    {"c5aa8df43f9f837bedb7442f31dcb7b166d38535076f094b85ce3a2e0b4458f7",
     "fc51cd8e6218a1a38da47ed00230f0580816ed13ba3303ac5deb911548908025", "af82",
     "6291d657deec24024827e69c3abe01a30ce548a284743a445e3680d7db5ac3ac18ff9b538d16f290ae67f76098"
     "4dc6594a7c15e9716ed28dc027beceea1ec40a"},
};

}  // namespace

TEST_CASE("ed25519 backend reproduces the published vectors") {
    auto ed = openssl_ed25519_provider();
    for (const auto& v : ed_vecs) {
        auto sk = from_hex(v.sk), pk = from_hex(v.pk), msg = from_hex(v.msg),
             sig = from_hex(v.sig);
        CHECK(to_hex(as_bview(openssl_ed25519_public_key(as_bview(sk)))) == v.pk);
        auto got = ed.sign(as_bview(sk), as_bview(msg));
        CHECK(to_hex(as_bview(got)) == v.sig);  // Ed25519 signing is deterministic
        CHECK(ed.verify(as_bview(pk), as_bview(msg), as_bview(sig)));
        auto bad = sig;
        bad[10] ^= 0x04;
        CHECK(!ed.verify(as_bview(pk), as_bview(msg), as_bview(bad)));
    }
}

TEST_CASE("ed25519 envelope matches the independently computed bytes") {
    // alg EdDSA (-8) protected, kid "11" unprotected, payload
    // "This is the content.", empty aad, RFC 8032 test-1 keypair; the
    // expected bytes were produced with an unrelated CBOR writer and
    // Ed25519 implementation
    auto ed = openssl_ed25519_provider();
    auto sk = from_hex(ed_vecs[0].sk);
    auto pk = from_hex(ed_vecs[0].pk);
    auto payload = as_bview("This is the content.");

    auto msg = sign1(ed, as_bview(sk), make_headers(-8), payload,
                     make_headers(std::nullopt, std::vector<byte>{0x31, 0x31}));
    REQUIRE(msg.ok());
    CHECK(to_hex(as_bview(msg.value())) ==
          "d28443a10127a10442313154546869732069732074686520636f6e74656e742e58406354488f9f290e36cd"
          "80e23762e664a5cb03e4267c66a8cffaef7c66d89a40bf2cbb8222432a08e5ee410d8b540c6931d26fb6af"
          "673f7e2100655d8bae765c04");

    auto got = verify1(ed, as_bview(pk), as_bview(msg.value()));
    REQUIRE(got.ok());
    CHECK(bytes_equal(got.value(), payload));

    auto wrong = verify1(ed, as_bview(from_hex(ed_vecs[1].pk)), as_bview(msg.value()));
    REQUIRE(!wrong.ok());
    CHECK(wrong.error().code == cose_code::signature_invalid);
}

#endif  // DETCBOR_HAVE_OPENSSL

#pragma once

#include <detcbor/cddl/parse.hpp>
#include <detcbor/cddl/runtime.hpp>

#include <cstdlib>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace detcbor::cose {

using cddl::typed_value;

// --- embedded schemas ---
//
// The schema language has no tag type on purpose, so the outer tag 18 of a
// COSE_Sign1 envelope is handled at the byte level by the functions below;
// everything inside the tag is described by CDDL.
//
// Three amendments relative to the RFC's non-normative CDDL bring it in line
// with the normative prose:
//  - known labels are cut entries, so a known key with a wrong value type
//    rejects the map instead of leaking into the generic table;
//  - the IV (5) and partial IV (6) headers form one optional alternative,
//    making a map that carries both of them invalid;
//  - the extension table is keyed by tstr, keeping it statically apart from
//    the integer labels. A generic int-or-tstr table would have to exclude
//    keys 5 and 6, but after the alternative commits to one of them nothing
//    guarantees the other key's absence, so no sound exclusion exists and
//    the schema checker rejects that spelling as a footprint overlap. With
//    the text-keyed table an int-keyed leftover (the second IV label) is
//    simply never consumed and the map fails with unconsumed entries.
// Sig_structure is specialized to the single-signer "Signature1" context,
// which has no optional middle element; the general form puts a skippable
// bstr directly before a mandatory bstr, which greedy matching cannot
// honor, and the schema checker rejects it (see the regression tests).

inline const char* header_map_cddl() {
    return
        "header_map = { ? (1: int / tstr), ? (2: [ label, * label ]), ? (3: tstr / int),\n"
        "               ? (4: bstr), ? ( (5: bstr) // (6: bstr) ), * (tstr => values) }\n"
        "label = int / tstr\n"
        "values = any\n";
}

// The appendix reading with 5 and 6 independently optional; accepts maps
// the prose forbids. Kept only to document and test the divergence.
inline const char* header_map_lax_cddl() {
    return
        "header_map = { ? (1: int / tstr), ? (2: [ label, * label ]), ? (3: tstr / int),\n"
        "               ? (4: bstr), ? (5: bstr), ? (6: bstr), * (label => values) }\n"
        "label = int / tstr\n"
        "values = any\n";
}

inline std::string cose_sign1_cddl() {
    return std::string("COSE_Sign1 = [ bstr, header_map, bstr / nil, bstr .size 64 ]\n") +
           header_map_cddl();
}

inline const char* sig_structure_cddl() {
    return "Sig_structure = [ \"Signature1\", bstr, bstr, bstr ]\n";
}

inline const char* key_okp_cddl() {
    return
        "COSE_Key_OKP = { 1: 1, -1: int / tstr, ? (-2: bstr), ? (-4: bstr), "
        "* (label => values) }\n"
        "label = int / tstr\n"
        "values = any\n";
}

struct cose_schemas {
    cddl::elab_schema sign1;
    cddl::elab_schema sig_structure;
    cddl::elab_schema header_map;
    cddl::elab_schema key_okp;
};

namespace cose_detail {

inline cddl::elab_schema elab_of(const std::string& text) {
    auto s = cddl::parse_cddl(text);
    if (!s.ok()) std::abort();  // embedded text is a program invariant
    auto e = cddl::elaborate(cddl::inline_root(s.value()));
    if (!e.ok()) std::abort();
    return std::move(e.value());
}

}  // namespace cose_detail

inline const cose_schemas& schemas() {
    static const cose_schemas s{
        cose_detail::elab_of(cose_sign1_cddl()),
        cose_detail::elab_of(sig_structure_cddl()),
        cose_detail::elab_of(header_map_cddl()),
        cose_detail::elab_of(key_okp_cddl()),
    };
    return s;
}

// --- crypto provider ---

struct crypto_provider {
    // 64-byte detached signature; empty means the backend failed
    std::function<std::vector<byte>(bview secret_key, bview message)> sign;
    std::function<bool(bview public_key, bview message, bview signature)> verify;
};

namespace cose_detail {

inline std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return x;
}

inline std::uint64_t absorb(std::uint64_t h, bview b) {
    h = mix(h ^ (0x9e3779b97f4a7c15ULL + b.size()));
    for (byte x : b) h = mix(h ^ x);
    return h;
}

inline void emit64(std::uint64_t w, byte* out) {
    for (int i = 0; i < 8; ++i) out[i] = static_cast<byte>(w >> (8 * i));
}

}  // namespace cose_detail

// Deterministic stand-in backend for hermetic tests: the public key is a
// 32-byte digest of the secret key, a signature is a 64-byte keyed digest
// of (public key, message). Not cryptography; stable across platforms.

inline std::vector<byte> fake_public_key(bview secret_key) {
    std::uint64_t h = cose_detail::absorb(0x706b6579ULL, secret_key);
    std::vector<byte> pk(32);
    for (int i = 0; i < 4; ++i) cose_detail::emit64(cose_detail::mix(h + 1 + i), &pk[8 * i]);
    return pk;
}

inline crypto_provider fake_provider() {
    auto tag = [](bview pk, bview msg) {
        std::uint64_t h = cose_detail::absorb(0x736967ULL, pk);
        h = cose_detail::absorb(h, msg);
        std::vector<byte> sig(64);
        for (int i = 0; i < 8; ++i) cose_detail::emit64(cose_detail::mix(h + 1 + i), &sig[8 * i]);
        return sig;
    };
    crypto_provider cp;
    cp.sign = [tag](bview sk, bview msg) {
        auto pk = fake_public_key(sk);
        return tag(as_bview(pk), msg);
    };
    cp.verify = [tag](bview pk, bview msg, bview sig) {
        auto want = tag(pk, msg);
        return sig.size() == want.size() && bytes_equal(sig, as_bview(want));
    };
    return cp;
}

// --- errors ---

enum class cose_code : std::uint8_t {
    parse_failure,
    non_deterministic_encoding,
    signature_invalid,
    serialize_failure,
};

inline const char* to_string(cose_code c) {
    switch (c) {
        case cose_code::parse_failure: return "ParseFailure";
        case cose_code::non_deterministic_encoding: return "NonDeterministicEncoding";
        case cose_code::signature_invalid: return "SignatureInvalid";
        case cose_code::serialize_failure: return "SerializeFailure";
    }
    return "?";
}

struct cose_error {
    cose_code code;
    std::string detail;
};

// --- typed header construction ---

// Builds a header_map value with the common fields; extra headers can be
// supplied through the trailing table.
inline typed_value make_headers(std::optional<std::int64_t> alg = std::nullopt,
                                std::optional<std::vector<byte>> kid = std::nullopt,
                                std::vector<std::pair<typed_value, typed_value>> rest = {}) {
    using namespace cddl;
    typed_value algv = vnone();
    if (alg) {
        typed_value n = *alg >= 0 ? vuint(static_cast<std::uint64_t>(*alg))
                                  : vnint(static_cast<std::uint64_t>(-(*alg + 1)));
        algv = vsome(vpair(vunit(), vleft(std::move(n))));
    }
    typed_value kidv = kid ? vsome(vpair(vunit(), vbytes(std::move(*kid)))) : vnone();
    return vpair(std::move(algv),
                 vpair(vnone(),  // criticality
                       vpair(vnone(),  // content type
                             vpair(std::move(kidv),
                                   vpair(vnone(),  // IV / partial IV
                                         vtable(std::move(rest)))))));
}

// --- to-be-signed bytes (Sig_structure serialization) ---

inline result<std::vector<byte>, cose_error> to_be_signed(bview protected_bytes, bview payload,
                                                          bview aad) {
    using namespace cddl;
    if (!protected_bytes.empty()) {
        auto d = cbor::det_check(protected_bytes);
        if (!d.ok() || d.value() != protected_bytes.size())
            return cose_error{cose_code::parse_failure,
                              "protected headers must be empty or one canonical item"};
    }
    typed_value v = vpair(vunit(), vpair(typed_value{tv_bytes{protected_bytes, nullptr}},
                                         vpair(typed_value{tv_bytes{aad, nullptr}},
                                               typed_value{tv_bytes{payload, nullptr}})));
    auto b = serialize(schemas().sig_structure, v);
    if (!b.ok()) return cose_error{cose_code::serialize_failure, to_string(b.error().code)};
    return std::move(b.value());
}

// --- signing ---

namespace cose_detail {

inline result<size_t, cose_error> sign1_impl(const crypto_provider& cp, bview secret_key,
                                             const typed_value& protected_headers, bview payload,
                                             bool attached, std::span<byte> out,
                                             const std::optional<typed_value>& unprotected,
                                             bview aad) {
    using namespace cddl;
    auto prot = serialize(schemas().header_map, protected_headers);
    if (!prot.ok())
        return cose_error{cose_code::serialize_failure,
                          std::string("protected headers: ") + to_string(prot.error().code)};
    auto tbs = to_be_signed(as_bview(prot.value()), payload, aad);
    if (!tbs.ok()) return tbs.error();
    auto sig = cp.sign(secret_key, as_bview(tbs.value()));
    if (sig.size() != 64)
        return cose_error{cose_code::signature_invalid,
                          "backend did not produce a 64-byte signature"};
    typed_value pay =
        attached ? vleft(typed_value{tv_bytes{payload, nullptr}}) : vright(vunit());
    typed_value env = vpair(typed_value{tv_bytes{as_bview(prot.value()), nullptr}},
                            vpair(unprotected ? *unprotected : make_headers(),
                                  vpair(std::move(pay),
                                        typed_value{tv_bytes{as_bview(sig), nullptr}})));
    size_t h = cbor::encode_header(cbor::raw_header{cbor::mt_tag, cbor::min_uint(18)}, out);
    if (h == 0) return size_t{0};
    auto n = serialize(schemas().sign1, env, out.subspan(h));
    if (!n.ok()) return cose_error{cose_code::serialize_failure, to_string(n.error().code)};
    if (n.value() == 0) return size_t{0};
    return h + n.value();
}

inline result<std::vector<byte>, cose_error> sign1_grow(
    const crypto_provider& cp, bview secret_key, const typed_value& protected_headers,
    bview payload, bool attached, const std::optional<typed_value>& unprotected, bview aad) {
    std::vector<byte> buf(256);
    for (;;) {
        auto r = sign1_impl(cp, secret_key, protected_headers, payload, attached,
                            std::span<byte>(buf), unprotected, aad);
        if (!r.ok()) return r.error();
        if (r.value() != 0) {
            buf.resize(r.value());
            return std::move(buf);
        }
        buf.resize(buf.size() * 2);
    }
}

}  // namespace cose_detail

// Serializes a tagged envelope whose signature covers the Sig_structure of
// (protected, aad, payload). Returns 0 when the output region is too small.
inline result<size_t, cose_error> sign1(const crypto_provider& cp, bview secret_key,
                                        const typed_value& protected_headers, bview payload,
                                        std::span<byte> out,
                                        const std::optional<typed_value>& unprotected = std::nullopt,
                                        bview aad = {}) {
    return cose_detail::sign1_impl(cp, secret_key, protected_headers, payload, true, out,
                                   unprotected, aad);
}

inline result<std::vector<byte>, cose_error> sign1(
    const crypto_provider& cp, bview secret_key, const typed_value& protected_headers,
    bview payload, const std::optional<typed_value>& unprotected = std::nullopt, bview aad = {}) {
    return cose_detail::sign1_grow(cp, secret_key, protected_headers, payload, true, unprotected,
                                   aad);
}

// Detached form: the envelope carries nil in the payload slot, the
// signature still covers the real payload.
inline result<std::vector<byte>, cose_error> sign1_detached(
    const crypto_provider& cp, bview secret_key, const typed_value& protected_headers,
    bview payload, const std::optional<typed_value>& unprotected = std::nullopt, bview aad = {}) {
    return cose_detail::sign1_grow(cp, secret_key, protected_headers, payload, false, unprotected,
                                   aad);
}

// --- verification ---

struct sign1_view {
    bview protected_bytes;
    typed_value unprotected;
    bview payload;  // attached payload; empty and meaningless when detached
    bool attached = true;
    bview signature;
};

namespace cose_detail {

inline const typed_value& pa(const typed_value& p) { return *std::get<cddl::tv_pair>(p.v).a; }
inline const typed_value& pb(const typed_value& p) { return *std::get<cddl::tv_pair>(p.v).b; }

inline result<sign1_view, cose_error> open_envelope(bview msg) {
    using namespace cddl;
    auto d = cbor::det_check(msg);
    if (!d.ok()) {
        if (d.error().code == cbor::det_code::invalid)
            return cose_error{cose_code::parse_failure, "message is not well-formed"};
        return cose_error{cose_code::non_deterministic_encoding,
                          "message is not deterministically encoded"};
    }
    if (d.value() != msg.size())
        return cose_error{cose_code::parse_failure, "trailing bytes after the envelope"};
    auto sv = cbor::read_shallow(msg);
    const auto* tg = std::get_if<cbor::sv_tagged>(&sv);
    if (!tg || tg->tag.value != 18)
        return cose_error{cose_code::parse_failure, "expected tag 18"};
    auto p = parse(schemas().sign1, tg->payload);
    if (!p.ok())
        return cose_error{cose_code::parse_failure,
                          std::string("envelope: ") + to_string(p.error().code) +
                              (p.error().path.empty() ? "" : " at " + p.error().path)};
    const typed_value& v = p.value().value;
    sign1_view out;
    out.protected_bytes = std::get<tv_bytes>(pa(v).v).v;
    out.unprotected = pa(pb(v));
    const typed_value& pay = pa(pb(pb(v)));
    if (const auto* att = std::get_if<tv_left>(&pay.v)) {
        out.payload = std::get<tv_bytes>(att->v->v).v;
        out.attached = true;
    } else {
        out.attached = false;
    }
    out.signature = std::get<tv_bytes>(pb(pb(pb(v))).v).v;
    // the protected field must itself hold a canonical header map, or nothing
    if (!out.protected_bytes.empty()) {
        auto hv = validate(schemas().header_map, out.protected_bytes);
        if (!hv.ok() || hv.value() != out.protected_bytes.size())
            return cose_error{cose_code::parse_failure,
                              "protected bytes are not a canonical header map"};
    }
    return out;
}

inline std::optional<cose_error> check_sig(const crypto_provider& cp, bview public_key,
                                           bview protected_bytes, bview payload, bview aad,
                                           bview sig) {
    auto tbs = to_be_signed(protected_bytes, payload, aad);
    if (!tbs.ok()) return tbs.error();
    if (sig.size() != 64 || !cp.verify(public_key, as_bview(tbs.value()), sig))
        return cose_error{cose_code::signature_invalid, "signature check failed"};
    return std::nullopt;
}

}  // namespace cose_detail

// Returns a view of the attached payload iff the envelope is canonical,
// matches the schema, and the signature verifies over its Sig_structure.
inline result<bview, cose_error> verify1(const crypto_provider& cp, bview public_key, bview msg,
                                         bview aad = {}) {
    auto env = cose_detail::open_envelope(msg);
    if (!env.ok()) return env.error();
    if (!env.value().attached)
        return cose_error{cose_code::parse_failure, "payload is detached; supply it explicitly"};
    if (auto e = cose_detail::check_sig(cp, public_key, env.value().protected_bytes,
                                        env.value().payload, aad, env.value().signature))
        return *e;
    return env.value().payload;
}

inline std::optional<cose_error> verify1_detached(const crypto_provider& cp, bview public_key,
                                                  bview msg, bview payload, bview aad = {}) {
    auto env = cose_detail::open_envelope(msg);
    if (!env.ok()) return env.error();
    if (env.value().attached)
        return cose_error{cose_code::parse_failure, "payload is attached, not detached"};
    return cose_detail::check_sig(cp, public_key, env.value().protected_bytes, payload, aad,
                                  env.value().signature);
}

// --- OKP key records ---

struct okp_key {
    typed_value crv;                  // Left(int) or Right(text) per the schema
    std::optional<bview> public_key;  // label -2
    std::optional<bview> private_key;  // label -4
    typed_value residual;             // table over the unclaimed headers
};

// The 1:1 entry is checked by validation but carries no data, so it does
// not surface in the record. Views point into the input.
inline result<okp_key, cddl::rt_error> parse_key_okp(bview input) {
    using namespace cddl;
    auto p = parse(schemas().key_okp, input);
    if (!p.ok()) return p.error();
    if (!p.value().rest.empty())
        return rt_error{rt_code::schema_mismatch, "trailing bytes after the key"};
    const typed_value& v = p.value().value;
    okp_key k;
    k.crv = cose_detail::pb(cose_detail::pa(cose_detail::pb(v)));
    const typed_value& pub = cose_detail::pa(cose_detail::pb(cose_detail::pb(v)));
    if (const auto* s = std::get_if<tv_some>(&pub.v))
        k.public_key = std::get<tv_bytes>(cose_detail::pb(*s->v).v).v;
    const typed_value& priv =
        cose_detail::pa(cose_detail::pb(cose_detail::pb(cose_detail::pb(v))));
    if (const auto* s = std::get_if<tv_some>(&priv.v))
        k.private_key = std::get<tv_bytes>(cose_detail::pb(*s->v).v).v;
    k.residual = cose_detail::pb(cose_detail::pb(cose_detail::pb(cose_detail::pb(v))));
    return k;
}

}  // namespace detcbor::cose

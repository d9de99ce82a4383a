#pragma once

#include <algorithm>

#include <detcbor/raw.hpp>

namespace detcbor::cbor {

// Width-free item model: the deterministic encoding of a canon_item is unique,
// so equality of canon_items is equality of encodings.
struct canon_item;

struct ci_int {
    bool negative = false;  // value is -1 - arg when set
    std::uint64_t arg = 0;
    bool operator==(const ci_int&) const = default;
};
struct ci_simple {
    byte v = 0;  // 0..23 or 32..255
    bool operator==(const ci_simple&) const = default;
};
struct ci_bytes {
    std::vector<byte> v;
    bool operator==(const ci_bytes&) const = default;
};
struct ci_text {
    std::string v;  // valid UTF-8
    bool operator==(const ci_text&) const = default;
};
struct ci_array {
    std::vector<canon_item> items;
    bool operator==(const ci_array&) const = default;
};
struct ci_map {
    // strictly increasing under compare_det on keys; build via mk_map
    std::vector<std::pair<canon_item, canon_item>> entries;
    bool operator==(const ci_map&) const = default;
};
struct ci_tagged {
    std::uint64_t tag = 0;
    std::vector<canon_item> payload;  // exactly one element
    bool operator==(const ci_tagged&) const = default;
};

struct canon_item {
    std::variant<ci_int, ci_simple, ci_bytes, ci_text, ci_array, ci_map, ci_tagged> v;
    bool operator==(const canon_item&) const = default;
};

inline canon_item cuint(std::uint64_t v) { return {ci_int{false, v}}; }
inline canon_item cnint(std::uint64_t arg) { return {ci_int{true, arg}}; }
inline canon_item csimple(byte v) { return {ci_simple{v}}; }
inline canon_item cbytes(std::vector<byte> v) { return {ci_bytes{std::move(v)}}; }
inline canon_item ctext(std::string v) { return {ci_text{std::move(v)}}; }
inline canon_item carray(std::vector<canon_item> items) { return {ci_array{std::move(items)}}; }
inline canon_item ctagged(std::uint64_t tag, canon_item payload) {
    std::vector<canon_item> p;
    p.push_back(std::move(payload));
    return {ci_tagged{tag, std::move(p)}};
}

enum class ordering : int { less = -1, equal = 0, greater = 1 };

inline ordering ord_of(int c) { return c < 0 ? ordering::less : c > 0 ? ordering::greater : ordering::equal; }

// Total order on canon_items agreeing with lexicographic byte comparison of
// their encodings; implemented structurally, never by serializing. Kinds order
// by CBOR major type; a header with a smaller argument always compares below
// one with a larger (both minimal-width), which gives the scalar and
// length/count-first cases below.
inline ordering compare_det(const canon_item& x, const canon_item& y);

namespace detail {
inline int kind_rank(const canon_item& x) {
    struct v {
        int operator()(const ci_int& i) const { return i.negative ? 1 : 0; }
        int operator()(const ci_bytes&) const { return 2; }
        int operator()(const ci_text&) const { return 3; }
        int operator()(const ci_array&) const { return 4; }
        int operator()(const ci_map&) const { return 5; }
        int operator()(const ci_tagged&) const { return 6; }
        int operator()(const ci_simple&) const { return 7; }
    };
    return std::visit(v{}, x.v);
}

inline ordering cmp_u64(std::uint64_t a, std::uint64_t b) {
    return a < b ? ordering::less : a > b ? ordering::greater : ordering::equal;
}
}  // namespace detail

inline ordering compare_det(const canon_item& x, const canon_item& y) {
    int rx = detail::kind_rank(x), ry = detail::kind_rank(y);
    if (rx != ry) return rx < ry ? ordering::less : ordering::greater;
    switch (rx) {
        case 0:
        case 1:
            // same sign: argument order is byte order (so -1 < -2 < ...)
            return detail::cmp_u64(std::get<ci_int>(x.v).arg, std::get<ci_int>(y.v).arg);
        case 2: {
            const auto &a = std::get<ci_bytes>(x.v).v, &b = std::get<ci_bytes>(y.v).v;
            if (auto c = detail::cmp_u64(a.size(), b.size()); c != ordering::equal) return c;
            return ord_of(compare_bytes(a, b));
        }
        case 3: {
            const auto &a = std::get<ci_text>(x.v).v, &b = std::get<ci_text>(y.v).v;
            if (auto c = detail::cmp_u64(a.size(), b.size()); c != ordering::equal) return c;
            return ord_of(compare_bytes(as_bview(a), as_bview(b)));
        }
        case 4: {
            const auto &a = std::get<ci_array>(x.v).items, &b = std::get<ci_array>(y.v).items;
            if (auto c = detail::cmp_u64(a.size(), b.size()); c != ordering::equal) return c;
            for (size_t i = 0; i < a.size(); ++i)
                if (auto c = compare_det(a[i], b[i]); c != ordering::equal) return c;
            return ordering::equal;
        }
        case 5: {
            const auto &a = std::get<ci_map>(x.v).entries, &b = std::get<ci_map>(y.v).entries;
            if (auto c = detail::cmp_u64(a.size(), b.size()); c != ordering::equal) return c;
            for (size_t i = 0; i < a.size(); ++i) {
                if (auto c = compare_det(a[i].first, b[i].first); c != ordering::equal) return c;
                if (auto c = compare_det(a[i].second, b[i].second); c != ordering::equal) return c;
            }
            return ordering::equal;
        }
        case 6: {
            const auto &a = std::get<ci_tagged>(x.v), &b = std::get<ci_tagged>(y.v);
            if (auto c = detail::cmp_u64(a.tag, b.tag); c != ordering::equal) return c;
            return compare_det(a.payload[0], b.payload[0]);
        }
        default:
            return detail::cmp_u64(std::get<ci_simple>(x.v).v, std::get<ci_simple>(y.v).v);
    }
}

// Defensive map construction: sorts caller-owned entries in place by key,
// fails on a duplicate instead of silently dropping or misordering.
enum class map_error : std::uint8_t { duplicate_key };

inline result<canon_item, map_error> mk_map(std::vector<std::pair<canon_item, canon_item>> entries) {
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        return compare_det(a.first, b.first) == ordering::less;
    });
    for (size_t i = 1; i < entries.size(); ++i)
        if (compare_det(entries[i - 1].first, entries[i].first) == ordering::equal)
            return map_error::duplicate_key;
    return canon_item{ci_map{std::move(entries)}};
}

// --- specification oracles over raw items (recursion on size; test use) ---

inline bool valid(const raw_item& x);
inline bool equiv(const raw_item& x, const raw_item& y);

inline bool valid(const raw_item& x) {
    if (auto* a = std::get_if<ri_array>(&x.v)) {
        for (const auto& c : a->items)
            if (!valid(c)) return false;
        return true;
    }
    if (auto* m = std::get_if<ri_map>(&x.v)) {
        for (const auto& e : m->entries)
            if (!valid(e.first) || !valid(e.second)) return false;
        for (size_t i = 0; i < m->entries.size(); ++i)
            for (size_t j = i + 1; j < m->entries.size(); ++j)
                if (equiv(m->entries[i].first, m->entries[j].first)) return false;
        return true;
    }
    if (auto* t = std::get_if<ri_tagged>(&x.v)) return valid(t->payload[0]);
    return true;
}

inline bool equiv(const raw_item& x, const raw_item& y) {
    if (x == y) return true;
    if (x.v.index() != y.v.index()) return false;
    if (!valid(x) || !valid(y)) return false;
    struct v {
        const raw_item& y;
        bool operator()(const ri_int& a) const {
            const auto& b = std::get<ri_int>(y.v);
            return a.negative == b.negative && a.v.value == b.v.value;
        }
        bool operator()(const ri_simple& a) const { return a == std::get<ri_simple>(y.v); }
        bool operator()(const ri_bytes& a) const { return a.payload == std::get<ri_bytes>(y.v).payload; }
        bool operator()(const ri_text& a) const { return a.payload == std::get<ri_text>(y.v).payload; }
        bool operator()(const ri_array& a) const {
            const auto& b = std::get<ri_array>(y.v);
            if (a.items.size() != b.items.size()) return false;
            for (size_t i = 0; i < a.items.size(); ++i)
                if (!equiv(a.items[i], b.items[i])) return false;
            return true;
        }
        bool operator()(const ri_map& a) const {
            const auto& b = std::get<ri_map>(y.v);
            if (a.entries.size() != b.entries.size()) return false;
            // both maps are valid here: keys pairwise non-equivalent, so a
            // one-directional match of equal cardinality is a bijection
            for (const auto& ea : a.entries) {
                bool found = false;
                for (const auto& eb : b.entries)
                    if (equiv(ea.first, eb.first)) {
                        if (!equiv(ea.second, eb.second)) return false;
                        found = true;
                        break;
                    }
                if (!found) return false;
            }
            return true;
        }
        bool operator()(const ri_tagged& a) const {
            const auto& b = std::get<ri_tagged>(y.v);
            return a.tag.value == b.tag.value && equiv(a.payload[0], b.payload[0]);
        }
    };
    return std::visit(v{y}, x.v);
}

// --- byte-level deterministic-encoding check ---

enum class det_code : std::uint8_t { invalid, non_minimal_int, unsorted_or_duplicate_keys };

struct det_error {
    det_code code;
    size_t pos = 0;
    verror raw{};  // underlying detail when code == invalid

    bool operator==(const det_error& o) const { return code == o.code && pos == o.pos; }
};

// Two constant-stack passes over the bytes: structural validation with the
// minimal-width rule, then a flat header walk where each map's adjacent
// serialized keys are compared as byte ranges (jumping over values). The
// rescan costs time on nested maps but never stack.
inline result<size_t, det_error> det_check(bview input) {
    auto v = validate_recursive(cbor_format{true}, input);
    if (!v.ok()) {
        const verror& e = v.error();
        if (e.reason == raw_reason::non_minimal_int)
            return det_error{det_code::non_minimal_int, e.pos, e};
        return det_error{det_code::invalid, e.pos, e};
    }
    size_t end = v.value();
    size_t pos = 0;
    while (pos < end) {
        auto ph = parse_header(input.subspan(pos)).value();
        const raw_header& h = ph.h;
        pos += ph.consumed;
        if (h.major_type == mt_bstr || h.major_type == mt_tstr) {
            pos += static_cast<size_t>(h.arg.value);
        } else if (h.major_type == mt_map && h.arg.value >= 2) {
            bview rest = input.subspan(pos);
            size_t nk = jump(rest);
            bview prev = rest.first(nk);
            rest = rest.subspan(nk);
            rest = rest.subspan(jump(rest));
            for (std::uint64_t i = 1; i < h.arg.value; ++i) {
                nk = jump(rest);
                bview key = rest.first(nk);
                rest = rest.subspan(nk);
                if (compare_bytes(prev, key) >= 0)
                    return det_error{det_code::unsorted_or_duplicate_keys,
                                     static_cast<size_t>(key.data() - input.data())};
                prev = key;
                rest = rest.subspan(jump(rest));
            }
        }
    }
    return end;
}

inline result<std::pair<shallow_view, size_t>, det_error> parse_det(bview input) {
    auto c = det_check(input);
    if (!c.ok()) return c.error();
    return std::make_pair(read_shallow(input.first(c.value())), c.value());
}

// --- canonical serialization ---

namespace detail {
inline raw_header canon_header(const canon_item& x) {
    struct v {
        raw_header operator()(const ci_int& i) const {
            return {i.negative ? mt_nint : mt_uint, min_uint(i.arg)};
        }
        raw_header operator()(const ci_simple& s) const {
            return {mt_simple, s.v <= 23 ? raw_uint{s.v, 0} : raw_uint{s.v, 1}};
        }
        raw_header operator()(const ci_bytes& b) const { return {mt_bstr, min_uint(b.v.size())}; }
        raw_header operator()(const ci_text& t) const { return {mt_tstr, min_uint(t.v.size())}; }
        raw_header operator()(const ci_array& a) const { return {mt_array, min_uint(a.items.size())}; }
        raw_header operator()(const ci_map& m) const { return {mt_map, min_uint(m.entries.size())}; }
        raw_header operator()(const ci_tagged& t) const { return {mt_tag, min_uint(t.tag)}; }
    };
    return std::visit(v{}, x.v);
}

inline size_t serialize_det_rec(const canon_item& x, std::span<byte> out) {
    size_t n = encode_header(canon_header(x), out);
    if (n == 0) return 0;
    if (auto* b = std::get_if<ci_bytes>(&x.v)) {
        if (out.size() - n < b->v.size()) return 0;
        std::memcpy(out.data() + n, b->v.data(), b->v.size());
        return n + b->v.size();
    }
    if (auto* t = std::get_if<ci_text>(&x.v)) {
        if (out.size() - n < t->v.size()) return 0;
        std::memcpy(out.data() + n, t->v.data(), t->v.size());
        return n + t->v.size();
    }
    if (auto* a = std::get_if<ci_array>(&x.v)) {
        for (const auto& c : a->items) {
            size_t m = serialize_det_rec(c, out.subspan(n));
            if (m == 0) return 0;
            n += m;
        }
        return n;
    }
    if (auto* m = std::get_if<ci_map>(&x.v)) {
        for (const auto& e : m->entries) {
            size_t mk = serialize_det_rec(e.first, out.subspan(n));
            if (mk == 0) return 0;
            n += mk;
            size_t mv = serialize_det_rec(e.second, out.subspan(n));
            if (mv == 0) return 0;
            n += mv;
        }
        return n;
    }
    if (auto* tg = std::get_if<ci_tagged>(&x.v)) {
        size_t m = serialize_det_rec(tg->payload[0], out.subspan(n));
        if (m == 0) return 0;
        return n + m;
    }
    return n;
}
}  // namespace detail

// Returns bytes written, or 0 if out is too small.
inline size_t serialize_det(const canon_item& x, std::span<byte> out) {
    return detail::serialize_det_rec(x, out);
}

inline std::vector<byte> serialize_det(const canon_item& x) {
    std::vector<byte> out(64);
    for (;;) {
        size_t n = serialize_det(x, out);
        if (n != 0) {
            out.resize(n);
            return out;
        }
        out.resize(out.size() * 2);
    }
}

// --- canonicalization of raw items ---

enum class canon_error : std::uint8_t { depth_exceeded, duplicate_key };

inline result<canon_item, canon_error> canonicalize(const raw_item& x, size_t depth_limit = 64) {
    if (depth_limit == 0) return canon_error::depth_exceeded;
    struct v {
        size_t d;
        result<canon_item, canon_error> operator()(const ri_int& i) const {
            return canon_item{ci_int{i.negative, i.v.value}};
        }
        result<canon_item, canon_error> operator()(const ri_simple& s) const {
            return canon_item{ci_simple{s.v}};
        }
        result<canon_item, canon_error> operator()(const ri_bytes& b) const {
            return canon_item{ci_bytes{b.payload}};
        }
        result<canon_item, canon_error> operator()(const ri_text& t) const {
            return canon_item{ci_text{t.payload}};
        }
        result<canon_item, canon_error> operator()(const ri_array& a) const {
            ci_array out;
            out.items.reserve(a.items.size());
            for (const auto& c : a.items) {
                auto r = canonicalize(c, d - 1);
                if (!r.ok()) return r.error();
                out.items.push_back(std::move(r.value()));
            }
            return canon_item{std::move(out)};
        }
        result<canon_item, canon_error> operator()(const ri_map& m) const {
            std::vector<std::pair<canon_item, canon_item>> entries;
            entries.reserve(m.entries.size());
            for (const auto& e : m.entries) {
                auto k = canonicalize(e.first, d - 1);
                if (!k.ok()) return k.error();
                auto val = canonicalize(e.second, d - 1);
                if (!val.ok()) return val.error();
                entries.emplace_back(std::move(k.value()), std::move(val.value()));
            }
            auto mm = mk_map(std::move(entries));
            if (!mm.ok()) return canon_error::duplicate_key;
            return std::move(mm.value());
        }
        result<canon_item, canon_error> operator()(const ri_tagged& t) const {
            auto p = canonicalize(t.payload[0], d - 1);
            if (!p.ok()) return p.error();
            return ctagged(t.tag.value, std::move(p.value()));
        }
    };
    return std::visit(v{depth_limit}, x.v);
}

// Tree parse of det-checked bytes. Maps keep byte order (already sorted).
inline result<std::pair<canon_item, size_t>, det_error> parse_canon(bview input,
                                                                    size_t depth_limit = 64) {
    auto c = det_check(input);
    if (!c.ok()) return c.error();
    auto raw = parse_raw(input.first(c.value()), depth_limit);
    if (!raw.ok())
        return det_error{det_code::invalid, 0};  // depth limit; structure already checked
    struct conv {
        canon_item operator()(const raw_item& x) const {
            struct v {
                const conv& c;
                canon_item operator()(const ri_int& i) const { return {ci_int{i.negative, i.v.value}}; }
                canon_item operator()(const ri_simple& s) const { return {ci_simple{s.v}}; }
                canon_item operator()(const ri_bytes& b) const { return {ci_bytes{b.payload}}; }
                canon_item operator()(const ri_text& t) const { return {ci_text{t.payload}}; }
                canon_item operator()(const ri_array& a) const {
                    ci_array out;
                    out.items.reserve(a.items.size());
                    for (const auto& i : a.items) out.items.push_back(c(i));
                    return {std::move(out)};
                }
                canon_item operator()(const ri_map& m) const {
                    ci_map out;
                    out.entries.reserve(m.entries.size());
                    for (const auto& e : m.entries) out.entries.emplace_back(c(e.first), c(e.second));
                    return {std::move(out)};
                }
                canon_item operator()(const ri_tagged& t) const {
                    std::vector<canon_item> p;
                    p.push_back(c(t.payload[0]));
                    return {ci_tagged{t.tag.value, std::move(p)}};
                }
            };
            return std::visit(v{*this}, x.v);
        }
    };
    return std::make_pair(conv{}(raw.value().first), c.value());
}

}  // namespace detcbor::cbor

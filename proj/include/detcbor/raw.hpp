#pragma once

#include <cassert>
#include <optional>
#include <utility>

#include <detcbor/bytes.hpp>
#include <detcbor/utf8.hpp>

namespace detcbor::cbor {

inline constexpr byte mt_uint = 0;
inline constexpr byte mt_nint = 1;
inline constexpr byte mt_bstr = 2;
inline constexpr byte mt_tstr = 3;
inline constexpr byte mt_array = 4;
inline constexpr byte mt_map = 5;
inline constexpr byte mt_tag = 6;
inline constexpr byte mt_simple = 7;

// A 64-bit argument plus its encoded width. size_class 0 packs the value into
// the additional-info bits (value <= 23); classes 1..4 use 1, 2, 4, 8 trailing
// big-endian bytes. Raw items may carry any class the value fits in.
struct raw_uint {
    std::uint64_t value = 0;
    std::uint8_t size_class = 0;

    bool operator==(const raw_uint&) const = default;
};

constexpr size_t trailing_width(std::uint8_t size_class) {
    return size_class == 0 ? 0 : size_t{1} << (size_class - 1);
}

constexpr bool arg_fits(std::uint64_t value, std::uint8_t size_class) {
    switch (size_class) {
        case 0: return value <= 23;
        case 1: return value <= 0xFF;
        case 2: return value <= 0xFFFF;
        case 3: return value <= 0xFFFFFFFF;
        default: return true;
    }
}

constexpr std::uint8_t min_size_class(std::uint64_t value) {
    if (value <= 23) return 0;
    if (value <= 0xFF) return 1;
    if (value <= 0xFFFF) return 2;
    if (value <= 0xFFFFFFFF) return 3;
    return 4;
}

constexpr raw_uint min_uint(std::uint64_t value) { return raw_uint{value, min_size_class(value)}; }

// For major type 7 the argument is the simple value itself: 0..23 inline
// (size_class 0) or 32..255 in one trailing byte (size_class 1).
struct raw_header {
    std::uint8_t major_type = 0;
    raw_uint arg;

    bool operator==(const raw_header&) const = default;
};

enum class raw_reason : std::uint8_t {
    none,
    truncated_header,     // declared trailing bytes absent
    reserved_info,        // additional info 28..30, or float forms of major 7
    indefinite_length,    // additional info 31
    invalid_simple,       // two-byte simple value < 32
    payload_truncated,    // string payload extends past the input
    bad_utf8,
    non_minimal_int,      // det layer: argument has a smaller size class
};

// Header size for a size_class, excluding any string payload.
constexpr size_t header_size(std::uint8_t size_class) { return 1 + trailing_width(size_class); }

inline size_t encode_header(const raw_header& h, std::span<byte> out) {
    size_t n = header_size(h.arg.size_class);
    if (out.size() < n) return 0;
    std::uint8_t info = h.arg.size_class == 0 ? static_cast<std::uint8_t>(h.arg.value)
                                              : static_cast<std::uint8_t>(23 + h.arg.size_class);
    out[0] = static_cast<byte>(h.major_type << 5 | info);
    std::uint64_t v = h.arg.value;
    for (size_t i = n - 1; i >= 1; --i) {
        out[i] = static_cast<byte>(v & 0xFF);
        v >>= 8;
    }
    return n;
}

struct parsed_header {
    raw_header h;
    size_t consumed = 0;
};

inline result<parsed_header, raw_reason> parse_header(bview in) {
    if (in.empty()) return raw_reason::truncated_header;
    std::uint8_t major = in[0] >> 5;
    std::uint8_t info = in[0] & 0x1F;
    raw_uint arg;
    if (info <= 23) {
        arg = raw_uint{info, 0};
    } else if (info <= 27) {
        arg.size_class = static_cast<std::uint8_t>(info - 23);
        size_t w = trailing_width(arg.size_class);
        if (in.size() < 1 + w) return raw_reason::truncated_header;
        std::uint64_t v = 0;
        for (size_t i = 0; i < w; ++i) v = v << 8 | in[1 + i];
        arg.value = v;
    } else if (info == 31) {
        return raw_reason::indefinite_length;
    } else {
        return raw_reason::reserved_info;
    }
    if (major == mt_simple) {
        if (arg.size_class >= 2) return raw_reason::reserved_info;
        if (arg.size_class == 1 && arg.value < 32) return raw_reason::invalid_simple;
    }
    return parsed_header{raw_header{major, arg}, header_size(arg.size_class)};
}

// Expected child items of a header: Array n -> n, Map n -> 2n, Tag -> 1.
// The bool flags 2n overflowing 64 bits.
inline std::pair<std::uint64_t, bool> count_payload(const raw_header& h) {
    switch (h.major_type) {
        case mt_array: return {h.arg.value, false};
        case mt_map:
            if (h.arg.value > ~std::uint64_t{0} / 2) return {0, true};
            return {h.arg.value * 2, false};
        case mt_tag: return {1, false};
        default: return {0, false};
    }
}

enum class vkind : std::uint8_t { invalid, truncated, count_overflow };

struct verror {
    vkind kind;
    raw_reason reason = raw_reason::none;
    size_t pos = 0;
};

// The CBOR instance of the generic format descriptor. A string item's payload
// counts as part of its header here, so strings have no child items. With
// check_min_width set, every argument must use its minimal size class (the
// deterministic-encoding rule).
struct cbor_format {
    bool check_min_width = false;

    struct header_result {
        size_t consumed = 0;  // 0 = failure, see reason
        raw_reason reason = raw_reason::none;
        raw_header h;
    };

    header_result validate_header(bview in) const {
        auto r = parse_header(in);
        if (!r.ok()) return {0, r.error(), {}};
        const raw_header& h = r.value().h;
        size_t consumed = r.value().consumed;
        if (check_min_width && h.major_type != mt_simple &&
            h.arg.size_class != min_size_class(h.arg.value)) {
            return {0, raw_reason::non_minimal_int, {}};
        }
        if (h.major_type == mt_bstr || h.major_type == mt_tstr) {
            if (h.arg.value > in.size() - consumed) return {0, raw_reason::payload_truncated, {}};
            bview payload = in.subspan(consumed, static_cast<size_t>(h.arg.value));
            if (h.major_type == mt_tstr && !utf8_valid(payload)) return {0, raw_reason::bad_utf8, {}};
            consumed += static_cast<size_t>(h.arg.value);
        }
        return {consumed, raw_reason::none, h};
    }

    static std::pair<std::uint64_t, bool> payload_count(const header_result& hr) {
        return count_payload(hr.h);
    }
};

// Constant-stack validator over any recursive format: a single loop tracking
// how many items remain to be read. Guard order matters: after each header,
// every remaining item needs at least one byte, and a declared child count
// may not exceed the bytes left after reserving one per pending item.
template <class F>
result<size_t, verror> validate_recursive(const F& f, bview input) {
    std::uint64_t expected = 1;
    size_t pos = 0;
    const size_t len = input.size();
    while (expected > 0) {
        expected--;
        auto hr = f.validate_header(input.subspan(pos));
        if (hr.consumed == 0) return verror{vkind::invalid, hr.reason, pos};
        pos += hr.consumed;
        if (expected > len - pos) return verror{vkind::truncated, raw_reason::none, pos};
        auto [cnt, overflow] = F::payload_count(hr);
        if (overflow) return verror{vkind::count_overflow, raw_reason::none, pos};
        if (cnt > len - pos - expected) return verror{vkind::count_overflow, raw_reason::none, pos};
        expected += cnt;
    }
    return pos;
}

inline result<size_t, verror> validate(bview input) {
    return validate_recursive(cbor_format{false}, input);
}

// Size of one valid item at the start of input. Pre: item is valid.
inline size_t jump(bview input) {
    std::uint64_t expected = 1;
    size_t pos = 0;
    while (expected > 0) {
        expected--;
        byte b0 = input[pos];
        std::uint8_t major = b0 >> 5;
        std::uint8_t info = b0 & 0x1F;
        std::uint64_t v = info;
        size_t n = 1;
        if (info > 23) {
            size_t w = size_t{1} << (info - 24);
            v = 0;
            for (size_t i = 0; i < w; ++i) v = v << 8 | input[pos + 1 + i];
            n += w;
        }
        switch (major) {
            case mt_bstr:
            case mt_tstr: n += static_cast<size_t>(v); break;
            case mt_array: expected += v; break;
            case mt_map: expected += 2 * v; break;
            case mt_tag: expected += 1; break;
            default: break;
        }
        pos += n;
    }
    return pos;
}

struct sv_int {
    bool negative = false;  // value is -1 - arg.value when set
    raw_uint v;
};
struct sv_simple {
    byte v = 0;
};
struct sv_bytes {
    raw_uint len;
    bview payload;
};
struct sv_text {
    raw_uint len;
    bview payload;
};
struct sv_array {
    raw_uint count;
    bview body;  // first entry starts here; bounded by count, not by body.end
};
struct sv_map {
    raw_uint count;
    bview body;
};
struct sv_tagged {
    raw_uint tag;
    bview payload;
};

using shallow_view = std::variant<sv_int, sv_simple, sv_bytes, sv_text, sv_array, sv_map, sv_tagged>;

// Pre: input starts with a valid item. O(header) work, no payload copies.
inline shallow_view read_shallow(bview input) {
    auto r = parse_header(input);
    assert(r.ok());
    const raw_header& h = r.value().h;
    size_t n = r.value().consumed;
    bview rest = input.subspan(n);
    switch (h.major_type) {
        case mt_uint: return sv_int{false, h.arg};
        case mt_nint: return sv_int{true, h.arg};
        case mt_bstr: return sv_bytes{h.arg, rest.first(static_cast<size_t>(h.arg.value))};
        case mt_tstr: return sv_text{h.arg, rest.first(static_cast<size_t>(h.arg.value))};
        case mt_array: return sv_array{h.arg, rest};
        case mt_map: return sv_map{h.arg, rest};
        case mt_tag: return sv_tagged{h.arg, rest};
        default: return sv_simple{static_cast<byte>(h.arg.value)};
    }
}

// Yields each element's byte range by jumping over it. Pre: derived from a
// valid array view.
struct item_iter {
    bview rest;
    std::uint64_t remaining = 0;

    item_iter() = default;
    explicit item_iter(const sv_array& a) : rest(a.body), remaining(a.count.value) {}

    std::optional<bview> next() {
        if (remaining == 0) return std::nullopt;
        size_t n = jump(rest);
        bview item = rest.first(n);
        rest = rest.subspan(n);
        remaining--;
        return item;
    }
};

struct entry_iter {
    bview rest;
    std::uint64_t remaining = 0;

    entry_iter() = default;
    explicit entry_iter(const sv_map& m) : rest(m.body), remaining(m.count.value) {}

    std::optional<std::pair<bview, bview>> next() {
        if (remaining == 0) return std::nullopt;
        size_t nk = jump(rest);
        bview key = rest.first(nk);
        rest = rest.subspan(nk);
        size_t nv = jump(rest);
        bview val = rest.first(nv);
        rest = rest.subspan(nv);
        remaining--;
        return std::make_pair(key, val);
    }
};

struct raw_item;

struct ri_int {
    bool negative = false;
    raw_uint v;
    bool operator==(const ri_int&) const = default;
};
struct ri_simple {
    byte v = 0;
    bool operator==(const ri_simple&) const = default;
};
struct ri_bytes {
    raw_uint len;  // len.value == payload.size(); size_class free
    std::vector<byte> payload;
    bool operator==(const ri_bytes&) const = default;
};
struct ri_text {
    raw_uint len;
    std::string payload;
    bool operator==(const ri_text&) const = default;
};
struct ri_array {
    raw_uint count;
    std::vector<raw_item> items;
    bool operator==(const ri_array&) const = default;
};
struct ri_map {
    raw_uint count;
    std::vector<std::pair<raw_item, raw_item>> entries;
    bool operator==(const ri_map&) const = default;
};
struct ri_tagged {
    raw_uint tag;
    std::vector<raw_item> payload;  // exactly one element
    bool operator==(const ri_tagged&) const = default;
};

struct raw_item {
    std::variant<ri_int, ri_simple, ri_bytes, ri_text, ri_array, ri_map, ri_tagged> v;
    bool operator==(const raw_item&) const = default;
};

inline raw_item mk_uint(std::uint64_t v) { return {ri_int{false, min_uint(v)}}; }
inline raw_item mk_uint(std::uint64_t v, std::uint8_t sc) { return {ri_int{false, {v, sc}}}; }
inline raw_item mk_nint(std::uint64_t arg) { return {ri_int{true, min_uint(arg)}}; }
inline raw_item mk_simple(byte v) { return {ri_simple{v}}; }
inline raw_item mk_bytes(std::vector<byte> p) {
    raw_uint len = min_uint(p.size());
    return {ri_bytes{len, std::move(p)}};
}
inline raw_item mk_text(std::string s) {
    raw_uint len = min_uint(s.size());
    return {ri_text{len, std::move(s)}};
}
inline raw_item mk_array(std::vector<raw_item> items) {
    raw_uint c = min_uint(items.size());
    return {ri_array{c, std::move(items)}};
}
inline raw_item mk_map(std::vector<std::pair<raw_item, raw_item>> entries) {
    raw_uint c = min_uint(entries.size());
    return {ri_map{c, std::move(entries)}};
}
inline raw_item mk_tagged(std::uint64_t tag, raw_item payload) {
    std::vector<raw_item> p;
    p.push_back(std::move(payload));
    return {ri_tagged{min_uint(tag), std::move(p)}};
}

inline raw_header item_header(const raw_item& x) {
    struct v {
        raw_header operator()(const ri_int& i) const {
            return {i.negative ? mt_nint : mt_uint, i.v};
        }
        raw_header operator()(const ri_simple& s) const {
            return {mt_simple, s.v <= 23 ? raw_uint{s.v, 0} : raw_uint{s.v, 1}};
        }
        raw_header operator()(const ri_bytes& b) const { return {mt_bstr, b.len}; }
        raw_header operator()(const ri_text& t) const { return {mt_tstr, t.len}; }
        raw_header operator()(const ri_array& a) const { return {mt_array, a.count}; }
        raw_header operator()(const ri_map& m) const { return {mt_map, m.count}; }
        raw_header operator()(const ri_tagged& t) const { return {mt_tag, t.tag}; }
    };
    return std::visit(v{}, x.v);
}

// Serialized size if <= bound, else nullopt. Never overflows: the running
// total is checked against bound at every step.
inline std::optional<size_t> size_raw(const raw_item& x, size_t bound) {
    size_t total = 0;
    // explicit worklist to keep this usable on deep items
    std::vector<const raw_item*> stack{&x};
    while (!stack.empty()) {
        const raw_item* it = stack.back();
        stack.pop_back();
        size_t n = header_size(item_header(*it).arg.size_class);
        if (n > bound - total) return std::nullopt;
        total += n;
        if (auto* b = std::get_if<ri_bytes>(&it->v)) {
            if (b->payload.size() > bound - total) return std::nullopt;
            total += b->payload.size();
        } else if (auto* t = std::get_if<ri_text>(&it->v)) {
            if (t->payload.size() > bound - total) return std::nullopt;
            total += t->payload.size();
        } else if (auto* a = std::get_if<ri_array>(&it->v)) {
            for (const auto& c : a->items) stack.push_back(&c);
        } else if (auto* m = std::get_if<ri_map>(&it->v)) {
            for (const auto& e : m->entries) {
                stack.push_back(&e.first);
                stack.push_back(&e.second);
            }
        } else if (auto* tg = std::get_if<ri_tagged>(&it->v)) {
            stack.push_back(&tg->payload[0]);
        }
    }
    return total;
}

namespace detail {
inline size_t serialize_raw_rec(const raw_item& x, std::span<byte> out) {
    size_t n = encode_header(item_header(x), out);
    if (n == 0) return 0;
    if (auto* b = std::get_if<ri_bytes>(&x.v)) {
        if (out.size() - n < b->payload.size()) return 0;
        std::memcpy(out.data() + n, b->payload.data(), b->payload.size());
        return n + b->payload.size();
    }
    if (auto* t = std::get_if<ri_text>(&x.v)) {
        if (out.size() - n < t->payload.size()) return 0;
        std::memcpy(out.data() + n, t->payload.data(), t->payload.size());
        return n + t->payload.size();
    }
    if (auto* a = std::get_if<ri_array>(&x.v)) {
        for (const auto& c : a->items) {
            size_t m = serialize_raw_rec(c, out.subspan(n));
            if (m == 0) return 0;
            n += m;
        }
        return n;
    }
    if (auto* m = std::get_if<ri_map>(&x.v)) {
        for (const auto& e : m->entries) {
            size_t mk = serialize_raw_rec(e.first, out.subspan(n));
            if (mk == 0) return 0;
            n += mk;
            size_t mv = serialize_raw_rec(e.second, out.subspan(n));
            if (mv == 0) return 0;
            n += mv;
        }
        return n;
    }
    if (auto* tg = std::get_if<ri_tagged>(&x.v)) {
        size_t m = serialize_raw_rec(tg->payload[0], out.subspan(n));
        if (m == 0) return 0;
        return n + m;
    }
    return n;  // int / simple: header only
}
}  // namespace detail

// Returns bytes written, or 0 if out is too small.
inline size_t serialize_raw(const raw_item& x, std::span<byte> out) {
    return detail::serialize_raw_rec(x, out);
}

inline std::vector<byte> serialize_raw(const raw_item& x) {
    auto n = size_raw(x, ~size_t{0} >> 1);
    std::vector<byte> out(n ? *n : 0);
    size_t written = serialize_raw(x, out);
    out.resize(written);
    return out;
}

enum class parse_error_kind : std::uint8_t { invalid, depth_exceeded };
struct parse_error {
    parse_error_kind kind;
    verror v{};
};

namespace detail {
inline result<raw_item, parse_error> parse_valid_rec(bview& in, size_t depth_limit) {
    if (depth_limit == 0) return parse_error{parse_error_kind::depth_exceeded};
    auto ph = parse_header(in).value();
    const raw_header& h = ph.h;
    in = in.subspan(ph.consumed);
    switch (h.major_type) {
        case mt_uint: return raw_item{ri_int{false, h.arg}};
        case mt_nint: return raw_item{ri_int{true, h.arg}};
        case mt_simple: return raw_item{ri_simple{static_cast<byte>(h.arg.value)}};
        case mt_bstr: {
            auto p = in.first(static_cast<size_t>(h.arg.value));
            in = in.subspan(p.size());
            return raw_item{ri_bytes{h.arg, {p.begin(), p.end()}}};
        }
        case mt_tstr: {
            auto p = in.first(static_cast<size_t>(h.arg.value));
            in = in.subspan(p.size());
            return raw_item{ri_text{h.arg, std::string(p.begin(), p.end())}};
        }
        case mt_array: {
            ri_array a{h.arg, {}};
            a.items.reserve(static_cast<size_t>(h.arg.value));
            for (std::uint64_t i = 0; i < h.arg.value; ++i) {
                auto c = parse_valid_rec(in, depth_limit - 1);
                if (!c.ok()) return c.error();
                a.items.push_back(std::move(c.value()));
            }
            return raw_item{std::move(a)};
        }
        case mt_map: {
            ri_map m{h.arg, {}};
            m.entries.reserve(static_cast<size_t>(h.arg.value));
            for (std::uint64_t i = 0; i < h.arg.value; ++i) {
                auto k = parse_valid_rec(in, depth_limit - 1);
                if (!k.ok()) return k.error();
                auto v = parse_valid_rec(in, depth_limit - 1);
                if (!v.ok()) return v.error();
                m.entries.emplace_back(std::move(k.value()), std::move(v.value()));
            }
            return raw_item{std::move(m)};
        }
        default: {
            auto c = parse_valid_rec(in, depth_limit - 1);
            if (!c.ok()) return c.error();
            std::vector<raw_item> p;
            p.push_back(std::move(c.value()));
            return raw_item{ri_tagged{h.arg, std::move(p)}};
        }
    }
}
}  // namespace detail

// Full tree parse, for tests and canonicalization of shallow data. Depth-
// limited because the tree build (and its destructor) recurse.
inline result<std::pair<raw_item, size_t>, parse_error> parse_raw(bview input,
                                                                  size_t depth_limit = 64) {
    auto v = validate(input);
    if (!v.ok()) return parse_error{parse_error_kind::invalid, v.error()};
    bview rest = input.first(v.value());
    auto item = detail::parse_valid_rec(rest, depth_limit);
    if (!item.ok()) return item.error();
    return std::make_pair(std::move(item.value()), v.value());
}

}  // namespace detcbor::cbor

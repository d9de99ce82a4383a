#pragma once

// The production path over an elaborated schema: validate canonical bytes
// without building trees, parse them into typed values that reference the
// input where possible (stars become iterator seeds), and serialize typed
// values back to canonical bytes with sorted map insertion.

#include <detcbor/cddl/elab.hpp>
#include <detcbor/det.hpp>
#include <detcbor/raw.hpp>
#include <detcbor/utf8.hpp>

#include <algorithm>
#include <array>
#include <cassert>
#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace detcbor::cddl {

enum class rt_code : std::uint8_t {
    not_canonical,
    schema_mismatch,
    cut_violation,
    unconsumed_entries,
};

struct rt_error {
    rt_code code;
    std::string path;
};

inline const char* to_string(rt_code c) {
    switch (c) {
        case rt_code::not_canonical: return "not_canonical";
        case rt_code::schema_mismatch: return "schema_mismatch";
        case rt_code::cut_violation: return "cut_violation";
        case rt_code::unconsumed_entries: return "unconsumed_entries";
    }
    return "?";
}

// --- typed values ---
//
// The value bound by a schema, one constructor per binding shape. Text and
// byte payloads either view the validated input or own a copy; lists and
// tables either own their elements or carry an iterator seed over the
// validated bytes. `any` binds its own canonical encoding as bytes.

struct typed_value;
using tv_ptr = std::shared_ptr<const typed_value>;

struct tv_unit {};
struct tv_uint {
    std::uint64_t v = 0;
};
struct tv_nint {
    std::uint64_t arg = 0;  // denotes -1 - arg
};
struct tv_text {
    std::string_view v;
    std::shared_ptr<const std::string> store;  // null when viewing input bytes
};
struct tv_bytes {
    bview v;
    std::shared_ptr<const std::vector<byte>> store;
};
struct tv_left {
    tv_ptr v;
};
struct tv_right {
    tv_ptr v;
};
struct tv_pair {
    tv_ptr a, b;
};
struct tv_some {
    tv_ptr v;
};
struct tv_none {};

struct list_seed {
    eag_ptr body;             // group matched once per element
    bview rest;               // start of the first element's items
    std::uint64_t items = 0;  // raw array items spanned by the whole list
};
struct tv_list {
    std::vector<tv_ptr> items;
    std::optional<list_seed> seed;  // when set, items is empty
};

struct table_seed {
    emg_ptr table;              // the table node with its predicates
    bview body;                 // start of the map's first entry
    std::uint64_t entries = 0;  // total entries in the underlying map
};
struct tv_table {
    std::vector<std::pair<tv_ptr, tv_ptr>> entries;
    std::optional<table_seed> seed;
};

struct typed_value {
    std::variant<tv_unit, tv_uint, tv_nint, tv_text, tv_bytes, tv_left, tv_right, tv_pair, tv_some,
                 tv_none, tv_list, tv_table>
        v;
};

inline tv_ptr mk(typed_value v) { return std::make_shared<const typed_value>(std::move(v)); }

inline typed_value vunit() { return {tv_unit{}}; }
inline typed_value vuint(std::uint64_t v) { return {tv_uint{v}}; }
inline typed_value vnint(std::uint64_t arg) { return {tv_nint{arg}}; }
inline typed_value vtext(std::string s) {
    auto store = std::make_shared<const std::string>(std::move(s));
    return {tv_text{*store, store}};
}
inline typed_value vbytes(std::vector<byte> b) {
    auto store = std::make_shared<const std::vector<byte>>(std::move(b));
    return {tv_bytes{as_bview(*store), store}};
}
inline typed_value vleft(typed_value v) { return {tv_left{mk(std::move(v))}}; }
inline typed_value vright(typed_value v) { return {tv_right{mk(std::move(v))}}; }
inline typed_value vpair(typed_value a, typed_value b) {
    return {tv_pair{mk(std::move(a)), mk(std::move(b))}};
}
inline typed_value vsome(typed_value v) { return {tv_some{mk(std::move(v))}}; }
inline typed_value vnone() { return {tv_none{}}; }
inline typed_value vlist(std::vector<typed_value> items) {
    tv_list l;
    for (auto& x : items) l.items.push_back(mk(std::move(x)));
    return {std::move(l)};
}
inline typed_value vtable(std::vector<std::pair<typed_value, typed_value>> entries) {
    tv_table t;
    for (auto& [k, v] : entries) t.entries.emplace_back(mk(std::move(k)), mk(std::move(v)));
    return {std::move(t)};
}

// --- validation over bytes ---
//
// The walk reads headers and payload views only; maps are checked with a
// single running count of consumed entries (elaboration guarantees the
// pieces claim disjoint entries, so no per-entry bookkeeping is needed).
// The success path performs no allocation; error paths may build a
// breadcrumb string. The one exception: choice or exclusion atoms that are
// themselves array or map types fall back to decoding the candidate item.

namespace rt_detail {

using cbor::entry_iter;
using cbor::item_iter;
using cbor::read_shallow;
using cbor::shallow_view;
using cbor::sv_array;
using cbor::sv_bytes;
using cbor::sv_int;
using cbor::sv_map;
using cbor::sv_simple;
using cbor::sv_text;

inline elab_detail::i128 int_of(const sv_int& i) {
    return elab_detail::lit_value(t_lit_int{i.negative, i.v.value});
}

inline bool leaf_base(base_type b, const shallow_view& sv) {
    switch (b) {
        case base_type::any: return true;
        case base_type::uint_: {
            const auto* i = std::get_if<sv_int>(&sv);
            return i && !i->negative;
        }
        case base_type::nint: {
            const auto* i = std::get_if<sv_int>(&sv);
            return i && i->negative;
        }
        case base_type::int_: return std::holds_alternative<sv_int>(sv);
        case base_type::tstr: return std::holds_alternative<sv_text>(sv);
        case base_type::bstr: return std::holds_alternative<sv_bytes>(sv);
    }
    return false;
}

inline bool leaf_lit_int(const t_lit_int& l, const shallow_view& sv) {
    const auto* i = std::get_if<sv_int>(&sv);
    return i && i->negative == l.negative && i->v.value == l.arg;
}

inline bool leaf_lit_text(const t_lit_text& l, const shallow_view& sv) {
    const auto* s = std::get_if<sv_text>(&sv);
    return s && bytes_equal(s->payload, as_bview(l.s));
}

inline bool leaf_lit_simple(const t_lit_simple& l, const shallow_view& sv) {
    const auto* s = std::get_if<sv_simple>(&sv);
    return s && s->v == l.v;
}

inline bool leaf_range(const t_int_range& r, const shallow_view& sv) {
    const auto* i = std::get_if<sv_int>(&sv);
    if (!i) return false;
    auto v = int_of(*i);
    return elab_detail::lit_value(r.lo) <= v && v <= elab_detail::lit_value(r.hi);
}

inline bool leaf_size(const t_size& s, const shallow_view& sv) {
    size_t n;
    if (s.b == base_type::tstr) {
        const auto* v = std::get_if<sv_text>(&sv);
        if (!v) return false;
        n = v->payload.size();
    } else {
        const auto* v = std::get_if<sv_bytes>(&sv);
        if (!v) return false;
        n = v->payload.size();
    }
    return s.lo <= n && n <= s.hi;
}

// surface types evaluated directly on a serialized item
inline bool vleaf(const type_expr& t, bview item) {
    shallow_view sv = read_shallow(item);
    if (const auto* x = std::get_if<t_base>(&t.v)) return leaf_base(x->b, sv);
    if (const auto* x = std::get_if<t_lit_int>(&t.v)) return leaf_lit_int(*x, sv);
    if (const auto* x = std::get_if<t_lit_text>(&t.v)) return leaf_lit_text(*x, sv);
    if (const auto* x = std::get_if<t_lit_simple>(&t.v)) return leaf_lit_simple(*x, sv);
    if (const auto* x = std::get_if<t_int_range>(&t.v)) return leaf_range(*x, sv);
    if (const auto* x = std::get_if<t_size>(&t.v)) return leaf_size(*x, sv);
    if (const auto* x = std::get_if<t_choice>(&t.v))
        return vleaf(*x->a, item) || vleaf(*x->b, item);
    // structured atom: decode and use the reference semantics
    auto r = cbor::parse_canon(item);
    assert(r.ok());
    return type_sem(t, r.value().first);
}

inline bool excludes_bytes(const exclusion_set& e, bview kb, bview vb) {
    for (const auto& a : e.atoms)
        if (vleaf(*a.key, kb) && vleaf(*a.value, vb)) return true;
    return false;
}

// literal entry keys are ints, text, or simple values
inline bool bytes_match_literal(bview kb, const canon_item& lit) {
    shallow_view sv = read_shallow(kb);
    if (const auto* i = std::get_if<cbor::ci_int>(&lit.v))
        return leaf_lit_int(t_lit_int{i->negative, i->arg}, sv);
    if (const auto* t = std::get_if<cbor::ci_text>(&lit.v)) {
        const auto* s = std::get_if<sv_text>(&sv);
        return s && bytes_equal(s->payload, as_bview(t->v));
    }
    if (const auto* c = std::get_if<cbor::ci_simple>(&lit.v))
        return leaf_lit_simple(t_lit_simple{c->v}, sv);
    return false;
}

struct vframe {
    bool is_key = false;
    std::uint64_t index = 0;
    bview key;
};

struct vctx {
    std::array<vframe, 32> frames{};
    size_t depth = 0;
    std::optional<rt_error> strongest;

    void push_index(std::uint64_t i) {
        if (depth < frames.size()) frames[depth] = {false, i, {}};
        depth++;
    }
    void push_key(bview kb) {
        if (depth < frames.size()) frames[depth] = {true, 0, kb};
        depth++;
    }
    void pop() { depth--; }

    static int rank(rt_code c) {
        switch (c) {
            case rt_code::cut_violation: return 3;
            case rt_code::unconsumed_entries: return 2;
            default: return 1;
        }
    }

    std::string render_path() const {
        std::string p;
        size_t n = depth < frames.size() ? depth : frames.size();
        for (size_t i = 0; i < n; ++i) {
            const vframe& f = frames[i];
            if (!f.is_key) {
                p += "[" + std::to_string(f.index) + "]";
                continue;
            }
            shallow_view sv = read_shallow(f.key);
            if (const auto* s = std::get_if<sv_int>(&sv)) {
                p += "." + std::to_string(static_cast<long long>(int_of(*s)));
            } else if (const auto* s = std::get_if<sv_text>(&sv)) {
                p += ".\"";
                p.append(reinterpret_cast<const char*>(s->payload.data()), s->payload.size());
                p += "\"";
            } else {
                p += ".<key>";
            }
        }
        return p.empty() ? "." : p;
    }

    void note(rt_code c) {
        if (strongest && rank(strongest->code) >= rank(c)) return;
        strongest = rt_error{c, render_path()};
    }
};

inline bool vtype(const elab_type& t, bview item, vctx& cx);

// committed greedy match; advances the iterator only on success
inline std::optional<std::uint64_t> vagroup(const elab_array_group& g, item_iter& it,
                                            std::uint64_t idx, vctx& cx) {
    if (const auto* x = std::get_if<ea_elem>(&g.v)) {
        item_iter save = it;
        auto item = it.next();
        cx.push_index(idx);
        bool ok = item && vtype(*x->t, *item, cx);
        cx.pop();
        if (ok) return 1;
        it = save;
        return std::nullopt;
    }
    if (const auto* x = std::get_if<ea_alt>(&g.v)) {
        if (auto n = vagroup(*x->a, it, idx, cx)) return n;
        return vagroup(*x->b, it, idx, cx);
    }
    if (const auto* x = std::get_if<ea_opt>(&g.v)) {
        if (auto n = vagroup(*x->g, it, idx, cx)) return n;
        return 0;
    }
    if (const auto* x = std::get_if<ea_concat>(&g.v)) {
        item_iter save = it;
        auto n1 = vagroup(*x->a, it, idx, cx);
        if (!n1) return std::nullopt;
        auto n2 = vagroup(*x->b, it, idx + *n1, cx);
        if (!n2) {
            it = save;
            return std::nullopt;
        }
        return *n1 + *n2;
    }
    const auto& x = std::get<ea_star>(g.v);
    std::uint64_t total = 0;
    for (;;) {
        auto n = vagroup(*x.g, it, idx + total, cx);
        if (!n || *n == 0) return total;
        total += *n;
    }
}

enum class vm_res : std::uint8_t { matched, soft, hard };

struct vm_out {
    vm_res r = vm_res::soft;
    std::uint64_t count = 0;  // entries consumed, meaningful when matched
};

inline vm_out vmgroup(const elab_map_group& g, const sv_map& m, vctx& cx) {
    if (const auto* x = std::get_if<em_entry>(&g.v)) {
        entry_iter it(m);
        while (auto e = it.next()) {
            if (!bytes_match_literal(e->first, x->key)) continue;
            cx.push_key(e->first);
            bool ok = vtype(*x->value, e->second, cx);
            if (!ok && x->cut) cx.note(rt_code::cut_violation);
            cx.pop();
            if (ok) return {vm_res::matched, 1};
            return {x->cut ? vm_res::hard : vm_res::soft, 0};
        }
        return {vm_res::soft, 0};
    }
    if (const auto* x = std::get_if<em_table>(&g.v)) {
        std::uint64_t n = 0;
        entry_iter it(m);
        while (auto e = it.next()) {
            if (!vleaf(*x->key_t, e->first)) continue;
            if (excludes_bytes(x->excluded, e->first, e->second)) continue;
            vctx scratch;  // a value mismatch just leaves the entry unconsumed
            if (!vtype(*x->value, e->second, scratch)) continue;
            n++;
        }
        return {vm_res::matched, n};
    }
    if (const auto* x = std::get_if<em_alt>(&g.v)) {
        vm_out a = vmgroup(*x->a, m, cx);
        if (a.r != vm_res::soft) return a;
        return vmgroup(*x->b, m, cx);
    }
    if (const auto* x = std::get_if<em_opt>(&g.v)) {
        vm_out inner = vmgroup(*x->g, m, cx);
        if (inner.r == vm_res::soft) return {vm_res::matched, 0};
        return inner;
    }
    const auto& x = std::get<em_concat>(g.v);
    vm_out a = vmgroup(*x.a, m, cx);
    if (a.r != vm_res::matched) return a;
    vm_out b = vmgroup(*x.b, m, cx);
    if (b.r != vm_res::matched) return b;
    return {vm_res::matched, a.count + b.count};
}

inline bool vtype(const elab_type& t, bview item, vctx& cx) {
    shallow_view sv = read_shallow(item);
    if (const auto* x = std::get_if<t_base>(&t.v)) return leaf_base(x->b, sv);
    if (const auto* x = std::get_if<t_lit_int>(&t.v)) return leaf_lit_int(*x, sv);
    if (const auto* x = std::get_if<t_lit_text>(&t.v)) return leaf_lit_text(*x, sv);
    if (const auto* x = std::get_if<t_lit_simple>(&t.v)) return leaf_lit_simple(*x, sv);
    if (const auto* x = std::get_if<t_int_range>(&t.v)) return leaf_range(*x, sv);
    if (const auto* x = std::get_if<t_size>(&t.v)) return leaf_size(*x, sv);
    if (const auto* x = std::get_if<e_choice>(&t.v))
        return vtype(*x->a, item, cx) || vtype(*x->b, item, cx);
    if (const auto* x = std::get_if<e_array>(&t.v)) {
        const auto* a = std::get_if<sv_array>(&sv);
        if (!a) {
            cx.note(rt_code::schema_mismatch);
            return false;
        }
        if (!x->g) {
            if (a->count.value == 0) return true;
            cx.note(rt_code::schema_mismatch);
            return false;
        }
        item_iter it(*a);
        auto n = vagroup(*x->g, it, 0, cx);
        if (n && it.remaining == 0) return true;
        cx.note(rt_code::schema_mismatch);
        return false;
    }
    const auto& x = std::get<e_map>(t.v);
    const auto* m = std::get_if<sv_map>(&sv);
    if (!m) {
        cx.note(rt_code::schema_mismatch);
        return false;
    }
    if (!x.g) {
        if (m->count.value == 0) return true;
        cx.note(rt_code::unconsumed_entries);
        return false;
    }
    vm_out r = vmgroup(*x.g, *m, cx);
    if (r.r == vm_res::matched && r.count == m->count.value) return true;
    if (r.r == vm_res::soft) cx.note(rt_code::schema_mismatch);
    if (r.r == vm_res::matched) cx.note(rt_code::unconsumed_entries);
    return false;  // hard: the cut already recorded its note
}

}  // namespace rt_detail

// Checks one item at the start of input: canonical encoding first, then the
// schema. Returns the item's size; trailing bytes are left for the caller.
inline result<size_t, rt_error> validate(const elab_schema& es, bview input) {
    auto c = cbor::det_check(input);
    if (!c.ok())
        return rt_error{rt_code::not_canonical, "offset " + std::to_string(c.error().pos)};
    rt_detail::vctx cx;
    if (rt_detail::vtype(*es.root, input.first(c.value()), cx)) return c.value();
    if (cx.strongest) return *cx.strongest;
    return rt_error{rt_code::schema_mismatch, "."};
}

// --- parsing to typed values ---
//
// Runs after validation, so every structural access is known to succeed.
// Choices are resolved exactly as the validation walk resolved them, by
// probing with the same committed matcher.

namespace rt_detail {

inline typed_value pt_type(const etype_ptr& t, bview item);

inline typed_value pt_agroup(const eag_ptr& g, item_iter& it) {
    if (const auto* x = std::get_if<ea_elem>(&g->v)) {
        auto item = it.next();
        assert(item);
        return pt_type(x->t, *item);
    }
    if (const auto* x = std::get_if<ea_alt>(&g->v)) {
        item_iter probe = it;
        vctx scratch;
        if (vagroup(*x->a, probe, 0, scratch)) return {tv_left{mk(pt_agroup(x->a, it))}};
        return {tv_right{mk(pt_agroup(x->b, it))}};
    }
    if (const auto* x = std::get_if<ea_opt>(&g->v)) {
        item_iter probe = it;
        vctx scratch;
        if (vagroup(*x->g, probe, 0, scratch)) return {tv_some{mk(pt_agroup(x->g, it))}};
        return {tv_none{}};
    }
    if (const auto* x = std::get_if<ea_star>(&g->v)) {
        list_seed seed{x->g, it.rest, 0};
        vctx scratch;
        for (;;) {
            item_iter probe = it;
            auto n = vagroup(*x->g, probe, 0, scratch);
            if (!n || *n == 0) break;
            it = probe;
            seed.items += *n;
        }
        tv_list l;
        l.seed = std::move(seed);
        return {std::move(l)};
    }
    std::vector<eag_ptr> xs;
    elab_detail::flatten(g, xs);
    std::vector<typed_value> parts;
    for (const auto& p : xs) parts.push_back(pt_agroup(p, it));
    typed_value acc = std::move(parts.back());
    for (size_t i = parts.size() - 1; i-- > 0;)
        acc = {tv_pair{mk(std::move(parts[i])), mk(std::move(acc))}};
    return acc;
}

inline typed_value pt_mgroup(const emg_ptr& g, const sv_map& m) {
    if (const auto* x = std::get_if<em_entry>(&g->v)) {
        entry_iter it(m);
        while (auto e = it.next()) {
            if (!bytes_match_literal(e->first, x->key)) continue;
            return {tv_pair{mk(vunit()), mk(pt_type(x->value, e->second))}};
        }
        assert(!"validated entry key must be present");
        return vunit();
    }
    if (std::holds_alternative<em_table>(g->v)) {
        tv_table t;
        t.seed = table_seed{g, m.body, m.count.value};
        return {std::move(t)};
    }
    if (const auto* x = std::get_if<em_alt>(&g->v)) {
        vctx scratch;
        vm_out a = vmgroup(*x->a, m, scratch);
        if (a.r == vm_res::matched) return {tv_left{mk(pt_mgroup(x->a, m))}};
        return {tv_right{mk(pt_mgroup(x->b, m))}};
    }
    if (const auto* x = std::get_if<em_opt>(&g->v)) {
        vctx scratch;
        vm_out inner = vmgroup(*x->g, m, scratch);
        if (inner.r == vm_res::matched) return {tv_some{mk(pt_mgroup(x->g, m))}};
        return {tv_none{}};
    }
    std::vector<emg_ptr> xs;
    elab_detail::flatten(g, xs);
    std::vector<typed_value> parts;
    for (const auto& p : xs) parts.push_back(pt_mgroup(p, m));
    typed_value acc = std::move(parts.back());
    for (size_t i = parts.size() - 1; i-- > 0;)
        acc = {tv_pair{mk(std::move(parts[i])), mk(std::move(acc))}};
    return acc;
}

inline typed_value pt_type(const etype_ptr& t, bview item) {
    shallow_view sv = read_shallow(item);
    if (const auto* x = std::get_if<t_base>(&t->v)) {
        switch (x->b) {
            case base_type::any: return {tv_bytes{item, nullptr}};
            case base_type::uint_: return vuint(std::get<sv_int>(sv).v.value);
            case base_type::nint: return vnint(std::get<sv_int>(sv).v.value);
            case base_type::int_: {
                const auto& i = std::get<sv_int>(sv);
                return i.negative ? vnint(i.v.value) : vuint(i.v.value);
            }
            case base_type::tstr: {
                const auto& s = std::get<sv_text>(sv);
                return {tv_text{
                    {reinterpret_cast<const char*>(s.payload.data()), s.payload.size()},
                    nullptr}};
            }
            case base_type::bstr: return {tv_bytes{std::get<sv_bytes>(sv).payload, nullptr}};
        }
    }
    if (std::holds_alternative<t_lit_int>(t->v) || std::holds_alternative<t_lit_text>(t->v) ||
        std::holds_alternative<t_lit_simple>(t->v))
        return vunit();
    if (std::holds_alternative<t_int_range>(t->v)) {
        const auto& i = std::get<sv_int>(sv);
        return i.negative ? vnint(i.v.value) : vuint(i.v.value);
    }
    if (const auto* x = std::get_if<t_size>(&t->v)) {
        if (x->b == base_type::tstr) {
            const auto& s = std::get<sv_text>(sv);
            return {tv_text{{reinterpret_cast<const char*>(s.payload.data()), s.payload.size()},
                            nullptr}};
        }
        return {tv_bytes{std::get<sv_bytes>(sv).payload, nullptr}};
    }
    if (const auto* x = std::get_if<e_choice>(&t->v)) {
        vctx scratch;
        if (vtype(*x->a, item, scratch)) return {tv_left{mk(pt_type(x->a, item))}};
        return {tv_right{mk(pt_type(x->b, item))}};
    }
    if (const auto* x = std::get_if<e_array>(&t->v)) {
        if (!x->g) return vunit();
        item_iter it(std::get<sv_array>(sv));
        return pt_agroup(x->g, it);
    }
    const auto& x = std::get<e_map>(t->v);
    if (!x.g) return vunit();
    return pt_mgroup(x.g, std::get<sv_map>(sv));
}

}  // namespace rt_detail

struct parsed {
    typed_value value;
    bview rest;
};

// Validate-then-parse: the only way to obtain typed values from bytes.
inline result<parsed, rt_error> parse(const elab_schema& es, bview input) {
    auto n = validate(es, input);
    if (!n.ok()) return n.error();
    return parsed{rt_detail::pt_type(es.root, input.first(n.value())), input.subspan(n.value())};
}

// --- iteration over seeds ---

struct list_iter {
    list_seed s;

    explicit list_iter(list_seed seed) : s(std::move(seed)) {}

    std::optional<typed_value> next() {
        if (!s.body || s.items == 0) return std::nullopt;
        cbor::item_iter it;
        it.rest = s.rest;
        it.remaining = s.items;
        typed_value v = rt_detail::pt_agroup(s.body, it);
        s.rest = it.rest;
        s.items = it.remaining;
        return v;
    }
};

struct table_iter {
    const em_table* t = nullptr;
    emg_ptr hold;  // keeps the table node alive
    cbor::entry_iter it;

    explicit table_iter(const table_seed& seed)
        : t(&std::get<em_table>(seed.table->v)), hold(seed.table) {
        it.rest = seed.body;
        it.remaining = seed.entries;
    }

    std::optional<std::pair<typed_value, typed_value>> next() {
        while (auto e = it.next()) {
            if (!rt_detail::vleaf(*t->key_t, e->first)) continue;
            if (rt_detail::excludes_bytes(t->excluded, e->first, e->second)) continue;
            rt_detail::vctx scratch;
            if (!rt_detail::vtype(*t->value, e->second, scratch)) continue;
            return std::make_pair(rt_detail::pt_type(t->key, e->first),
                                  rt_detail::pt_type(t->value, e->second));
        }
        return std::nullopt;
    }
};

inline std::vector<typed_value> list_items(const tv_list& l) {
    std::vector<typed_value> out;
    if (l.seed) {
        list_iter it(*l.seed);
        while (auto v = it.next()) out.push_back(std::move(*v));
    } else {
        for (const auto& p : l.items) out.push_back(*p);
    }
    return out;
}

inline std::vector<std::pair<typed_value, typed_value>> table_entries(const tv_table& t) {
    std::vector<std::pair<typed_value, typed_value>> out;
    if (t.seed) {
        table_iter it(*t.seed);
        while (auto e = it.next()) out.push_back(std::move(*e));
    } else {
        for (const auto& [k, v] : t.entries) out.emplace_back(*k, *v);
    }
    return out;
}

// --- normalization and equality ---

inline typed_value to_owned(const typed_value& v) {
    if (const auto* x = std::get_if<tv_text>(&v.v)) return vtext(std::string(x->v));
    if (const auto* x = std::get_if<tv_bytes>(&v.v))
        return vbytes(std::vector<byte>(x->v.begin(), x->v.end()));
    if (const auto* x = std::get_if<tv_left>(&v.v)) return vleft(to_owned(*x->v));
    if (const auto* x = std::get_if<tv_right>(&v.v)) return vright(to_owned(*x->v));
    if (const auto* x = std::get_if<tv_pair>(&v.v)) return vpair(to_owned(*x->a), to_owned(*x->b));
    if (const auto* x = std::get_if<tv_some>(&v.v)) return vsome(to_owned(*x->v));
    if (const auto* x = std::get_if<tv_list>(&v.v)) {
        std::vector<typed_value> items;
        for (auto& e : list_items(*x)) items.push_back(to_owned(e));
        return vlist(std::move(items));
    }
    if (const auto* x = std::get_if<tv_table>(&v.v)) {
        std::vector<std::pair<typed_value, typed_value>> es;
        for (auto& [k, val] : table_entries(*x)) es.emplace_back(to_owned(k), to_owned(val));
        return vtable(std::move(es));
    }
    return v;  // unit, ints, none
}

inline bool tv_equal(const typed_value& a, const typed_value& b) {
    if (a.v.index() != b.v.index()) return false;
    if (const auto* x = std::get_if<tv_uint>(&a.v)) return x->v == std::get<tv_uint>(b.v).v;
    if (const auto* x = std::get_if<tv_nint>(&a.v)) return x->arg == std::get<tv_nint>(b.v).arg;
    if (const auto* x = std::get_if<tv_text>(&a.v)) return x->v == std::get<tv_text>(b.v).v;
    if (const auto* x = std::get_if<tv_bytes>(&a.v))
        return bytes_equal(x->v, std::get<tv_bytes>(b.v).v);
    if (const auto* x = std::get_if<tv_left>(&a.v))
        return tv_equal(*x->v, *std::get<tv_left>(b.v).v);
    if (const auto* x = std::get_if<tv_right>(&a.v))
        return tv_equal(*x->v, *std::get<tv_right>(b.v).v);
    if (const auto* x = std::get_if<tv_pair>(&a.v)) {
        const auto& y = std::get<tv_pair>(b.v);
        return tv_equal(*x->a, *y.a) && tv_equal(*x->b, *y.b);
    }
    if (const auto* x = std::get_if<tv_some>(&a.v))
        return tv_equal(*x->v, *std::get<tv_some>(b.v).v);
    if (const auto* x = std::get_if<tv_list>(&a.v)) {
        auto xs = list_items(*x), ys = list_items(std::get<tv_list>(b.v));
        if (xs.size() != ys.size()) return false;
        for (size_t i = 0; i < xs.size(); ++i)
            if (!tv_equal(xs[i], ys[i])) return false;
        return true;
    }
    if (const auto* x = std::get_if<tv_table>(&a.v)) {
        auto xs = table_entries(*x), ys = table_entries(std::get<tv_table>(b.v));
        if (xs.size() != ys.size()) return false;
        for (size_t i = 0; i < xs.size(); ++i)
            if (!tv_equal(xs[i].first, ys[i].first) || !tv_equal(xs[i].second, ys[i].second))
                return false;
        return true;
    }
    return true;  // unit, none
}

// --- serialization ---

enum class sigma_code : std::uint8_t {
    duplicate_table_key,
    out_of_range,
    invalid_utf8,
    excluded_key,
};

struct sigma_error {
    sigma_code code;
    std::string detail;
};

inline const char* to_string(sigma_code c) {
    switch (c) {
        case sigma_code::duplicate_table_key: return "duplicate_table_key";
        case sigma_code::out_of_range: return "out_of_range";
        case sigma_code::invalid_utf8: return "invalid_utf8";
        case sigma_code::excluded_key: return "excluded_key";
    }
    return "?";
}

namespace rt_detail {

// set by tests to observe the sorted-insert loop invariant; receives the
// placed-entries region after every insertion
inline void (*sorted_insert_probe)(bview entries, std::uint64_t count) = nullptr;

// written size (0 = does not fit) or a serializability failure
using ser_result = result<size_t, sigma_error>;

inline size_t emit_int(bool negative, std::uint64_t arg, std::span<byte> out) {
    return cbor::encode_header({negative ? cbor::mt_nint : cbor::mt_uint, cbor::min_uint(arg)},
                               out);
}

inline size_t emit_payload(byte major, bview payload, std::span<byte> out) {
    size_t n = cbor::encode_header({major, cbor::min_uint(payload.size())}, out);
    if (n == 0 || out.size() - n < payload.size()) return 0;
    std::memcpy(out.data() + n, payload.data(), payload.size());
    return n + payload.size();
}

// prefix a count header onto a body already written at out[0..body)
inline size_t emit_wrap(byte major, std::uint64_t count, size_t body, std::span<byte> out) {
    size_t h = cbor::header_size(cbor::min_size_class(count));
    if (out.size() < body + h) return 0;
    std::memmove(out.data() + h, out.data(), body);
    cbor::encode_header({major, cbor::min_uint(count)}, out);
    return h + body;
}

inline ser_result ser_type(const etype_ptr& t, const typed_value& v, std::span<byte> out);

struct ser_items {
    size_t bytes = 0;
    std::uint64_t count = 0;  // raw array items written
    bool overflow = false;
};

inline result<ser_items, sigma_error> ser_agroup(const eag_ptr& g, const typed_value& v,
                                                 std::span<byte> out) {
    using R = result<ser_items, sigma_error>;
    if (const auto* x = std::get_if<ea_elem>(&g->v)) {
        auto r = ser_type(x->t, v, out);
        if (!r.ok()) return R(r.error());
        if (r.value() == 0) return R(ser_items{0, 0, true});
        return R(ser_items{r.value(), 1, false});
    }
    if (const auto* x = std::get_if<ea_alt>(&g->v)) {
        if (const auto* l = std::get_if<tv_left>(&v.v)) return ser_agroup(x->a, *l->v, out);
        if (const auto* r = std::get_if<tv_right>(&v.v)) return ser_agroup(x->b, *r->v, out);
        return R(sigma_error{sigma_code::out_of_range, "expected a sum value"});
    }
    if (const auto* x = std::get_if<ea_opt>(&g->v)) {
        if (const auto* s = std::get_if<tv_some>(&v.v)) return ser_agroup(x->g, *s->v, out);
        if (std::holds_alternative<tv_none>(v.v)) return R(ser_items{});
        return R(sigma_error{sigma_code::out_of_range, "expected an optional value"});
    }
    if (const auto* x = std::get_if<ea_star>(&g->v)) {
        const auto* l = std::get_if<tv_list>(&v.v);
        if (!l) return R(sigma_error{sigma_code::out_of_range, "expected a list value"});
        ser_items acc;
        for (const auto& e : list_items(*l)) {
            auto r = ser_agroup(x->g, e, out.subspan(acc.bytes));
            if (!r.ok()) return r;
            if (r.value().overflow) return R(ser_items{0, 0, true});
            acc.bytes += r.value().bytes;
            acc.count += r.value().count;
        }
        return R(acc);
    }
    std::vector<eag_ptr> xs;
    elab_detail::flatten(g, xs);
    ser_items acc;
    const typed_value* cur = &v;
    for (size_t i = 0; i < xs.size(); ++i) {
        const typed_value* piece = cur;
        if (i + 1 < xs.size()) {
            const auto* p = std::get_if<tv_pair>(&cur->v);
            if (!p) return R(sigma_error{sigma_code::out_of_range, "expected a pair value"});
            piece = p->a.get();
            cur = p->b.get();
        }
        auto r = ser_agroup(xs[i], *piece, out.subspan(acc.bytes));
        if (!r.ok()) return r;
        if (r.value().overflow) return R(ser_items{0, 0, true});
        acc.bytes += r.value().bytes;
        acc.count += r.value().count;
    }
    return R(acc);
}

// map entries accumulate at out[0..used), kept sorted by encoded key
struct map_region {
    std::span<byte> out;
    size_t used = 0;
    std::uint64_t entries = 0;
    bool overflow = false;

    // the new entry was just written at [used, used + klen + vlen)
    std::optional<sigma_error> insert(size_t klen, size_t vlen) {
        bview all(out.data(), used + klen + vlen);
        bview nk = all.subspan(used, klen);
        size_t pos = 0;
        while (pos < used) {
            size_t pk = cbor::jump(all.subspan(pos));
            int c = compare_bytes(nk, all.subspan(pos, pk));
            if (c == 0) return sigma_error{sigma_code::duplicate_table_key, "repeated map key"};
            if (c < 0) break;
            pos += pk + cbor::jump(all.subspan(pos + pk));
        }
        std::rotate(out.begin() + pos, out.begin() + used, out.begin() + used + klen + vlen);
        used += klen + vlen;
        entries++;
        if (sorted_insert_probe) sorted_insert_probe(bview(out.data(), used), entries);
        return std::nullopt;
    }
};

inline std::optional<sigma_error> ser_mgroup(const emg_ptr& g, const typed_value& v,
                                             map_region& r) {
    if (const auto* x = std::get_if<em_entry>(&g->v)) {
        const auto* p = std::get_if<tv_pair>(&v.v);
        if (!p || !std::holds_alternative<tv_unit>(p->a->v))
            return sigma_error{sigma_code::out_of_range, "expected a (unit, value) pair"};
        size_t klen = cbor::serialize_det(x->key, r.out.subspan(r.used));
        if (klen == 0) {
            r.overflow = true;
            return std::nullopt;
        }
        auto rv = ser_type(x->value, *p->b, r.out.subspan(r.used + klen));
        if (!rv.ok()) return rv.error();
        if (rv.value() == 0) {
            r.overflow = true;
            return std::nullopt;
        }
        return r.insert(klen, rv.value());
    }
    if (const auto* x = std::get_if<em_table>(&g->v)) {
        const auto* tb = std::get_if<tv_table>(&v.v);
        if (!tb) return sigma_error{sigma_code::out_of_range, "expected a table value"};
        for (const auto& [ktv, vtv] : table_entries(*tb)) {
            auto rk = ser_type(x->key, ktv, r.out.subspan(r.used));
            if (!rk.ok()) return rk.error();
            size_t klen = rk.value();
            if (klen == 0) {
                r.overflow = true;
                return std::nullopt;
            }
            auto rv = ser_type(x->value, vtv, r.out.subspan(r.used + klen));
            if (!rv.ok()) return rv.error();
            size_t vlen = rv.value();
            if (vlen == 0) {
                r.overflow = true;
                return std::nullopt;
            }
            bview kb(r.out.data() + r.used, klen);
            bview vb(r.out.data() + r.used + klen, vlen);
            if (excludes_bytes(x->excluded, kb, vb))
                return sigma_error{sigma_code::excluded_key,
                                   "table key claimed by another group"};
            if (auto e = r.insert(klen, vlen)) return e;
        }
        return std::nullopt;
    }
    if (const auto* x = std::get_if<em_alt>(&g->v)) {
        if (const auto* l = std::get_if<tv_left>(&v.v)) return ser_mgroup(x->a, *l->v, r);
        if (const auto* rv = std::get_if<tv_right>(&v.v)) return ser_mgroup(x->b, *rv->v, r);
        return sigma_error{sigma_code::out_of_range, "expected a sum value"};
    }
    if (const auto* x = std::get_if<em_opt>(&g->v)) {
        if (const auto* s = std::get_if<tv_some>(&v.v)) return ser_mgroup(x->g, *s->v, r);
        if (std::holds_alternative<tv_none>(v.v)) return std::nullopt;
        return sigma_error{sigma_code::out_of_range, "expected an optional value"};
    }
    std::vector<emg_ptr> xs;
    elab_detail::flatten(g, xs);
    const typed_value* cur = &v;
    for (size_t i = 0; i < xs.size(); ++i) {
        const typed_value* piece = cur;
        if (i + 1 < xs.size()) {
            const auto* p = std::get_if<tv_pair>(&cur->v);
            if (!p) return sigma_error{sigma_code::out_of_range, "expected a pair value"};
            piece = p->a.get();
            cur = p->b.get();
        }
        if (auto e = ser_mgroup(xs[i], *piece, r)) return e;
        if (r.overflow) return std::nullopt;
    }
    return std::nullopt;
}

inline ser_result ser_type(const etype_ptr& t, const typed_value& v, std::span<byte> out) {
    using R = ser_result;
    if (const auto* x = std::get_if<t_base>(&t->v)) {
        switch (x->b) {
            case base_type::any: {
                const auto* b = std::get_if<tv_bytes>(&v.v);
                if (!b) return R(sigma_error{sigma_code::out_of_range, "expected item bytes"});
                auto c = cbor::det_check(b->v);
                if (!c.ok() || c.value() != b->v.size())
                    return R(sigma_error{sigma_code::out_of_range,
                                         "bytes are not one canonical item"});
                if (out.size() < b->v.size()) return R(size_t{0});
                std::memcpy(out.data(), b->v.data(), b->v.size());
                return R(b->v.size());
            }
            case base_type::uint_: {
                const auto* u = std::get_if<tv_uint>(&v.v);
                if (!u) return R(sigma_error{sigma_code::out_of_range, "expected uint"});
                return R(emit_int(false, u->v, out));
            }
            case base_type::nint: {
                const auto* n = std::get_if<tv_nint>(&v.v);
                if (!n) return R(sigma_error{sigma_code::out_of_range, "expected nint"});
                return R(emit_int(true, n->arg, out));
            }
            case base_type::int_: {
                if (const auto* u = std::get_if<tv_uint>(&v.v))
                    return R(emit_int(false, u->v, out));
                if (const auto* n = std::get_if<tv_nint>(&v.v))
                    return R(emit_int(true, n->arg, out));
                return R(sigma_error{sigma_code::out_of_range, "expected int"});
            }
            case base_type::tstr: {
                const auto* s = std::get_if<tv_text>(&v.v);
                if (!s) return R(sigma_error{sigma_code::out_of_range, "expected text"});
                if (!utf8_valid(as_bview(s->v)))
                    return R(sigma_error{sigma_code::invalid_utf8, "text payload"});
                return R(emit_payload(cbor::mt_tstr, as_bview(s->v), out));
            }
            case base_type::bstr: {
                const auto* b = std::get_if<tv_bytes>(&v.v);
                if (!b) return R(sigma_error{sigma_code::out_of_range, "expected bytes"});
                return R(emit_payload(cbor::mt_bstr, b->v, out));
            }
        }
    }
    if (const auto* x = std::get_if<t_lit_int>(&t->v)) {
        if (!std::holds_alternative<tv_unit>(v.v))
            return R(sigma_error{sigma_code::out_of_range, "literal binds unit"});
        return R(emit_int(x->negative, x->arg, out));
    }
    if (const auto* x = std::get_if<t_lit_text>(&t->v)) {
        if (!std::holds_alternative<tv_unit>(v.v))
            return R(sigma_error{sigma_code::out_of_range, "literal binds unit"});
        return R(emit_payload(cbor::mt_tstr, as_bview(x->s), out));
    }
    if (const auto* x = std::get_if<t_lit_simple>(&t->v)) {
        if (!std::holds_alternative<tv_unit>(v.v))
            return R(sigma_error{sigma_code::out_of_range, "literal binds unit"});
        cbor::raw_uint arg = x->v <= 23 ? cbor::raw_uint{x->v, 0} : cbor::raw_uint{x->v, 1};
        return R(cbor::encode_header({cbor::mt_simple, arg}, out));
    }
    if (const auto* x = std::get_if<t_int_range>(&t->v)) {
        bool neg;
        std::uint64_t arg;
        if (const auto* u = std::get_if<tv_uint>(&v.v)) {
            neg = false, arg = u->v;
        } else if (const auto* n = std::get_if<tv_nint>(&v.v)) {
            neg = true, arg = n->arg;
        } else {
            return R(sigma_error{sigma_code::out_of_range, "expected int"});
        }
        auto val = elab_detail::lit_value(t_lit_int{neg, arg});
        if (val < elab_detail::lit_value(x->lo) || elab_detail::lit_value(x->hi) < val)
            return R(sigma_error{sigma_code::out_of_range, "int outside its declared range"});
        return R(emit_int(neg, arg, out));
    }
    if (const auto* x = std::get_if<t_size>(&t->v)) {
        bview payload;
        byte major;
        if (x->b == base_type::tstr) {
            const auto* s = std::get_if<tv_text>(&v.v);
            if (!s) return R(sigma_error{sigma_code::out_of_range, "expected text"});
            if (!utf8_valid(as_bview(s->v)))
                return R(sigma_error{sigma_code::invalid_utf8, "text payload"});
            payload = as_bview(s->v), major = cbor::mt_tstr;
        } else {
            const auto* b = std::get_if<tv_bytes>(&v.v);
            if (!b) return R(sigma_error{sigma_code::out_of_range, "expected bytes"});
            payload = b->v, major = cbor::mt_bstr;
        }
        if (payload.size() < x->lo || x->hi < payload.size())
            return R(sigma_error{sigma_code::out_of_range, "payload size outside bounds"});
        return R(emit_payload(major, payload, out));
    }
    if (const auto* x = std::get_if<e_choice>(&t->v)) {
        if (const auto* l = std::get_if<tv_left>(&v.v)) return ser_type(x->a, *l->v, out);
        if (const auto* r = std::get_if<tv_right>(&v.v)) return ser_type(x->b, *r->v, out);
        return R(sigma_error{sigma_code::out_of_range, "expected a sum value"});
    }
    if (const auto* x = std::get_if<e_array>(&t->v)) {
        if (!x->g) {
            if (!std::holds_alternative<tv_unit>(v.v))
                return R(sigma_error{sigma_code::out_of_range, "empty array binds unit"});
            return R(cbor::encode_header({cbor::mt_array, cbor::min_uint(0)}, out));
        }
        auto r = ser_agroup(x->g, v, out);
        if (!r.ok()) return R(r.error());
        if (r.value().overflow) return R(size_t{0});
        return R(emit_wrap(cbor::mt_array, r.value().count, r.value().bytes, out));
    }
    const auto& x = std::get<e_map>(t->v);
    if (!x.g) {
        if (!std::holds_alternative<tv_unit>(v.v))
            return R(sigma_error{sigma_code::out_of_range, "empty map binds unit"});
        return R(cbor::encode_header({cbor::mt_map, cbor::min_uint(0)}, out));
    }
    map_region reg{out};
    if (auto e = ser_mgroup(x.g, v, reg)) return R(*e);
    if (reg.overflow) return R(size_t{0});
    return R(emit_wrap(cbor::mt_map, reg.entries, reg.used, out));
}

// Serialize and then confirm the committed matcher re-derives the value's
// structure: a value whose encoding the schema itself rejects (an optional
// or repetition the greedy walk would resolve differently) is not
// serializable, even though each constructor fit its local shape.
inline ser_result serialize_full(const etype_ptr& root, const typed_value& v,
                                 std::span<byte> out) {
    auto r = ser_type(root, v, out);
    if (!r.ok() || r.value() == 0) return r;
    bview written(out.data(), r.value());
    auto chk = cbor::det_check(written);
    assert(chk.ok() && chk.value() == written.size());
    (void)chk;
    vctx cx;
    if (!vtype(*root, written, cx))
        return ser_result(sigma_error{sigma_code::out_of_range,
                                      "value cannot be reproduced by committed matching"});
    return r;
}

}  // namespace rt_detail

// Deterministic encoding of a typed value; 0 means the buffer is too small,
// a sigma error means no buffer would suffice.
inline result<size_t, sigma_error> serialize(const elab_schema& es, const typed_value& v,
                                             std::span<byte> out) {
    return rt_detail::serialize_full(es.root, v, out);
}

inline result<std::vector<byte>, sigma_error> serialize(const elab_schema& es,
                                                        const typed_value& v) {
    std::vector<byte> out(64);
    for (;;) {
        auto r = rt_detail::serialize_full(es.root, v, out);
        if (!r.ok()) return r.error();
        if (r.value() != 0) {
            out.resize(r.value());
            return out;
        }
        out.resize(out.size() * 2);
    }
}

// Serializability: pass exactly when serialize would produce canonical
// bytes for this value (dry run against a growing scratch buffer).
inline std::optional<sigma_error> sigma_check(const etype_ptr& t, const typed_value& v) {
    std::vector<byte> scratch(256);
    for (;;) {
        auto r = rt_detail::serialize_full(t, v, scratch);
        if (!r.ok()) return r.error();
        if (r.value() != 0) return std::nullopt;
        scratch.resize(scratch.size() * 2);
    }
}

inline std::optional<sigma_error> sigma_check(const elab_schema& es, const typed_value& v) {
    return sigma_check(es.root, v);
}

}  // namespace detcbor::cddl

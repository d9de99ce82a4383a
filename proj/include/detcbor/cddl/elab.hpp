#pragma once

// Schema elaboration: rewrites map groups into a canonical deterministic
// form, annotates tables with the key/value footprints they must exclude,
// enforces the disjointness side conditions that make parsing unambiguous,
// and derives the high-level binding shape of a schema.

#include <detcbor/cddl/ast.hpp>
#include <detcbor/cddl/print.hpp>
#include <detcbor/cddl/sem.hpp>
#include <detcbor/det.hpp>

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace detcbor::cddl {

enum class elab_code : std::uint8_t {
    non_disjoint_alternatives,
    non_deterministic_map_group,
    greedy_star_overlap,
    footprint_overlap,
};

struct elab_error {
    elab_code code;
    std::string detail;
};

inline const char* to_string(elab_code c) {
    switch (c) {
        case elab_code::non_disjoint_alternatives: return "non_disjoint_alternatives";
        case elab_code::non_deterministic_map_group: return "non_deterministic_map_group";
        case elab_code::greedy_star_overlap: return "greedy_star_overlap";
        case elab_code::footprint_overlap: return "footprint_overlap";
    }
    return "?";
}

// --- exclusions: a disjunction of (key type, value type) atoms ---
//
// An atom (tk, tv) excludes a map entry (k, v) when k matches tk and v
// matches tv. The empty set excludes nothing. Key-only exclusions use
// value type `any`.

struct kv_atom {
    type_ptr key, value;
};

struct exclusion_set {
    std::vector<kv_atom> atoms;
};

// --- elaborated trees ---
//
// Mirror of the surface grammar after elaboration. Map stars have been
// turned into tables carrying their exclusion set; all other nodes keep a
// one-to-one correspondence with the surface form. Leaf types are shared
// with the surface AST; entry and table nodes additionally keep the surface
// type of their key/value so exclusion atoms can be evaluated uniformly.

struct elab_type;
struct elab_array_group;
struct elab_map_group;
using etype_ptr = std::shared_ptr<const elab_type>;
using eag_ptr = std::shared_ptr<const elab_array_group>;
using emg_ptr = std::shared_ptr<const elab_map_group>;

struct e_array {
    eag_ptr g;  // null = empty group
};
struct e_map {
    emg_ptr g;  // null = empty group
};
struct e_choice {
    etype_ptr a, b;  // disjoint by construction
};
struct elab_type {
    std::variant<t_base, t_lit_int, t_lit_text, t_lit_simple, t_int_range, t_size, e_array, e_map,
                 e_choice>
        v;
};

struct ea_elem {
    etype_ptr t;
};
struct ea_alt {
    eag_ptr a, b;
};
struct ea_opt {
    eag_ptr g;
};
struct ea_concat {
    eag_ptr a, b;
};
struct ea_star {
    eag_ptr g;
};
struct elab_array_group {
    std::variant<ea_elem, ea_alt, ea_opt, ea_concat, ea_star> v;
};

struct em_entry {
    type_ptr key_t;   // literal surface type of the key
    canon_item key;   // the same literal as an item
    type_ptr value_t;  // surface type of the value
    etype_ptr value;
    bool cut = false;
};
struct em_table {
    type_ptr key_t;
    etype_ptr key;
    exclusion_set excluded;
    type_ptr value_t;
    etype_ptr value;
};
struct em_alt {
    emg_ptr a, b;
};
struct em_opt {
    emg_ptr g;
};
struct em_concat {
    emg_ptr a, b;
};
struct elab_map_group {
    std::variant<em_entry, em_table, em_alt, em_opt, em_concat> v;
};

inline etype_ptr mk(elab_type t) { return std::make_shared<const elab_type>(std::move(t)); }
inline eag_ptr mk(elab_array_group g) {
    return std::make_shared<const elab_array_group>(std::move(g));
}
inline emg_ptr mk(elab_map_group g) { return std::make_shared<const elab_map_group>(std::move(g)); }

// --- binding shapes ---
//
// The high-level value bound by a schema: literals bind unit (their value
// carries no information), concatenations bind right-nested pairs, choices
// a sum, array stars a list, and map tables a finite association. `any` and
// `bstr` both bind byte strings; an `any` binds its own canonical encoding.

struct binding_shape;
using shape_ptr = std::shared_ptr<const binding_shape>;

struct sh_unit {};
struct sh_uint {};
struct sh_int {};
struct sh_text {};
struct sh_bytes {};
struct sh_sum {
    shape_ptr l, r;
};
struct sh_pair {
    shape_ptr a, b;
};
struct sh_list {
    shape_ptr elem;
};
struct sh_table {
    shape_ptr key, value;
};
struct sh_option {
    shape_ptr inner;
};
struct binding_shape {
    std::variant<sh_unit, sh_uint, sh_int, sh_text, sh_bytes, sh_sum, sh_pair, sh_list, sh_table,
                 sh_option>
        v;
};

inline shape_ptr mk(binding_shape s) { return std::make_shared<const binding_shape>(std::move(s)); }

inline std::string print_shape(const binding_shape& s) {
    if (std::holds_alternative<sh_unit>(s.v)) return "Unit";
    if (std::holds_alternative<sh_uint>(s.v)) return "UInt";
    if (std::holds_alternative<sh_int>(s.v)) return "Int";
    if (std::holds_alternative<sh_text>(s.v)) return "Text";
    if (std::holds_alternative<sh_bytes>(s.v)) return "Bytes";
    if (const auto* x = std::get_if<sh_sum>(&s.v))
        return "Sum(" + print_shape(*x->l) + ", " + print_shape(*x->r) + ")";
    if (const auto* x = std::get_if<sh_pair>(&s.v))
        return "Pair(" + print_shape(*x->a) + ", " + print_shape(*x->b) + ")";
    if (const auto* x = std::get_if<sh_list>(&s.v)) return "List(" + print_shape(*x->elem) + ")";
    if (const auto* x = std::get_if<sh_table>(&s.v))
        return "Table(" + print_shape(*x->key) + ", " + print_shape(*x->value) + ")";
    const auto& x = std::get<sh_option>(s.v);
    return "Option(" + print_shape(*x.inner) + ")";
}

inline bool shape_equal(const binding_shape& a, const binding_shape& b) {
    if (a.v.index() != b.v.index()) return false;
    if (const auto* x = std::get_if<sh_sum>(&a.v)) {
        const auto& y = std::get<sh_sum>(b.v);
        return shape_equal(*x->l, *y.l) && shape_equal(*x->r, *y.r);
    }
    if (const auto* x = std::get_if<sh_pair>(&a.v)) {
        const auto& y = std::get<sh_pair>(b.v);
        return shape_equal(*x->a, *y.a) && shape_equal(*x->b, *y.b);
    }
    if (const auto* x = std::get_if<sh_list>(&a.v))
        return shape_equal(*x->elem, *std::get<sh_list>(b.v).elem);
    if (const auto* x = std::get_if<sh_table>(&a.v)) {
        const auto& y = std::get<sh_table>(b.v);
        return shape_equal(*x->key, *y.key) && shape_equal(*x->value, *y.value);
    }
    if (const auto* x = std::get_if<sh_option>(&a.v))
        return shape_equal(*x->inner, *std::get<sh_option>(b.v).inner);
    return true;  // leaves carry no payload
}

// --- type lattice helpers ---

inline type_ptr bottom_type() { return trange(t_lit_int{false, 1}, t_lit_int{false, 0}); }
inline type_ptr any_type() { return tbase(base_type::any); }

namespace elab_detail {

using i128 = __int128;

inline i128 lit_value(const t_lit_int& l) {
    return l.negative ? i128{-1} - i128(l.arg) : i128(l.arg);
}

inline t_lit_int lit_of(i128 v) {
    return v < 0 ? t_lit_int{true, std::uint64_t(i128{-1} - v)} : t_lit_int{false, std::uint64_t(v)};
}

struct ival {
    i128 lo, hi;  // empty when lo > hi
};

constexpr i128 u64_max_v = i128(~std::uint64_t{0});

// integer domain of a non-choice type, if it has one
inline std::optional<ival> int_domain(const type_expr& t) {
    if (const auto* b = std::get_if<t_base>(&t.v)) {
        switch (b->b) {
            case base_type::uint_: return ival{0, u64_max_v};
            case base_type::nint: return ival{i128{-1} - u64_max_v, -1};
            case base_type::int_: return ival{i128{-1} - u64_max_v, u64_max_v};
            default: return std::nullopt;
        }
    }
    if (const auto* l = std::get_if<t_lit_int>(&t.v)) return ival{lit_value(*l), lit_value(*l)};
    if (const auto* r = std::get_if<t_int_range>(&t.v))
        return ival{lit_value(r->lo), lit_value(r->hi)};
    return std::nullopt;
}

enum class tkind : std::uint8_t { ints, text, bytes, simple, array, map, any };

inline std::optional<tkind> kind_of(const type_expr& t) {
    if (const auto* b = std::get_if<t_base>(&t.v)) {
        switch (b->b) {
            case base_type::any: return tkind::any;
            case base_type::tstr: return tkind::text;
            case base_type::bstr: return tkind::bytes;
            default: return tkind::ints;
        }
    }
    if (std::holds_alternative<t_lit_int>(t.v) || std::holds_alternative<t_int_range>(t.v))
        return tkind::ints;
    if (std::holds_alternative<t_lit_text>(t.v)) return tkind::text;
    if (std::holds_alternative<t_lit_simple>(t.v)) return tkind::simple;
    if (const auto* s = std::get_if<t_size>(&t.v))
        return s->b == base_type::tstr ? tkind::text : tkind::bytes;
    if (std::holds_alternative<t_array>(t.v)) return tkind::array;
    if (std::holds_alternative<t_map>(t.v)) return tkind::map;
    return std::nullopt;  // t_choice, t_ref
}

}  // namespace elab_detail

inline bool is_bottom(const type_expr& t) {
    if (const auto* r = std::get_if<t_int_range>(&t.v))
        return elab_detail::lit_value(r->lo) > elab_detail::lit_value(r->hi);
    if (const auto* s = std::get_if<t_size>(&t.v)) return s->lo > s->hi;
    if (const auto* c = std::get_if<t_choice>(&t.v)) return is_bottom(*c->a) && is_bottom(*c->b);
    return false;
}

inline bool is_any(const type_expr& t) {
    const auto* b = std::get_if<t_base>(&t.v);
    return b && b->b == base_type::any;
}

// Sound but incomplete: true only when no item can satisfy both types.
inline bool check_disjoint(const type_expr& a, const type_expr& b) {
    using namespace elab_detail;
    if (is_bottom(a) || is_bottom(b)) return true;
    if (const auto* c = std::get_if<t_choice>(&a.v))
        return check_disjoint(*c->a, b) && check_disjoint(*c->b, b);
    if (const auto* c = std::get_if<t_choice>(&b.v))
        return check_disjoint(a, *c->a) && check_disjoint(a, *c->b);
    auto ka = kind_of(a), kb = kind_of(b);
    if (!ka || !kb) return false;  // unresolved reference: stay conservative
    if (*ka == tkind::any || *kb == tkind::any) return false;
    if (*ka != *kb) return true;
    switch (*ka) {
        case tkind::ints: {
            auto da = int_domain(a), db = int_domain(b);
            return da->hi < db->lo || db->hi < da->lo;
        }
        case tkind::text:
        case tkind::bytes: {
            const auto* la = std::get_if<t_lit_text>(&a.v);
            const auto* lb = std::get_if<t_lit_text>(&b.v);
            if (la && lb) return la->s != lb->s;
            const auto* sa = std::get_if<t_size>(&a.v);
            const auto* sb = std::get_if<t_size>(&b.v);
            if (la && sb) return la->s.size() < sb->lo || la->s.size() > sb->hi;
            if (lb && sa) return lb->s.size() < sa->lo || lb->s.size() > sa->hi;
            if (sa && sb) return sa->hi < sb->lo || sb->hi < sa->lo;
            return false;  // a plain tstr/bstr overlaps every string
        }
        case tkind::simple:
            return std::get<t_lit_simple>(a.v).v != std::get<t_lit_simple>(b.v).v;
        default: return false;  // arrays and maps: no structural refinement
    }
}

// Sound but incomplete: true only when every item of a satisfies b.
inline bool type_subset(const type_expr& a, const type_expr& b) {
    using namespace elab_detail;
    if (is_bottom(a)) return true;
    if (is_any(b)) return true;
    if (equal(a, b)) return true;
    if (const auto* c = std::get_if<t_choice>(&a.v))
        return type_subset(*c->a, b) && type_subset(*c->b, b);
    if (const auto* c = std::get_if<t_choice>(&b.v))
        return type_subset(a, *c->a) || type_subset(a, *c->b);
    auto da = int_domain(a), db = int_domain(b);
    if (da && db) return db->lo <= da->lo && da->hi <= db->hi;
    const auto* bb = std::get_if<t_base>(&b.v);
    if (const auto* la = std::get_if<t_lit_text>(&a.v)) {
        if (bb && bb->b == base_type::tstr) return true;
        if (const auto* sb = std::get_if<t_size>(&b.v))
            return sb->b == base_type::tstr && sb->lo <= la->s.size() && la->s.size() <= sb->hi;
        return false;
    }
    if (const auto* sa = std::get_if<t_size>(&a.v)) {
        if (bb && bb->b == sa->b) return true;
        if (const auto* sb = std::get_if<t_size>(&b.v))
            return sa->b == sb->b && sb->lo <= sa->lo && sa->hi <= sb->hi;
        return false;
    }
    return false;
}

// Sound underapproximation of the intersection: every item satisfying the
// result satisfies both inputs (the reverse need not hold; unknown cases
// collapse to bottom).
inline type_ptr type_intersect_under(const type_ptr& a, const type_ptr& b) {
    using namespace elab_detail;
    if (equal(*a, *b)) return a;
    if (is_bottom(*a)) return a;
    if (is_bottom(*b)) return b;
    if (is_any(*a)) return b;
    if (is_any(*b)) return a;
    auto via_choice = [](const t_choice& c, const type_ptr& t) {
        type_ptr l = type_intersect_under(c.a, t);
        type_ptr r = type_intersect_under(c.b, t);
        if (is_bottom(*l)) return r;
        if (is_bottom(*r)) return l;
        return tchoice(std::move(l), std::move(r));
    };
    if (const auto* c = std::get_if<t_choice>(&a->v)) return via_choice(*c, b);
    if (const auto* c = std::get_if<t_choice>(&b->v)) return via_choice(*c, a);
    auto da = int_domain(*a), db = int_domain(*b);
    if (da && db) {
        i128 lo = std::max(da->lo, db->lo), hi = std::min(da->hi, db->hi);
        if (lo > hi) return bottom_type();
        if (lo == hi) return mk(type_expr{lit_of(lo)});
        return trange(lit_of(lo), lit_of(hi));
    }
    auto ka = kind_of(*a), kb = kind_of(*b);
    if (!ka || !kb || *ka != *kb) return bottom_type();
    if (*ka == tkind::text || *ka == tkind::bytes) {
        const auto* la = std::get_if<t_lit_text>(&a->v);
        const auto* lb = std::get_if<t_lit_text>(&b->v);
        if (la || lb) {
            const type_ptr& lit = la ? a : b;
            return type_subset(*lit, la ? *b : *a) ? lit : bottom_type();
        }
        const auto* sa = std::get_if<t_size>(&a->v);
        const auto* sb = std::get_if<t_size>(&b->v);
        if (sa && sb) {
            std::uint64_t lo = std::max(sa->lo, sb->lo), hi = std::min(sa->hi, sb->hi);
            return lo <= hi ? tsize(sa->b, lo, hi) : bottom_type();
        }
        return sa ? a : b;  // the sized side refines the plain base
    }
    return bottom_type();
}

// --- exclusion evaluation and combination ---

inline bool excludes(const exclusion_set& e, const canon_item& k, const canon_item& v) {
    for (const auto& a : e.atoms)
        if (type_sem(*a.key, k) && type_sem(*a.value, v)) return true;
    return false;
}

// Underapproximated conjunction of two exclusion formulas (pairwise atom
// intersection keeps only what both sides are guaranteed to exclude).
inline exclusion_set intersect(const exclusion_set& a, const exclusion_set& b) {
    exclusion_set r;
    for (const auto& x : a.atoms)
        for (const auto& y : b.atoms) {
            kv_atom at{type_intersect_under(x.key, y.key), type_intersect_under(x.value, y.value)};
            if (!is_bottom(*at.key) && !is_bottom(*at.value)) r.atoms.push_back(std::move(at));
        }
    return r;
}

inline std::optional<canon_item> literal_item(const type_expr& t) {
    if (const auto* l = std::get_if<t_lit_int>(&t.v))
        return l->negative ? cbor::cnint(l->arg) : cbor::cuint(l->arg);
    if (const auto* l = std::get_if<t_lit_text>(&t.v)) return cbor::ctext(l->s);
    if (const auto* l = std::get_if<t_lit_simple>(&t.v)) return cbor::csimple(l->v);
    return std::nullopt;
}

// --- array group analysis (on the surface AST) ---

inline bool ag_nullable(const array_group& g) {
    if (std::holds_alternative<ag_elem>(g.v)) return false;
    if (const auto* x = std::get_if<ag_alt>(&g.v)) return ag_nullable(*x->a) || ag_nullable(*x->b);
    if (const auto* x = std::get_if<ag_concat>(&g.v))
        return ag_nullable(*x->a) && ag_nullable(*x->b);
    return true;  // opt, star
}

// types of items that can begin a match of g
inline void first_types(const array_group& g, std::vector<type_ptr>& out) {
    if (const auto* x = std::get_if<ag_elem>(&g.v)) {
        out.push_back(x->t);
    } else if (const auto* x = std::get_if<ag_alt>(&g.v)) {
        first_types(*x->a, out), first_types(*x->b, out);
    } else if (const auto* x = std::get_if<ag_opt>(&g.v)) {
        first_types(*x->g, out);
    } else if (const auto* x = std::get_if<ag_star>(&g.v)) {
        first_types(*x->g, out);
    } else {
        const auto& c = std::get<ag_concat>(g.v);
        first_types(*c.a, out);
        if (ag_nullable(*c.a)) first_types(*c.b, out);
    }
}

inline bool first_disjoint(const array_group& a, const array_group& b) {
    std::vector<type_ptr> fa, fb;
    first_types(a, fa), first_types(b, fb);
    for (const auto& x : fa)
        for (const auto& y : fb)
            if (!check_disjoint(*x, *y)) return false;
    return true;
}

namespace elab_detail {

inline void flatten(const agroup_ptr& g, std::vector<agroup_ptr>& out) {
    if (const auto* c = std::get_if<ag_concat>(&g->v))
        flatten(c->a, out), flatten(c->b, out);
    else
        out.push_back(g);
}

}  // namespace elab_detail

// A greedy piece that may match nothing (a star, an optional, or an
// alternative with a skippable branch) must not be able to steal items from
// whatever follows it: its first items must be disjoint from the first
// items of every piece that can come next, up to and including the first
// piece that cannot be skipped. This keeps the committed left-to-right walk
// faithful to the declarative reading.
inline std::optional<elab_error> check_array_stars(const array_group& g) {
    if (const auto* x = std::get_if<ag_alt>(&g.v)) {
        if (auto e = check_array_stars(*x->a)) return e;
        return check_array_stars(*x->b);
    }
    if (const auto* x = std::get_if<ag_opt>(&g.v)) return check_array_stars(*x->g);
    if (const auto* x = std::get_if<ag_star>(&g.v)) return check_array_stars(*x->g);
    if (!std::holds_alternative<ag_concat>(g.v)) return std::nullopt;

    std::vector<agroup_ptr> seq;
    {
        const auto& c = std::get<ag_concat>(g.v);
        elab_detail::flatten(c.a, seq), elab_detail::flatten(c.b, seq);
    }
    for (size_t i = 0; i < seq.size(); ++i) {
        if (auto e = check_array_stars(*seq[i])) return e;
        if (!ag_nullable(*seq[i])) continue;
        for (size_t j = i + 1; j < seq.size(); ++j) {
            if (!first_disjoint(*seq[i], *seq[j])) {
                return elab_error{elab_code::greedy_star_overlap,
                                  "a skippable group can consume items intended for what follows it"};
            }
            if (!ag_nullable(*seq[j])) break;
        }
    }
    return std::nullopt;
}

// --- map star rewriting ---

namespace elab_detail {

inline mgroup_ptr rewrite_stars_rec(const mgroup_ptr& g, std::vector<std::string>& notes) {
    if (!g) return g;
    if (std::holds_alternative<mg_entry>(g->v)) return g;
    if (const auto* x = std::get_if<mg_alt>(&g->v))
        return malt(rewrite_stars_rec(x->a, notes), rewrite_stars_rec(x->b, notes));
    if (const auto* x = std::get_if<mg_opt>(&g->v)) return mopt(rewrite_stars_rec(x->g, notes));
    if (const auto* x = std::get_if<mg_concat>(&g->v))
        return mcat(rewrite_stars_rec(x->a, notes), rewrite_stars_rec(x->b, notes));
    const auto& x = std::get<mg_star>(g->v);
    mgroup_ptr body = rewrite_stars_rec(x.g, notes);
    if (const auto* alt = std::get_if<mg_alt>(&body->v)) {
        notes.push_back("split repeated alternative into consecutive repetitions");
        return mcat(rewrite_stars_rec(mstar(alt->a), notes),
                    rewrite_stars_rec(mstar(alt->b), notes));
    }
    return mstar(body);
}

}  // namespace elab_detail

// Split every star over an alternative of entries into a concatenation of
// independent stars, then require the deterministic form.
inline result<mgroup_ptr, elab_error> rewrite_stars(const mgroup_ptr& g,
                                                    std::vector<std::string>& notes) {
    if (!g) return mgroup_ptr{};
    mgroup_ptr r = elab_detail::rewrite_stars_rec(g, notes);
    if (!is_det_form(*r))
        return elab_error{elab_code::non_deterministic_map_group, print_type(*tmap(r))};
    return r;
}

inline result<mgroup_ptr, elab_error> rewrite_stars(const mgroup_ptr& g) {
    std::vector<std::string> notes;
    return rewrite_stars(g, notes);
}

// --- elaborated group analysis ---

inline bool em_nullable(const elab_map_group& g) {
    if (std::holds_alternative<em_entry>(g.v)) return false;
    if (std::holds_alternative<em_table>(g.v)) return true;
    if (const auto* x = std::get_if<em_alt>(&g.v)) return em_nullable(*x->a) || em_nullable(*x->b);
    if (const auto* x = std::get_if<em_concat>(&g.v))
        return em_nullable(*x->a) && em_nullable(*x->b);
    return true;  // opt
}

// what a group may consume (or poison): cut entries claim every value
struct fp_atom {
    type_ptr key, value;
    const exclusion_set* minus = nullptr;  // table exclusions refine the claim
};

inline void footprint(const elab_map_group& g, std::vector<fp_atom>& out) {
    if (const auto* x = std::get_if<em_entry>(&g.v)) {
        out.push_back({x->key_t, x->cut ? any_type() : x->value_t, nullptr});
    } else if (const auto* x = std::get_if<em_table>(&g.v)) {
        out.push_back({x->key_t, x->value_t, &x->excluded});
    } else if (const auto* x = std::get_if<em_alt>(&g.v)) {
        footprint(*x->a, out), footprint(*x->b, out);
    } else if (const auto* x = std::get_if<em_opt>(&g.v)) {
        footprint(*x->g, out);
    } else {
        const auto& c = std::get<em_concat>(g.v);
        footprint(*c.a, out), footprint(*c.b, out);
    }
}

inline bool fp_disjoint(const fp_atom& a, const fp_atom& b) {
    if (check_disjoint(*a.key, *b.key) || check_disjoint(*a.value, *b.value)) return true;
    auto covered = [](const fp_atom& who, const fp_atom& other) {
        if (!who.minus) return false;
        for (const auto& ex : who.minus->atoms)
            if (type_subset(*other.key, *ex.key) && type_subset(*other.value, *ex.value))
                return true;
        return false;
    };
    return covered(a, b) || covered(b, a);
}

inline bool fp_disjoint(const elab_map_group& a, const elab_map_group& b) {
    std::vector<fp_atom> fa, fb;
    footprint(a, fa), footprint(b, fb);
    for (const auto& x : fa)
        for (const auto& y : fb)
            if (!fp_disjoint(x, y)) return false;
    return true;
}

// Concatenated and alternated groups must claim disjoint entries.
inline std::optional<elab_error> check_footprints(const elab_map_group& g) {
    if (const auto* x = std::get_if<em_concat>(&g.v)) {
        if (!fp_disjoint(*x->a, *x->b))
            return elab_error{elab_code::footprint_overlap,
                              "concatenated map groups can claim the same entry"};
        if (auto e = check_footprints(*x->a)) return e;
        return check_footprints(*x->b);
    }
    if (const auto* x = std::get_if<em_alt>(&g.v)) {
        if (!fp_disjoint(*x->a, *x->b))
            return elab_error{elab_code::footprint_overlap,
                              "alternative map groups can claim the same entry"};
        if (auto e = check_footprints(*x->a)) return e;
        return check_footprints(*x->b);
    }
    if (const auto* x = std::get_if<em_opt>(&g.v)) return check_footprints(*x->g);
    return std::nullopt;
}

// --- the elaborator ---

struct elab_schema {
    etype_ptr root;
    shape_ptr shape;
    std::vector<std::string> notes;
};

namespace elab_detail {

struct elaborator {
    std::vector<std::string> notes;

    etype_ptr type(const type_ptr& t) {
        if (const auto* x = std::get_if<t_base>(&t->v)) return mk(elab_type{*x});
        if (const auto* x = std::get_if<t_lit_int>(&t->v)) return mk(elab_type{*x});
        if (const auto* x = std::get_if<t_lit_text>(&t->v)) return mk(elab_type{*x});
        if (const auto* x = std::get_if<t_lit_simple>(&t->v)) return mk(elab_type{*x});
        if (const auto* x = std::get_if<t_int_range>(&t->v)) return mk(elab_type{*x});
        if (const auto* x = std::get_if<t_size>(&t->v)) return mk(elab_type{*x});
        if (const auto* x = std::get_if<t_choice>(&t->v)) {
            if (!check_disjoint(*x->a, *x->b))
                throw elab_error{elab_code::non_disjoint_alternatives,
                                 print_type(*x->a) + " / " + print_type(*x->b)};
            etype_ptr a = type(x->a), b = type(x->b);
            return mk(elab_type{e_choice{std::move(a), std::move(b)}});
        }
        if (const auto* x = std::get_if<t_array>(&t->v)) {
            if (!x->g) return mk(elab_type{e_array{nullptr}});
            if (auto e = check_array_stars(*x->g)) throw *e;
            return mk(elab_type{e_array{agroup(x->g)}});
        }
        if (const auto* x = std::get_if<t_map>(&t->v)) {
            if (!x->g) return mk(elab_type{e_map{nullptr}});
            auto rw = rewrite_stars(x->g, notes);
            if (!rw.ok()) throw rw.error();
            auto [excl, eg] = mgroup(exclusion_set{}, rw.value());
            (void)excl;
            if (auto e = check_alternatives(*eg)) throw *e;
            if (auto e = check_footprints(*eg)) throw *e;
            return mk(elab_type{e_map{std::move(eg)}});
        }
        assert(!"elaborate requires an inlined type");
        return nullptr;
    }

    eag_ptr agroup(const agroup_ptr& g) {
        if (const auto* x = std::get_if<ag_elem>(&g->v)) return mk(elab_array_group{ea_elem{type(x->t)}});
        if (const auto* x = std::get_if<ag_alt>(&g->v)) {
            if (ag_nullable(*x->a))
                throw elab_error{elab_code::non_disjoint_alternatives,
                                 "left array alternative can match nothing; the right is unreachable"};
            if (!first_disjoint(*x->a, *x->b))
                throw elab_error{elab_code::non_disjoint_alternatives,
                                 "array alternatives can begin with the same item"};
            eag_ptr a = agroup(x->a), b = agroup(x->b);
            return mk(elab_array_group{ea_alt{std::move(a), std::move(b)}});
        }
        if (const auto* x = std::get_if<ag_opt>(&g->v)) {
            if (ag_nullable(*x->g))
                throw elab_error{elab_code::non_disjoint_alternatives,
                                 "optional array group can match nothing"};
            return mk(elab_array_group{ea_opt{agroup(x->g)}});
        }
        if (const auto* x = std::get_if<ag_concat>(&g->v)) {
            eag_ptr a = agroup(x->a), b = agroup(x->b);
            return mk(elab_array_group{ea_concat{std::move(a), std::move(b)}});
        }
        const auto& x = std::get<ag_star>(g->v);
        if (ag_nullable(*x.g))
            throw elab_error{elab_code::greedy_star_overlap,
                             "repeated array group can match nothing and would never terminate"};
        return mk(elab_array_group{ea_star{agroup(x.g)}});
    }

    em_entry entry_of(const mg_entry& e) {
        auto lit = literal_item(*e.key);
        assert(lit && "deterministic form requires literal entry keys");
        return em_entry{e.key, std::move(*lit), e.value, type(e.value), e.cut};
    }

    // the annotation walk: (excluded-so-far, group) -> (excluded-after, group')
    std::pair<exclusion_set, emg_ptr> mgroup(exclusion_set acc, const mgroup_ptr& g) {
        if (const auto* x = std::get_if<mg_entry>(&g->v)) {
            acc.atoms.push_back({x->key, x->cut ? any_type() : x->value});
            return {std::move(acc), mk(elab_map_group{entry_of(*x)})};
        }
        if (const auto* x = std::get_if<mg_opt>(&g->v)) {
            if (const auto* e = std::get_if<mg_entry>(&x->g->v)) {
                // an unmatched optional entry proves the key/value pair is
                // absent, so it accumulates exactly like the entry itself
                acc.atoms.push_back({e->key, e->cut ? any_type() : e->value});
                return {std::move(acc), mk(elab_map_group{em_opt{mk(elab_map_group{entry_of(*e)})}})};
            }
            auto [inner_acc, inner] = mgroup(acc, x->g);
            (void)inner_acc;  // the optional branch guarantees nothing extra
            return {std::move(acc), mk(elab_map_group{em_opt{std::move(inner)}})};
        }
        if (const auto* x = std::get_if<mg_alt>(&g->v)) {
            // a leading cut entry commits: the right branch is only reached
            // when that key is entirely absent
            const mg_entry* head = nullptr;
            mgroup_ptr left_rest;
            if (const auto* e = std::get_if<mg_entry>(&x->a->v); e && e->cut) {
                head = e;
            } else if (const auto* c = std::get_if<mg_concat>(&x->a->v)) {
                if (const auto* e2 = std::get_if<mg_entry>(&c->a->v); e2 && e2->cut) {
                    head = e2;
                    left_rest = c->b;
                }
            }
            if (head) {
                exclusion_set seed = acc;
                seed.atoms.push_back({head->key, any_type()});
                emg_ptr left_em = mk(elab_map_group{entry_of(*head)});
                exclusion_set acc1 = seed;
                if (left_rest) {
                    auto [a1, rest_em] = mgroup(seed, left_rest);
                    acc1 = std::move(a1);
                    left_em = mk(elab_map_group{em_concat{std::move(left_em), std::move(rest_em)}});
                }
                auto [acc2, right_em] = mgroup(seed, x->b);
                return {intersect(acc1, acc2),
                        mk(elab_map_group{em_alt{std::move(left_em), std::move(right_em)}})};
            }
            auto [acc1, a_em] = mgroup(acc, x->a);
            auto [acc2, b_em] = mgroup(std::move(acc), x->b);
            return {intersect(acc1, acc2),
                    mk(elab_map_group{em_alt{std::move(a_em), std::move(b_em)}})};
        }
        if (const auto* x = std::get_if<mg_concat>(&g->v)) {
            auto [acc1, a_em] = mgroup(std::move(acc), x->a);
            auto [acc2, b_em] = mgroup(std::move(acc1), x->b);
            return {std::move(acc2),
                    mk(elab_map_group{em_concat{std::move(a_em), std::move(b_em)}})};
        }
        const auto& x = std::get<mg_star>(g->v);
        const auto* e = std::get_if<mg_entry>(&x.g->v);
        assert(e && !e->cut && "deterministic form requires stars over plain entries");
        if (!acc.atoms.empty())
            notes.push_back("table over " + print_type(*e->key) + " excludes " +
                            std::to_string(acc.atoms.size()) + " claimed key pattern(s)");
        em_table tbl{e->key, type(e->key), acc, e->value, type(e->value)};
        return {std::move(acc), mk(elab_map_group{std::move(tbl)})};
    }

    // post-check: committed alternatives need a reachable right branch and
    // claims that cannot collide; optionals must be able to fail
    std::optional<elab_error> check_alternatives(const elab_map_group& g) {
        if (const auto* x = std::get_if<em_alt>(&g.v)) {
            if (em_nullable(*x->a))
                return elab_error{elab_code::non_disjoint_alternatives,
                                  "left map alternative can match nothing; the right is unreachable"};
            if (!fp_disjoint(*x->a, *x->b))
                return elab_error{elab_code::non_disjoint_alternatives,
                                  "map alternatives can claim the same entry"};
            if (auto e = check_alternatives(*x->a)) return e;
            return check_alternatives(*x->b);
        }
        if (const auto* x = std::get_if<em_opt>(&g.v)) {
            if (em_nullable(*x->g))
                return elab_error{elab_code::non_disjoint_alternatives,
                                  "optional map group can match nothing"};
            return check_alternatives(*x->g);
        }
        if (const auto* x = std::get_if<em_concat>(&g.v)) {
            if (auto e = check_alternatives(*x->a)) return e;
            return check_alternatives(*x->b);
        }
        return std::nullopt;
    }
};

}  // namespace elab_detail

// Annotate a deterministic-form map group, threading the set of key/value
// patterns known to be absent from the remaining entries.
inline std::pair<exclusion_set, emg_ptr> annotate(exclusion_set acc, const mgroup_ptr& g) {
    elab_detail::elaborator e;
    return e.mgroup(std::move(acc), g);
}

// --- binding shape derivation ---

inline shape_ptr interp_type(const etype_ptr& t);

namespace elab_detail {

inline void flatten(const eag_ptr& g, std::vector<eag_ptr>& out) {
    if (const auto* c = std::get_if<ea_concat>(&g->v))
        flatten(c->a, out), flatten(c->b, out);
    else
        out.push_back(g);
}

inline void flatten(const emg_ptr& g, std::vector<emg_ptr>& out) {
    if (const auto* c = std::get_if<em_concat>(&g->v))
        flatten(c->a, out), flatten(c->b, out);
    else
        out.push_back(g);
}

template <class Ptr, class F>
shape_ptr pair_up(const std::vector<Ptr>& xs, const F& one) {
    shape_ptr s = one(xs.back());
    for (size_t i = xs.size() - 1; i-- > 0;) s = mk(binding_shape{sh_pair{one(xs[i]), s}});
    return s;
}

}  // namespace elab_detail

inline shape_ptr interp_agroup(const eag_ptr& g) {
    if (const auto* x = std::get_if<ea_elem>(&g->v)) return interp_type(x->t);
    if (const auto* x = std::get_if<ea_alt>(&g->v))
        return mk(binding_shape{sh_sum{interp_agroup(x->a), interp_agroup(x->b)}});
    if (const auto* x = std::get_if<ea_opt>(&g->v))
        return mk(binding_shape{sh_option{interp_agroup(x->g)}});
    if (const auto* x = std::get_if<ea_star>(&g->v))
        return mk(binding_shape{sh_list{interp_agroup(x->g)}});
    std::vector<eag_ptr> xs;
    elab_detail::flatten(g, xs);
    return elab_detail::pair_up(xs, [](const eag_ptr& p) { return interp_agroup(p); });
}

inline shape_ptr interp_mgroup(const emg_ptr& g) {
    if (const auto* x = std::get_if<em_entry>(&g->v))
        return mk(binding_shape{sh_pair{mk(binding_shape{sh_unit{}}), interp_type(x->value)}});
    if (const auto* x = std::get_if<em_table>(&g->v))
        return mk(binding_shape{sh_table{interp_type(x->key), interp_type(x->value)}});
    if (const auto* x = std::get_if<em_alt>(&g->v))
        return mk(binding_shape{sh_sum{interp_mgroup(x->a), interp_mgroup(x->b)}});
    if (const auto* x = std::get_if<em_opt>(&g->v))
        return mk(binding_shape{sh_option{interp_mgroup(x->g)}});
    std::vector<emg_ptr> xs;
    elab_detail::flatten(g, xs);
    return elab_detail::pair_up(xs, [](const emg_ptr& p) { return interp_mgroup(p); });
}

inline shape_ptr interp_type(const etype_ptr& t) {
    if (const auto* x = std::get_if<t_base>(&t->v)) {
        switch (x->b) {
            case base_type::uint_: return mk(binding_shape{sh_uint{}});
            case base_type::nint:
            case base_type::int_: return mk(binding_shape{sh_int{}});
            case base_type::tstr: return mk(binding_shape{sh_text{}});
            case base_type::bstr: return mk(binding_shape{sh_bytes{}});
            case base_type::any: return mk(binding_shape{sh_bytes{}});  // its own encoding
        }
    }
    if (std::holds_alternative<t_lit_int>(t->v) || std::holds_alternative<t_lit_text>(t->v) ||
        std::holds_alternative<t_lit_simple>(t->v))
        return mk(binding_shape{sh_unit{}});
    if (const auto* x = std::get_if<t_int_range>(&t->v))
        return mk(binding_shape{x->lo.negative ? binding_shape{sh_int{}}.v : binding_shape{sh_uint{}}.v});
    if (const auto* x = std::get_if<t_size>(&t->v))
        return mk(binding_shape{x->b == base_type::tstr ? binding_shape{sh_text{}}.v
                                                        : binding_shape{sh_bytes{}}.v});
    if (const auto* x = std::get_if<e_choice>(&t->v))
        return mk(binding_shape{sh_sum{interp_type(x->a), interp_type(x->b)}});
    if (const auto* x = std::get_if<e_array>(&t->v))
        return x->g ? interp_agroup(x->g) : mk(binding_shape{sh_unit{}});
    const auto& x = std::get<e_map>(t->v);
    return x.g ? interp_mgroup(x.g) : mk(binding_shape{sh_unit{}});
}

// --- the pipeline ---

inline result<elab_schema, elab_error> elaborate(const type_ptr& t) {
    try {
        elab_detail::elaborator e;
        etype_ptr root = e.type(t);
        shape_ptr shape = interp_type(root);
        return elab_schema{std::move(root), std::move(shape), std::move(e.notes)};
    } catch (const elab_error& err) {
        return err;
    }
}

// --- reference semantics of elaborated schemas ---
//
// Deterministic evaluation: no backtracking and no outcome sets. A map
// group either consumes a known set of entries, fails softly (letting an
// enclosing alternative or optional take over), or fails hard (a cut saw
// its key with a mismatched value).

inline bool etype_sem(const elab_type& t, const canon_item& x);

inline std::optional<size_t> ea_eval(const elab_array_group& g, std::span<const canon_item> items,
                                     size_t pos) {
    if (const auto* x = std::get_if<ea_elem>(&g.v)) {
        if (pos < items.size() && etype_sem(*x->t, items[pos])) return 1;
        return std::nullopt;
    }
    if (const auto* x = std::get_if<ea_alt>(&g.v)) {
        if (auto n = ea_eval(*x->a, items, pos)) return n;
        return ea_eval(*x->b, items, pos);
    }
    if (const auto* x = std::get_if<ea_opt>(&g.v)) {
        if (auto n = ea_eval(*x->g, items, pos)) return n;
        return 0;
    }
    if (const auto* x = std::get_if<ea_concat>(&g.v)) {
        auto n1 = ea_eval(*x->a, items, pos);
        if (!n1) return std::nullopt;
        auto n2 = ea_eval(*x->b, items, pos + *n1);
        if (!n2) return std::nullopt;
        return *n1 + *n2;
    }
    const auto& x = std::get<ea_star>(g.v);
    size_t total = 0;
    for (;;) {
        auto n = ea_eval(*x.g, items, pos + total);
        if (!n || *n == 0) return total;
        total += *n;
    }
}

enum class em_res : std::uint8_t { matched, soft_fail, hard_fail };

struct em_out {
    em_res r = em_res::soft_fail;
    std::uint64_t consumed = 0;
};

inline em_out em_eval(const elab_map_group& g,
                      std::span<const std::pair<canon_item, canon_item>> es, std::uint64_t rem) {
    if (const auto* x = std::get_if<em_entry>(&g.v)) {
        for (size_t i = 0; i < es.size(); ++i) {
            if (!(rem >> i & 1)) continue;
            if (cbor::compare_det(x->key, es[i].first) != cbor::ordering::equal) continue;
            if (etype_sem(*x->value, es[i].second)) return {em_res::matched, std::uint64_t{1} << i};
            return {x->cut ? em_res::hard_fail : em_res::soft_fail, 0};
        }
        return {em_res::soft_fail, 0};
    }
    if (const auto* x = std::get_if<em_table>(&g.v)) {
        std::uint64_t m = 0;
        for (size_t i = 0; i < es.size(); ++i) {
            if (!(rem >> i & 1)) continue;
            const auto& [k, v] = es[i];
            if (type_sem(*x->key_t, k) && !excludes(x->excluded, k, v) &&
                etype_sem(*x->value, v))
                m |= std::uint64_t{1} << i;
        }
        return {em_res::matched, m};
    }
    if (const auto* x = std::get_if<em_alt>(&g.v)) {
        em_out l = em_eval(*x->a, es, rem);
        if (l.r != em_res::soft_fail) return l;
        return em_eval(*x->b, es, rem);
    }
    if (const auto* x = std::get_if<em_opt>(&g.v)) {
        em_out inner = em_eval(*x->g, es, rem);
        if (inner.r == em_res::soft_fail) return {em_res::matched, 0};
        return inner;
    }
    const auto& x = std::get<em_concat>(g.v);
    em_out a = em_eval(*x.a, es, rem);
    if (a.r != em_res::matched) return a;
    em_out b = em_eval(*x.b, es, rem & ~a.consumed);
    if (b.r != em_res::matched) return b;
    return {em_res::matched, a.consumed | b.consumed};
}

inline bool etype_sem(const elab_type& t, const canon_item& x) {
    if (const auto* b = std::get_if<t_base>(&t.v)) {
        switch (b->b) {
            case base_type::any: return true;
            case base_type::uint_: {
                const auto* i = std::get_if<cbor::ci_int>(&x.v);
                return i && !i->negative;
            }
            case base_type::nint: {
                const auto* i = std::get_if<cbor::ci_int>(&x.v);
                return i && i->negative;
            }
            case base_type::int_: return std::holds_alternative<cbor::ci_int>(x.v);
            case base_type::tstr: return std::holds_alternative<cbor::ci_text>(x.v);
            case base_type::bstr: return std::holds_alternative<cbor::ci_bytes>(x.v);
        }
    }
    if (const auto* l = std::get_if<t_lit_int>(&t.v)) {
        const auto* i = std::get_if<cbor::ci_int>(&x.v);
        return i && i->negative == l->negative && i->arg == l->arg;
    }
    if (const auto* l = std::get_if<t_lit_text>(&t.v)) {
        const auto* s = std::get_if<cbor::ci_text>(&x.v);
        return s && s->v == l->s;
    }
    if (const auto* l = std::get_if<t_lit_simple>(&t.v)) {
        const auto* s = std::get_if<cbor::ci_simple>(&x.v);
        return s && s->v == l->v;
    }
    if (const auto* r = std::get_if<t_int_range>(&t.v)) {
        const auto* i = std::get_if<cbor::ci_int>(&x.v);
        if (!i) return false;
        auto val = elab_detail::lit_value(t_lit_int{i->negative, i->arg});
        return elab_detail::lit_value(r->lo) <= val && val <= elab_detail::lit_value(r->hi);
    }
    if (const auto* s = std::get_if<t_size>(&t.v)) {
        size_t n;
        if (s->b == base_type::tstr) {
            const auto* v = std::get_if<cbor::ci_text>(&x.v);
            if (!v) return false;
            n = v->v.size();
        } else {
            const auto* v = std::get_if<cbor::ci_bytes>(&x.v);
            if (!v) return false;
            n = v->v.size();
        }
        return s->lo <= n && n <= s->hi;
    }
    if (const auto* c = std::get_if<e_choice>(&t.v))
        return etype_sem(*c->a, x) || etype_sem(*c->b, x);
    if (const auto* a = std::get_if<e_array>(&t.v)) {
        const auto* arr = std::get_if<cbor::ci_array>(&x.v);
        if (!arr) return false;
        if (!a->g) return arr->items.empty();
        auto n = ea_eval(*a->g, arr->items, 0);
        return n && *n == arr->items.size();
    }
    const auto& m = std::get<e_map>(t.v);
    const auto* mp = std::get_if<cbor::ci_map>(&x.v);
    if (!mp) return false;
    assert(mp->entries.size() <= 64);
    std::uint64_t full = mp->entries.size() == 64 ? ~std::uint64_t{0}
                                                  : (std::uint64_t{1} << mp->entries.size()) - 1;
    if (!m.g) return mp->entries.empty();
    em_out r = em_eval(*m.g, mp->entries, full);
    return r.r == em_res::matched && r.consumed == full;
}

inline bool etype_sem(const etype_ptr& t, const canon_item& x) { return etype_sem(*t, x); }

}  // namespace detcbor::cddl

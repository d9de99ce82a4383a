#pragma once

#include <memory>
#include <string>

#include <detcbor/bytes.hpp>

namespace detcbor::cddl {

struct type_expr;
struct array_group;
struct map_group;

// Nodes are immutable once built; children are shared.
using type_ptr = std::shared_ptr<const type_expr>;
using agroup_ptr = std::shared_ptr<const array_group>;
using mgroup_ptr = std::shared_ptr<const map_group>;

enum class base_type : std::uint8_t { any, int_, uint_, nint, tstr, bstr };

struct t_base {
    base_type b;
};
struct t_lit_int {
    bool negative = false;  // value is -1 - arg when set
    std::uint64_t arg = 0;
    bool operator==(const t_lit_int&) const = default;
};
struct t_lit_text {
    std::string s;
};
struct t_lit_simple {
    byte v;  // desugar target for bool / nil
};
struct t_int_range {
    t_lit_int lo, hi;  // inclusive; lo > hi is the empty (bottom) range
};
struct t_size {
    base_type b;  // tstr or bstr
    std::uint64_t lo = 0, hi = 0;  // inclusive byte-length bounds
};
struct t_array {
    agroup_ptr g;  // null = empty group
};
struct t_map {
    mgroup_ptr g;  // null = empty group
};
struct t_choice {
    type_ptr a, b;
};
struct t_ref {
    std::string name;
};

struct type_expr {
    std::variant<t_base, t_lit_int, t_lit_text, t_lit_simple, t_int_range, t_size, t_array, t_map,
                 t_choice, t_ref>
        v;
};

struct ag_elem {
    type_ptr t;
};
struct ag_alt {
    agroup_ptr a, b;
};
struct ag_opt {
    agroup_ptr g;
};
struct ag_concat {
    agroup_ptr a, b;
};
struct ag_star {
    agroup_ptr g;
};

struct array_group {
    std::variant<ag_elem, ag_alt, ag_opt, ag_concat, ag_star> v;
};

struct mg_entry {
    type_ptr key, value;
    bool cut = false;  // surface `:` sets it, `=>` does not
};
struct mg_alt {
    mgroup_ptr a, b;
};
struct mg_opt {
    mgroup_ptr g;
};
struct mg_concat {
    mgroup_ptr a, b;
};
struct mg_star {
    mgroup_ptr g;
};

struct map_group {
    std::variant<mg_entry, mg_alt, mg_opt, mg_concat, mg_star> v;
};

struct schema {
    std::vector<std::pair<std::string, type_ptr>> rules;  // definition order
    std::string root;                                     // first rule
};

// --- builders ---

inline type_ptr mk(type_expr t) { return std::make_shared<const type_expr>(std::move(t)); }
inline agroup_ptr mk(array_group g) { return std::make_shared<const array_group>(std::move(g)); }
inline mgroup_ptr mk(map_group g) { return std::make_shared<const map_group>(std::move(g)); }

inline type_ptr tbase(base_type b) { return mk(type_expr{t_base{b}}); }
inline type_ptr tint(std::int64_t v) {
    return mk(type_expr{v < 0 ? t_lit_int{true, static_cast<std::uint64_t>(-(v + 1))}
                              : t_lit_int{false, static_cast<std::uint64_t>(v)}});
}
inline type_ptr tuintlit(std::uint64_t v) { return mk(type_expr{t_lit_int{false, v}}); }
inline type_ptr ttext(std::string s) { return mk(type_expr{t_lit_text{std::move(s)}}); }
inline type_ptr tsimple(byte v) { return mk(type_expr{t_lit_simple{v}}); }
inline type_ptr trange(t_lit_int lo, t_lit_int hi) { return mk(type_expr{t_int_range{lo, hi}}); }
inline type_ptr tsize(base_type b, std::uint64_t lo, std::uint64_t hi) {
    return mk(type_expr{t_size{b, lo, hi}});
}
inline type_ptr tarray(agroup_ptr g) { return mk(type_expr{t_array{std::move(g)}}); }
inline type_ptr tmap(mgroup_ptr g) { return mk(type_expr{t_map{std::move(g)}}); }
inline type_ptr tchoice(type_ptr a, type_ptr b) {
    return mk(type_expr{t_choice{std::move(a), std::move(b)}});
}
inline type_ptr tref(std::string name) { return mk(type_expr{t_ref{std::move(name)}}); }

inline agroup_ptr elem(type_ptr t) { return mk(array_group{ag_elem{std::move(t)}}); }
inline agroup_ptr aalt(agroup_ptr a, agroup_ptr b) {
    return mk(array_group{ag_alt{std::move(a), std::move(b)}});
}
inline agroup_ptr aopt(agroup_ptr g) { return mk(array_group{ag_opt{std::move(g)}}); }
inline agroup_ptr acat(agroup_ptr a, agroup_ptr b) {
    return mk(array_group{ag_concat{std::move(a), std::move(b)}});
}
inline agroup_ptr astar(agroup_ptr g) { return mk(array_group{ag_star{std::move(g)}}); }

inline mgroup_ptr entry(type_ptr k, type_ptr v, bool cut) {
    return mk(map_group{mg_entry{std::move(k), std::move(v), cut}});
}
inline mgroup_ptr malt(mgroup_ptr a, mgroup_ptr b) {
    return mk(map_group{mg_alt{std::move(a), std::move(b)}});
}
inline mgroup_ptr mopt(mgroup_ptr g) { return mk(map_group{mg_opt{std::move(g)}}); }
inline mgroup_ptr mcat(mgroup_ptr a, mgroup_ptr b) {
    return mk(map_group{mg_concat{std::move(a), std::move(b)}});
}
inline mgroup_ptr mstar(mgroup_ptr g) { return mk(map_group{mg_star{std::move(g)}}); }

// --- structural equality (shared_ptr operator== compares identity) ---

inline bool equal(const type_expr& a, const type_expr& b);
inline bool equal(const array_group& a, const array_group& b);
inline bool equal(const map_group& a, const map_group& b);

inline bool equal(const type_ptr& a, const type_ptr& b) {
    if (a == b) return true;
    return a && b && equal(*a, *b);
}
inline bool equal(const agroup_ptr& a, const agroup_ptr& b) {
    if (a == b) return true;
    return a && b && equal(*a, *b);
}
inline bool equal(const mgroup_ptr& a, const mgroup_ptr& b) {
    if (a == b) return true;
    return a && b && equal(*a, *b);
}

inline bool equal(const type_expr& a, const type_expr& b) {
    if (a.v.index() != b.v.index()) return false;
    struct v {
        const type_expr& b;
        bool operator()(const t_base& x) const { return x.b == std::get<t_base>(b.v).b; }
        bool operator()(const t_lit_int& x) const { return x == std::get<t_lit_int>(b.v); }
        bool operator()(const t_lit_text& x) const { return x.s == std::get<t_lit_text>(b.v).s; }
        bool operator()(const t_lit_simple& x) const { return x.v == std::get<t_lit_simple>(b.v).v; }
        bool operator()(const t_int_range& x) const {
            const auto& o = std::get<t_int_range>(b.v);
            return x.lo == o.lo && x.hi == o.hi;
        }
        bool operator()(const t_size& x) const {
            const auto& o = std::get<t_size>(b.v);
            return x.b == o.b && x.lo == o.lo && x.hi == o.hi;
        }
        bool operator()(const t_array& x) const { return equal(x.g, std::get<t_array>(b.v).g); }
        bool operator()(const t_map& x) const { return equal(x.g, std::get<t_map>(b.v).g); }
        bool operator()(const t_choice& x) const {
            const auto& o = std::get<t_choice>(b.v);
            return equal(x.a, o.a) && equal(x.b, o.b);
        }
        bool operator()(const t_ref& x) const { return x.name == std::get<t_ref>(b.v).name; }
    };
    return std::visit(v{b}, a.v);
}

inline bool equal(const array_group& a, const array_group& b) {
    if (a.v.index() != b.v.index()) return false;
    struct v {
        const array_group& b;
        bool operator()(const ag_elem& x) const { return equal(x.t, std::get<ag_elem>(b.v).t); }
        bool operator()(const ag_alt& x) const {
            const auto& o = std::get<ag_alt>(b.v);
            return equal(x.a, o.a) && equal(x.b, o.b);
        }
        bool operator()(const ag_opt& x) const { return equal(x.g, std::get<ag_opt>(b.v).g); }
        bool operator()(const ag_concat& x) const {
            const auto& o = std::get<ag_concat>(b.v);
            return equal(x.a, o.a) && equal(x.b, o.b);
        }
        bool operator()(const ag_star& x) const { return equal(x.g, std::get<ag_star>(b.v).g); }
    };
    return std::visit(v{b}, a.v);
}

inline bool equal(const map_group& a, const map_group& b) {
    if (a.v.index() != b.v.index()) return false;
    struct v {
        const map_group& b;
        bool operator()(const mg_entry& x) const {
            const auto& o = std::get<mg_entry>(b.v);
            return x.cut == o.cut && equal(x.key, o.key) && equal(x.value, o.value);
        }
        bool operator()(const mg_alt& x) const {
            const auto& o = std::get<mg_alt>(b.v);
            return equal(x.a, o.a) && equal(x.b, o.b);
        }
        bool operator()(const mg_opt& x) const { return equal(x.g, std::get<mg_opt>(b.v).g); }
        bool operator()(const mg_concat& x) const {
            const auto& o = std::get<mg_concat>(b.v);
            return equal(x.a, o.a) && equal(x.b, o.b);
        }
        bool operator()(const mg_star& x) const { return equal(x.g, std::get<mg_star>(b.v).g); }
    };
    return std::visit(v{b}, a.v);
}

}  // namespace detcbor::cddl

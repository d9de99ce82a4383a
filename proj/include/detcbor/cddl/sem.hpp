#pragma once

#include <detcbor/cddl/ast.hpp>
#include <detcbor/det.hpp>

// Executable specification semantics. This layer is the oracle the validators
// are tested against: clarity over speed, exponential on adversarial inputs,
// never on the runtime path.

namespace detcbor::cddl {

using cbor::canon_item;

inline bool type_sem(const type_expr& t, const canon_item& x);

// --- array groups: greedy PEG over an item list ---
//
// Elem consumes one matching item; Concat sequences; Alt takes the first
// succeeding branch and never revisits the choice; Opt tries then succeeds
// empty; Star repeats until its body fails (or stops progressing).

inline std::optional<size_t> array_group_sem(const array_group& g,
                                             std::span<const canon_item> items, size_t pos = 0) {
    struct v {
        std::span<const canon_item> items;
        size_t pos;
        std::optional<size_t> operator()(const ag_elem& x) const {
            if (pos < items.size() && type_sem(*x.t, items[pos])) return 1;
            return std::nullopt;
        }
        std::optional<size_t> operator()(const ag_concat& x) const {
            auto n1 = array_group_sem(*x.a, items, pos);
            if (!n1) return std::nullopt;
            auto n2 = array_group_sem(*x.b, items, pos + *n1);
            if (!n2) return std::nullopt;
            return *n1 + *n2;
        }
        std::optional<size_t> operator()(const ag_alt& x) const {
            auto n1 = array_group_sem(*x.a, items, pos);
            if (n1) return n1;
            return array_group_sem(*x.b, items, pos);
        }
        std::optional<size_t> operator()(const ag_opt& x) const {
            auto n = array_group_sem(*x.g, items, pos);
            return n ? *n : 0;
        }
        std::optional<size_t> operator()(const ag_star& x) const {
            size_t total = 0;
            for (;;) {
                auto n = array_group_sem(*x.g, items, pos + total);
                if (!n || *n == 0) return total;
                total += *n;
            }
        }
    };
    return std::visit(v{items, pos}, g.v);
}

// --- map groups: sets of consumed-entry masks, with a cut exception ---
//
// An evaluation returns Bot (a cut saw a matching key with a failing value),
// or a set of outcomes. Each outcome is the mask of consumed entries plus a
// flag recording that a cut entry was consumed on that path: if such a path
// later dies inside a concatenation, the cut's commitment makes the whole
// group fail rather than fall back to another alternative.

struct mg_eval_result {
    bool bot = false;
    std::vector<std::pair<std::uint64_t, bool>> outs;  // (consumed mask, crossed-cut flag)
};

namespace sem_detail {

inline void push_out(std::vector<std::pair<std::uint64_t, bool>>& outs, std::uint64_t m, bool f) {
    for (const auto& o : outs)
        if (o.first == m && o.second == f) return;
    outs.emplace_back(m, f);
}

struct mg_eval {
    std::span<const std::pair<canon_item, canon_item>> entries;

    mg_eval_result eval(const map_group& g, std::uint64_t rem) const {
        struct v {
            const mg_eval& self;
            std::uint64_t rem;
            mg_eval_result operator()(const mg_entry& x) const {
                mg_eval_result r;
                for (size_t i = 0; i < self.entries.size(); ++i) {
                    if (!(rem >> i & 1)) continue;
                    if (!type_sem(*x.key, self.entries[i].first)) continue;
                    if (type_sem(*x.value, self.entries[i].second)) {
                        push_out(r.outs, std::uint64_t{1} << i, x.cut);
                    } else if (x.cut) {
                        return {true, {}};
                    }
                }
                return r;
            }
            mg_eval_result operator()(const mg_alt& x) const {
                mg_eval_result r1 = self.eval(*x.a, rem);
                if (r1.bot || !r1.outs.empty()) return r1;
                return self.eval(*x.b, rem);
            }
            mg_eval_result operator()(const mg_opt& x) const {
                mg_eval_result r = self.eval(*x.g, rem);
                if (r.bot || !r.outs.empty()) return r;
                return {false, {{0, false}}};
            }
            mg_eval_result operator()(const mg_concat& x) const {
                mg_eval_result r1 = self.eval(*x.a, rem);
                if (r1.bot) return {true, {}};
                mg_eval_result out;
                for (const auto& [m1, f1] : r1.outs) {
                    mg_eval_result r2 = self.eval(*x.b, rem & ~m1);
                    if (r2.bot) return {true, {}};
                    if (r2.outs.empty()) {
                        if (f1) return {true, {}};  // committed path cannot die quietly
                        continue;
                    }
                    for (const auto& [m2, f2] : r2.outs) push_out(out.outs, m1 | m2, f1 || f2);
                }
                return out;
            }
            mg_eval_result operator()(const mg_star& x) const { return self.star(*x.g, rem); }
        };
        return std::visit(v{*this, rem}, g.v);
    }

    mg_eval_result star(const map_group& g, std::uint64_t rem) const {
        mg_eval_result r = eval(g, rem);
        if (r.bot) return {true, {}};
        if (r.outs.empty()) return {false, {{0, false}}};
        mg_eval_result out;
        for (const auto& [m, f] : r.outs) {
            if (m == 0) {
                push_out(out.outs, 0, f);  // no progress: stop here
                continue;
            }
            mg_eval_result sub = star(g, rem & ~m);
            if (sub.bot) return {true, {}};
            for (const auto& [m2, f2] : sub.outs) push_out(out.outs, m | m2, f || f2);
        }
        return out;
    }
};

}  // namespace sem_detail

// Public oracle view: Bot, or the deduplicated set of consumed masks (each
// mask partitions the input into consumed/remaining).
struct mg_outcomes {
    bool bot = false;
    std::vector<std::uint64_t> consumed;  // sorted

    bool matches_all(size_t entry_count) const {
        std::uint64_t full =
            entry_count == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << entry_count) - 1;
        for (auto m : consumed)
            if (m == full) return true;
        return false;
    }
};

inline mg_outcomes map_group_sem(const map_group& g,
                                 std::span<const std::pair<canon_item, canon_item>> entries) {
    assert(entries.size() <= 64);
    std::uint64_t full =
        entries.size() == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << entries.size()) - 1;
    mg_eval_result r = sem_detail::mg_eval{entries}.eval(g, full);
    if (r.bot) return {true, {}};
    mg_outcomes out;
    for (const auto& [m, f] : r.outs) out.consumed.push_back(m);
    std::sort(out.consumed.begin(), out.consumed.end());
    out.consumed.erase(std::unique(out.consumed.begin(), out.consumed.end()), out.consumed.end());
    return out;
}

// --- types ---

inline bool type_sem(const type_expr& t, const canon_item& x) {
    struct v {
        const canon_item& x;
        bool operator()(const t_base& b) const {
            switch (b.b) {
                case base_type::any: return true;
                case base_type::int_: return std::holds_alternative<cbor::ci_int>(x.v);
                case base_type::uint_: {
                    auto* i = std::get_if<cbor::ci_int>(&x.v);
                    return i && !i->negative;
                }
                case base_type::nint: {
                    auto* i = std::get_if<cbor::ci_int>(&x.v);
                    return i && i->negative;
                }
                case base_type::tstr: return std::holds_alternative<cbor::ci_text>(x.v);
                case base_type::bstr: return std::holds_alternative<cbor::ci_bytes>(x.v);
            }
            return false;
        }
        bool operator()(const t_lit_int& l) const {
            auto* i = std::get_if<cbor::ci_int>(&x.v);
            return i && i->negative == l.negative && i->arg == l.arg;
        }
        bool operator()(const t_lit_text& l) const {
            auto* s = std::get_if<cbor::ci_text>(&x.v);
            return s && s->v == l.s;
        }
        bool operator()(const t_lit_simple& l) const {
            auto* s = std::get_if<cbor::ci_simple>(&x.v);
            return s && s->v == l.v;
        }
        bool operator()(const t_int_range& r) const {
            auto* i = std::get_if<cbor::ci_int>(&x.v);
            if (!i) return false;
            auto val = [](bool neg, std::uint64_t arg) {
                return neg ? -static_cast<__int128>(arg) - 1 : static_cast<__int128>(arg);
            };
            __int128 xv = val(i->negative, i->arg);
            return val(r.lo.negative, r.lo.arg) <= xv && xv <= val(r.hi.negative, r.hi.arg);
        }
        bool operator()(const t_size& s) const {
            size_t n;
            if (auto* b = std::get_if<cbor::ci_bytes>(&x.v); b && s.b == base_type::bstr)
                n = b->v.size();
            else if (auto* t = std::get_if<cbor::ci_text>(&x.v); t && s.b == base_type::tstr)
                n = t->v.size();
            else
                return false;
            return s.lo <= n && n <= s.hi;
        }
        bool operator()(const t_array& a) const {
            auto* arr = std::get_if<cbor::ci_array>(&x.v);
            if (!arr) return false;
            if (!a.g) return arr->items.empty();
            auto n = array_group_sem(*a.g, arr->items);
            return n && *n == arr->items.size();
        }
        bool operator()(const t_map& m) const {
            auto* mp = std::get_if<cbor::ci_map>(&x.v);
            if (!mp) return false;
            if (!m.g) return mp->entries.empty();
            auto r = map_group_sem(*m.g, mp->entries);
            return !r.bot && r.matches_all(mp->entries.size());
        }
        bool operator()(const t_choice& c) const { return type_sem(*c.a, x) || type_sem(*c.b, x); }
        bool operator()(const t_ref&) const {
            assert(!"type_sem requires an inlined type");
            return false;
        }
    };
    return std::visit(v{x}, t.v);
}

inline bool type_sem(const type_ptr& t, const canon_item& x) { return type_sem(*t, x); }

// --- the deterministic map-group sublanguage ---
//
// literal-key entries (either cut flavor), star only directly over a non-cut
// entry, closed under alt/opt/concat.

inline bool is_literal_key(const type_expr& t) {
    return std::holds_alternative<t_lit_int>(t.v) || std::holds_alternative<t_lit_text>(t.v) ||
           std::holds_alternative<t_lit_simple>(t.v);
}

inline bool is_det_form(const map_group& g) {
    struct v {
        bool operator()(const mg_entry& x) const { return is_literal_key(*x.key); }
        bool operator()(const mg_alt& x) const { return is_det_form(*x.a) && is_det_form(*x.b); }
        bool operator()(const mg_opt& x) const { return is_det_form(*x.g); }
        bool operator()(const mg_concat& x) const { return is_det_form(*x.a) && is_det_form(*x.b); }
        bool operator()(const mg_star& x) const {
            auto* e = std::get_if<mg_entry>(&x.g->v);
            return e && !e->cut;
        }
    };
    return std::visit(v{}, g.v);
}

// Brute-force determinism check: over every map with at most max_entries
// distinct keys drawn from the universe, the semantics returns Bot or at most
// one outcome.
inline bool det_oracle(const map_group& g, std::span<const canon_item> universe,
                       size_t max_entries = 3) {
    std::vector<std::pair<canon_item, canon_item>> entries;
    // enumerate key index subsets of size <= max_entries, then value tuples
    size_t n = universe.size();
    std::vector<size_t> keys;
    struct rec {
        const map_group& g;
        std::span<const canon_item> universe;
        size_t max_entries, n;
        std::vector<size_t>& keys;
        std::vector<std::pair<canon_item, canon_item>>& entries;

        bool values(size_t ki) {
            if (ki == keys.size()) {
                auto r = map_group_sem(g, entries);
                return r.bot || r.consumed.size() <= 1;
            }
            for (size_t vi = 0; vi < n; ++vi) {
                entries.emplace_back(universe[keys[ki]], universe[vi]);
                bool ok = values(ki + 1);
                entries.pop_back();
                if (!ok) return false;
            }
            return true;
        }

        bool subsets(size_t from) {
            if (!values(0)) return false;
            if (keys.size() == max_entries) return true;
            for (size_t k = from; k < n; ++k) {
                keys.push_back(k);
                bool ok = subsets(k + 1);
                keys.pop_back();
                if (!ok) return false;
            }
            return true;
        }
    } r{g, universe, max_entries, n, keys, entries};
    return r.subsets(0);
}

}  // namespace detcbor::cddl

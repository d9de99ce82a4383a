#pragma once

// Random typed values that inhabit an elaborated schema. Shared by the
// runtime suite and the acceptance checks.

#include "gen.hpp"

#include <detcbor/cddl/elab.hpp>
#include <detcbor/cddl/runtime.hpp>

namespace testgen {

using namespace detcbor::cddl;

inline typed_value gen_tv(const etype_ptr& t, rng_t& rng);

inline typed_value gen_ag(const eag_ptr& g, rng_t& rng) {
    if (const auto* x = std::get_if<ea_elem>(&g->v)) return gen_tv(x->t, rng);
    if (const auto* x = std::get_if<ea_alt>(&g->v))
        return rng() % 2 ? vleft(gen_ag(x->a, rng)) : vright(gen_ag(x->b, rng));
    if (const auto* x = std::get_if<ea_opt>(&g->v))
        return rng() % 2 ? vsome(gen_ag(x->g, rng)) : vnone();
    if (const auto* x = std::get_if<ea_star>(&g->v)) {
        std::vector<typed_value> items;
        for (size_t n = rng() % 4; n-- > 0;) items.push_back(gen_ag(x->g, rng));
        return vlist(std::move(items));
    }
    std::vector<eag_ptr> xs;
    elab_detail::flatten(g, xs);
    std::vector<typed_value> parts;
    for (const auto& p : xs) parts.push_back(gen_ag(p, rng));
    typed_value acc = std::move(parts.back());
    for (size_t i = parts.size() - 1; i-- > 0;) acc = vpair(std::move(parts[i]), std::move(acc));
    return acc;
}

inline typed_value gen_mg(const emg_ptr& g, rng_t& rng) {
    if (const auto* x = std::get_if<em_entry>(&g->v))
        return vpair(vunit(), gen_tv(x->value, rng));
    if (const auto* x = std::get_if<em_table>(&g->v)) {
        // keys ascend in canonical byte order so owned and parsed tables agree
        bool text_keys = std::holds_alternative<t_base>(x->key->v) &&
                         std::get<t_base>(x->key->v).b == base_type::tstr;
        size_t n = rng() % 4;
        std::vector<std::pair<typed_value, typed_value>> entries;
        std::uint64_t k = rng() % 3;
        std::string tk;
        for (size_t i = 0; i < n; ++i) {
            tk += static_cast<char>('a' + rng() % 26);
            typed_value key = text_keys ? vtext(tk) : vuint(k);
            k += 1 + rng() % 5;
            entries.emplace_back(std::move(key), gen_tv(x->value, rng));
        }
        return vtable(std::move(entries));
    }
    if (const auto* x = std::get_if<em_alt>(&g->v))
        return rng() % 2 ? vleft(gen_mg(x->a, rng)) : vright(gen_mg(x->b, rng));
    if (const auto* x = std::get_if<em_opt>(&g->v))
        return rng() % 2 ? vsome(gen_mg(x->g, rng)) : vnone();
    std::vector<emg_ptr> xs;
    elab_detail::flatten(g, xs);
    std::vector<typed_value> parts;
    for (const auto& p : xs) parts.push_back(gen_mg(p, rng));
    typed_value acc = std::move(parts.back());
    for (size_t i = parts.size() - 1; i-- > 0;) acc = vpair(std::move(parts[i]), std::move(acc));
    return acc;
}

inline typed_value gen_tv(const etype_ptr& t, rng_t& rng) {
    if (const auto* x = std::get_if<t_base>(&t->v)) {
        switch (x->b) {
            case base_type::uint_: return vuint(rng() % 100);
            case base_type::nint: return vnint(rng() % 100);
            case base_type::int_:
                return rng() % 2 ? vuint(rng() % 100) : vnint(rng() % 100);
            case base_type::tstr: {
                std::string s;
                for (size_t n = rng() % 6; n-- > 0;) s += static_cast<char>('a' + rng() % 26);
                return vtext(std::move(s));
            }
            case base_type::bstr: {
                std::vector<byte> b;
                for (size_t n = rng() % 5; n-- > 0;) b.push_back(static_cast<byte>(rng()));
                return vbytes(std::move(b));
            }
            case base_type::any: return vbytes(serialize_det(gen_canon_scalar(rng)));
        }
    }
    if (std::holds_alternative<t_lit_int>(t->v) || std::holds_alternative<t_lit_text>(t->v) ||
        std::holds_alternative<t_lit_simple>(t->v))
        return vunit();
    if (const auto* x = std::get_if<t_int_range>(&t->v)) {
        auto lo = elab_detail::lit_value(x->lo), hi = elab_detail::lit_value(x->hi);
        auto span = hi - lo + 1;
        if (span > 50) span = 50;
        auto v = lo + static_cast<elab_detail::i128>(rng() % static_cast<std::uint64_t>(span));
        if (v < 0) return vnint(static_cast<std::uint64_t>(-(v + 1)));
        return vuint(static_cast<std::uint64_t>(v));
    }
    if (const auto* x = std::get_if<t_size>(&t->v)) {
        std::uint64_t hi = x->hi < x->lo + 4 ? x->hi : x->lo + 4;
        size_t len = static_cast<size_t>(x->lo + rng() % (hi - x->lo + 1));
        if (x->b == base_type::tstr) return vtext(std::string(len, 'a'));
        return vbytes(std::vector<byte>(len, byte{7}));
    }
    if (const auto* x = std::get_if<e_choice>(&t->v))
        return rng() % 2 ? vleft(gen_tv(x->a, rng)) : vright(gen_tv(x->b, rng));
    if (const auto* x = std::get_if<e_array>(&t->v))
        return x->g ? gen_ag(x->g, rng) : vunit();
    const auto& x = std::get<e_map>(t->v);
    return x.g ? gen_mg(x.g, rng) : vunit();
}

}  // namespace testgen

#pragma once

#include <cctype>
#include <map>
#include <set>

#include <detcbor/cddl/ast.hpp>

namespace detcbor::cddl {

enum class cddl_error_kind : std::uint8_t { syntax, unknown_rule, recursive_rule, unsupported };

struct cddl_error {
    cddl_error_kind kind;
    size_t offset = 0;
    size_t line = 1, col = 1;
    std::string detail;
};

namespace parse_detail {

enum class tok : std::uint8_t {
    name, lit_int, lit_text,
    lbrack, rbrack, lbrace, rbrace, lparen, rparen,
    comma, colon, arrow, slash, slashslash, question, star, equals, dotdot, ctl,
    end
};

struct token {
    tok kind;
    size_t offset, line, col;
    std::string text;       // name / text literal / control name
    bool neg = false;       // int literal sign
    std::uint64_t arg = 0;  // int literal: value, or -1-value when neg
};

struct lexer {
    std::string_view src;
    size_t pos = 0, line = 1, col = 1;

    [[noreturn]] void fail(cddl_error_kind k, size_t off, size_t ln, size_t cl, std::string d) const {
        throw cddl_error{k, off, ln, cl, std::move(d)};
    }

    void bump(size_t n = 1) {
        for (size_t i = 0; i < n; ++i) {
            if (pos < src.size() && src[pos] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
            ++pos;
        }
    }

    void skip_ws() {
        for (;;) {
            while (pos < src.size() && (src[pos] == ' ' || src[pos] == '\t' || src[pos] == '\r' ||
                                        src[pos] == '\n'))
                bump();
            if (pos < src.size() && src[pos] == ';') {
                while (pos < src.size() && src[pos] != '\n') bump();
                continue;
            }
            return;
        }
    }

    static bool name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
    static bool name_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
    }

    token next() {
        skip_ws();
        token t{tok::end, pos, line, col, {}};
        if (pos >= src.size()) return t;
        char c = src[pos];

        if (name_start(c)) {
            size_t s = pos;
            // a '-' is part of the name only when followed by a name char
            while (pos < src.size() && name_char(src[pos])) {
                if (src[pos] == '-' && !(pos + 1 < src.size() && name_char(src[pos + 1]))) break;
                bump();
            }
            t.kind = tok::name;
            t.text = std::string(src.substr(s, pos - s));
            return t;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '-' && pos + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[pos + 1])))) {
            bool neg = c == '-';
            if (neg) bump();
            unsigned __int128 mag = 0;
            int radix = 10;
            if (src[pos] == '0' && pos + 1 < src.size() && (src[pos + 1] == 'x' || src[pos + 1] == 'b')) {
                radix = src[pos + 1] == 'x' ? 16 : 2;
                bump(2);
            }
            bool any = false;
            while (pos < src.size() && std::isxdigit(static_cast<unsigned char>(src[pos]))) {
                char d = src[pos];
                int dv = d <= '9' ? d - '0' : (d | 0x20) - 'a' + 10;
                if (dv >= radix) break;
                mag = mag * radix + dv;
                if (mag > (static_cast<unsigned __int128>(1) << 64))
                    fail(cddl_error_kind::syntax, t.offset, t.line, t.col, "integer literal out of range");
                any = true;
                bump();
            }
            if (!any) fail(cddl_error_kind::syntax, t.offset, t.line, t.col, "bad integer literal");
            t.kind = tok::lit_int;
            t.neg = neg;
            if (neg) {
                if (mag == 0 || mag > (static_cast<unsigned __int128>(1) << 64))
                    fail(cddl_error_kind::syntax, t.offset, t.line, t.col, "integer literal out of range");
                t.arg = static_cast<std::uint64_t>(mag - 1);
            } else {
                if (mag > static_cast<unsigned __int128>(0xFFFFFFFFFFFFFFFFull))
                    fail(cddl_error_kind::syntax, t.offset, t.line, t.col, "integer literal out of range");
                t.arg = static_cast<std::uint64_t>(mag);
            }
            return t;
        }
        if (c == '"') {
            bump();
            std::string s;
            while (pos < src.size() && src[pos] != '"') {
                if (src[pos] == '\\') {
                    bump();
                    if (pos >= src.size() || (src[pos] != '"' && src[pos] != '\\'))
                        fail(cddl_error_kind::syntax, t.offset, t.line, t.col, "unsupported escape");
                }
                s += src[pos];
                bump();
            }
            if (pos >= src.size())
                fail(cddl_error_kind::syntax, t.offset, t.line, t.col, "unterminated string");
            bump();
            t.kind = tok::lit_text;
            t.text = std::move(s);
            return t;
        }
        switch (c) {
            case '[': bump(); t.kind = tok::lbrack; return t;
            case ']': bump(); t.kind = tok::rbrack; return t;
            case '{': bump(); t.kind = tok::lbrace; return t;
            case '}': bump(); t.kind = tok::rbrace; return t;
            case '(': bump(); t.kind = tok::lparen; return t;
            case ')': bump(); t.kind = tok::rparen; return t;
            case ',': bump(); t.kind = tok::comma; return t;
            case ':': bump(); t.kind = tok::colon; return t;
            case '?': bump(); t.kind = tok::question; return t;
            case '*': bump(); t.kind = tok::star; return t;
            case '/':
                bump();
                if (pos < src.size() && src[pos] == '/') {
                    bump();
                    t.kind = tok::slashslash;
                } else {
                    t.kind = tok::slash;
                }
                if (pos < src.size() && src[pos] == '=')
                    fail(cddl_error_kind::unsupported, t.offset, t.line, t.col, "rule extension /=");
                return t;
            case '=':
                bump();
                if (pos < src.size() && src[pos] == '>') {
                    bump();
                    t.kind = tok::arrow;
                } else {
                    t.kind = tok::equals;
                }
                return t;
            case '.':
                bump();
                if (pos < src.size() && src[pos] == '.') {
                    bump();
                    t.kind = tok::dotdot;
                    return t;
                }
                if (pos < src.size() && name_start(src[pos])) {
                    size_t s = pos;
                    while (pos < src.size() && name_char(src[pos])) bump();
                    t.kind = tok::ctl;
                    t.text = std::string(src.substr(s, pos - s));
                    return t;
                }
                fail(cddl_error_kind::syntax, t.offset, t.line, t.col, "stray '.'");
            case '+':
                fail(cddl_error_kind::unsupported, t.offset, t.line, t.col, "+ occurrence");
            case '$':
                fail(cddl_error_kind::unsupported, t.offset, t.line, t.col, "socket/plug");
            case '<':
            case '>':
                fail(cddl_error_kind::unsupported, t.offset, t.line, t.col, "generics");
            case '&':
                fail(cddl_error_kind::unsupported, t.offset, t.line, t.col, "group enumeration");
            case '~':
                fail(cddl_error_kind::unsupported, t.offset, t.line, t.col, "unwrap");
            case '#':
                fail(cddl_error_kind::unsupported, t.offset, t.line, t.col, "major-type literal");
            default:
                fail(cddl_error_kind::syntax, t.offset, t.line, t.col,
                     std::string("unexpected character '") + c + "'");
        }
    }

};

}  // namespace parse_detail

namespace parse_detail {

struct parser {
    std::vector<token> ts;
    size_t i = 0;
    // every reference occurrence, for resolution diagnostics
    std::vector<std::pair<std::string, size_t>> refs;

    const token& cur() const { return ts[i]; }
    const token& peek(size_t k = 1) const { return ts[std::min(i + k, ts.size() - 1)]; }
    token eat() { return ts[i++]; }

    [[noreturn]] void fail(const token& t, std::string msg, cddl_error_kind k = cddl_error_kind::syntax) const {
        throw cddl_error{k, t.offset, t.line, t.col, std::move(msg)};
    }

    bool accept(tok k) {
        if (cur().kind == k) {
            ++i;
            return true;
        }
        return false;
    }

    token expect(tok k, const char* what) {
        if (cur().kind != k) fail(cur(), std::string("expected ") + what);
        return eat();
    }

    // --- types ---

    type_ptr parse_type() {
        type_ptr a = parse_type1();
        if (accept(tok::slash)) return tchoice(std::move(a), parse_type());
        return a;
    }

    t_lit_int expect_lit_int() {
        token t = expect(tok::lit_int, "integer literal");
        return t_lit_int{t.neg, t.arg};
    }

    type_ptr parse_type1() {
        type_ptr t = parse_primary();
        while (cur().kind == tok::ctl) {
            token c = eat();
            if (c.text != "size") fail(c, "control ." + c.text, cddl_error_kind::unsupported);
            auto* b = std::get_if<t_base>(&t->v);
            if (!b || (b->b != base_type::tstr && b->b != base_type::bstr))
                fail(c, ".size applies to tstr/bstr only");
            std::uint64_t lo, hi;
            if (accept(tok::lparen)) {
                t_lit_int l = expect_lit_int();
                expect(tok::dotdot, "'..'");
                t_lit_int h = expect_lit_int();
                expect(tok::rparen, "')'");
                if (l.negative || h.negative) fail(c, ".size bounds must be non-negative");
                lo = l.arg;
                hi = h.arg;
            } else {
                t_lit_int n = expect_lit_int();
                if (n.negative) fail(c, ".size bounds must be non-negative");
                lo = hi = n.arg;
            }
            t = tsize(b->b, lo, hi);
        }
        return t;
    }

    type_ptr parse_primary() {
        const token& t = cur();
        switch (t.kind) {
            case tok::name: {
                token n = eat();
                if (n.text == "any") return tbase(base_type::any);
                if (n.text == "int") return tbase(base_type::int_);
                if (n.text == "uint") return tbase(base_type::uint_);
                if (n.text == "nint") return tbase(base_type::nint);
                if (n.text == "tstr" || n.text == "text") return tbase(base_type::tstr);
                if (n.text == "bstr" || n.text == "bytes") return tbase(base_type::bstr);
                if (n.text == "bool") return tchoice(tsimple(20), tsimple(21));
                if (n.text == "false") return tsimple(20);
                if (n.text == "true") return tsimple(21);
                if (n.text == "nil" || n.text == "null") return tsimple(22);
                refs.emplace_back(n.text, n.offset);
                return tref(n.text);
            }
            case tok::lit_int: {
                token n = eat();
                t_lit_int lo{n.neg, n.arg};
                if (accept(tok::dotdot)) {
                    t_lit_int hi = expect_lit_int();
                    return trange(lo, hi);
                }
                return mk(type_expr{lo});
            }
            case tok::lit_text: {
                token n = eat();
                return ttext(n.text);
            }
            case tok::lparen: {
                eat();
                type_ptr inner = parse_type();
                expect(tok::rparen, "')'");
                return inner;
            }
            case tok::lbrack: {
                eat();
                agroup_ptr g;
                if (cur().kind != tok::rbrack) g = parse_agroup();
                expect(tok::rbrack, "']'");
                return tarray(std::move(g));
            }
            case tok::lbrace: {
                eat();
                mgroup_ptr g;
                if (cur().kind != tok::rbrace) g = parse_mgroup();
                expect(tok::rbrace, "'}'");
                return tmap(std::move(g));
            }
            default:
                fail(t, "expected a type");
        }
    }

    // --- array groups ---

    agroup_ptr parse_agroup() {
        agroup_ptr a = parse_acat();
        if (accept(tok::slashslash)) return aalt(std::move(a), parse_agroup());
        return a;
    }

    bool group_ends() const {
        tok k = cur().kind;
        return k == tok::rbrack || k == tok::rbrace || k == tok::rparen || k == tok::slashslash ||
               k == tok::end;
    }

    agroup_ptr parse_acat() {
        agroup_ptr a = parse_aitem();
        while (accept(tok::comma)) {
            if (group_ends()) break;  // trailing comma
            a = acat(std::move(a), parse_aitem());
        }
        return a;
    }

    void reject_bounded_occurrence() {
        if (cur().kind == tok::lit_int && peek().kind == tok::star)
            fail(cur(), "bounded occurrence n*m", cddl_error_kind::unsupported);
    }

    agroup_ptr parse_aitem() {
        reject_bounded_occurrence();
        if (accept(tok::question)) return aopt(parse_aatom());
        if (accept(tok::star)) return astar(parse_aatom());
        return parse_aatom();
    }

    agroup_ptr parse_aatom() {
        if (cur().kind == tok::lparen) {
            // a parenthesized array group; lone types inside reduce to elems
            eat();
            agroup_ptr g = parse_agroup();
            expect(tok::rparen, "')'");
            return g;
        }
        return elem(parse_type());
    }

    // --- map groups ---

    mgroup_ptr parse_mgroup() {
        mgroup_ptr a = parse_mcat();
        if (accept(tok::slashslash)) return malt(std::move(a), parse_mgroup());
        return a;
    }

    mgroup_ptr parse_mcat() {
        mgroup_ptr a = parse_mitem();
        while (accept(tok::comma)) {
            if (group_ends()) break;
            a = mcat(std::move(a), parse_mitem());
        }
        return a;
    }

    mgroup_ptr parse_mitem() {
        reject_bounded_occurrence();
        if (accept(tok::question)) return mopt(parse_matom());
        if (accept(tok::star)) return mstar(parse_matom());
        return parse_matom();
    }

    mgroup_ptr parse_matom() {
        if (cur().kind == tok::lparen) {
            // could be "(key-type) op value" or a parenthesized map group;
            // try the member reading first, roll back on failure
            size_t save = i;
            size_t save_refs = refs.size();
            try {
                return parse_member();
            } catch (const cddl_error&) {
                i = save;
                refs.resize(save_refs);
            }
            eat();
            mgroup_ptr g = parse_mgroup();
            expect(tok::rparen, "')'");
            return g;
        }
        return parse_member();
    }

    mgroup_ptr parse_member() {
        type_ptr key = parse_type();
        bool cut;
        if (accept(tok::colon))
            cut = true;
        else if (accept(tok::arrow))
            cut = false;
        else
            fail(cur(), "expected ':' or '=>' after map key");
        type_ptr value = parse_type();
        return entry(std::move(key), std::move(value), cut);
    }

    // --- rules ---

    schema parse_schema() {
        schema s;
        std::set<std::string> defined;
        while (cur().kind != tok::end) {
            token name = expect(tok::name, "rule name");
            expect(tok::equals, "'='");
            type_ptr body = parse_type();
            if (!defined.insert(name.text).second) fail(name, "duplicate rule " + name.text);
            s.rules.emplace_back(name.text, std::move(body));
        }
        if (s.rules.empty()) fail(cur(), "no rules");
        s.root = s.rules.front().first;
        return s;
    }
};

// rule names referenced by a type (for cycle detection)
inline void collect_refs(const type_ptr& t, std::vector<std::string>& out);
inline void collect_refs(const agroup_ptr& g, std::vector<std::string>& out) {
    if (!g) return;
    struct v {
        std::vector<std::string>& out;
        void operator()(const ag_elem& x) const { collect_refs(x.t, out); }
        void operator()(const ag_alt& x) const { collect_refs(x.a, out), collect_refs(x.b, out); }
        void operator()(const ag_opt& x) const { collect_refs(x.g, out); }
        void operator()(const ag_concat& x) const { collect_refs(x.a, out), collect_refs(x.b, out); }
        void operator()(const ag_star& x) const { collect_refs(x.g, out); }
    };
    std::visit(v{out}, g->v);
}
inline void collect_refs(const mgroup_ptr& g, std::vector<std::string>& out) {
    if (!g) return;
    struct v {
        std::vector<std::string>& out;
        void operator()(const mg_entry& x) const { collect_refs(x.key, out), collect_refs(x.value, out); }
        void operator()(const mg_alt& x) const { collect_refs(x.a, out), collect_refs(x.b, out); }
        void operator()(const mg_opt& x) const { collect_refs(x.g, out); }
        void operator()(const mg_concat& x) const { collect_refs(x.a, out), collect_refs(x.b, out); }
        void operator()(const mg_star& x) const { collect_refs(x.g, out); }
    };
    std::visit(v{out}, g->v);
}
inline void collect_refs(const type_ptr& t, std::vector<std::string>& out) {
    if (!t) return;
    if (const auto* x = std::get_if<t_ref>(&t->v))
        out.push_back(x->name);
    else if (const auto* x = std::get_if<t_array>(&t->v))
        collect_refs(x->g, out);
    else if (const auto* x = std::get_if<t_map>(&t->v))
        collect_refs(x->g, out);
    else if (const auto* x = std::get_if<t_choice>(&t->v))
        collect_refs(x->a, out), collect_refs(x->b, out);
}

}  // namespace parse_detail

inline result<schema, cddl_error> parse_cddl(std::string_view text) {
    try {
        parse_detail::lexer lx{text};
        parse_detail::parser p;
        for (;;) {
            auto t = lx.next();
            bool done = t.kind == parse_detail::tok::end;
            p.ts.push_back(std::move(t));
            if (done) break;
        }
        schema s = p.parse_schema();

        std::map<std::string, const type_ptr*> by_name;
        for (const auto& r : s.rules) by_name[r.first] = &r.second;
        for (const auto& [name, off] : p.refs)
            if (!by_name.count(name)) {
                parse_detail::lexer lx2{text};  // recover line/col for the offset
                while (lx2.pos < off) lx2.bump();
                return cddl_error{cddl_error_kind::unknown_rule, off, lx2.line, lx2.col, name};
            }

        // cycle check: DFS, grey = on stack
        std::map<std::string, int> color;
        struct walker {
            const std::map<std::string, const type_ptr*>& by_name;
            std::map<std::string, int>& color;
            void visit(const std::string& n) {
                int& c = color[n];
                if (c == 2) return;
                if (c == 1) throw cddl_error{cddl_error_kind::recursive_rule, 0, 1, 1, n};
                c = 1;
                std::vector<std::string> rs;
                parse_detail::collect_refs(*by_name.at(n), rs);
                for (const auto& r : rs) visit(r);
                c = 2;
            }
        } w{by_name, color};
        for (const auto& r : s.rules) w.visit(r.first);
        return s;
    } catch (const cddl_error& e) {
        return e;
    }
}

// --- reference substitution (schema is acyclic by construction) ---

namespace parse_detail {

struct inliner {
    const schema& s;
    std::map<std::string, type_ptr> memo;

    type_ptr type_of(const std::string& name) {
        auto it = memo.find(name);
        if (it != memo.end()) return it->second;
        for (const auto& r : s.rules)
            if (r.first == name) {
                type_ptr t = subst(r.second);
                memo[name] = t;
                return t;
            }
        return nullptr;  // unreachable on parse_cddl output
    }

    type_ptr subst(const type_ptr& t) {
        if (const auto* x = std::get_if<t_ref>(&t->v)) return type_of(x->name);
        if (const auto* x = std::get_if<t_array>(&t->v)) return tarray(subst(x->g));
        if (const auto* x = std::get_if<t_map>(&t->v)) return tmap(subst(x->g));
        if (const auto* x = std::get_if<t_choice>(&t->v)) return tchoice(subst(x->a), subst(x->b));
        return t;  // leaf nodes shared as-is
    }

    agroup_ptr subst(const agroup_ptr& g) {
        if (!g) return nullptr;
        struct v {
            inliner& self;
            agroup_ptr operator()(const ag_elem& x) const { return elem(self.subst(x.t)); }
            agroup_ptr operator()(const ag_alt& x) const {
                return aalt(self.subst(x.a), self.subst(x.b));
            }
            agroup_ptr operator()(const ag_opt& x) const { return aopt(self.subst(x.g)); }
            agroup_ptr operator()(const ag_concat& x) const {
                return acat(self.subst(x.a), self.subst(x.b));
            }
            agroup_ptr operator()(const ag_star& x) const { return astar(self.subst(x.g)); }
        };
        return std::visit(v{*this}, g->v);
    }

    mgroup_ptr subst(const mgroup_ptr& g) {
        if (!g) return nullptr;
        struct v {
            inliner& self;
            mgroup_ptr operator()(const mg_entry& x) const {
                return entry(self.subst(x.key), self.subst(x.value), x.cut);
            }
            mgroup_ptr operator()(const mg_alt& x) const {
                return malt(self.subst(x.a), self.subst(x.b));
            }
            mgroup_ptr operator()(const mg_opt& x) const { return mopt(self.subst(x.g)); }
            mgroup_ptr operator()(const mg_concat& x) const {
                return mcat(self.subst(x.a), self.subst(x.b));
            }
            mgroup_ptr operator()(const mg_star& x) const { return mstar(self.subst(x.g)); }
        };
        return std::visit(v{*this}, g->v);
    }
};

}  // namespace parse_detail

// Root rule (or a named rule) with every reference substituted away.
inline type_ptr inline_rule(const schema& s, const std::string& name) {
    parse_detail::inliner in{s, {}};
    return in.type_of(name);
}

inline type_ptr inline_root(const schema& s) { return inline_rule(s, s.root); }

}  // namespace detcbor::cddl

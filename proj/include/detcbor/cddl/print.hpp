#pragma once

#include <detcbor/cddl/ast.hpp>

namespace detcbor::cddl {

// Canonical text form: parsing the output reproduces the AST exactly.

namespace print_detail {

inline void put_int(std::string& out, const t_lit_int& n) {
    if (n.negative) {
        // value is -(arg + 1); arg may be 2^64 - 1
        unsigned __int128 mag = static_cast<unsigned __int128>(n.arg) + 1;
        char buf[48];
        int k = 0;
        while (mag > 0) {
            buf[k++] = static_cast<char>('0' + static_cast<int>(mag % 10));
            mag /= 10;
        }
        out += '-';
        while (k > 0) out += buf[--k];
    } else {
        out += std::to_string(n.arg);
    }
}

inline void put_text(std::string& out, const std::string& s) {
    out += '"';
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    out += '"';
}

inline void put_type(std::string& out, const type_expr& t);
inline void put_agroup(std::string& out, const array_group& g);
inline void put_mgroup(std::string& out, const map_group& g);

// type choice operands tighter than '/': parenthesize nested choices on the left
inline void put_type1(std::string& out, const type_expr& t) {
    if (std::holds_alternative<t_choice>(t.v)) {
        out += '(';
        put_type(out, t);
        out += ')';
    } else {
        put_type(out, t);
    }
}

inline void put_type(std::string& out, const type_expr& t) {
    struct v {
        std::string& out;
        void operator()(const t_base& x) const {
            switch (x.b) {
                case base_type::any: out += "any"; break;
                case base_type::int_: out += "int"; break;
                case base_type::uint_: out += "uint"; break;
                case base_type::nint: out += "nint"; break;
                case base_type::tstr: out += "tstr"; break;
                case base_type::bstr: out += "bstr"; break;
            }
        }
        void operator()(const t_lit_int& x) const { put_int(out, x); }
        void operator()(const t_lit_text& x) const { put_text(out, x.s); }
        void operator()(const t_lit_simple& x) const {
            out += x.v == 20 ? "false" : x.v == 21 ? "true" : "nil";
        }
        void operator()(const t_int_range& x) const {
            put_int(out, x.lo);
            out += "..";
            put_int(out, x.hi);
        }
        void operator()(const t_size& x) const {
            out += x.b == base_type::tstr ? "tstr" : "bstr";
            out += " .size ";
            if (x.lo == x.hi) {
                out += std::to_string(x.lo);
            } else {
                out += '(';
                out += std::to_string(x.lo);
                out += "..";
                out += std::to_string(x.hi);
                out += ')';
            }
        }
        void operator()(const t_array& x) const {
            out += "[ ";
            if (x.g) {
                put_agroup(out, *x.g);
                out += ' ';
            }
            out += ']';
        }
        void operator()(const t_map& x) const {
            out += "{ ";
            if (x.g) {
                put_mgroup(out, *x.g);
                out += ' ';
            }
            out += '}';
        }
        void operator()(const t_choice& x) const {
            put_type1(out, *x.a);
            out += " / ";
            put_type(out, *x.b);
        }
        void operator()(const t_ref& x) const { out += x.name; }
    };
    std::visit(v{out}, t.v);
}

inline void put_agroup_parens(std::string& out, const array_group& g) {
    out += '(';
    put_agroup(out, g);
    out += ')';
}

// item position (concat/alt left operand): only alts need parens — a bare
// nested concat re-folds to the same left-leaning tree the parser builds
inline void put_aitem(std::string& out, const array_group& g) {
    if (std::holds_alternative<ag_alt>(g.v))
        put_agroup_parens(out, g);
    else
        put_agroup(out, g);
}

inline void put_agroup(std::string& out, const array_group& g) {
    struct v {
        std::string& out;
        void operator()(const ag_elem& x) const { put_type(out, *x.t); }
        void operator()(const ag_alt& x) const {
            put_aitem(out, *x.a);
            out += " // ";
            put_agroup(out, *x.b);
        }
        void operator()(const ag_opt& x) const {
            out += "? ";
            put_agroup_parens(out, *x.g);
        }
        void operator()(const ag_concat& x) const {
            put_aitem(out, *x.a);
            out += ", ";
            put_agroup(out, *x.b);
        }
        void operator()(const ag_star& x) const {
            out += "* ";
            put_agroup_parens(out, *x.g);
        }
    };
    std::visit(v{out}, g.v);
}

inline void put_mgroup_parens(std::string& out, const map_group& g) {
    out += '(';
    put_mgroup(out, g);
    out += ')';
}

inline void put_mitem(std::string& out, const map_group& g) {
    if (std::holds_alternative<mg_alt>(g.v))
        put_mgroup_parens(out, g);
    else
        put_mgroup(out, g);
}

inline void put_mgroup(std::string& out, const map_group& g) {
    struct v {
        std::string& out;
        void operator()(const mg_entry& x) const {
            put_type1(out, *x.key);
            out += x.cut ? ": " : " => ";
            put_type(out, *x.value);
        }
        void operator()(const mg_alt& x) const {
            put_mitem(out, *x.a);
            out += " // ";
            put_mgroup(out, *x.b);
        }
        void operator()(const mg_opt& x) const {
            out += "? ";
            put_mgroup_parens(out, *x.g);
        }
        void operator()(const mg_concat& x) const {
            put_mitem(out, *x.a);
            out += ", ";
            put_mgroup(out, *x.b);
        }
        void operator()(const mg_star& x) const {
            out += "* ";
            put_mgroup_parens(out, *x.g);
        }
    };
    std::visit(v{out}, g.v);
}

}  // namespace print_detail

inline std::string print_type(const type_expr& t) {
    std::string out;
    print_detail::put_type(out, t);
    return out;
}

inline std::string print_type(const type_ptr& t) { return print_type(*t); }

inline std::string print_schema(const schema& s) {
    std::string out;
    for (const auto& r : s.rules) {
        out += r.first;
        out += " = ";
        print_detail::put_type(out, *r.second);
        out += '\n';
    }
    return out;
}

}  // namespace detcbor::cddl

#pragma once

#include <detcbor/cddl/runtime.hpp>

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

// Line-oriented text form for typed values: one constructor per line,
// children indented by two spaces. Scalars carry their payload on the
// same line; list/table state their child count.
//
//   pair
//     uint 18
//     table 2
//       text "a"
//       bytes h'09'
//       text "b"
//       uint 7
//
// nint lines carry the denoted value (-1 - arg), so `nint -1` is arg 0.
// read_value inverts dump_value exactly.

namespace detcbor::cddl {

namespace dump_detail {

inline void put_escaped(std::string& out, std::string_view s) {
    static const char* digits = "0123456789abcdef";
    out += '"';
    for (char c : s) {
        auto b = static_cast<unsigned char>(c);
        if (c == '"' || c == '\\') {
            out += '\\';
            out += c;
        } else if (b < 0x20) {
            out += "\\u00";
            out += digits[b >> 4];
            out += digits[b & 15];
        } else {
            out += c;
        }
    }
    out += '"';
}

inline void put_value(std::string& out, const typed_value& v, size_t depth) {
    out.append(2 * depth, ' ');
    if (std::holds_alternative<tv_unit>(v.v)) {
        out += "unit\n";
    } else if (const auto* u = std::get_if<tv_uint>(&v.v)) {
        out += "uint ";
        out += std::to_string(u->v);
        out += '\n';
    } else if (const auto* n = std::get_if<tv_nint>(&v.v)) {
        unsigned __int128 mag = static_cast<unsigned __int128>(n->arg) + 1;
        char buf[48];
        int k = 0;
        while (mag > 0) {
            buf[k++] = static_cast<char>('0' + static_cast<int>(mag % 10));
            mag /= 10;
        }
        out += "nint -";
        while (k > 0) out += buf[--k];
        out += '\n';
    } else if (const auto* t = std::get_if<tv_text>(&v.v)) {
        out += "text ";
        put_escaped(out, t->v);
        out += '\n';
    } else if (const auto* b = std::get_if<tv_bytes>(&v.v)) {
        out += "bytes h'";
        out += to_hex(b->v);
        out += "'\n";
    } else if (const auto* l = std::get_if<tv_left>(&v.v)) {
        out += "left\n";
        put_value(out, *l->v, depth + 1);
    } else if (const auto* r = std::get_if<tv_right>(&v.v)) {
        out += "right\n";
        put_value(out, *r->v, depth + 1);
    } else if (const auto* p = std::get_if<tv_pair>(&v.v)) {
        out += "pair\n";
        put_value(out, *p->a, depth + 1);
        put_value(out, *p->b, depth + 1);
    } else if (const auto* s = std::get_if<tv_some>(&v.v)) {
        out += "some\n";
        put_value(out, *s->v, depth + 1);
    } else if (std::holds_alternative<tv_none>(v.v)) {
        out += "none\n";
    } else if (const auto* xs = std::get_if<tv_list>(&v.v)) {
        auto items = list_items(*xs);
        out += "list ";
        out += std::to_string(items.size());
        out += '\n';
        for (const auto& x : items) put_value(out, x, depth + 1);
    } else {
        auto entries = table_entries(std::get<tv_table>(v.v));
        out += "table ";
        out += std::to_string(entries.size());
        out += '\n';
        for (const auto& [k, val] : entries) {
            put_value(out, k, depth + 1);
            put_value(out, val, depth + 1);
        }
    }
}

}  // namespace dump_detail

inline std::string dump_value(const typed_value& v) {
    std::string out;
    dump_detail::put_value(out, v, 0);
    return out;
}

struct dump_error {
    size_t line = 0;  // 1-based; 0 when the input ended early
    std::string message;
};

namespace dump_detail {

struct dline {
    size_t indent = 0;
    std::string_view word;
    std::string_view payload;
    size_t no = 0;
};

struct reader {
    std::vector<dline> lines;
    size_t at = 0;
    std::optional<dump_error> err;

    void fail(size_t no, std::string msg) {
        if (!err) err = dump_error{no, std::move(msg)};
    }

    bool split(std::string_view text) {
        size_t no = 0, pos = 0;
        while (pos < text.size()) {
            size_t end = text.find('\n', pos);
            if (end == std::string_view::npos) end = text.size();
            std::string_view raw = text.substr(pos, end - pos);
            pos = end + 1;
            no++;
            size_t sp = 0;
            while (sp < raw.size() && raw[sp] == ' ') sp++;
            if (sp == raw.size()) continue;  // blank
            if (sp % 2 != 0) {
                fail(no, "odd indentation");
                return false;
            }
            std::string_view rest = raw.substr(sp);
            size_t cut = rest.find(' ');
            dline l;
            l.indent = sp / 2;
            l.word = cut == std::string_view::npos ? rest : rest.substr(0, cut);
            l.payload = cut == std::string_view::npos ? std::string_view{} : rest.substr(cut + 1);
            l.no = no;
            lines.push_back(l);
        }
        return true;
    }

    const dline* take(size_t depth) {
        if (at >= lines.size()) {
            fail(0, "input ended early");
            return nullptr;
        }
        const dline& l = lines[at];
        if (l.indent != depth) {
            fail(l.no, "expected indent " + std::to_string(2 * depth));
            return nullptr;
        }
        at++;
        return &l;
    }

    std::optional<std::uint64_t> number(const dline& l) {
        std::uint64_t v = 0;
        const char* first = l.payload.data();
        const char* last = first + l.payload.size();
        auto r = std::from_chars(first, last, v);
        if (r.ec != std::errc{} || r.ptr != last) {
            fail(l.no, "bad number");
            return std::nullopt;
        }
        return v;
    }

    std::optional<std::string> unquote(const dline& l) {
        std::string_view s = l.payload;
        if (s.size() < 2 || s.front() != '"' || s.back() != '"') {
            fail(l.no, "expected a quoted string");
            return std::nullopt;
        }
        s = s.substr(1, s.size() - 2);
        std::string t;
        for (size_t i = 0; i < s.size(); ++i) {
            if (s[i] != '\\') {
                if (s[i] == '"') {
                    fail(l.no, "unescaped quote");
                    return std::nullopt;
                }
                t += s[i];
                continue;
            }
            if (++i >= s.size()) {
                fail(l.no, "dangling escape");
                return std::nullopt;
            }
            if (s[i] == '"' || s[i] == '\\') {
                t += s[i];
            } else if (s[i] == 'u' && i + 4 < s.size() && s.substr(i + 1, 2) == "00") {
                auto b = from_hex(std::string(s.substr(i + 3, 2)));
                if (b.size() != 1) {
                    fail(l.no, "bad \\u escape");
                    return std::nullopt;
                }
                t += static_cast<char>(b[0]);
                i += 4;
            } else {
                fail(l.no, "unknown escape");
                return std::nullopt;
            }
        }
        return t;
    }

    typed_value value(size_t depth) {
        if (depth > 4096) {
            fail(at < lines.size() ? lines[at].no : 0, "nesting too deep");
            return vunit();
        }
        const dline* l = take(depth);
        if (!l) return vunit();
        if (l->word == "unit") return vunit();
        if (l->word == "none") return vnone();
        if (l->word == "uint") {
            auto v = number(*l);
            return v ? vuint(*v) : vunit();
        }
        if (l->word == "nint") {
            std::string_view p = l->payload;
            if (p.empty() || p.front() != '-') {
                fail(l->no, "nint wants a negative value");
                return vunit();
            }
            unsigned __int128 mag = 0;
            for (char c : p.substr(1)) {
                if (c < '0' || c > '9' || mag > (static_cast<unsigned __int128>(1) << 64)) {
                    fail(l->no, "bad number");
                    return vunit();
                }
                mag = mag * 10 + static_cast<unsigned>(c - '0');
            }
            if (mag < 1 || mag > (static_cast<unsigned __int128>(1) << 64)) {
                fail(l->no, "nint out of range");
                return vunit();
            }
            return vnint(static_cast<std::uint64_t>(mag - 1));
        }
        if (l->word == "text") {
            auto s = unquote(*l);
            return s ? vtext(std::move(*s)) : vunit();
        }
        if (l->word == "bytes") {
            std::string_view p = l->payload;
            if (p.size() < 3 || p.substr(0, 2) != "h'" || p.back() != '\'') {
                fail(l->no, "expected h'..'");
                return vunit();
            }
            std::string hexpart(p.substr(2, p.size() - 3));
            if (hexpart.size() % 2 != 0 ||
                hexpart.find_first_not_of("0123456789abcdef") != std::string::npos) {
                fail(l->no, "bad hex");
                return vunit();
            }
            return vbytes(from_hex(hexpart));
        }
        if (l->word == "left") return vleft(value(depth + 1));
        if (l->word == "right") return vright(value(depth + 1));
        if (l->word == "some") return vsome(value(depth + 1));
        if (l->word == "pair") {
            typed_value a = value(depth + 1);
            typed_value b = value(depth + 1);
            return vpair(std::move(a), std::move(b));
        }
        if (l->word == "list") {
            auto n = number(*l);
            if (!n) return vunit();
            std::vector<typed_value> items;
            for (std::uint64_t i = 0; i < *n && !err; ++i) items.push_back(value(depth + 1));
            return vlist(std::move(items));
        }
        if (l->word == "table") {
            auto n = number(*l);
            if (!n) return vunit();
            std::vector<std::pair<typed_value, typed_value>> es;
            for (std::uint64_t i = 0; i < *n && !err; ++i) {
                typed_value k = value(depth + 1);
                typed_value v = value(depth + 1);
                es.emplace_back(std::move(k), std::move(v));
            }
            return vtable(std::move(es));
        }
        fail(l->no, "unknown constructor '" + std::string(l->word) + "'");
        return vunit();
    }
};

}  // namespace dump_detail

inline result<typed_value, dump_error> read_value(std::string_view text) {
    dump_detail::reader r;
    if (!r.split(text)) return *r.err;
    typed_value v = r.value(0);
    if (r.err) return *r.err;
    if (r.at != r.lines.size()) return dump_error{r.lines[r.at].no, "trailing lines"};
    return v;
}

}  // namespace detcbor::cddl

#pragma once

#include <detcbor/det.hpp>

#include <string>
#include <vector>

// Diagnostic notation for validated items: numbers, "text", h'ABCD',
// [a, b], {k: v}, tag(item), false/true/null/undefined/simple(n).
// One cursor walks the bytes once; container state lives on an explicit
// stack, so time is linear and nesting depth is bounded by heap, not by
// the call stack.

namespace detcbor::cbor {

namespace diag_detail {

inline void put_uint(std::string& out, std::uint64_t v) { out += std::to_string(v); }

inline void put_nint(std::string& out, std::uint64_t arg) {
    // value is -(arg + 1); arg may be 2^64 - 1
    unsigned __int128 mag = static_cast<unsigned __int128>(arg) + 1;
    char buf[48];
    int k = 0;
    while (mag > 0) {
        buf[k++] = static_cast<char>('0' + static_cast<int>(mag % 10));
        mag /= 10;
    }
    out += '-';
    while (k > 0) out += buf[--k];
}

inline void put_text(std::string& out, bview payload) {
    static const char* digits = "0123456789abcdef";
    out += '"';
    for (byte b : payload) {
        if (b == '"' || b == '\\') {
            out += '\\';
            out += static_cast<char>(b);
        } else if (b < 0x20) {
            out += "\\u00";
            out += digits[b >> 4];
            out += digits[b & 15];
        } else {
            out += static_cast<char>(b);
        }
    }
    out += '"';
}

inline void put_simple(std::string& out, byte v) {
    switch (v) {
        case 20: out += "false"; return;
        case 21: out += "true"; return;
        case 22: out += "null"; return;
        case 23: out += "undefined"; return;
        default:
            out += "simple(";
            out += std::to_string(v);
            out += ')';
    }
}

}  // namespace diag_detail

// Pre: input begins with one valid deterministic item (det_check passed).
inline std::string diag(bview input) {
    using namespace diag_detail;
    struct frame {
        std::uint64_t remaining;  // arrays/tags: items; maps: entries
        std::uint8_t kind;        // 0 array, 1 map, 2 tag
        bool first = true;
        bool value_side = false;  // maps: the key is out, ": value" is due
    };
    std::string out;
    std::vector<frame> st;
    size_t pos = 0;

    for (;;) {
        // one item starts at pos: emit a scalar whole, or open a container
        auto r = parse_header(input.subspan(pos));
        assert(r.ok());
        const raw_header& h = r.value().h;
        size_t hn = r.value().consumed;
        switch (h.major_type) {
            case mt_uint:
                put_uint(out, h.arg.value);
                pos += hn;
                break;
            case mt_nint:
                put_nint(out, h.arg.value);
                pos += hn;
                break;
            case mt_bstr: {
                size_t n = static_cast<size_t>(h.arg.value);
                out += "h'";
                out += to_hex(input.subspan(pos + hn, n));
                out += '\'';
                pos += hn + n;
                break;
            }
            case mt_tstr: {
                size_t n = static_cast<size_t>(h.arg.value);
                put_text(out, input.subspan(pos + hn, n));
                pos += hn + n;
                break;
            }
            case mt_array:
                out += '[';
                st.push_back({h.arg.value, 0});
                pos += hn;
                break;
            case mt_map:
                out += '{';
                st.push_back({h.arg.value, 1});
                pos += hn;
                break;
            case mt_tag:
                put_uint(out, h.arg.value);
                out += '(';
                st.push_back({1, 2});
                pos += hn;
                break;
            default:
                put_simple(out, static_cast<byte>(h.arg.value));
                pos += hn;
                break;
        }

        // close finished containers, then claim the next child slot
        for (;;) {
            if (st.empty()) return out;
            frame& f = st.back();
            if (f.remaining == 0 && !f.value_side) {
                out += f.kind == 0 ? ']' : f.kind == 1 ? '}' : ')';
                st.pop_back();
                continue;
            }
            if (f.kind == 0) {
                if (!f.first) out += ", ";
                f.first = false;
                f.remaining--;
            } else if (f.kind == 1) {
                if (f.value_side) {
                    out += ": ";
                    f.value_side = false;
                    f.remaining--;
                } else {
                    if (!f.first) out += ", ";
                    f.first = false;
                    f.value_side = true;
                }
            } else {
                f.remaining--;
            }
            break;
        }
    }
}

}  // namespace detcbor::cbor

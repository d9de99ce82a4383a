#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace detcbor {

using byte = std::uint8_t;
using bview = std::span<const byte>;

inline bview as_bview(std::string_view s) {
    return bview(reinterpret_cast<const byte*>(s.data()), s.size());
}

inline bview as_bview(const std::vector<byte>& v) { return bview(v.data(), v.size()); }

inline bool bytes_equal(bview a, bview b) {
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size()) == 0);
}

// Lexicographic byte order; a proper prefix sorts before its extensions.
inline int compare_bytes(bview a, bview b) {
    size_t n = a.size() < b.size() ? a.size() : b.size();
    if (n != 0) {
        int c = std::memcmp(a.data(), b.data(), n);
        if (c != 0) return c < 0 ? -1 : 1;
    }
    if (a.size() == b.size()) return 0;
    return a.size() < b.size() ? -1 : 1;
}

// Minimal success-or-error carrier; E is an enum or small struct.
template <class T, class E>
class result {
  public:
    result(T v) : rep_(std::in_place_index<0>, std::move(v)) {}
    result(E e) : rep_(std::in_place_index<1>, std::move(e)) {}
    bool ok() const { return rep_.index() == 0; }
    explicit operator bool() const { return ok(); }
    const T& value() const { return std::get<0>(rep_); }
    T& value() { return std::get<0>(rep_); }
    const E& error() const { return std::get<1>(rep_); }

  private:
    std::variant<T, E> rep_;
};

inline std::string to_hex(bview b) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(b.size() * 2);
    for (byte c : b) {
        s.push_back(digits[c >> 4]);
        s.push_back(digits[c & 0xF]);
    }
    return s;
}

inline int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

// Ignores whitespace; returns empty on any non-hex character or odd length.
inline std::vector<byte> from_hex(std::string_view s) {
    std::vector<byte> out;
    int hi = -1;
    for (char c : s) {
        if (c == ' ' || c == '\n' || c == '\t' || c == '\r') continue;
        int v = hex_nibble(c);
        if (v < 0) return {};
        if (hi < 0) {
            hi = v;
        } else {
            out.push_back(static_cast<byte>(hi << 4 | v));
            hi = -1;
        }
    }
    if (hi >= 0) return {};
    return out;
}

}  // namespace detcbor

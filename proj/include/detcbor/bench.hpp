#pragma once

#include <detcbor/cddl/parse.hpp>
#include <detcbor/cddl/runtime.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <utility>
#include <vector>

// Three fixed workload shapes: a small record, map lookups over sorted
// entries, and a two-level array nesting. Reports are field lists so the
// command line prints them and tests read them.

namespace detcbor::bench {

using report = std::vector<std::pair<std::string, std::string>>;

namespace bench_detail {

template <class F>
inline std::uint64_t time_ns(F&& f) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    auto t1 = std::chrono::steady_clock::now();
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
}

inline std::uint64_t median(std::vector<std::uint64_t> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

inline cddl::elab_schema schema_of(const char* text) {
    auto s = cddl::parse_cddl(text);
    if (!s.ok()) std::abort();  // embedded text is a program invariant
    auto e = cddl::elaborate(cddl::inline_root(s.value()));
    if (!e.ok()) std::abort();
    return std::move(e.value());
}

}  // namespace bench_detail

// --- record: validate + parse + reserialize an 8-field record ---

struct rec_result {
    size_t iters = 0;
    size_t bytes = 0;
    std::uint64_t median_ns_per_op = 0;
    bool ok = false;
};

inline rec_result bench_rec(size_t iters) {
    using namespace cbor;
    auto schema = bench_detail::schema_of(
        "rec = { 1: uint, 2: uint, 3: tstr, 4: bstr, 5: uint, 6: tstr, 7: uint, 8: uint }");
    auto rec = mk_map({{cuint(1), cuint(1000)},
                       {cuint(2), cuint(77)},
                       {cuint(3), ctext("device-7")},
                       {cuint(4), cbytes({0x00, 0x11, 0x22, 0x33})},
                       {cuint(5), cuint(9)},
                       {cuint(6), ctext("ok")},
                       {cuint(7), cuint(123456)},
                       {cuint(8), cuint(0)}})
                   .value();
    std::vector<byte> bytes = serialize_det(rec);
    std::vector<byte> out(bytes.size());

    rec_result r;
    r.iters = iters;
    r.bytes = bytes.size();
    r.ok = true;
    std::vector<std::uint64_t> samples;
    for (int s = 0; s < 9; ++s) {
        samples.push_back(bench_detail::time_ns([&] {
            for (size_t i = 0; i < iters; ++i) {
                auto val = cddl::validate(schema, as_bview(bytes));
                if (!val.ok()) r.ok = false;
                auto p = cddl::parse(schema, as_bview(bytes));
                if (!p.ok()) r.ok = false;
                auto n = cddl::serialize(schema, p.value().value, std::span<byte>(out));
                if (!n.ok() || n.value() != bytes.size()) r.ok = false;
            }
        }));
    }
    r.median_ns_per_op = bench_detail::median(std::move(samples)) / (iters ? iters : 1);
    return r;
}

// --- map: K lookups over N sorted entries, early exit vs forced scan ---
//
// Keys occupy the upper two thirds of [0, 3N): present keys are N + 2i.
// Absent probes are uniform over the full span, so a third of them sit
// below the first key and the rest land in the gaps. The sorted walk
// stops at the first key past the probe; the forced scan checks every
// entry the way an unsorted map would require.

struct map_result {
    size_t n = 0, k = 0;
    std::uint64_t sorted_ns = 0, linear_ns = 0;
    double speedup = 0;
    bool agree = false;
};

namespace bench_detail {

// pre: map_bytes is one valid deterministic map
inline bview map_find(bview map_bytes, bview key_enc, bool sorted) {
    using namespace cbor;
    auto m = std::get<sv_map>(read_shallow(map_bytes));
    entry_iter it(m);
    while (auto e = it.next()) {
        int c = compare_bytes(e->first, key_enc);
        if (c == 0) return e->second;
        if (sorted && c > 0) return {};
    }
    return {};
}

}  // namespace bench_detail

inline map_result bench_map(size_t n, size_t k, std::uint64_t seed = 9001) {
    using namespace cbor;
    std::vector<std::pair<canon_item, canon_item>> entries;
    for (size_t i = 0; i < n; ++i)
        entries.emplace_back(cuint(n + 2 * i), cuint(i % 100));
    std::vector<byte> map_bytes = serialize_det(mk_map(std::move(entries)).value());

    // pre-encoded probes, all absent
    std::mt19937_64 rng(seed);
    std::vector<std::vector<byte>> probes;
    for (size_t i = 0; i < k; ++i) {
        std::uint64_t r = rng() % (3 * n);
        if (r >= n && (r - n) % 2 == 0) r += 1;  // between two present keys
        probes.push_back(serialize_det(cuint(r)));
    }
    // a few present keys to check the two modes agree
    std::vector<std::vector<byte>> hits;
    for (size_t i = 0; i < 32; ++i) hits.push_back(serialize_det(cuint(n + 2 * (rng() % n))));

    map_result res;
    res.n = n;
    res.k = k;
    res.agree = true;
    for (const auto& h : hits) {
        bview a = bench_detail::map_find(as_bview(map_bytes), as_bview(h), true);
        bview b = bench_detail::map_find(as_bview(map_bytes), as_bview(h), false);
        if (a.data() != b.data() || a.size() != b.size() || a.empty()) res.agree = false;
    }

    size_t miss_sorted = 0, miss_linear = 0;
    std::vector<std::uint64_t> ts, tl;
    for (int s = 0; s < 5; ++s) {
        ts.push_back(bench_detail::time_ns([&] {
            for (const auto& p : probes)
                if (bench_detail::map_find(as_bview(map_bytes), as_bview(p), true).empty())
                    miss_sorted++;
        }));
        tl.push_back(bench_detail::time_ns([&] {
            for (const auto& p : probes)
                if (bench_detail::map_find(as_bview(map_bytes), as_bview(p), false).empty())
                    miss_linear++;
        }));
    }
    if (miss_sorted != miss_linear || miss_sorted != 5 * k) res.agree = false;
    res.sorted_ns = bench_detail::median(std::move(ts));
    res.linear_ns = bench_detail::median(std::move(tl));
    res.speedup = res.sorted_ns ? static_cast<double>(res.linear_ns) /
                                      static_cast<double>(res.sorted_ns)
                                : 0.0;
    return res;
}

// --- arr: validate and iterate outer x inner arrays of zero leaves ---

struct arr_result {
    size_t outer = 0, inner = 0;
    size_t bytes = 0;
    std::uint64_t elements = 0;
    std::uint64_t validate_ns = 0, iterate_ns = 0;
    bool ok = false;
};

inline std::vector<byte> nested_array_bytes(size_t outer, size_t inner) {
    using namespace cbor;
    byte buf[16];
    size_t hn = encode_header(raw_header{mt_array, min_uint(outer)}, std::span<byte>(buf));
    std::vector<byte> hdr(buf, buf + hn);
    size_t rn = encode_header(raw_header{mt_array, min_uint(inner)}, std::span<byte>(buf));
    std::vector<byte> row_hdr(buf, buf + rn);
    std::vector<byte> out;
    out.reserve(hdr.size() + outer * (row_hdr.size() + inner));
    out.insert(out.end(), hdr.begin(), hdr.end());
    for (size_t i = 0; i < outer; ++i) {
        out.insert(out.end(), row_hdr.begin(), row_hdr.end());
        out.insert(out.end(), inner, byte{0x00});
    }
    return out;
}

inline arr_result bench_arr(size_t outer, size_t inner) {
    using namespace cbor;
    std::vector<byte> bytes = nested_array_bytes(outer, inner);
    arr_result r;
    r.outer = outer;
    r.inner = inner;
    r.bytes = bytes.size();
    r.ok = true;

    size_t covered = 0;
    r.validate_ns = bench_detail::time_ns([&] {
        auto d = det_check(as_bview(bytes));
        if (!d.ok() || d.value() != bytes.size()) r.ok = false;
        else covered = d.value();
    });
    (void)covered;

    std::uint64_t leaves = 0;
    r.iterate_ns = bench_detail::time_ns([&] {
        auto a = std::get<sv_array>(read_shallow(as_bview(bytes)));
        item_iter rows(a);
        while (auto row = rows.next()) {
            auto ia = std::get<sv_array>(read_shallow(*row));
            item_iter cells(ia);
            while (auto cell = cells.next())
                if ((*cell)[0] == byte{0x00}) leaves++;
        }
    });
    r.elements = leaves;
    if (leaves != static_cast<std::uint64_t>(outer) * inner) r.ok = false;
    return r;
}

// --- report rendering ---

inline report to_report(const rec_result& r) {
    return {{"workload", "rec"},
            {"iters", std::to_string(r.iters)},
            {"record_bytes", std::to_string(r.bytes)},
            {"median_ns_per_op", std::to_string(r.median_ns_per_op)},
            {"ok", r.ok ? "true" : "false"}};
}

inline report to_report(const map_result& r) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", r.speedup);
    return {{"workload", "map"},
            {"entries", std::to_string(r.n)},
            {"lookups", std::to_string(r.k)},
            {"sorted_ns", std::to_string(r.sorted_ns)},
            {"linear_ns", std::to_string(r.linear_ns)},
            {"early_exit_speedup", buf},
            {"modes_agree", r.agree ? "true" : "false"}};
}

inline report to_report(const arr_result& r) {
    return {{"workload", "arr"},
            {"outer", std::to_string(r.outer)},
            {"inner", std::to_string(r.inner)},
            {"input_bytes", std::to_string(r.bytes)},
            {"elements", std::to_string(r.elements)},
            {"validate_ns", std::to_string(r.validate_ns)},
            {"iterate_ns", std::to_string(r.iterate_ns)},
            {"ok", r.ok ? "true" : "false"}};
}

}  // namespace detcbor::bench

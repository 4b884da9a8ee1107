#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace semalign {

// splitmix64 finalizer; used to derive independent per-item RNG seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    return mix64(base ^ mix64(a + 0x51ed2701u) ^ mix64(b + 0x2545f491u));
}

// Explicit draw helpers: fixed consumption of raw engine output, so streams of
// draws are reproducible independent of standard-library distribution internals.
template <class Rng>
double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <class Rng>
double uniform_pm(Rng& rng, double amplitude) {
    return amplitude * (2.0 * uniform01(rng) - 1.0);
}

// Box-Muller pair of independent standard normals.
template <class Rng>
std::pair<double, double> normal2(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.141592653589793238462643383279502884 * u2;
    return {r * std::cos(a), r * std::sin(a)};
}

// Shortest round-trip decimal form; keeps text artifacts bit-reproducible.
inline std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::invalid_argument("bad number: '" + std::string(s) + "'");
    return v;
}

inline long long parse_int(std::string_view s) {
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::invalid_argument("bad integer: '" + std::string(s) + "'");
    return v;
}

// Checkpoint parameter blocks: values in round-trip decimal form, 16 per line.
// The caller writes the "<tag> <count>" line; read_values checks it.
inline void write_values(std::ostream& os, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        os << format_double(v[i]);
        os << ((i % 16 == 15 || i + 1 == v.size()) ? '\n' : ' ');
    }
}

inline void read_values(std::istream& is, const char* tag, std::vector<double>& v) {
    std::string word;
    std::size_t count = 0;
    if (!(is >> word >> count) || word != tag)
        throw std::runtime_error(std::string("expected parameter block '") + tag + "'");
    if (count != v.size()) throw std::runtime_error("parameter block size mismatch");
    for (double& x : v) {
        if (!(is >> word)) throw std::runtime_error("truncated parameter block");
        x = parse_double(word);
    }
}

}  // namespace semalign

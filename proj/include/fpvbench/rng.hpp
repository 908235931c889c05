// Keyed random streams. A stream is identified by the master seed plus an
// arbitrary tuple of integers/strings, so results never depend on the order
// in which streams are created or on which thread consumes them.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace fpvbench {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class StreamKey {
public:
    explicit StreamKey(std::uint64_t seed) noexcept : h_(splitmix64(seed)) {}

    StreamKey& add(std::uint64_t v) noexcept {
        h_ = splitmix64(h_ ^ splitmix64(v + 0x632be59bd9b4e019ULL));
        return *this;
    }
    StreamKey& add(std::int64_t v) noexcept { return add(static_cast<std::uint64_t>(v)); }
    StreamKey& add(int v) noexcept { return add(static_cast<std::uint64_t>(static_cast<std::int64_t>(v))); }
    StreamKey& add(std::string_view s) noexcept { return add(fnv1a64(s)); }

    [[nodiscard]] std::uint64_t value() const noexcept { return h_; }
    [[nodiscard]] std::mt19937_64 engine() const { return std::mt19937_64(h_); }

private:
    std::uint64_t h_;
};

inline double uniform01(std::mt19937_64& g) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(g);
}

inline bool bernoulli(std::mt19937_64& g, double p) { return uniform01(g) < p; }

}  // namespace fpvbench

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace coral {

inline constexpr const char* kToolVersion = "0.1.0";

// Error categories surfaced to the CLI. Everything derives from Error so the
// front end can map library failures to a single exit code.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& msg, int line = 0, int col = 0)
        : Error(msg), line(line), col(col) {}
    int line;
    int col;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Numeric degeneracy: normalizing a zero vector, fully masked softmax rows,
// non-finite gradients.
class NumericError : public Error {
public:
    using Error::Error;
};

// FNV-1a, used for content fingerprints in artifact headers and checkpoints.
inline uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 0xcbf29ce484222325ull) {
    uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

// Deterministic RNG. mt19937_64 has a standardized bit stream; the scaling
// below avoids std::uniform_*_distribution, whose output is
// implementation-defined.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double next_double() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // [0, n)
    size_t next_index(size_t n) {
        // modulo bias is negligible for the corpus sizes involved, but the
        // rejection loop keeps sampling exact
        if (n == 0) throw Error("Rng::next_index: empty range");
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return static_cast<size_t>(x % n);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = next_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

// Stable combination of a user seed with a stream tag, so independent
// consumers (epoch shuffles, negative sampling, splits) never share streams.
inline uint64_t seed_stream(uint64_t seed, std::string_view tag) {
    return fnv1a64(tag, seed ^ 0x9e3779b97f4a7c15ull);
}

// splitmix64 finalizer. FNV-1a alone ranks short similar strings by their
// prefix (poor high-bit avalanche), so anything that orders by hash must mix
// the result first.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace coral

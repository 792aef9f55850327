#pragma once

#include <cstdint>
#include <span>

namespace ccmdp {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// Derives a stream key from a root seed and up to three split words.
//
// Stream-splitting rule used throughout: a batch of rollouts launched at
// solver iteration t draws trajectory i from the stream
// derive_stream(seed, t, i). Streams are statistically independent and a
// trajectory's randomness never depends on which worker thread runs it.
constexpr std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t a = 0,
                                      std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t k = mix64(seed + kGolden);
    k = mix64(k ^ mix64(a + kGolden));
    k = mix64(k ^ mix64(b + 2 * kGolden));
    k = mix64(k ^ mix64(c + 3 * kGolden));
    return k;
}

// Counter-based generator: output n is mix64(key + (n+1)*kGolden), a pure
// function of (key, n). Advancing is just incrementing the counter, so the
// sequence is reproducible regardless of call interleaving elsewhere.
class StreamRng {
  public:
    explicit StreamRng(std::uint64_t key) : key_(key) {}
    StreamRng(std::uint64_t seed, std::uint64_t stream)
        : key_(derive_stream(seed, stream)) {}

    std::uint64_t next_u64() { return mix64(key_ + (++ctr_) * kGolden); }

    // Uniform double in [0, 1) from the top 53 bits.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Inverse-CDF draw from an unnormalized nonnegative weight vector.
    int next_categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = next_uniform() * total;
        double acc = 0.0;
        for (int i = 0; i < static_cast<int>(weights.size()); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return static_cast<int>(weights.size()) - 1;
    }

    std::uint64_t key() const { return key_; }

  private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

} // namespace ccmdp

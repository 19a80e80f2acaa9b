#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>

#include "crossway/core.hpp"

namespace crossway {

// One named random stream. Streams are derived from (master seed, stream id)
// so drawing from one never perturbs another, and the same master seed,
// stream id and draw index always yield the same value. mt19937_64 output is
// fixed by the standard, so replays are bit-exact across platforms.
class RngStream {
  public:
    RngStream(std::uint64_t master_seed, const std::string& stream_id)
        : gen_(mix(master_seed, fnv1a(stream_id))) {}

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() {
        ++draws_;
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double exponential(double mean) {
        if (!(mean > 0.0)) throw InvalidDistributionParam("exponential: mean must be > 0");
        return -mean * std::log1p(-uniform01());
    }

    double bernoulli(double p) {
        if (!(p >= 0.0 && p <= 1.0)) throw InvalidDistributionParam("bernoulli: p must be in [0,1]");
        return uniform01() < p ? 1.0 : 0.0;
    }

    double uniform(double lo, double hi) {
        if (!(hi >= lo)) throw InvalidDistributionParam("uniform: hi must be >= lo");
        return lo + (hi - lo) * uniform01();
    }

    std::uint64_t bits() {
        ++draws_;
        return gen_();
    }

    std::uint64_t draw_count() const { return draws_; }

  private:
    static std::uint64_t fnv1a(const std::string& s) {
        std::uint64_t h = 1469598103934665603ULL;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        return h;
    }

    // splitmix64 finalizer; decorrelates master seed and stream hash.
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b | 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 gen_;
    std::uint64_t draws_ = 0;
};

// Lazily-created family of named streams under one master seed.
class RngSuite {
  public:
    explicit RngSuite(std::uint64_t master_seed = 0) : master_seed_(master_seed) {}

    RngStream& stream(const std::string& stream_id) {
        auto it = streams_.find(stream_id);
        if (it == streams_.end()) {
            it = streams_.emplace(stream_id, RngStream(master_seed_, stream_id)).first;
        }
        return it->second;
    }

    std::uint64_t master_seed() const { return master_seed_; }

  private:
    std::uint64_t master_seed_;
    std::map<std::string, RngStream> streams_;
};

}  // namespace crossway

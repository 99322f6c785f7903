#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "bud/common.hpp"

namespace bud {

// Philox4x32-10 counter-based generator (Salmon et al. 2011).  A stream is
// identified by (key, prefix counter); successive blocks only bump the low
// counter word, so streams derived from distinct (seed, replication,
// substream) triples never overlap.
class Philox4x32 {
  public:
    Philox4x32(uint64_t key, std::array<uint32_t, 3> counter_prefix)
        : key0_(static_cast<uint32_t>(key)), key1_(static_cast<uint32_t>(key >> 32)) {
        ctr_ = {0, counter_prefix[0], counter_prefix[1], counter_prefix[2]};
    }

    uint32_t next_u32() {
        if (have_ == 0) {
            block_ = round10(ctr_, key0_, key1_);
            ++ctr_[0];
            have_ = 4;
        }
        return block_[4 - have_--];
    }

    uint64_t next_u64() {
        uint64_t hi = next_u32();
        uint64_t lo = next_u32();
        return (hi << 32) | lo;
    }

  private:
    static std::array<uint32_t, 4> round10(std::array<uint32_t, 4> c, uint32_t k0, uint32_t k1) {
        constexpr uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
        constexpr uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
        for (int r = 0; r < 10; ++r) {
            uint64_t p0 = static_cast<uint64_t>(M0) * c[0];
            uint64_t p1 = static_cast<uint64_t>(M1) * c[2];
            uint32_t h0 = static_cast<uint32_t>(p0 >> 32), l0 = static_cast<uint32_t>(p0);
            uint32_t h1 = static_cast<uint32_t>(p1 >> 32), l1 = static_cast<uint32_t>(p1);
            c = {h1 ^ c[1] ^ k0, l1, h0 ^ c[3] ^ k1, l0};
            k0 += W0;
            k1 += W1;
        }
        return c;
    }

    uint32_t key0_, key1_;
    std::array<uint32_t, 4> ctr_;
    std::array<uint32_t, 4> block_{};
    int have_ = 0;
};

// Named substreams within one replication.  Outcome draws must not be
// perturbed by how many metric-MC draws a policy consumes.
enum class Sub : uint32_t {
    Assignment = 1,
    Outcome = 2,
    Profile = 3,
    MetricMc = 4,
    PriorDraw = 5,
    Analysis = 6,
};

// Deterministic stream with the usual scalar distributions.  All sampling is
// implemented locally (no std::*_distribution) so results are identical
// across standard libraries.
class RngStream {
  public:
    RngStream(uint64_t master_seed, uint64_t replication, Sub sub, uint32_t salt = 0)
        : gen_(master_seed,
               {static_cast<uint32_t>(replication), static_cast<uint32_t>(replication >> 32),
                (static_cast<uint32_t>(sub) << 8) ^ salt}) {}

    uint32_t next_u32() { return gen_.next_u32(); }
    uint64_t next_u64() { return gen_.next_u64(); }

    // Uniform on [0,1) with 53 random bits.
    double u01() { return static_cast<double>(gen_.next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0,1); never returns an endpoint.
    double u01_open() {
        double u = u01();
        return u == 0.0 ? 0x1.0p-53 : u;
    }

    bool bernoulli(double p) { return u01() < p; }

    uint32_t uniform_int(uint32_t n) {
        // Lemire's multiply-shift; tiny modulo bias rejection loop.
        uint64_t threshold = (~uint64_t{0} % n + 1) % n;  // 2^64 mod n
        for (;;) {
            uint64_t x = gen_.next_u64();
            __uint128_t m = static_cast<__uint128_t>(x) * n;
            if (static_cast<uint64_t>(m) >= threshold) return static_cast<uint32_t>(m >> 64);
        }
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // polar Box-Muller
        for (;;) {
            double a = 2.0 * u01() - 1.0;
            double b = 2.0 * u01() - 1.0;
            double s = a * a + b * b;
            if (s > 0.0 && s < 1.0) {
                double f = std::sqrt(-2.0 * std::log(s) / s);
                spare_ = b * f;
                has_spare_ = true;
                return a * f;
            }
        }
    }

    // Marsaglia-Tsang for shape >= 1; boosting trick below 1.
    double gamma(double shape) {
        if (shape < 1.0) {
            double u = u01_open();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = u01_open();
            if (u < 1.0 - 0.0331 * (x * x) * (x * x)) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double beta(double a, double b) {
        double x = gamma(a);
        double y = gamma(b);
        return x / (x + y);
    }

    void dirichlet(const std::vector<double>& alpha, std::vector<double>& out) {
        out.resize(alpha.size());
        double total = 0.0;
        for (size_t i = 0; i < alpha.size(); ++i) {
            out[i] = gamma(alpha[i]);
            total += out[i];
        }
        for (double& v : out) v /= total;
    }

    // Categorical draw from an (already normalized) probability vector.
    size_t categorical(const std::vector<double>& probs) {
        double u = u01();
        double acc = 0.0;
        for (size_t i = 0; i + 1 < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return i;
        }
        return probs.empty() ? 0 : probs.size() - 1;
    }

  private:
    Philox4x32 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace bud

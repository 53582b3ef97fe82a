// Copyright 2026 The cmstr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace cmstr {

// Deterministic counter-style random source built on splitmix64.
//
// Streams are derived by hashing a tuple of words (seed, site, step, sample),
// so any consumer can reconstruct its stream from coordinates alone. That is
// what makes dropout, mask draws and data order independent of evaluation
// order and trivially resumable. std::random distributions are avoided on
// purpose: their output is not pinned by the standard, and datasets must be
// byte-identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    static std::uint64_t mix(std::uint64_t h) {
        h += 0x9e3779b97f4a7c15ull;
        h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
        h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
        return h ^ (h >> 31);
    }

    // Order-sensitive combine of up to four words into a stream seed.
    static std::uint64_t hash(std::uint64_t a, std::uint64_t b = 0,
                              std::uint64_t c = 0, std::uint64_t d = 0) {
        std::uint64_t h = mix(a);
        h = mix(h ^ (b + 0x632be59bd9b4e019ull));
        h = mix(h ^ (c + 0x9e6c63d0876a9a47ull));
        h = mix(h ^ (d + 0xd1b54a32d192ed03ull));
        return h;
    }

    static Rng derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                      std::uint64_t c = 0) {
        return Rng(hash(seed, a, b, c));
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53 significant bits.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    float uniform_f32() { return float(uniform()); }

    // Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        std::uint64_t span = std::uint64_t(hi - lo) + 1;
        return lo + int(next_u64() % span);
    }

    // Box-Muller, evaluated in double and rounded once to float so the f32
    // and f64 model instantiations can share bit-equal initial weights.
    float normal_f32(float mean = 0.0f, float stddev = 1.0f) {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        double z = std::sqrt(-2.0 * std::log(u1)) *
                   std::cos(2.0 * 3.14159265358979323846 * u2);
        return float(double(mean) + double(stddev) * z);
    }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = int(v.size()) - 1; i > 0; --i) {
            int j = uniform_int(0, i);
            std::swap(v[std::size_t(i)], v[std::size_t(j)]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace cmstr

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace tw {

// All randomness in the project flows from one master seed. Streams are
// derived by mixing the master seed with a fixed stream tag plus indices,
// so results do not depend on the order in which streams are consumed.
//
// The engine is std::mt19937_64 (bit-exact across platforms); the
// distributions below are hand-rolled because the standard library ones
// are implementation-defined.
namespace stream {
constexpr std::uint64_t kSynth = 1;
constexpr std::uint64_t kSplit = 2;
constexpr std::uint64_t kInit = 3;
constexpr std::uint64_t kEpochSeeds = 4;
constexpr std::uint64_t kTriplets = 5;
constexpr std::uint64_t kEnsemble = 6;
constexpr std::uint64_t kMapSubsample = 7;
constexpr std::uint64_t kGradCheck = 8;
}  // namespace stream

std::uint64_t splitmix64(std::uint64_t x);

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

    // Derives an independent stream from (master, path...), e.g.
    // derive(seed, {stream::kTriplets, epoch, batch}).
    static Rng derive(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
        std::uint64_t s = splitmix64(master);
        for (std::uint64_t p : path) s = splitmix64(s ^ splitmix64(p + 0x9e3779b97f4a7c15ULL));
        return Rng(s);
    }

    std::uint64_t next_u64() { return eng_(); }

    // Unbiased integer in [0, n), n >= 1.
    std::uint64_t below(std::uint64_t n);

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double gaussian();

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct values from {0, ..., n-1}, in shuffled order.
    std::vector<int> sample_without_replacement(int n, int k);

  private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace tw

#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace multibal {

/// Counter-based random stream.
///
/// Draw i of a stream is a pure function of (seed, stream id, i), built from
/// the SplitMix64 finalizer, so sequences are identical on every platform and
/// independent sub-streams can be split off without sharing state.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);
    /// Standard normal via Box-Muller; both variates of a pair are used.
    double normal();
    /// Uniform integer in [0, n). Unbiased (rejection sampling).
    std::uint64_t below(std::uint64_t n);
    /// Index drawn from an unnormalized non-negative weight vector.
    int categorical(std::span<const double> weights);

    /// Independent child stream; does not advance this stream.
    RngStream split(std::uint64_t child) const;

    template<typename T>
    void shuffle(std::vector<T> &items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = below(i);
            std::swap(items[i - 1], items[j]);
        }
    }

    /// k distinct indices from [0, n), in random order.
    std::vector<int> sample_without_replacement(int n, int k);

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace multibal

#include "multibal/rng.hpp"

#include "multibal/errors.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace multibal {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0xD1B54A32D192ED03ULL))) {}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t x = key_ + 0x9E3779B97F4A7C15ULL * (++counter_);
    return splitmix64(x ^ (key_ >> 17));
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) { u1 = uniform(); }
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t RngStream::below(std::uint64_t n) {
    require(n > 0, ErrorKind::config, "RngStream::below: n must be positive");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t r = next_u64();
    while (r >= limit) { r = next_u64(); }
    return r % n;
}

int RngStream::categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
        require(w >= 0.0 && std::isfinite(w), ErrorKind::numeric, "categorical: weights must be finite and >= 0");
        total += w;
    }
    require(total > 0.0, ErrorKind::numeric, "categorical: weights sum to zero");
    const double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) { return static_cast<int>(i); }
    }
    // u landed on the rounding gap at the top; return the last positive weight.
    for (std::size_t i = weights.size(); i-- > 0;) {
        if (weights[i] > 0.0) { return static_cast<int>(i); }
    }
    return 0;
}

RngStream RngStream::split(std::uint64_t child) const {
    return RngStream(splitmix64(key_ ^ 0x5851F42D4C957F2DULL), splitmix64(child) ^ stream_);
}

std::vector<int> RngStream::sample_without_replacement(int n, int k) {
    require(k >= 0 && k <= n, ErrorKind::config, "sample_without_replacement: k out of range");
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) {
        const auto j = static_cast<std::size_t>(i) + below(static_cast<std::uint64_t>(n - i));
        std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
    }
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

}  // namespace multibal

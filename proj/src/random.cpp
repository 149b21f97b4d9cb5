#include "shb/random.hpp"

namespace shb {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed) {
    std::uint64_t state = seed;
    std::seed_seq seq{splitmix64(state), splitmix64(state), splitmix64(state),
                      splitmix64(state)};
    engine_.seed(seq);
}

RandomStream RandomStream::derive(std::uint64_t master_seed, std::uint64_t stream_id) {
    std::uint64_t state = master_seed;
    const std::uint64_t a = splitmix64(state);
    state ^= stream_id * 0xD1B54A32D192ED03ull;
    return RandomStream(a ^ splitmix64(state));
}

double RandomStream::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t RandomStream::uniform_index(std::size_t n) {
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(engine_);
}

double RandomStream::normal() { return normal_(engine_); }

}  // namespace shb

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace shb {

// Seeded random stream. Independent consumers get distinct streams through
// derive(master_seed, stream_id); the same pair always yields the same stream.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed);

    static RandomStream derive(std::uint64_t master_seed, std::uint64_t stream_id);

    double uniform();  // [0, 1)
    std::size_t uniform_index(std::size_t n);  // [0, n)
    double normal();

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

// Stream ids reserved for problem construction; replications use their index.
inline constexpr std::uint64_t kMatrixStream = 0xA11CE;
inline constexpr std::uint64_t kPlantStream = 0x91A7;
inline constexpr std::uint64_t kExpectationStream = 0xE4;

}  // namespace shb

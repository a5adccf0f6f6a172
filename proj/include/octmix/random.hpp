#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace octmix {

/// The one random engine used everywhere. Every stochastic operation takes an
/// explicit reference to one of these; nothing reads global random state.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent sub-seed from a root seed and a path of integer tags,
/// e.g. derive_seed(seed, {trial, branch, epoch, batch}). The result depends on
/// the order of the tags, never on call order elsewhere in the program.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    return Rng(derive_seed(seed, path));
}

// Tags that keep derived streams for different purposes apart.
namespace stream {
inline constexpr std::uint64_t kInit = 0x1001;
inline constexpr std::uint64_t kEpoch = 0x1002;
inline constexpr std::uint64_t kBatch = 0x1003;
inline constexpr std::uint64_t kBranch = 0x1004;
inline constexpr std::uint64_t kClassifier = 0x1005;
inline constexpr std::uint64_t kSplit = 0x1006;
inline constexpr std::uint64_t kTrial = 0x1007;
inline constexpr std::uint64_t kJoint = 0x1008;
inline constexpr std::uint64_t kRevisit = 0x1009;
}  // namespace stream

}  // namespace octmix

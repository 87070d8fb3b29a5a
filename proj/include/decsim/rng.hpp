#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace decsim {

using Rng = std::mt19937_64;

// Named, independent seed streams. A stream is identified by a base seed, a
// tag and up to two integer coordinates (e.g. node and round), so that
// changing how one stage consumes randomness never perturbs another.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                          std::uint64_t a = 0, std::uint64_t b = 0) noexcept;

inline Rng make_rng(std::uint64_t base, std::string_view tag,
                    std::uint64_t a = 0, std::uint64_t b = 0) {
  return Rng(derive_seed(base, tag, a, b));
}

}  // namespace decsim

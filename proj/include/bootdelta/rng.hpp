#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace bootdelta {

using Engine = std::mt19937_64;

// Stream tags keep the sub-streams of one experiment apart.
enum class StreamTag : std::uint64_t {
  Data = 1,
  Bootstrap = 2,
  Sampling = 3,
  Limit = 4,
  Surrogate = 5,
  User = 6,
};

/**
 * Independent engine for (master seed, path...). The derivation goes through
 * std::seed_seq, so a replicate's stream depends only on its coordinates and
 * never on scheduling.
 */
inline Engine make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * path.size());
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto p : path) push(p);
  std::seed_seq seq(words.begin(), words.end());
  return Engine(seq);
}

inline Engine make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0, std::uint64_t b = 0) {
  return make_stream(seed, {static_cast<std::uint64_t>(tag), a, b});
}

}  // namespace bootdelta

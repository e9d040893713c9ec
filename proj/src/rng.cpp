#include "cehhmm/rng.hpp"

#include <cmath>
#include <cstdio>
#include <vector>

#include "cehhmm/types.hpp"

namespace cehhmm {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * ids.size());
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto id : ids) push(id);
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> ids)
    : engine_(make_engine(seed, ids)) {}

std::size_t Rng::below(std::size_t n) {
  // Reject the incomplete top block so every residue is equally likely.
  const std::uint64_t bound = n;
  const std::uint64_t limit = max() - (max() % bound + 1) % bound;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v > limit);
  return static_cast<std::size_t>(v % bound);
}

std::size_t Rng::categorical(std::span<const double> probs) {
  const double u = uniform();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

std::string CapExceeded::format_size(double v) {
  char buf[64];
  if (std::isinf(v)) return "inf";
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace cehhmm

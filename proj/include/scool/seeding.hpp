#pragma once

#include <cstdint>
#include <initializer_list>

namespace scool {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream seed for a (base, key...) tuple.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t s = splitmix64(base);
  for (std::uint64_t k : keys) s = splitmix64(s ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return s;
}

}  // namespace scool

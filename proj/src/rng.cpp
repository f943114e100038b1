#include "mrte/rng.hpp"

#include <cmath>
#include <sstream>

#include "mrte/error.hpp"

namespace mrte {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::child(std::uint64_t seed, std::uint64_t stream) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(stream * 0x9e3779b97f4a7c15ULL + 1)));
}

int Rng::uniform_int(int n) {
  require(n > 0, "uniform_int: n must be positive");
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t bound = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= bound);
  return static_cast<int>(x % un);
}

std::string Rng::save_state() const {
  std::ostringstream os;
  os << gen_;
  return os.str();
}

void Rng::load_state(const std::string& state) {
  std::istringstream is(state);
  is >> gen_;
  if (is.fail()) throw ValidationError("Rng::load_state: malformed state string");
}

}  // namespace mrte

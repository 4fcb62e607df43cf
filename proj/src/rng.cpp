#include "kac/rng.hpp"

#include <cmath>
#include <numbers>

#include "kac/error.hpp"

namespace kac {
namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t sm = seed;
  for (auto& s : s_) s = splitmix64(sm);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

std::uint64_t Rng::next_below(std::uint64_t n) {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n)) >> 64);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) {
  if (!(lo < hi)) throw ParameterError("uniform: requires lo < hi");
  return lo + (hi - lo) * uniform();
}

double Rng::normal(double mean, double sd) {
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 == 0.0) u1 = 0x1.0p-53;  // keep log finite
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mean + sd * r * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::mix(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
  return splitmix64(x);
}

Matrix rand_uniform(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
  if (!(lo < hi)) throw ParameterError("rand_uniform: requires lo < hi");
  Matrix m(rows, cols);
  for (double& v : m.flat()) v = lo + (hi - lo) * rng.uniform();
  return m;
}

Matrix rand_normal(Rng& rng, std::size_t rows, std::size_t cols, double mean, double sd) {
  Matrix m(rows, cols);
  for (double& v : m.flat()) v = rng.normal(mean, sd);
  return m;
}

}  // namespace kac

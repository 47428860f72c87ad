#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace calving {

// Thrown when a caller breaks a documented precondition.
struct ContractViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Filesystem / serialization failures.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parse failure that can name the offending line.
struct ParseError : IoError {
  ParseError(const std::string& what, const std::string& file, long line)
      : IoError(file + ":" + std::to_string(line) + ": " + what),
        file_name(file),
        line_number(line) {}
  std::string file_name;
  long line_number = 0;
};

inline constexpr double kProbClamp = 1e-12;
inline constexpr double kPi = 3.141592653589793238462643383279502884;

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives independent sub-seeds (per cow, per fold, per stream, ...).
inline uint64_t mix_seed(uint64_t base, uint64_t salt) {
  return splitmix64(base ^ splitmix64(salt + 0x9e3779b97f4a7c15ULL));
}

inline uint64_t mix_seed(uint64_t base, uint64_t a, uint64_t b) {
  return mix_seed(mix_seed(base, a), b);
}

// mt19937_64 is bit-exact across implementations; the distributions are
// hand-rolled so results do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // integer in [0, n)
  int pick(int n) {
    int k = static_cast<int>(uniform() * n);
    return std::min(k, n - 1);
  }

  // standard normal, Box-Muller (fresh pair per call, second value dropped)
  double gauss() {
    double u1 = std::max(uniform(), 1e-300);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  double gauss(double mean, double sigma) { return mean + sigma * gauss(); }

  // Fisher-Yates; std::shuffle is implementation-defined, this is not.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(pick(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Clamps entries to >= kProbClamp and renormalizes to sum 1.
inline std::vector<double> clamp_simplex(std::span<const double> p) {
  std::vector<double> out(p.begin(), p.end());
  double sum = 0.0;
  for (double& x : out) {
    x = std::max(x, kProbClamp);
    sum += x;
  }
  for (double& x : out) x /= sum;
  return out;
}

inline bool is_simplex(std::span<const double> p, double tol = 1e-6) {
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= -tol)) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= tol;
}

// FNV-1a over raw bytes; used to fingerprint parameter blobs.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a(std::span<const double> v, uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(v.data(), v.size() * sizeof(double), h);
}

// Channel-major activation buffer: v[c * length + t].
// Dense layers use length == 1; conv layers use length > 1.
struct Tensor {
  int channels = 0;
  int length = 1;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int c, int l) : channels(c), length(l), v(static_cast<size_t>(c) * l, 0.0) {}

  static Tensor vec(std::vector<double> data) {
    Tensor t;
    t.channels = static_cast<int>(data.size());
    t.length = 1;
    t.v = std::move(data);
    return t;
  }

  double& at(int c, int t) { return v[static_cast<size_t>(c) * length + t]; }
  double at(int c, int t) const { return v[static_cast<size_t>(c) * length + t]; }
  int size() const { return channels * length; }
};

}  // namespace calving

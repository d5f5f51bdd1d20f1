#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace vimp {

// Error taxonomy. CLI maps ValidationError/FormatError/ConfigError to exit
// code 1 and everything else to 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t splitmix64(std::uint64_t x);

// Seeded RNG with hand-rolled distributions so that draws do not depend on
// the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  std::uint64_t uniform_int(std::uint64_t n);

  bool coin() { return (next_u64() & 1ull) != 0; }

  // standard normal via Box-Muller
  double normal();

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // independent sub-stream seed
  std::uint64_t fork(std::uint64_t stream) { return splitmix64(base_ ^ splitmix64(stream)); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  static Rng seeded(std::uint64_t seed) {
    Rng r(seed);
    r.base_ = seed;
    return r;
  }

 private:
  std::mt19937_64 eng_;
  std::uint64_t base_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t hash_str(const std::string& s);

// --- small string helpers -------------------------------------------------

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);
std::string lower(const std::string& s);

// --- CSV -------------------------------------------------------------------

// Minimal CSV with double-quote escaping; every row keeps its cell count.
std::vector<std::vector<std::string>> read_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::vector<std::string>>& rows);
std::string csv_escape(const std::string& cell);

// --- little-endian binary io ------------------------------------------------

void write_bytes(std::ostream& os, const void* p, std::size_t n);
void write_u16(std::ostream& os, std::uint16_t v);
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f32(std::ostream& os, float v);
void write_f64(std::ostream& os, double v);
void write_str(std::ostream& os, const std::string& s);  // u32 length + bytes

std::uint16_t read_u16(std::istream& is);
std::uint32_t read_u32(std::istream& is);
std::uint64_t read_u64(std::istream& is);
float read_f32(std::istream& is);
double read_f64(std::istream& is);
std::string read_str(std::istream& is);

// --- stats helpers -----------------------------------------------------------

double mean_of(const std::vector<double>& v);
double sample_sd(const std::vector<double>& v);      // ddof = 1
double population_sd(const std::vector<double>& v);  // ddof = 0

// --- simple worker pool -------------------------------------------------------

// Runs fn(i) for i in [0, n) on up to `jobs` threads. fn must be thread-safe.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace vimp

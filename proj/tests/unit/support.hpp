#pragma once

#include <nashverify/equilibrium.hpp>
#include <nashverify/random.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <unistd.h>

namespace nvtest {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary | std::ios::trunc) << text;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("nvtest-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path demo_dir() { return NASHVERIFY_DEMO_DIR; }

struct RandomInstance {
  nashverify::RawScoreVector raw;
  nashverify::StubbornnessVector lambdas;
};

/// m in [2,6], lambda in (0,10], raw in [0,1].
inline RandomInstance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> m_dist(2, 6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> lam(0.0, 10.0);
  const std::size_t m = m_dist(rng);
  std::vector<double> raw(m), lambdas(m);
  for (std::size_t i = 0; i < m; ++i) {
    raw[i] = unit(rng);
    double l = lam(rng);
    while (l <= 0.0) l = lam(rng);
    lambdas[i] = l;
  }
  return {nashverify::RawScoreVector(raw), nashverify::StubbornnessVector(lambdas)};
}

}  // namespace nvtest

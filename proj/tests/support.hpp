#pragma once

#include <sys/wait.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "fruitnerf/geometry.hpp"
#include "fruitnerf/rng.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("fruitnerf_" + tag + "_" + std::to_string(fruitnerf::splitmix64(
                                              reinterpret_cast<std::uintptr_t>(this))));
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

 private:
  std::filesystem::path path_;
};

inline std::vector<fruitnerf::Vec3> sphere_surface(const fruitnerf::Vec3& c, double r, int n,
                                                   fruitnerf::Rng& rng) {
  std::vector<fruitnerf::Vec3> out;
  out.reserve(n);
  while (static_cast<int>(out.size()) < n) {
    fruitnerf::Vec3 v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double len = v.norm();
    if (len < 1e-3 || len > 1.0) continue;
    out.push_back(c + r * v / len);
  }
  return out;
}

inline std::vector<fruitnerf::Vec3> ball_samples(const fruitnerf::Vec3& c, double r, int n,
                                                 fruitnerf::Rng& rng) {
  std::vector<fruitnerf::Vec3> out;
  out.reserve(n);
  while (static_cast<int>(out.size()) < n) {
    fruitnerf::Vec3 v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (v.squaredNorm() > 1.0) continue;
    out.push_back(c + r * v);
  }
  return out;
}

// Exit status of a shell command, or -1 if it did not exit normally.
inline int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace testing

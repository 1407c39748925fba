#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "common/rng.hpp"
#include "pointcloud/point_cloud.hpp"

namespace lstest {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("lidarsphere_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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

inline lidarsphere::PointCloud random_cloud(std::size_t n, std::uint64_t seed, double extent = 1.0) {
  lidarsphere::Rng rng(seed);
  lidarsphere::PointCloud c;
  c.points.resize(n);
  for (auto& p : c.points) {
    p.x = static_cast<float>(rng.uniform(-extent, extent));
    p.y = static_cast<float>(rng.uniform(-extent, extent));
    p.z = static_cast<float>(rng.uniform(-extent, extent));
  }
  return c;
}

}  // namespace lstest

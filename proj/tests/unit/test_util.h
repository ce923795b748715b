#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "attnie/tensor.h"

namespace attnie::testing {

inline std::filesystem::path fixtures() { return ATTNIE_FIXTURES; }
inline std::string cli_path() { return ATTNIE_CLI; }

// Fresh empty directory under the gtest temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::path(::testing::TempDir()) /
             ("attnie-" + name + "-" + std::to_string(::getpid()) + "-" +
              std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<double> values(const Tensor& t) {
  return {t.data().begin(), t.data().end()};
}

inline std::vector<double> random_values(std::mt19937_64& rng, std::size_t n,
                                         double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

inline Tensor random_tensor(std::mt19937_64& rng, Shape shape, bool grad = false) {
  const std::size_t n = shape_size(shape);
  return Tensor::from(std::move(shape), random_values(rng, n), grad);
}

}  // namespace attnie::testing

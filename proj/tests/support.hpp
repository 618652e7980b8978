#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>

#include <doctest.h>
#include <unistd.h>

#include "dppnet/error.hpp"
#include "oracles.hpp"

namespace testing {

using namespace dppnet;

// Error code thrown by fn; fails the test when nothing is thrown.
ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

std::string message_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    static std::size_t counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("dppnet_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path file(const std::string& name, const std::string& contents) const {
    const auto p = path / name;
    std::ofstream(p) << contents;
    return p;
  }
};

}  // namespace testing

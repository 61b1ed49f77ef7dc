#include "test_util.hpp"

#include <cstdlib>
#include <stdexcept>
#include <system_error>

namespace venus::testing {

TempDir::TempDir() {
  std::string tmpl = (std::filesystem::temp_directory_path() / "venus-test-XXXXXX").string();
  if (mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::filesystem::path fixture_path(const std::string& relative) {
  return std::filesystem::path(VENUS_FIXTURES_DIR) / relative;
}

}  // namespace venus::testing

#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir
{
public:
  TempDir()
  {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("facade-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir()
  {
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

inline void
write_file(const std::filesystem::path& p, const std::string& content)
{
  std::ofstream out(p, std::ios::binary);
  out << content;
}

inline std::string
read_file(const std::filesystem::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace testutil

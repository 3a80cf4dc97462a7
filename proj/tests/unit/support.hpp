#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace testing {

inline std::filesystem::path fixture_dir() { return FUTON_FIXTURE_DIR; }

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Removes itself on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("futon-test-" + std::to_string(rd()) + std::to_string(rd()));
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

inline std::string minimal_pattern(const std::string& id, bool next_steps, bool evidence) {
  std::string text = "@arg " + id + "\n\n! conclusion: Summary of " + id + ".\n\n";
  text += "  + context: Context for " + id + ".\n";
  text += "  + if: Some force.\n";
  text += "  + however: A counter force.\n";
  text += "  + then: Do the thing.\n";
  text += "  + because: It helps.\n";
  if (evidence) text += "  + evidence: ticket#1\n";
  if (next_steps) text += "  + next-steps: try it once\n";
  return text;
}

}  // namespace testing

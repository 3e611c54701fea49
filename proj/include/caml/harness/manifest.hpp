#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace caml::harness {

std::string fnv1a64_hex(std::string_view bytes);
std::string hash_file(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);

/// Writes content to a temporary sibling and renames it into place.
void atomic_write_text(const std::filesystem::path& path, const std::string& content);

/// JSON-lines run record: one header line, then events, then one line per
/// output file with its content hash. Lines are buffered and written
/// atomically by close().
class ManifestWriter {
 public:
  explicit ManifestWriter(std::filesystem::path path) : path_(std::move(path)) {}

  void header(nlohmann::json body);
  void event(const std::string& kind, nlohmann::json body);

  /// Records `file` (hashing its current content) under its path relative to
  /// the manifest's directory.
  void output_file(const std::filesystem::path& file);

  void close();

 private:
  std::filesystem::path path_;
  std::vector<std::string> lines_;
  bool closed_ = false;
};

}  // namespace caml::harness

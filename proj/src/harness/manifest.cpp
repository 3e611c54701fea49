#include "caml/harness/manifest.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace caml::harness {

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  static const char* digits = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = digits[hash & 0xF];
    hash >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hash_file(const std::filesystem::path& path) { return fnv1a64_hex(read_text(path)); }

void atomic_write_text(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void ManifestWriter::header(nlohmann::json body) {
  body["type"] = "header";
  lines_.push_back(body.dump());
}

void ManifestWriter::event(const std::string& kind, nlohmann::json body) {
  body["type"] = kind;
  lines_.push_back(body.dump());
}

void ManifestWriter::output_file(const std::filesystem::path& file) {
  nlohmann::json body;
  body["type"] = "output";
  body["path"] = std::filesystem::relative(file, path_.parent_path()).generic_string();
  body["fnv1a64"] = hash_file(file);
  lines_.push_back(body.dump());
}

void ManifestWriter::close() {
  if (closed_) return;
  std::string content;
  for (const auto& line : lines_) {
    content += line;
    content += '\n';
  }
  atomic_write_text(path_, content);
  closed_ = true;
}

}  // namespace caml::harness

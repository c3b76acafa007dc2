#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace raar {

using json = nlohmann::ordered_json;

// Streams a line-delimited JSON file, invoking fn(line_number, parsed) for
// every non-empty line. Parse failures raise kParseError with path:line.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(size_t, const json&)>& fn);

std::vector<json> read_jsonl(const std::filesystem::path& path);

// Append-friendly JSONL writer. One compact JSON document per line.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path, bool append = false);

  void write(const json& value);
  void flush();
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& lines);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

// Hex-encoded SHA-256 of a file's bytes (used for manifest digests).
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_string(const std::string& data);

}  // namespace raar

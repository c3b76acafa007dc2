#include "raar/jsonl.hpp"

#include <openssl/evp.h>

#include <cstdio>

#include "raar/errors.hpp"

namespace raar {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kDegenerateVector: return "degenerate-vector";
    case ErrorCode::kDanglingReference: return "dangling-reference";
    case ErrorCode::kDuplicateRecord: return "duplicate-record";
    case ErrorCode::kInsufficientPool: return "insufficient-pool";
    case ErrorCode::kIncompleteEmbedding: return "incomplete-embedding";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kDegenerateStatistics: return "degenerate-statistics";
    case ErrorCode::kUndersizedSample: return "undersized-sample";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kMissingSlot: return "missing-slot";
    case ErrorCode::kUnknownSlot: return "unknown-slot";
    case ErrorCode::kTemplateMissing: return "template-missing";
    case ErrorCode::kParseError: return "parse-error";
    case ErrorCode::kSchemaError: return "schema-error";
    case ErrorCode::kEndpointUnreachable: return "endpoint-unreachable";
    case ErrorCode::kRemoteError: return "remote-error";
    case ErrorCode::kEmptyResponse: return "empty-response";
    case ErrorCode::kExhaustedScript: return "exhausted-script";
    case ErrorCode::kVerifierAmbiguous: return "verifier-ambiguous";
    case ErrorCode::kAgentFailure: return "agent-failure";
    case ErrorCode::kAlignmentError: return "alignment-error";
    case ErrorCode::kConfigError: return "config-error";
    case ErrorCode::kIoError: return "io-error";
    case ErrorCode::kLockHeld: return "lock-held";
  }
  return "unknown";
}

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(size_t, const json&)>& fn) {
  std::ifstream in(path);
  if (!in) {
    fail(ErrorCode::kIoError, "cannot open " + path.string());
  }
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json parsed = json::parse(line, nullptr, false);
    if (parsed.is_discarded()) {
      fail(ErrorCode::kParseError,
           path.string() + ":" + std::to_string(line_no) + ": invalid JSON line");
    }
    fn(line_no, parsed);
  }
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::vector<json> lines;
  for_each_jsonl(path, [&](size_t, const json& j) { lines.push_back(j); });
  return lines;
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path, bool append)
    : path_(path),
      out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) {
    fail(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  }
}

void JsonlWriter::write(const json& value) {
  out_ << value.dump() << '\n';
  if (!out_) {
    fail(ErrorCode::kIoError, "write failed on " + path_.string());
  }
}

void JsonlWriter::flush() { out_.flush(); }

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& lines) {
  JsonlWriter writer(path);
  for (const auto& line : lines) writer.write(line);
  writer.flush();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorCode::kIoError, "cannot open " + path.string());
  }
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  return content;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    fail(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  }
  out << content;
}

namespace {

std::string sha256_bytes(const void* data, size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, data, size);
  EVP_DigestFinal_ex(ctx, digest, &digest_len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  hex.reserve(digest_len * 2);
  for (unsigned int i = 0; i < digest_len; ++i) {
    char buf[3];
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

}  // namespace

std::string sha256_string(const std::string& data) {
  return sha256_bytes(data.data(), data.size());
}

std::string sha256_file(const std::filesystem::path& path) {
  return sha256_string(read_text_file(path));
}

}  // namespace raar

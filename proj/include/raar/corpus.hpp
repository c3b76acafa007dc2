#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "raar/jsonl.hpp"

namespace raar {

enum class Origin { kSource, kTarget };

enum class Perspective { kSentiment, kSemantic, kStyle };

const char* to_string(Origin origin);
const char* to_string(Perspective perspective);
Origin origin_from_string(std::string_view s);
Perspective perspective_from_string(std::string_view s);

// One corpus item: the text plus its gold label, domain and source/target origin.
struct LabeledItem {
  std::string item_id;
  std::string text;
  std::string label;
  std::string domain;
  Origin origin = Origin::kSource;

  bool operator==(const LabeledItem& other) const = default;
};

// One item's embedding in one perspective space. Vectors arrive from
// offline embedders via JSONL files; which models produced them is
// configuration, not code.
struct EmbeddingRecord {
  std::string item_id;
  Perspective perspective = Perspective::kSentiment;
  std::vector<double> vector;

  size_t dim() const { return vector.size(); }
};

json to_json(const LabeledItem& item);
LabeledItem labeled_item_from_json(const json& j);

json to_json(const EmbeddingRecord& record);
// Validates finiteness and rejects zero/empty vectors at ingestion.
EmbeddingRecord embedding_record_from_json(const json& j);

// Corpus file: line-delimited {"item_id","text","label","domain","origin"}.
std::vector<LabeledItem> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const std::vector<LabeledItem>& items);

// Embedding file: line-delimited {"item_id","perspective","vector"}.
std::vector<EmbeddingRecord> load_embeddings(const std::filesystem::path& path);
void save_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records);

}  // namespace raar

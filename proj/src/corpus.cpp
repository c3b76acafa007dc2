#include "raar/corpus.hpp"

#include <cmath>
#include <unordered_set>

#include "raar/errors.hpp"

namespace raar {

const char* to_string(Origin origin) {
  return origin == Origin::kSource ? "source" : "target";
}

const char* to_string(Perspective perspective) {
  switch (perspective) {
    case Perspective::kSentiment: return "sentiment";
    case Perspective::kSemantic: return "semantic";
    case Perspective::kStyle: return "style";
  }
  return "sentiment";
}

Origin origin_from_string(std::string_view s) {
  if (s == "source") return Origin::kSource;
  if (s == "target") return Origin::kTarget;
  fail(ErrorCode::kSchemaError, "unknown origin: " + std::string(s));
}

Perspective perspective_from_string(std::string_view s) {
  if (s == "sentiment") return Perspective::kSentiment;
  if (s == "semantic") return Perspective::kSemantic;
  if (s == "style") return Perspective::kStyle;
  fail(ErrorCode::kSchemaError, "unknown perspective: " + std::string(s));
}

json to_json(const LabeledItem& item) {
  return json{{"item_id", item.item_id},
              {"text", item.text},
              {"label", item.label},
              {"domain", item.domain},
              {"origin", to_string(item.origin)}};
}

namespace {

std::string require_string(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    fail(ErrorCode::kSchemaError, std::string("missing or non-string field: ") + key);
  }
  return j[key].get<std::string>();
}

}  // namespace

LabeledItem labeled_item_from_json(const json& j) {
  LabeledItem item;
  item.item_id = require_string(j, "item_id");
  item.text = require_string(j, "text");
  item.label = require_string(j, "label");
  item.domain = require_string(j, "domain");
  item.origin = origin_from_string(require_string(j, "origin"));
  return item;
}

json to_json(const EmbeddingRecord& record) {
  return json{{"item_id", record.item_id},
              {"perspective", to_string(record.perspective)},
              {"vector", record.vector}};
}

EmbeddingRecord embedding_record_from_json(const json& j) {
  EmbeddingRecord record;
  record.item_id = require_string(j, "item_id");
  record.perspective = perspective_from_string(require_string(j, "perspective"));
  if (!j.contains("vector") || !j["vector"].is_array() || j["vector"].empty()) {
    fail(ErrorCode::kSchemaError,
         "embedding for " + record.item_id + " has missing or empty vector");
  }
  record.vector.reserve(j["vector"].size());
  double norm_sq = 0.0;
  for (const auto& v : j["vector"]) {
    if (!v.is_number()) {
      fail(ErrorCode::kSchemaError, "non-numeric component in vector for " + record.item_id);
    }
    double x = v.get<double>();
    if (!std::isfinite(x)) {
      fail(ErrorCode::kDegenerateVector,
           "non-finite component in vector for " + record.item_id);
    }
    norm_sq += x * x;
    record.vector.push_back(x);
  }
  if (norm_sq == 0.0) {
    fail(ErrorCode::kDegenerateVector, "zero vector for " + record.item_id);
  }
  return record;
}

std::vector<LabeledItem> load_corpus(const std::filesystem::path& path) {
  std::vector<LabeledItem> items;
  std::unordered_set<std::string> seen;
  for_each_jsonl(path, [&](size_t line_no, const json& j) {
    LabeledItem item;
    try {
      item = labeled_item_from_json(j);
    } catch (const Error& e) {
      fail(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(item.item_id).second) {
      fail(ErrorCode::kDuplicateRecord,
           path.string() + ":" + std::to_string(line_no) +
               ": duplicate item_id " + item.item_id);
    }
    items.push_back(std::move(item));
  });
  return items;
}

void save_corpus(const std::filesystem::path& path, const std::vector<LabeledItem>& items) {
  JsonlWriter writer(path);
  for (const auto& item : items) writer.write(to_json(item));
}

std::vector<EmbeddingRecord> load_embeddings(const std::filesystem::path& path) {
  std::vector<EmbeddingRecord> records;
  for_each_jsonl(path, [&](size_t line_no, const json& j) {
    try {
      records.push_back(embedding_record_from_json(j));
    } catch (const Error& e) {
      fail(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  return records;
}

void save_embeddings(const std::filesystem::path& path,
                     const std::vector<EmbeddingRecord>& records) {
  JsonlWriter writer(path);
  for (const auto& record : records) writer.write(to_json(record));
}

}  // namespace raar

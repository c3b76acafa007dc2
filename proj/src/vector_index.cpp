#include "raar/vector_index.hpp"

#include <algorithm>
#include <cmath>

#include "raar/errors.hpp"
#include "raar/rng.hpp"

namespace raar {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    fail(ErrorCode::kDimensionMismatch,
         "cosine: length mismatch " + std::to_string(a.size()) + " vs " +
             std::to_string(b.size()));
  }
  double dot = 0.0, norm_a = 0.0, norm_b = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    norm_a += a[i] * a[i];
    norm_b += b[i] * b[i];
  }
  if (norm_a == 0.0 || norm_b == 0.0) {
    fail(ErrorCode::kDegenerateVector, "cosine: zero-norm input");
  }
  return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

void RetrievalConfig::validate() const {
  if (k < 1) {
    fail(ErrorCode::kInvalidArgument, "retrieval k must be >= 1");
  }
  if (perspectives.empty()) {
    fail(ErrorCode::kInvalidArgument, "retrieval perspectives must be non-empty");
  }
  for (size_t i = 0; i < perspectives.size(); ++i) {
    for (size_t j = i + 1; j < perspectives.size(); ++j) {
      if (perspectives[i] == perspectives[j]) {
        fail(ErrorCode::kInvalidArgument, "duplicate retrieval perspective");
      }
    }
  }
}

const std::vector<ScoredNeighbor>& RetrievedContext::neighbors_for(Perspective p) const {
  for (const auto& [perspective, list] : neighbors) {
    if (perspective == p) return list;
  }
  fail(ErrorCode::kInvalidArgument,
       std::string("context has no neighbors for perspective ") + to_string(p));
}

json to_json(const RetrievedContext& ctx) {
  json neighbors = json::object();
  for (const auto& [perspective, list] : ctx.neighbors) {
    json entries = json::array();
    for (const auto& neighbor : list) {
      entries.push_back(json{{"item", to_json(neighbor.item)},
                             {"similarity", neighbor.similarity}});
    }
    neighbors[to_string(perspective)] = std::move(entries);
  }
  return json{{"target", to_json(ctx.target)},
              {"neighbors", std::move(neighbors)},
              {"task", ctx.task_name}};
}

RetrievedContext retrieved_context_from_json(const json& j) {
  RetrievedContext ctx;
  ctx.target = labeled_item_from_json(j.at("target"));
  ctx.task_name = j.at("task").get<std::string>();
  for (const auto& [key, entries] : j.at("neighbors").items()) {
    Perspective p = perspective_from_string(key);
    std::vector<ScoredNeighbor> list;
    for (const auto& entry : entries) {
      list.push_back(ScoredNeighbor{labeled_item_from_json(entry.at("item")),
                                    entry.at("similarity").get<double>()});
    }
    ctx.neighbors.emplace_back(p, std::move(list));
  }
  return ctx;
}

std::vector<RetrievedContext> load_contexts(const std::filesystem::path& path) {
  std::vector<RetrievedContext> contexts;
  for_each_jsonl(path, [&](size_t, const json& j) {
    contexts.push_back(retrieved_context_from_json(j));
  });
  return contexts;
}

void save_contexts(const std::filesystem::path& path,
                   const std::vector<RetrievedContext>& contexts) {
  JsonlWriter writer(path);
  for (const auto& ctx : contexts) writer.write(to_json(ctx));
}

PerspectiveIndex PerspectiveIndex::build(const std::vector<EmbeddingRecord>& records,
                                         const std::vector<LabeledItem>& items) {
  PerspectiveIndex index;
  index.items_ = items;
  for (size_t i = 0; i < items.size(); ++i) {
    if (!index.item_by_id_.emplace(items[i].item_id, i).second) {
      fail(ErrorCode::kDuplicateRecord, "duplicate item_id " + items[i].item_id);
    }
  }
  std::map<std::pair<std::string, Perspective>, bool> seen;
  for (const auto& record : records) {
    auto it = index.item_by_id_.find(record.item_id);
    if (it == index.item_by_id_.end()) {
      fail(ErrorCode::kDanglingReference,
           "embedding references unknown item_id " + record.item_id);
    }
    if (!seen.emplace(std::make_pair(record.item_id, record.perspective), true).second) {
      fail(ErrorCode::kDuplicateRecord,
           "duplicate embedding for (" + record.item_id + ", " +
               to_string(record.perspective) + ")");
    }
    auto [dim_it, inserted] = index.dims_.emplace(record.perspective, record.dim());
    if (!inserted && dim_it->second != record.dim()) {
      fail(ErrorCode::kDimensionMismatch,
           std::string("inconsistent dims in perspective ") + to_string(record.perspective) +
               ": " + std::to_string(dim_it->second) + " vs " + std::to_string(record.dim()) +
               " (item " + record.item_id + ")");
    }
    index.entries_[record.perspective].push_back(Entry{it->second, record.vector});
  }
  // Pin a canonical candidate order so equal-similarity scans are stable.
  for (auto& [perspective, entries] : index.entries_) {
    std::sort(entries.begin(), entries.end(), [&](const Entry& a, const Entry& b) {
      return index.items_[a.item_index].item_id < index.items_[b.item_index].item_id;
    });
    auto& lookup = index.entry_by_id_[perspective];
    for (size_t i = 0; i < entries.size(); ++i) {
      lookup.emplace(index.items_[entries[i].item_index].item_id, i);
    }
  }
  return index;
}

size_t PerspectiveIndex::count(Perspective p) const {
  auto it = entries_.find(p);
  return it == entries_.end() ? 0 : it->second.size();
}

size_t PerspectiveIndex::dim(Perspective p) const {
  auto it = dims_.find(p);
  return it == dims_.end() ? 0 : it->second;
}

bool PerspectiveIndex::has_perspective(Perspective p) const {
  return entries_.count(p) > 0;
}

const std::vector<double>* PerspectiveIndex::vector_of(const std::string& item_id,
                                                       Perspective p) const {
  auto lookup = entry_by_id_.find(p);
  if (lookup == entry_by_id_.end()) return nullptr;
  auto it = lookup->second.find(item_id);
  if (it == lookup->second.end()) return nullptr;
  return &entries_.at(p)[it->second].vector;
}

const LabeledItem* PerspectiveIndex::item(const std::string& item_id) const {
  auto it = item_by_id_.find(item_id);
  return it == item_by_id_.end() ? nullptr : &items_[it->second];
}

std::vector<ScoredNeighbor> PerspectiveIndex::top_k(Perspective p,
                                                    std::span<const double> query,
                                                    int k, const Filter& filter) const {
  if (k < 1) {
    fail(ErrorCode::kInvalidArgument, "top_k: k must be >= 1");
  }
  auto it = entries_.find(p);
  if (it == entries_.end()) {
    fail(ErrorCode::kInsufficientPool,
         std::string("no embeddings for perspective ") + to_string(p));
  }
  if (query.size() != dim(p)) {
    fail(ErrorCode::kDimensionMismatch,
         "query dim " + std::to_string(query.size()) + " != index dim " +
             std::to_string(dim(p)) + " for perspective " + to_string(p));
  }
  struct Scored {
    double similarity;
    size_t item_index;
  };
  std::vector<Scored> scored;
  for (const auto& entry : it->second) {
    const LabeledItem& item = items_[entry.item_index];
    if (filter && !filter(item)) continue;
    scored.push_back(Scored{cosine_similarity(query, entry.vector), entry.item_index});
  }
  if (scored.size() < static_cast<size_t>(k)) {
    fail(ErrorCode::kInsufficientPool,
         "top_k: need " + std::to_string(k) + " candidates, only " +
             std::to_string(scored.size()) + " pass the filter (short by " +
             std::to_string(k - static_cast<int>(scored.size())) + ")");
  }
  std::sort(scored.begin(), scored.end(), [&](const Scored& a, const Scored& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return items_[a.item_index].item_id < items_[b.item_index].item_id;
  });
  std::vector<ScoredNeighbor> result;
  result.reserve(k);
  for (int i = 0; i < k; ++i) {
    result.push_back(ScoredNeighbor{items_[scored[i].item_index], scored[i].similarity});
  }
  return result;
}

std::vector<RetrievedContext> assemble_contexts(const std::vector<LabeledItem>& targets,
                                                const PerspectiveIndex& index,
                                                const RetrievalConfig& config,
                                                const std::string& task_name) {
  config.validate();
  std::vector<RetrievedContext> contexts;
  contexts.reserve(targets.size());
  for (const auto& target : targets) {
    RetrievedContext ctx;
    ctx.target = target;
    ctx.task_name = task_name;
    for (Perspective p : config.perspectives) {
      const std::vector<double>* query = index.vector_of(target.item_id, p);
      if (query == nullptr) {
        fail(ErrorCode::kIncompleteEmbedding,
             "target " + target.item_id + " lacks a " + to_string(p) + " embedding");
      }
      auto filter = [&](const LabeledItem& candidate) {
        if (candidate.item_id == target.item_id) return false;
        if (config.source_only && candidate.origin != Origin::kSource) return false;
        return true;
      };
      ctx.neighbors.emplace_back(p, index.top_k(p, *query, config.k, filter));
    }
    contexts.push_back(std::move(ctx));
  }
  return contexts;
}

std::pair<std::vector<RetrievedContext>, std::vector<RetrievedContext>> split_ra(
    const std::vector<RetrievedContext>& contexts, uint64_t seed) {
  if (contexts.empty()) {
    fail(ErrorCode::kEmptyInput, "split_ra: empty input");
  }
  std::vector<size_t> order(contexts.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  DeterministicRng rng(substream_seed(seed, "split_ra"));
  seeded_shuffle(order, rng);
  std::vector<RetrievedContext> search_half, rl_half;
  for (size_t i = 0; i < order.size(); ++i) {
    (i % 2 == 0 ? search_half : rl_half).push_back(contexts[order[i]]);
  }
  return {std::move(search_half), std::move(rl_half)};
}

}  // namespace raar

#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "raar/corpus.hpp"

namespace raar {

// cos(a, b) = <a,b> / (|a| |b|). Raw vectors, no normalization
// preprocessing; zero-norm inputs are rejected.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct RetrievalConfig {
  int k = 2;
  std::vector<Perspective> perspectives = {Perspective::kSentiment,
                                           Perspective::kSemantic,
                                           Perspective::kStyle};
  bool source_only = true;

  void validate() const;
};

struct ScoredNeighbor {
  LabeledItem item;
  double similarity = 0.0;
};

// A target item plus its top-k labeled neighbors per perspective,
// in the retrieval order the prompts will consume.
struct RetrievedContext {
  LabeledItem target;
  std::vector<std::pair<Perspective, std::vector<ScoredNeighbor>>> neighbors;
  std::string task_name;

  const std::vector<ScoredNeighbor>& neighbors_for(Perspective p) const;
};

json to_json(const RetrievedContext& ctx);
RetrievedContext retrieved_context_from_json(const json& j);

std::vector<RetrievedContext> load_contexts(const std::filesystem::path& path);
void save_contexts(const std::filesystem::path& path,
                   const std::vector<RetrievedContext>& contexts);

// Immutable per-perspective store over embeddings, supporting exact
// top-k queries. Built once; queries are read-only and thread-safe.
class PerspectiveIndex {
 public:
  using Filter = std::function<bool(const LabeledItem&)>;

  static PerspectiveIndex build(const std::vector<EmbeddingRecord>& records,
                                const std::vector<LabeledItem>& items);

  size_t count(Perspective p) const;
  size_t dim(Perspective p) const;
  bool has_perspective(Perspective p) const;

  // Stored embedding vector for a specific item, or nullptr. The pointer
  // stays valid for the lifetime of the index.
  const std::vector<double>* vector_of(const std::string& item_id, Perspective p) const;

  const std::vector<LabeledItem>& items() const { return items_; }
  const LabeledItem* item(const std::string& item_id) const;

  // Exactly k results with non-increasing similarity; ties broken by
  // ascending item_id. Fewer than k admissible candidates is an error
  // naming the shortfall.
  std::vector<ScoredNeighbor> top_k(Perspective p, std::span<const double> query,
                                    int k, const Filter& filter) const;

 private:
  struct Entry {
    size_t item_index;
    std::vector<double> vector;
  };

  std::vector<LabeledItem> items_;
  std::map<std::string, size_t> item_by_id_;
  std::map<Perspective, std::vector<Entry>> entries_;
  std::map<Perspective, std::map<std::string, size_t>> entry_by_id_;
  std::map<Perspective, size_t> dims_;
};

// One context per target; every target must have an embedding in every
// configured perspective.
std::vector<RetrievedContext> assemble_contexts(const std::vector<LabeledItem>& targets,
                                                const PerspectiveIndex& index,
                                                const RetrievalConfig& config,
                                                const std::string& task_name);

// Seeded uniform shuffle, then alternating assignment: even positions go
// to the search half, odd to the RL half. Disjoint, union-preserving,
// sizes differ by at most one.
std::pair<std::vector<RetrievedContext>, std::vector<RetrievedContext>> split_ra(
    const std::vector<RetrievedContext>& contexts, uint64_t seed);

}  // namespace raar

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "raar/errors.hpp"
#include "raar/vector_index.hpp"
#include "test_support.hpp"

using namespace raar;
using raar::testsupport::SyntheticCorpus;
using raar::testsupport::make_corpus;

namespace {

// Independent top-k oracle: repeated max extraction over the scored pool,
// ties resolved by ascending item_id.
std::vector<ScoredNeighbor> brute_force_top_k(
    const std::vector<std::pair<LabeledItem, std::vector<double>>>& pool,
    const std::vector<double>& query, int k,
    const std::function<bool(const LabeledItem&)>& filter) {
  std::vector<ScoredNeighbor> candidates;
  for (const auto& [item, vec] : pool) {
    if (filter && !filter(item)) continue;
    candidates.push_back(ScoredNeighbor{item, cosine_similarity(query, vec)});
  }
  std::vector<ScoredNeighbor> result;
  while (static_cast<int>(result.size()) < k && !candidates.empty()) {
    size_t best = 0;
    for (size_t i = 1; i < candidates.size(); ++i) {
      if (candidates[i].similarity > candidates[best].similarity ||
          (candidates[i].similarity == candidates[best].similarity &&
           candidates[i].item.item_id < candidates[best].item.item_id)) {
        best = i;
      }
    }
    result.push_back(candidates[best]);
    candidates.erase(candidates.begin() + best);
  }
  return result;
}

}  // namespace

TEST_CASE("cosine similarity matches the definitional formula") {
  CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{1, 0}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}) ==
        doctest::Approx(0.0).epsilon(1e-12));
  // Oracle value computed with extended precision: 32 / sqrt(14 * 77).
  CHECK(cosine_similarity(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6}) ==
        doctest::Approx(0.974631846).epsilon(1e-6));
}

TEST_CASE("cosine rejects mismatched and zero-norm inputs") {
  CHECK_THROWS_WITH_AS(
      cosine_similarity(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}),
      doctest::Contains("length mismatch"), Error);
  try {
    cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 2});
    FAIL("expected degenerate-vector error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateVector);
  }
}

TEST_CASE("cosine self-similarity and symmetry") {
  std::mt19937 gen(7);
  std::normal_distribution<double> dist;
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> a(16), b(16);
    for (auto& v : a) v = dist(gen);
    for (auto& v : b) v = dist(gen);
    CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(cosine_similarity(a, b) == doctest::Approx(cosine_similarity(b, a)));
    CHECK(cosine_similarity(a, b) <= 1.0 + 1e-12);
    CHECK(cosine_similarity(a, b) >= -1.0 - 1e-12);
  }
}

TEST_CASE("build_index counts records and validates referential integrity") {
  SyntheticCorpus corpus = make_corpus(3, 0, 8, {"fake", "legit"}, {"tech"}, "celebrity", 1);
  std::vector<EmbeddingRecord> sentiment_only;
  for (const auto& record : corpus.records) {
    if (record.perspective == Perspective::kSentiment) sentiment_only.push_back(record);
  }
  PerspectiveIndex index = PerspectiveIndex::build(sentiment_only, corpus.items);
  CHECK(index.count(Perspective::kSentiment) == 3);
  CHECK(index.count(Perspective::kSemantic) == 0);
  CHECK(index.dim(Perspective::kSentiment) == 8);

  SUBCASE("dangling item_id") {
    EmbeddingRecord dangling;
    dangling.item_id = "ghost";
    dangling.perspective = Perspective::kSentiment;
    dangling.vector = {1.0, 2.0};
    auto records = sentiment_only;
    records.push_back(dangling);
    try {
      PerspectiveIndex::build(records, corpus.items);
      FAIL("expected dangling-reference error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kDanglingReference);
    }
  }

  SUBCASE("inconsistent dims in one perspective") {
    auto records = sentiment_only;
    records[1].vector.resize(4);
    try {
      PerspectiveIndex::build(records, corpus.items);
      FAIL("expected dimension error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kDimensionMismatch);
    }
  }

  SUBCASE("duplicate (item_id, perspective)") {
    auto records = sentiment_only;
    records.push_back(records.front());
    try {
      PerspectiveIndex::build(records, corpus.items);
      FAIL("expected duplicate-record error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kDuplicateRecord);
    }
  }
}

TEST_CASE("top_k: identical query returns that item with similarity 1") {
  SyntheticCorpus corpus = make_corpus(5, 0, 8, {"fake", "legit"}, {"tech"}, "celebrity", 3);
  PerspectiveIndex index = PerspectiveIndex::build(corpus.records, corpus.items);
  const std::vector<double>* query =
      index.vector_of(corpus.items[2].item_id, Perspective::kSemantic);
  REQUIRE(query != nullptr);
  auto result = index.top_k(Perspective::kSemantic, *query, 1, nullptr);
  REQUIRE(result.size() == 1);
  CHECK(result[0].item.item_id == corpus.items[2].item_id);
  CHECK(result[0].similarity == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("top_k equals the exhaustive scan-sort oracle on random corpora") {
  std::mt19937 seeder(2024);
  for (int trial = 0; trial < 100; ++trial) {
    size_t dim = std::vector<size_t>{4, 16, 64}[trial % 3];
    int k = std::vector<int>{1, 2, 8}[(trial / 3) % 3];
    size_t n = 20 + seeder() % 60;
    SyntheticCorpus corpus = make_corpus(n, 1, dim, {"fake", "legit"},
                                         {"tech", "sports"}, "celebrity",
                                         static_cast<uint32_t>(seeder()));
    // Quantize similarity structure a little to provoke exact ties.
    for (auto& record : corpus.records) {
      for (auto& v : record.vector) v = std::round(v * 2.0) / 2.0;
      bool all_zero = std::all_of(record.vector.begin(), record.vector.end(),
                                  [](double v) { return v == 0.0; });
      if (all_zero) record.vector[0] = 0.5;
    }
    PerspectiveIndex index = PerspectiveIndex::build(corpus.records, corpus.items);

    std::vector<std::pair<LabeledItem, std::vector<double>>> pool;
    for (const auto& item : corpus.items) {
      pool.emplace_back(item,
                        *index.vector_of(item.item_id, Perspective::kSentiment));
    }
    const std::string target_id = corpus.items.back().item_id;
    auto filter = [&](const LabeledItem& item) {
      return item.origin == Origin::kSource && item.item_id != target_id;
    };
    const std::vector<double>& query =
        *index.vector_of(target_id, Perspective::kSentiment);
    auto expected = brute_force_top_k(pool, query, k, filter);
    auto actual = index.top_k(Perspective::kSentiment, query, k, filter);
    REQUIRE(actual.size() == expected.size());
    for (size_t i = 0; i < actual.size(); ++i) {
      CHECK(actual[i].item.item_id == expected[i].item.item_id);
      CHECK(actual[i].similarity == doctest::Approx(expected[i].similarity));
    }
    for (size_t i = 1; i < actual.size(); ++i) {
      CHECK(actual[i - 1].similarity >= actual[i].similarity);
    }
  }
}

TEST_CASE("top_k names the shortfall when the pool is too small") {
  SyntheticCorpus corpus = make_corpus(2, 0, 4, {"fake"}, {"tech"}, "celebrity", 9);
  PerspectiveIndex index = PerspectiveIndex::build(corpus.records, corpus.items);
  const std::vector<double>& query =
      *index.vector_of(corpus.items[0].item_id, Perspective::kStyle);
  try {
    index.top_k(Perspective::kStyle, query, 3, nullptr);
    FAIL("expected insufficient-pool error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInsufficientPool);
    CHECK(std::string(e.what()).find("short by 1") != std::string::npos);
  }
}

TEST_CASE("assemble_contexts honors k x perspectives and source-only") {
  SyntheticCorpus corpus =
      make_corpus(10, 4, 8, {"fake", "legit"}, {"tech", "sports"}, "celebrity", 11);
  PerspectiveIndex index = PerspectiveIndex::build(corpus.records, corpus.items);
  std::vector<LabeledItem> targets;
  for (const auto& item : corpus.items) {
    if (item.origin == Origin::kTarget) targets.push_back(item);
  }
  RetrievalConfig config;  // k = 2, three perspectives, source_only
  auto contexts = assemble_contexts(targets, index, config, "AMTCele");
  REQUIRE(contexts.size() == targets.size());
  for (const auto& ctx : contexts) {
    size_t slots = 0;
    for (const auto& [perspective, neighbors] : ctx.neighbors) {
      slots += neighbors.size();
      for (const auto& neighbor : neighbors) {
        CHECK(neighbor.item.origin == Origin::kSource);
        CHECK(neighbor.item.item_id != ctx.target.item_id);
      }
      for (size_t i = 1; i < neighbors.size(); ++i) {
        CHECK(neighbors[i - 1].similarity >= neighbors[i].similarity);
      }
    }
    CHECK(slots == 6);  // k=2 x 3 perspectives
  }
}

TEST_CASE("assemble_contexts reports a missing target embedding") {
  SyntheticCorpus corpus =
      make_corpus(6, 1, 8, {"fake", "legit"}, {"tech"}, "celebrity", 13);
  std::vector<EmbeddingRecord> records;
  const std::string target_id = corpus.items.back().item_id;
  for (const auto& record : corpus.records) {
    if (record.item_id == target_id && record.perspective == Perspective::kStyle) {
      continue;  // drop the style embedding of the target
    }
    records.push_back(record);
  }
  PerspectiveIndex index = PerspectiveIndex::build(records, corpus.items);
  try {
    assemble_contexts({corpus.items.back()}, index, RetrievalConfig{}, "AMTCele");
    FAIL("expected incomplete-embedding error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIncompleteEmbedding);
  }
}

TEST_CASE("per-perspective mean similarity decays monotonically in k") {
  SyntheticCorpus corpus = make_corpus(480, 20, 16, {"fake", "legit"},
                                       {"tech", "sports", "politics"}, "celebrity", 17,
                                       /*cluster_tightness=*/1.5);
  PerspectiveIndex index = PerspectiveIndex::build(corpus.records, corpus.items);
  std::vector<LabeledItem> targets;
  for (const auto& item : corpus.items) {
    if (item.origin == Origin::kTarget) targets.push_back(item);
  }
  for (int k : {1, 2, 4, 8}) {
    (void)k;
  }
  std::map<int, double> mean_by_k;
  for (int k : {1, 2, 4, 8}) {
    RetrievalConfig config;
    config.k = k;
    auto contexts = assemble_contexts(targets, index, config, "AMTCele");
    double sum = 0.0;
    size_t count = 0;
    for (const auto& ctx : contexts) {
      for (const auto& [perspective, neighbors] : ctx.neighbors) {
        for (const auto& neighbor : neighbors) {
          sum += neighbor.similarity;
          ++count;
        }
      }
    }
    mean_by_k[k] = sum / static_cast<double>(count);
  }
  CHECK(mean_by_k[1] >= mean_by_k[2]);
  CHECK(mean_by_k[2] >= mean_by_k[4]);
  CHECK(mean_by_k[4] >= mean_by_k[8]);
}

TEST_CASE("split_ra is a deterministic partition") {
  SyntheticCorpus corpus =
      make_corpus(12, 10, 8, {"fake", "legit"}, {"tech"}, "celebrity", 19);
  PerspectiveIndex index = PerspectiveIndex::build(corpus.records, corpus.items);
  std::vector<LabeledItem> targets;
  for (const auto& item : corpus.items) {
    if (item.origin == Origin::kTarget) targets.push_back(item);
  }
  auto contexts = assemble_contexts(targets, index, RetrievalConfig{}, "AMTCele");

  SUBCASE("even split") {
    auto [a, b] = split_ra(contexts, 42);
    CHECK(a.size() == 5);
    CHECK(b.size() == 5);
    std::set<std::string> ids;
    for (const auto& ctx : a) ids.insert(ctx.target.item_id);
    for (const auto& ctx : b) ids.insert(ctx.target.item_id);
    CHECK(ids.size() == contexts.size());
  }

  SUBCASE("odd split gives sizes {6,5}") {
    auto trimmed = contexts;
    trimmed.pop_back();
    REQUIRE(trimmed.size() == 9);
    trimmed.push_back(contexts.back());
    trimmed.push_back(contexts.front());
    // 11 contexts now (one id repeated is fine for size arithmetic)
    auto [a, b] = split_ra(trimmed, 1);
    CHECK(a.size() == 6);
    CHECK(b.size() == 5);
  }

  SUBCASE("same seed twice gives identical partitions") {
    auto [a1, b1] = split_ra(contexts, 7);
    auto [a2, b2] = split_ra(contexts, 7);
    REQUIRE(a1.size() == a2.size());
    for (size_t i = 0; i < a1.size(); ++i) {
      CHECK(a1[i].target.item_id == a2[i].target.item_id);
    }
    REQUIRE(b1.size() == b2.size());
    for (size_t i = 0; i < b1.size(); ++i) {
      CHECK(b1[i].target.item_id == b2[i].target.item_id);
    }
  }

  SUBCASE("empty input is rejected") {
    try {
      split_ra({}, 0);
      FAIL("expected empty-input error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kEmptyInput);
    }
  }
}

TEST_CASE("retrieved contexts round-trip through JSONL") {
  auto ctx = testsupport::make_context("item_1", "fake", "AMTCele");
  json j = to_json(ctx);
  RetrievedContext back = retrieved_context_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.neighbors_for(Perspective::kSemantic).size() == 2);
}

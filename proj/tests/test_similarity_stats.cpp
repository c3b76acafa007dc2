#include <doctest.h>

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <random>

#include "raar/errors.hpp"
#include "raar/similarity_stats.hpp"
#include "test_support.hpp"

using namespace raar;
using raar::testsupport::make_corpus;

namespace {

// Reference Welch implementation backed by boost.math, kept independent
// of the library's incomplete-beta route.
struct ReferenceWelch {
  double t;
  double p;
};

ReferenceWelch reference_welch(const std::vector<double>& a,
                               const std::vector<double>& b) {
  auto mean = [](const std::vector<double>& s) {
    double sum = 0;
    for (double v : s) sum += v;
    return sum / s.size();
  };
  auto variance = [&](const std::vector<double>& s, double m) {
    double ss = 0;
    for (double v : s) ss += (v - m) * (v - m);
    return ss / (s.size() - 1);
  };
  double ma = mean(a), mb = mean(b);
  double va = variance(a, ma), vb = variance(b, mb);
  double sa = va / a.size(), sb = vb / b.size();
  double t = (ma - mb) / std::sqrt(sa + sb);
  double df = (sa + sb) * (sa + sb) /
              (sa * sa / (a.size() - 1) + sb * sb / (b.size() - 1));
  boost::math::students_t dist(df);
  double p = 2.0 * boost::math::cdf(dist, -std::fabs(t));
  return {t, p};
}

}  // namespace

TEST_CASE("welch_ttest on the worked example") {
  auto stats = welch_ttest({1, 2, 3, 4, 5}, {2, 3, 4, 5, 6});
  CHECK(stats.t_statistic == doctest::Approx(-1.0).epsilon(1e-9));
  auto reference = reference_welch({1, 2, 3, 4, 5}, {2, 3, 4, 5, 6});
  CHECK(stats.p_value == doctest::Approx(reference.p).epsilon(1e-6));
  CHECK(stats.group_a_mean == doctest::Approx(3.0));
  CHECK(stats.group_b_mean == doctest::Approx(4.0));
}

TEST_CASE("welch_ttest: identical samples give t = 0, p = 1") {
  auto stats = welch_ttest({1, 2, 3, 4}, {1, 2, 3, 4});
  CHECK(stats.t_statistic == doctest::Approx(0.0));
  CHECK(stats.p_value == doctest::Approx(1.0));
}

TEST_CASE("welch_ttest matches the reference formula on 50 random pairs") {
  std::mt19937 gen(99);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<int> size_dist(2, 40);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(size_dist(gen)), b(size_dist(gen));
    double shift = noise(gen);
    for (auto& v : a) v = noise(gen);
    for (auto& v : b) v = noise(gen) + shift;
    auto stats = welch_ttest(a, b);
    auto reference = reference_welch(a, b);
    CHECK(stats.t_statistic == doctest::Approx(reference.t).epsilon(1e-9));
    CHECK(stats.p_value == doctest::Approx(reference.p).epsilon(1e-6));
    CHECK(stats.p_value >= 0.0);
    CHECK(stats.p_value <= 1.0);
  }
}

TEST_CASE("welch_ttest error paths") {
  SUBCASE("undersized sample") {
    try {
      welch_ttest({1.0}, {1.0, 2.0});
      FAIL("expected undersized-sample error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kUndersizedSample);
    }
  }
  SUBCASE("zero variance in both samples with unequal means") {
    try {
      welch_ttest({1.0, 1.0}, {2.0, 2.0});
      FAIL("expected degenerate-statistics error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kDegenerateStatistics);
    }
  }
}

TEST_CASE("student_t_two_sided_p against boost across a t grid") {
  for (double df : {1.0, 2.5, 8.0, 30.0, 120.0}) {
    boost::math::students_t dist(df);
    for (double t : {-6.0, -2.0, -1.0, -0.1, 0.0, 0.5, 1.5, 3.0, 10.0}) {
      double expected = 2.0 * boost::math::cdf(dist, -std::fabs(t));
      CHECK(student_t_two_sided_p(t, df) == doctest::Approx(expected).epsilon(1e-9));
    }
  }
}

TEST_CASE("label_agreement_table separates constructed clusters") {
  // Tight same-label clusters across domains: same-label similarity must
  // dominate cross-label similarity, so every A->A vs A->B test comes out
  // positive and significant.
  auto corpus = make_corpus(120, 0, 12, {"fake", "legit"}, {"tech", "sports", "biz"},
                            "celebrity", 5, /*cluster_tightness=*/4.0);
  PerspectiveIndex index = PerspectiveIndex::build(corpus.records, corpus.items);
  std::vector<int> ks = {1, 2, 4, 8};
  LabelAgreementTable table = label_agreement_table(index, corpus.items, ks);
  REQUIRE(table.sections.size() == 3);
  for (const auto& [perspective, entries] : table.sections) {
    // Rows: fake->fake, fake->legit, legit->legit, legit->fake.
    REQUIRE(entries.size() == 4);
    for (const auto& entry : entries) {
      CHECK(entry.mean_by_k.size() == ks.size());
      CHECK(entry.test_by_k.size() == ks.size());
      if (entry.label_a == entry.label_b) continue;
      for (size_t ki = 0; ki < ks.size(); ++ki) {
        REQUIRE(entry.test_by_k[ki].has_value());
        const SimilarityStats& stats = *entry.test_by_k[ki];
        CHECK(stats.t_statistic > 0.0);
        CHECK(stats.p_value < 0.05);
        CHECK(stats.group_a_mean > stats.group_b_mean);
        CHECK(stats.top_k == ks[ki]);
      }
    }
  }
}

TEST_CASE("label_agreement_table: exhaustive pairwise oracle on a tiny corpus") {
  auto corpus = make_corpus(12, 0, 6, {"fake", "legit"}, {"tech", "sports"},
                            "celebrity", 21, 1.0);
  PerspectiveIndex index = PerspectiveIndex::build(corpus.records, corpus.items);
  LabelAgreementTable table = label_agreement_table(index, corpus.items, {2});

  // Oracle: per fake-labeled query, top-2 similarities over legit items in
  // other domains, pooled; compare the mean against the table cell.
  std::vector<double> pooled;
  for (const auto& query : corpus.items) {
    if (query.label != "fake") continue;
    std::vector<double> sims;
    for (const auto& candidate : corpus.items) {
      if (candidate.label != "legit" || candidate.domain == query.domain) continue;
      sims.push_back(cosine_similarity(
          *index.vector_of(query.item_id, Perspective::kSentiment),
          *index.vector_of(candidate.item_id, Perspective::kSentiment)));
    }
    std::sort(sims.begin(), sims.end(), std::greater<>());
    for (size_t i = 0; i < std::min<size_t>(2, sims.size()); ++i) {
      pooled.push_back(sims[i]);
    }
  }
  double expected_mean = 0;
  for (double v : pooled) expected_mean += v;
  expected_mean /= pooled.size();

  const auto& sentiment_rows = table.sections.front().second;
  REQUIRE(table.sections.front().first == Perspective::kSentiment);
  bool found = false;
  for (const auto& entry : sentiment_rows) {
    if (entry.label_a == "fake" && entry.label_b == "legit") {
      REQUIRE(entry.mean_by_k[0].has_value());
      CHECK(*entry.mean_by_k[0] == doctest::Approx(expected_mean).epsilon(1e-12));
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("label_agreement_table degenerate structures") {
  SUBCASE("single class: only the A->A row, no t-test") {
    auto corpus = make_corpus(10, 0, 6, {"fake"}, {"tech", "sports"}, "celebrity", 31);
    PerspectiveIndex index = PerspectiveIndex::build(corpus.records, corpus.items);
    LabelAgreementTable table = label_agreement_table(index, corpus.items, {1, 2});
    for (const auto& [perspective, entries] : table.sections) {
      REQUIRE(entries.size() == 1);
      CHECK(entries[0].label_a == entries[0].label_b);
      for (const auto& test : entries[0].test_by_k) {
        CHECK_FALSE(test.has_value());
      }
    }
  }

  SUBCASE("k list of 4 values gives 4 columns per pair") {
    auto corpus = make_corpus(16, 0, 6, {"fake", "legit"}, {"tech", "sports"},
                              "celebrity", 41);
    PerspectiveIndex index = PerspectiveIndex::build(corpus.records, corpus.items);
    LabelAgreementTable table = label_agreement_table(index, corpus.items, {1, 2, 4, 8});
    for (const auto& [perspective, entries] : table.sections) {
      for (const auto& entry : entries) {
        CHECK(entry.mean_by_k.size() == 4);
      }
    }
  }

  SUBCASE("a label absent outside its own domain is a missing cell") {
    // "legit" exists only in domain tech; legit queries then have no
    // cross-domain same-label pool at all.
    std::vector<LabeledItem> items;
    std::vector<EmbeddingRecord> records;
    auto add = [&](const std::string& id, const std::string& label,
                   const std::string& domain, double x) {
      items.push_back(LabeledItem{id, "t", label, domain, Origin::kSource});
      records.push_back(EmbeddingRecord{id, Perspective::kSentiment, {x, 1.0}});
    };
    add("a1", "fake", "tech", 0.1);
    add("a2", "fake", "sports", 0.2);
    add("a3", "fake", "sports", 0.3);
    add("b1", "legit", "tech", 0.4);
    add("b2", "legit", "tech", 0.5);
    PerspectiveIndex index = PerspectiveIndex::build(records, items);
    LabelAgreementTable table = label_agreement_table(index, items, {1});
    const auto& rows = table.sections.front().second;
    for (const auto& entry : rows) {
      if (entry.label_a == "legit" && entry.label_b == "legit") {
        CHECK_FALSE(entry.mean_by_k[0].has_value());
      }
      if (entry.label_a == "fake" && entry.label_b == "legit") {
        // sports-domain fake queries still see tech legit items
        CHECK(entry.mean_by_k[0].has_value());
      }
    }
  }
}

TEST_CASE("label agreement table serializes to JSON") {
  auto corpus = make_corpus(16, 0, 6, {"fake", "legit"}, {"tech", "sports"},
                            "celebrity", 51);
  PerspectiveIndex index = PerspectiveIndex::build(corpus.records, corpus.items);
  LabelAgreementTable table = label_agreement_table(index, corpus.items, {1, 2});
  json j = table.to_json();
  CHECK(j["top_k_values"].size() == 2);
  CHECK(j["sections"].size() == 3);
  CHECK(j["sections"][0]["rows"].size() == 4);
}

#include "raar/similarity_stats.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "raar/errors.hpp"

namespace raar {

namespace {

double ln_gamma(double x) { return std::lgamma(x); }

// Continued fraction for the regularized incomplete beta, modified
// Lentz's method (Numerical Recipes form).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 300;
  constexpr double kEpsilon = 1e-15;
  constexpr double kTiny = 1e-300;

  double qab = a + b;
  double qap = a + 1.0;
  double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEpsilon) break;
  }
  return h;
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) +
                    a * std::log(x) + b * std::log(1.0 - x);
  double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

struct SampleMoments {
  double mean;
  double variance;  // unbiased
  size_t n;
};

SampleMoments moments(const std::vector<double>& sample) {
  double sum = 0.0;
  for (double v : sample) sum += v;
  double mean = sum / static_cast<double>(sample.size());
  double ss = 0.0;
  for (double v : sample) ss += (v - mean) * (v - mean);
  double variance = ss / static_cast<double>(sample.size() - 1);
  return {mean, variance, sample.size()};
}

}  // namespace

double student_t_two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  if (t == 0.0) return 1.0;
  double x = df / (df + t * t);
  double p = regularized_incomplete_beta(df / 2.0, 0.5, x);
  return std::min(1.0, std::max(0.0, p));
}

SimilarityStats welch_ttest(const std::vector<double>& sample_a,
                            const std::vector<double>& sample_b, int top_k) {
  if (sample_a.size() < 2 || sample_b.size() < 2) {
    fail(ErrorCode::kUndersizedSample,
         "welch_ttest: both samples need >= 2 observations (got " +
             std::to_string(sample_a.size()) + " and " + std::to_string(sample_b.size()) +
             ")");
  }
  SampleMoments a = moments(sample_a);
  SampleMoments b = moments(sample_b);
  if (a.variance == 0.0 && b.variance == 0.0) {
    if (a.mean == b.mean) {
      // No variation and no difference: t = 0, p = 1 is well-defined.
      return SimilarityStats{a.mean, b.mean, 0.0, 1.0, top_k};
    }
    fail(ErrorCode::kDegenerateStatistics,
         "welch_ttest: zero variance in both samples with unequal means");
  }
  double se_a = a.variance / static_cast<double>(a.n);
  double se_b = b.variance / static_cast<double>(b.n);
  double se = se_a + se_b;
  double t = (a.mean - b.mean) / std::sqrt(se);
  double df = se * se /
              (se_a * se_a / static_cast<double>(a.n - 1) +
               se_b * se_b / static_cast<double>(b.n - 1));
  double p = student_t_two_sided_p(t, df);
  return SimilarityStats{a.mean, b.mean, t, p, top_k};
}

namespace {

double mean_of(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

// Per-query top-k cross-domain similarities from label A to label B,
// pooled over all A queries. Empty when no query has any candidate.
std::vector<double> pooled_top_k(const PerspectiveIndex& index, Perspective p,
                                 const std::vector<const LabeledItem*>& queries,
                                 const std::string& label_b, int k) {
  std::vector<double> pooled;
  for (const LabeledItem* query : queries) {
    const std::vector<double>* vec = index.vector_of(query->item_id, p);
    if (vec == nullptr) continue;
    std::vector<double> sims;
    for (const auto& candidate : index.items()) {
      if (candidate.label != label_b) continue;
      if (candidate.domain == query->domain) continue;
      const std::vector<double>* cvec = index.vector_of(candidate.item_id, p);
      if (cvec == nullptr) continue;
      sims.push_back(cosine_similarity(*vec, *cvec));
    }
    if (sims.empty()) continue;
    std::sort(sims.begin(), sims.end(), std::greater<>());
    size_t take = std::min(static_cast<size_t>(k), sims.size());
    pooled.insert(pooled.end(), sims.begin(), sims.begin() + take);
  }
  return pooled;
}

}  // namespace

json LabelAgreementTable::to_json() const {
  json sections_json = json::array();
  for (const auto& [perspective, entries] : sections) {
    json rows = json::array();
    for (const auto& entry : entries) {
      json means = json::array();
      for (const auto& mean : entry.mean_by_k) {
        means.push_back(mean ? json(*mean) : json(nullptr));
      }
      json tests = json::array();
      for (const auto& test : entry.test_by_k) {
        if (!test) {
          tests.push_back(nullptr);
        } else {
          tests.push_back(json{{"t", test->t_statistic},
                               {"p", test->p_value},
                               {"mean_a", test->group_a_mean},
                               {"mean_b", test->group_b_mean},
                               {"top_k", test->top_k}});
        }
      }
      rows.push_back(json{{"pair", entry.label_a + "->" + entry.label_b},
                          {"mean_by_k", std::move(means)},
                          {"test_by_k", std::move(tests)}});
    }
    sections_json.push_back(
        json{{"perspective", to_string(perspective)}, {"rows", std::move(rows)}});
  }
  return json{{"top_k_values", top_k_values}, {"sections", std::move(sections_json)}};
}

LabelAgreementTable label_agreement_table(const PerspectiveIndex& index,
                                          const std::vector<LabeledItem>& items,
                                          const std::vector<int>& top_k_values) {
  if (top_k_values.empty()) {
    fail(ErrorCode::kInvalidArgument, "label_agreement_table: empty top_k list");
  }
  std::set<std::string> label_set;
  std::set<std::string> domains;
  for (const auto& item : items) {
    label_set.insert(item.label);
    domains.insert(item.domain);
  }
  if (domains.size() < 2 && label_set.size() > 1) {
    fail(ErrorCode::kInvalidArgument,
         "label_agreement_table: cross-domain statistics need >= 2 domains");
  }
  std::vector<std::string> labels(label_set.begin(), label_set.end());

  std::map<std::string, std::vector<const LabeledItem*>> by_label;
  for (const auto& item : items) by_label[item.label].push_back(&item);

  LabelAgreementTable table;
  table.top_k_values = top_k_values;
  for (Perspective p : {Perspective::kSentiment, Perspective::kSemantic,
                        Perspective::kStyle}) {
    if (!index.has_perspective(p)) continue;
    std::vector<AgreementEntry> entries;
    for (const auto& label_a : labels) {
      // Same-label samples per k, reused by every cross-label test.
      std::vector<std::vector<double>> same_samples;
      for (int k : top_k_values) {
        same_samples.push_back(pooled_top_k(index, p, by_label[label_a], label_a, k));
      }
      AgreementEntry same;
      same.label_a = label_a;
      same.label_b = label_a;
      for (const auto& sample : same_samples) {
        same.mean_by_k.push_back(sample.empty() ? std::nullopt
                                                : std::optional<double>(mean_of(sample)));
        same.test_by_k.push_back(std::nullopt);
      }
      entries.push_back(std::move(same));
      for (const auto& label_b : labels) {
        if (label_b == label_a) continue;
        AgreementEntry cross;
        cross.label_a = label_a;
        cross.label_b = label_b;
        for (size_t ki = 0; ki < top_k_values.size(); ++ki) {
          std::vector<double> sample =
              pooled_top_k(index, p, by_label[label_a], label_b, top_k_values[ki]);
          if (sample.empty()) {
            cross.mean_by_k.push_back(std::nullopt);
            cross.test_by_k.push_back(std::nullopt);
            continue;
          }
          cross.mean_by_k.push_back(mean_of(sample));
          const auto& same_sample = same_samples[ki];
          if (same_sample.size() >= 2 && sample.size() >= 2) {
            cross.test_by_k.push_back(
                welch_ttest(same_sample, sample, top_k_values[ki]));
          } else {
            cross.test_by_k.push_back(std::nullopt);
          }
        }
        entries.push_back(std::move(cross));
      }
    }
    table.sections.emplace_back(p, std::move(entries));
  }
  return table;
}

}  // namespace raar

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "raar/vector_index.hpp"

namespace raar {

// Welch two-sample comparison of two similarity groups.
struct SimilarityStats {
  double group_a_mean = 0.0;
  double group_b_mean = 0.0;
  double t_statistic = 0.0;
  double p_value = 1.0;
  int top_k = 1;
};

// Two-sided p-value for Student's t with `df` degrees of freedom,
// computed through the regularized incomplete beta function.
double student_t_two_sided_p(double t, double df);

// Welch's unequal-variance t-test, two-sided. Both samples need >= 2
// observations; two zero-variance samples are degenerate.
SimilarityStats welch_ttest(const std::vector<double>& sample_a,
                            const std::vector<double>& sample_b, int top_k = 1);

// Mean similarity of per-query top-k matches from label A queries to
// label B candidates in other domains, plus the A->A vs A->B test.
struct AgreementEntry {
  std::string label_a;
  std::string label_b;
  // Aligned with the table's top_k_values; nullopt marks a missing cell.
  std::vector<std::optional<double>> mean_by_k;
  // Present only for cross-label rows with enough data; compares the
  // A->A sample against this A->B sample at each k.
  std::vector<std::optional<SimilarityStats>> test_by_k;
};

struct LabelAgreementTable {
  std::vector<int> top_k_values;
  std::vector<std::pair<Perspective, std::vector<AgreementEntry>>> sections;

  json to_json() const;
};

// Cross-domain label-agreement statistics: for every ordered label pair
// (A, B) and every k, the mean of each A-item's top-k cosine
// similarities against B-items outside the item's own domain, with a
// Welch test of A->A against A->B.
LabelAgreementTable label_agreement_table(const PerspectiveIndex& index,
                                          const std::vector<LabeledItem>& items,
                                          const std::vector<int>& top_k_values);

}  // namespace raar

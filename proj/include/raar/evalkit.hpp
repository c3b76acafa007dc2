#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "raar/corpus.hpp"
#include "raar/task_spec.hpp"

namespace raar {

// Accuracy plus macro precision/recall/F1 over canonical labels, with a
// confusion matrix. All macro values are unweighted means of per-class
// values; empty denominators score 0.

struct Prediction {
  std::string item_id;
  std::string raw_output;
  std::optional<std::string> label;  // canonical, via extract_label
};

// Predictions file line: {"item_id","raw_output"}; label derived at load.
Prediction prediction_from_json(const json& j, const TaskSpec& task);
std::vector<Prediction> load_predictions(const std::filesystem::path& path,
                                         const TaskSpec& task);

enum class UnparsedPolicy {
  kCountAsWrong,  // unparsed output counts against accuracy and recall
  kDrop,          // unparsed items are excluded from scoring
};

struct ConfusionMatrix {
  std::vector<std::string> classes;            // rows = gold, cols = predicted
  std::vector<std::vector<int64_t>> counts;
  int64_t unparsed = 0;                        // predictions with no label

  int64_t total() const;
  json to_json() const;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int64_t support = 0;
};

struct MetricsReport {
  double accuracy = 0.0;
  std::vector<std::pair<std::string, ClassMetrics>> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  int64_t total = 0;
  int64_t unparsed = 0;

  json to_json() const;
};

std::pair<ConfusionMatrix, MetricsReport> score(
    const std::vector<Prediction>& predictions,
    const std::map<std::string, std::string>& golds, const TaskSpec& task,
    UnparsedPolicy policy = UnparsedPolicy::kCountAsWrong);

// Plain-text table in Table-1 column order: ACC, Pre, Recall, F1.
std::string render_metrics_table(const MetricsReport& report);

// Domains ordered hardest first: ascending mean macro-F1 across the
// supplied judge reports, ties broken by domain name.
std::vector<std::pair<std::string, double>> rank_domain_difficulty(
    const std::map<std::string, std::vector<MetricsReport>>& per_domain_reports);

// Within each domain, downsample every class to the domain's
// minority-class count via seeded uniform sampling. Original corpus
// order is preserved among the survivors.
std::vector<LabeledItem> balance_classes(const std::vector<LabeledItem>& items,
                                         uint64_t seed);

}  // namespace raar

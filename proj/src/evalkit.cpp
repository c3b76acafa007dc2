#include "raar/evalkit.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "raar/errors.hpp"
#include "raar/rewards.hpp"
#include "raar/rng.hpp"

namespace raar {

Prediction prediction_from_json(const json& j, const TaskSpec& task) {
  Prediction prediction;
  prediction.item_id = j.at("item_id").get<std::string>();
  prediction.raw_output = j.at("raw_output").get<std::string>();
  FormatCapture capture = match_output_format(prediction.raw_output);
  std::string segment =
      capture.matched ? capture.answer_segment() : prediction.raw_output;
  prediction.label = extract_label(segment, task);
  return prediction;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path,
                                         const TaskSpec& task) {
  std::vector<Prediction> predictions;
  for_each_jsonl(path, [&](size_t, const json& j) {
    predictions.push_back(prediction_from_json(j, task));
  });
  return predictions;
}

int64_t ConfusionMatrix::total() const {
  int64_t sum = unparsed;
  for (const auto& row : counts) {
    for (int64_t v : row) sum += v;
  }
  return sum;
}

json ConfusionMatrix::to_json() const {
  return json{{"classes", classes}, {"counts", counts}, {"unparsed", unparsed}};
}

json MetricsReport::to_json() const {
  json classes = json::object();
  for (const auto& [name, metrics] : per_class) {
    classes[name] = json{{"precision", metrics.precision},
                         {"recall", metrics.recall},
                         {"f1", metrics.f1},
                         {"support", metrics.support}};
  }
  return json{{"accuracy", accuracy},
              {"per_class", std::move(classes)},
              {"macro_precision", macro_precision},
              {"macro_recall", macro_recall},
              {"macro_f1", macro_f1},
              {"total", total},
              {"unparsed", unparsed}};
}

std::pair<ConfusionMatrix, MetricsReport> score(
    const std::vector<Prediction>& predictions,
    const std::map<std::string, std::string>& golds, const TaskSpec& task,
    UnparsedPolicy policy) {
  std::set<std::string> prediction_ids;
  for (const auto& p : predictions) prediction_ids.insert(p.item_id);
  if (prediction_ids.size() != predictions.size()) {
    fail(ErrorCode::kAlignmentError, "duplicate item_id among predictions");
  }
  if (prediction_ids.size() != golds.size()) {
    fail(ErrorCode::kAlignmentError,
         "prediction/gold id sets differ in size: " +
             std::to_string(prediction_ids.size()) + " vs " +
             std::to_string(golds.size()));
  }
  for (const auto& [id, gold] : golds) {
    if (!prediction_ids.count(id)) {
      fail(ErrorCode::kAlignmentError, "gold item " + id + " has no prediction");
    }
    if (!task.is_canonical(gold)) {
      fail(ErrorCode::kInvalidArgument, "gold label not canonical: " + gold);
    }
  }

  const auto& classes = task.label_set;
  auto class_index = [&](const std::string& label) {
    return static_cast<size_t>(
        std::find(classes.begin(), classes.end(), label) - classes.begin());
  };

  ConfusionMatrix matrix;
  matrix.classes = classes;
  matrix.counts.assign(classes.size(), std::vector<int64_t>(classes.size(), 0));

  std::vector<int64_t> tp(classes.size(), 0), fp(classes.size(), 0),
      fn(classes.size(), 0), support(classes.size(), 0);
  int64_t correct = 0;
  int64_t scored_total = 0;

  for (const auto& prediction : predictions) {
    const std::string& gold = golds.at(prediction.item_id);
    size_t g = class_index(gold);
    if (!prediction.label) {
      matrix.unparsed += 1;
      if (policy == UnparsedPolicy::kDrop) continue;
      // Counts as a wrong prediction on a reserved non-class: the gold
      // class loses recall, no predicted class gains a false positive.
      scored_total += 1;
      support[g] += 1;
      fn[g] += 1;
      continue;
    }
    size_t p = class_index(*prediction.label);
    matrix.counts[g][p] += 1;
    scored_total += 1;
    support[g] += 1;
    if (p == g) {
      correct += 1;
      tp[g] += 1;
    } else {
      fn[g] += 1;
      fp[p] += 1;
    }
  }

  MetricsReport report;
  report.total = scored_total;
  report.unparsed = matrix.unparsed;
  report.accuracy =
      scored_total == 0 ? 0.0 : static_cast<double>(correct) / scored_total;
  double precision_sum = 0.0, recall_sum = 0.0, f1_sum = 0.0;
  for (size_t c = 0; c < classes.size(); ++c) {
    ClassMetrics metrics;
    metrics.support = support[c];
    int64_t predicted = tp[c] + fp[c];
    int64_t actual = tp[c] + fn[c];
    metrics.precision = predicted == 0 ? 0.0 : static_cast<double>(tp[c]) / predicted;
    metrics.recall = actual == 0 ? 0.0 : static_cast<double>(tp[c]) / actual;
    metrics.f1 = (metrics.precision + metrics.recall) == 0.0
                     ? 0.0
                     : 2.0 * metrics.precision * metrics.recall /
                           (metrics.precision + metrics.recall);
    precision_sum += metrics.precision;
    recall_sum += metrics.recall;
    f1_sum += metrics.f1;
    report.per_class.emplace_back(classes[c], metrics);
  }
  report.macro_precision = precision_sum / static_cast<double>(classes.size());
  report.macro_recall = recall_sum / static_cast<double>(classes.size());
  report.macro_f1 = f1_sum / static_cast<double>(classes.size());
  return {std::move(matrix), std::move(report)};
}

std::string render_metrics_table(const MetricsReport& report) {
  char line[256];
  std::string table;
  std::snprintf(line, sizeof(line), "%-12s %8s %8s %8s %8s\n", "", "ACC", "Pre",
                "Recall", "F1");
  table += line;
  std::snprintf(line, sizeof(line), "%-12s %8.3f %8.3f %8.3f %8.3f\n", "macro",
                report.accuracy, report.macro_precision, report.macro_recall,
                report.macro_f1);
  table += line;
  for (const auto& [name, metrics] : report.per_class) {
    std::snprintf(line, sizeof(line), "%-12s %8s %8.3f %8.3f %8.3f\n", name.c_str(), "-",
                  metrics.precision, metrics.recall, metrics.f1);
    table += line;
  }
  return table;
}

std::vector<std::pair<std::string, double>> rank_domain_difficulty(
    const std::map<std::string, std::vector<MetricsReport>>& per_domain_reports) {
  if (per_domain_reports.empty()) {
    fail(ErrorCode::kEmptyInput, "rank_domain_difficulty: no domains");
  }
  std::vector<std::pair<std::string, double>> ranking;
  for (const auto& [domain, reports] : per_domain_reports) {
    if (reports.empty()) {
      fail(ErrorCode::kEmptyInput, "domain " + domain + " has no reports");
    }
    double sum = 0.0;
    for (const auto& report : reports) sum += report.macro_f1;
    ranking.emplace_back(domain, sum / static_cast<double>(reports.size()));
  }
  std::sort(ranking.begin(), ranking.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second < b.second;
    return a.first < b.first;
  });
  return ranking;
}

std::vector<LabeledItem> balance_classes(const std::vector<LabeledItem>& items,
                                         uint64_t seed) {
  // Group indices by (domain, label), preserving corpus order.
  std::map<std::string, std::map<std::string, std::vector<size_t>>> groups;
  for (size_t i = 0; i < items.size(); ++i) {
    groups[items[i].domain][items[i].label].push_back(i);
  }
  std::vector<bool> keep(items.size(), false);
  for (const auto& [domain, by_label] : groups) {
    size_t minority = SIZE_MAX;
    for (const auto& [label, indices] : by_label) {
      minority = std::min(minority, indices.size());
    }
    for (const auto& [label, indices] : by_label) {
      DeterministicRng rng(substream_seed(seed, domain + "\x1f" + label));
      for (size_t idx : sample_without_replacement(indices.size(), minority, rng)) {
        keep[indices[idx]] = true;
      }
    }
  }
  std::vector<LabeledItem> balanced;
  for (size_t i = 0; i < items.size(); ++i) {
    if (keep[i]) balanced.push_back(items[i]);
  }
  return balanced;
}

}  // namespace raar

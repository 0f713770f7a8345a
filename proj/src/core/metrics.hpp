#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vggft {

// k x k counts, rows = true class, columns = predicted class.
struct ConfusionMatrix {
  int k = 0;
  std::vector<int64_t> counts;
  std::vector<std::string> class_names;

  int64_t& at(int truth, int pred) { return counts[static_cast<size_t>(truth) * k + pred]; }
  int64_t at(int truth, int pred) const { return counts[static_cast<size_t>(truth) * k + pred]; }
  int64_t total() const;
  int64_t trace() const;
  int64_t row_sum(int truth) const;
  int64_t col_sum(int pred) const;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& true_labels,
                                 const std::vector<int>& predicted_labels, int k,
                                 std::vector<std::string> class_names = {});

// Per-class one-vs-rest precision/recall/F plus unweighted macro means and
// overall accuracy. Classes with an empty denominator score 0, not NaN.
struct MetricsReport {
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f_measure;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f = 0.0;
  double accuracy = 0.0;
};

MetricsReport classification_metrics(const ConfusionMatrix& cm);

// F = 2PR/(P+R), 0 when P+R == 0
double f_measure(double precision, double recall);

// display convention: half-up to 3 decimals
double round3(double v);
std::string format3(double v);

// CSV writers. The metrics file carries full-precision values and the
// 3-decimal display set; the first row is the macro aggregate, followed by
// one row per class. positive_class (when >= 0) tags that class's row.
void write_metrics_csv(const std::string& path, const std::string& model_name,
                       const std::string& task_label, const ConfusionMatrix& cm,
                       const MetricsReport& report, int positive_class = -1);

// first row = predicted class names, then one row per true class
void write_confusion_csv(const std::string& path, const ConfusionMatrix& cm);

}  // namespace vggft

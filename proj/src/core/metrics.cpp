#include "core/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "core/error.hpp"

namespace vggft {

int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), int64_t{0});
}

int64_t ConfusionMatrix::trace() const {
  int64_t t = 0;
  for (int i = 0; i < k; ++i) t += at(i, i);
  return t;
}

int64_t ConfusionMatrix::row_sum(int truth) const {
  int64_t t = 0;
  for (int j = 0; j < k; ++j) t += at(truth, j);
  return t;
}

int64_t ConfusionMatrix::col_sum(int pred) const {
  int64_t t = 0;
  for (int i = 0; i < k; ++i) t += at(i, pred);
  return t;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& true_labels,
                                 const std::vector<int>& predicted_labels, int k,
                                 std::vector<std::string> class_names) {
  if (k < 2) fail(ErrorCode::Input, "confusion matrix needs at least 2 classes");
  if (true_labels.size() != predicted_labels.size())
    fail(ErrorCode::Input, "label vectors differ in length: " +
                               std::to_string(true_labels.size()) + " vs " +
                               std::to_string(predicted_labels.size()));
  if (true_labels.empty()) fail(ErrorCode::Input, "no samples to tally");

  ConfusionMatrix cm;
  cm.k = k;
  cm.counts.assign(static_cast<size_t>(k) * k, 0);
  if (class_names.empty())
    for (int i = 0; i < k; ++i) class_names.push_back("class" + std::to_string(i));
  if (static_cast<int>(class_names.size()) != k)
    fail(ErrorCode::Input, "class name list does not match k");
  cm.class_names = std::move(class_names);

  for (size_t i = 0; i < true_labels.size(); ++i) {
    const int t = true_labels[i], p = predicted_labels[i];
    if (t < 0 || t >= k || p < 0 || p >= k)
      fail(ErrorCode::Input, "label out of range at sample " + std::to_string(i));
    ++cm.at(t, p);
  }
  return cm;
}

double f_measure(double precision, double recall) {
  const double denom = precision + recall;
  if (denom == 0.0) return 0.0;
  return 2.0 * precision * recall / denom;
}

MetricsReport classification_metrics(const ConfusionMatrix& cm) {
  if (cm.k < 2 || cm.total() < 1) fail(ErrorCode::Input, "empty confusion matrix");

  MetricsReport r;
  for (int c = 0; c < cm.k; ++c) {
    const int64_t tp = cm.at(c, c);
    const int64_t fp = cm.col_sum(c) - tp;
    const int64_t fn = cm.row_sum(c) - tp;
    const double p = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
    const double rec = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
    r.precision.push_back(p);
    r.recall.push_back(rec);
    r.f_measure.push_back(f_measure(p, rec));
  }
  for (int c = 0; c < cm.k; ++c) {
    r.macro_precision += r.precision[c];
    r.macro_recall += r.recall[c];
    r.macro_f += r.f_measure[c];
  }
  r.macro_precision /= cm.k;
  r.macro_recall /= cm.k;
  r.macro_f /= cm.k;
  r.accuracy = static_cast<double>(cm.trace()) / cm.total();
  return r;
}

double round3(double v) { return std::floor(v * 1000.0 + 0.5) / 1000.0; }

std::string format3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", round3(v));
  return buf;
}

namespace {

std::string full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void emit_row(std::ofstream& out, const std::string& model, const std::string& scope, double p,
              double r, double f, double a) {
  out << model << "," << scope << "," << full(p) << "," << full(r) << "," << full(f) << ","
      << full(a) << "," << format3(p) << "," << format3(r) << "," << format3(f) << ","
      << format3(a) << "\n";
}

}  // namespace

void write_metrics_csv(const std::string& path, const std::string& model_name,
                       const std::string& task_label, const ConfusionMatrix& cm,
                       const MetricsReport& report, int positive_class) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write metrics csv " + path);
  out << "model,task,precision,recall,f1,accuracy,"
         "precision_display,recall_display,f1_display,accuracy_display\n";
  emit_row(out, model_name, task_label, report.macro_precision, report.macro_recall,
           report.macro_f, report.accuracy);
  for (int c = 0; c < cm.k; ++c) {
    std::string scope = task_label + "/class:" + cm.class_names[c];
    if (c == positive_class) scope += "(positive)";
    emit_row(out, model_name, scope, report.precision[c], report.recall[c], report.f_measure[c],
             report.accuracy);
  }
  if (!out) fail(ErrorCode::Io, "write failed for " + path);
}

void write_confusion_csv(const std::string& path, const ConfusionMatrix& cm) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write confusion csv " + path);
  for (int j = 0; j < cm.k; ++j) out << "," << cm.class_names[j];
  out << "\n";
  for (int i = 0; i < cm.k; ++i) {
    out << cm.class_names[i];
    for (int j = 0; j < cm.k; ++j) out << "," << cm.at(i, j);
    out << "\n";
  }
  if (!out) fail(ErrorCode::Io, "write failed for " + path);
}

}  // namespace vggft

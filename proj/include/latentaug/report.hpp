#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "latentaug/data.hpp"
#include "latentaug/tensor.hpp"

namespace latentaug {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  void add(int true_label, int predicted_label);
  std::int64_t at(int true_label, int predicted_label) const;
  int num_classes() const { return classes_; }
  std::int64_t total() const;
  std::int64_t trace() const;
  std::int64_t row_sum(int true_label) const;
  std::int64_t col_sum(int predicted_label) const;

 private:
  void check(int label) const;
  int classes_;
  std::vector<std::int64_t> counts_;
};

ConfusionMatrix build_confusion(const std::vector<int>& true_labels,
                                const std::vector<int>& predicted_labels, int num_classes);

struct MetricsReport {
  double overall_accuracy = 0;
  double macro_precision = 0;
  double macro_recall = 0;
  double macro_f1 = 0;
  std::vector<double> per_class_accuracy;  // per-class recall
  std::vector<std::int64_t> per_class_count;
};

// Per-class precision is diagonal/column-sum (0 when the class is never
// predicted), per-class accuracy is recall (diagonal/row-sum); macro metrics
// are unweighted means; F1 is the per-class harmonic mean (0 when
// precision+recall is 0).
MetricsReport metrics_from_confusion(const ConfusionMatrix& cm);

struct PcaResult {
  Tensor coordinates;                            // N x k projections of centered data
  std::vector<double> explained_variance_ratio;  // k values, non-increasing
  Tensor components;                             // D x k, one component per column
  Tensor mean;                                   // D
};

// Mean-centered projection onto the top principal components (covariance
// eigenvectors in descending eigenvalue order). Each component's
// largest-magnitude entry is made positive so results are deterministic.
PcaResult pca_project(const Tensor& vectors, std::int64_t n_components = 2);

struct NamedMetrics {
  std::string config;
  MetricsReport metrics;
};

// Writes metrics.csv / metrics.json (percent values, two decimals, keys
// config,overall_acc,overall_prec,overall_rec,overall_f1,class<k>_acc) and
// class_acc_bars.csv with improvements against the configuration named
// `real_noaug` (falling back to the first row).
void emit_report(const std::vector<NamedMetrics>& reports, const std::filesystem::path& out_dir);

// pca_<class>.csv rows: class,provenance,pc1,pc2.
void write_pca_csv(const std::filesystem::path& file, int class_label, const Tensor& features,
                   const std::vector<Provenance>& provenance);

}  // namespace latentaug

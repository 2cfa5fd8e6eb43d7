#include "latentaug/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "latentaug/error.hpp"

namespace latentaug {

ConfusionMatrix::ConfusionMatrix(int num_classes) : classes_(num_classes) {
  if (num_classes <= 0) throw ContractError("confusion matrix: need at least one class");
  counts_.assign(static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(num_classes), 0);
}

void ConfusionMatrix::check(int label) const {
  if (label < 0 || label >= classes_) {
    throw DataError("confusion matrix: label " + std::to_string(label) + " out of range [0, " +
                    std::to_string(classes_) + ")");
  }
}

void ConfusionMatrix::add(int true_label, int predicted_label) {
  check(true_label);
  check(predicted_label);
  counts_[static_cast<std::size_t>(true_label) * classes_ + predicted_label] += 1;
}

std::int64_t ConfusionMatrix::at(int true_label, int predicted_label) const {
  check(true_label);
  check(predicted_label);
  return counts_[static_cast<std::size_t>(true_label) * classes_ + predicted_label];
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t t = 0;
  for (int k = 0; k < classes_; ++k) t += counts_[static_cast<std::size_t>(k) * classes_ + k];
  return t;
}

std::int64_t ConfusionMatrix::row_sum(int true_label) const {
  check(true_label);
  std::int64_t t = 0;
  for (int k = 0; k < classes_; ++k) t += counts_[static_cast<std::size_t>(true_label) * classes_ + k];
  return t;
}

std::int64_t ConfusionMatrix::col_sum(int predicted_label) const {
  check(predicted_label);
  std::int64_t t = 0;
  for (int k = 0; k < classes_; ++k) t += counts_[static_cast<std::size_t>(k) * classes_ + predicted_label];
  return t;
}

ConfusionMatrix build_confusion(const std::vector<int>& true_labels,
                                const std::vector<int>& predicted_labels, int num_classes) {
  if (true_labels.size() != predicted_labels.size()) {
    throw ContractError("build_confusion: " + std::to_string(true_labels.size()) + " true vs " +
                        std::to_string(predicted_labels.size()) + " predicted labels");
  }
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < true_labels.size(); ++i) cm.add(true_labels[i], predicted_labels[i]);
  return cm;
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total == 0) throw ContractError("metrics_from_confusion: empty confusion matrix");
  const int classes = cm.num_classes();

  MetricsReport report;
  report.overall_accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  double prec_sum = 0, rec_sum = 0, f1_sum = 0;
  for (int k = 0; k < classes; ++k) {
    const std::int64_t rs = cm.row_sum(k);
    const std::int64_t cs = cm.col_sum(k);
    const double diag = static_cast<double>(cm.at(k, k));
    const double precision = cs > 0 ? diag / static_cast<double>(cs) : 0.0;
    const double recall = rs > 0 ? diag / static_cast<double>(rs) : 0.0;
    const double f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    prec_sum += precision;
    rec_sum += recall;
    f1_sum += f1;
    report.per_class_accuracy.push_back(recall);
    report.per_class_count.push_back(rs);
  }
  report.macro_precision = prec_sum / classes;
  report.macro_recall = rec_sum / classes;
  report.macro_f1 = f1_sum / classes;
  return report;
}

PcaResult pca_project(const Tensor& vectors, std::int64_t n_components) {
  if (vectors.rank() != 2) throw DimensionError("pca_project: input must be N x D");
  const std::int64_t n = vectors.shape()[0];
  const std::int64_t dim = vectors.shape()[1];
  if (n < 2) throw InsufficientDataError("pca_project: need at least 2 vectors");
  if (n_components < 1 || n_components > dim) {
    throw DimensionError("pca_project: n_components " + std::to_string(n_components) +
                         " out of range for dimension " + std::to_string(dim));
  }

  Eigen::MatrixXd x(n, dim);
  for (std::int64_t r = 0; r < n; ++r) {
    for (std::int64_t c = 0; c < dim; ++c) x(r, c) = vectors.at(r, c);
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw ContractError("pca_project: eigendecomposition failed");
  // Eigen returns ascending eigenvalues; take them in descending order.
  const Eigen::VectorXd values = solver.eigenvalues();
  const Eigen::MatrixXd vecs = solver.eigenvectors();

  double total_var = 0;
  for (std::int64_t i = 0; i < dim; ++i) total_var += std::max(values[i], 0.0);

  Eigen::MatrixXd components(dim, n_components);
  PcaResult result;
  for (std::int64_t k = 0; k < n_components; ++k) {
    Eigen::VectorXd comp = vecs.col(dim - 1 - k);
    // Fix the sign: largest-magnitude entry becomes positive.
    std::int64_t arg = 0;
    for (std::int64_t i = 1; i < dim; ++i) {
      if (std::abs(comp[i]) > std::abs(comp[arg])) arg = i;
    }
    if (comp[arg] < 0) comp = -comp;
    components.col(k) = comp;
    const double lambda = std::max(values[dim - 1 - k], 0.0);
    result.explained_variance_ratio.push_back(total_var > 0 ? lambda / total_var : 0.0);
  }

  const Eigen::MatrixXd coords = centered * components;
  Tensor::Array coord_data(n * n_components);
  for (std::int64_t r = 0; r < n; ++r) {
    for (std::int64_t c = 0; c < n_components; ++c) coord_data[r * n_components + c] = coords(r, c);
  }
  result.coordinates = Tensor({n, n_components}, std::move(coord_data));

  Tensor::Array comp_data(dim * n_components);
  for (std::int64_t r = 0; r < dim; ++r) {
    for (std::int64_t c = 0; c < n_components; ++c) comp_data[r * n_components + c] = components(r, c);
  }
  result.components = Tensor({dim, n_components}, std::move(comp_data));

  Tensor::Array mean_data(dim);
  for (std::int64_t c = 0; c < dim; ++c) mean_data[c] = mean[c];
  result.mean = Tensor({dim}, std::move(mean_data));
  return result;
}

namespace {

double percent2(double fraction) { return std::round(fraction * 10000.0) / 100.0; }

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& blob) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

void emit_report(const std::vector<NamedMetrics>& reports, const std::filesystem::path& out_dir) {
  if (reports.empty()) throw ContractError("emit_report: no metrics to report");
  const std::size_t classes = reports.front().metrics.per_class_accuracy.size();
  for (const auto& r : reports) {
    if (r.metrics.per_class_accuracy.size() != classes) {
      throw ContractError("emit_report: class counts differ between configurations");
    }
  }
  std::filesystem::create_directories(out_dir);

  std::string header = "config,overall_acc,overall_prec,overall_rec,overall_f1";
  for (std::size_t k = 0; k < classes; ++k) header += ",class" + std::to_string(k) + "_acc";

  std::string csv = header + "\n";
  nlohmann::json json_rows = nlohmann::json::array();
  for (const auto& r : reports) {
    const auto& m = r.metrics;
    csv += r.config + "," + fixed2(percent2(m.overall_accuracy)) + "," +
           fixed2(percent2(m.macro_precision)) + "," + fixed2(percent2(m.macro_recall)) + "," +
           fixed2(percent2(m.macro_f1));
    nlohmann::json row;
    row["config"] = r.config;
    row["overall_acc"] = percent2(m.overall_accuracy);
    row["overall_prec"] = percent2(m.macro_precision);
    row["overall_rec"] = percent2(m.macro_recall);
    row["overall_f1"] = percent2(m.macro_f1);
    for (std::size_t k = 0; k < classes; ++k) {
      csv += "," + fixed2(percent2(m.per_class_accuracy[k]));
      row["class" + std::to_string(k) + "_acc"] = percent2(m.per_class_accuracy[k]);
    }
    csv += "\n";
    json_rows.push_back(std::move(row));
  }
  write_text(out_dir / "metrics.csv", csv);
  write_text(out_dir / "metrics.json", json_rows.dump(2) + "\n");

  const NamedMetrics* baseline = &reports.front();
  for (const auto& r : reports) {
    if (r.config == "real_noaug") baseline = &r;
  }
  std::string bars = "config,class,accuracy,improvement_vs_baseline\n";
  for (const auto& r : reports) {
    for (std::size_t k = 0; k < classes; ++k) {
      const double acc = percent2(r.metrics.per_class_accuracy[k]);
      const double base = percent2(baseline->metrics.per_class_accuracy[k]);
      bars += r.config + "," + std::to_string(k) + "," + fixed2(acc) + "," + fixed2(acc - base) + "\n";
    }
  }
  write_text(out_dir / "class_acc_bars.csv", bars);
}

void write_pca_csv(const std::filesystem::path& file, int class_label, const Tensor& features,
                   const std::vector<Provenance>& provenance) {
  if (features.rank() != 2 ||
      features.shape()[0] != static_cast<std::int64_t>(provenance.size())) {
    throw ContractError("write_pca_csv: provenance tags do not match the feature rows");
  }
  const PcaResult pca = pca_project(features, 2);
  std::string csv = "class,provenance,pc1,pc2\n";
  char buf[96];
  for (std::int64_t r = 0; r < features.shape()[0]; ++r) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%.6f,%.6f\n", class_label,
                  to_string(provenance[static_cast<std::size_t>(r)]).c_str(),
                  pca.coordinates.at(r, 0), pca.coordinates.at(r, 1));
    csv += buf;
  }
  write_text(file, csv);
}

}  // namespace latentaug

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace salm::evalviz {

/// K x K counts; rows are true classes, columns predicted (1-based ids map
/// to 0-based indices).
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::vector<size_t>> counts;

  size_t total() const;
  size_t diagonal() const;
  std::vector<size_t> row_sums() const;
};

struct EvalReport {
  std::string method;
  std::string split;
  size_t sample_count = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;          // mean over ALL K classes (absent -> F1 0)
  double macro_f1_present = 0.0;  // mean over classes present in the truths
  std::string macro_f1_convention = "all-classes";
  std::map<int, double> per_class_f1;
  ConfusionMatrix confusion;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

/// Accuracy, per-class F1 (0 when precision+recall is 0) and macro F1 over
/// all K classes. Labels must lie in 1..K.
EvalReport compute_metrics(const std::vector<int>& truths, const std::vector<int>& predictions,
                           int num_classes);

void write_report_json(const EvalReport& report, const std::filesystem::path& path);
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);

/// Signed relative improvement of `score` over `baseline`, formatted as the
/// comparison tables print it: "+4%" for (0.681, 0.657).
std::string format_relative_improvement(double score, double baseline);

/// Comparison table: one row per method (accuracy, macro F1) plus a
/// relative-improvement row of the designated method against the best other
/// method per metric. All reports must share a split.
void compare_methods(const std::vector<EvalReport>& reports, const std::string& designated,
                     const std::filesystem::path& out_csv);

/// Per-class F1 table across methods (rows = classes, columns = methods);
/// zero F1 prints as a dash.
void write_per_class_table(const std::vector<EvalReport>& reports,
                           const std::map<int, std::string>& class_names,
                           const std::filesystem::path& out_csv);

/// Rows of an embedding CSV as written by retrieve::export_embeddings.
struct EmbeddingRow {
  std::string id;
  int class_id = 0;
  std::string kind;
};

struct EmbeddingFile {
  std::vector<EmbeddingRow> rows;
  Eigen::MatrixXd vectors;  // dim x n, one column per row
};

EmbeddingFile read_embedding_csv(const std::filesystem::path& path);

/// Mean-centered projection onto the top-2 principal components, written as
/// CSV id,class,kind,x,y. Sign convention: the largest-magnitude coordinate
/// of each component is positive. Fewer than 3 vectors or effective rank
/// below 2 is an error.
void pca_project(const EmbeddingFile& embeddings, const std::filesystem::path& out_csv);
void pca_project_file(const std::filesystem::path& embedding_csv,
                      const std::filesystem::path& out_csv);

/// The projection itself (2 x n), exposed for tests.
Eigen::MatrixXd pca_project_matrix(const Eigen::MatrixXd& vectors);

}  // namespace salm::evalviz

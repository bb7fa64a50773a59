#include "salm/evalviz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "salm/errors.hpp"

namespace salm::evalviz {

size_t ConfusionMatrix::total() const {
  size_t n = 0;
  for (const auto& row : counts) {
    for (size_t c : row) n += c;
  }
  return n;
}

size_t ConfusionMatrix::diagonal() const {
  size_t n = 0;
  for (size_t i = 0; i < counts.size(); ++i) n += counts[i][i];
  return n;
}

std::vector<size_t> ConfusionMatrix::row_sums() const {
  std::vector<size_t> sums(counts.size(), 0);
  for (size_t i = 0; i < counts.size(); ++i) {
    for (size_t c : counts[i]) sums[i] += c;
  }
  return sums;
}

EvalReport compute_metrics(const std::vector<int>& truths, const std::vector<int>& predictions,
                           int num_classes) {
  if (truths.empty()) throw ValidationError("compute_metrics: empty label lists");
  if (truths.size() != predictions.size()) {
    throw ValidationError("compute_metrics: truth/prediction length mismatch");
  }
  if (num_classes < 1) throw ValidationError("compute_metrics: num_classes must be >= 1");

  EvalReport report;
  report.sample_count = truths.size();
  report.confusion.num_classes = num_classes;
  report.confusion.counts.assign(static_cast<size_t>(num_classes),
                                 std::vector<size_t>(static_cast<size_t>(num_classes), 0));

  for (size_t i = 0; i < truths.size(); ++i) {
    const int t = truths[i];
    const int p = predictions[i];
    if (t < 1 || t > num_classes) {
      throw ValidationError("compute_metrics: truth label " + std::to_string(t) +
                            " outside 1.." + std::to_string(num_classes));
    }
    if (p < 1 || p > num_classes) {
      throw ValidationError("compute_metrics: predicted label " + std::to_string(p) +
                            " outside 1.." + std::to_string(num_classes));
    }
    report.confusion.counts[static_cast<size_t>(t - 1)][static_cast<size_t>(p - 1)]++;
  }

  report.accuracy = static_cast<double>(report.confusion.diagonal()) /
                    static_cast<double>(report.sample_count);

  double f1_sum_all = 0.0;
  double f1_sum_present = 0.0;
  size_t present = 0;
  for (int c = 1; c <= num_classes; ++c) {
    const auto ci = static_cast<size_t>(c - 1);
    size_t tp = report.confusion.counts[ci][ci];
    size_t fn = 0, fp = 0;
    for (size_t j = 0; j < static_cast<size_t>(num_classes); ++j) {
      if (j != ci) {
        fn += report.confusion.counts[ci][j];
        fp += report.confusion.counts[j][ci];
      }
    }
    // F1 = 2P R / (P + R) = 2tp / (2tp + fp + fn); 0 when the denominator is 0
    const size_t denom = 2 * tp + fp + fn;
    const double f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) /
                                             static_cast<double>(denom);
    report.per_class_f1[c] = f1;
    f1_sum_all += f1;
    if (tp + fn > 0) {  // class appears in the truths
      f1_sum_present += f1;
      ++present;
    }
  }
  report.macro_f1 = f1_sum_all / static_cast<double>(num_classes);
  report.macro_f1_present = present == 0 ? 0.0 : f1_sum_present / static_cast<double>(present);
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json per_class;
  for (const auto& [c, f1] : per_class_f1) per_class[std::to_string(c)] = f1;
  return nlohmann::json{{"method", method},
                        {"split", split},
                        {"sample_count", sample_count},
                        {"accuracy", accuracy},
                        {"macro_f1", macro_f1},
                        {"macro_f1_present", macro_f1_present},
                        {"macro_f1_convention", macro_f1_convention},
                        {"per_class_f1", per_class},
                        {"num_classes", confusion.num_classes},
                        {"confusion", confusion.counts}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  r.method = j.at("method").get<std::string>();
  r.split = j.at("split").get<std::string>();
  r.sample_count = j.at("sample_count").get<size_t>();
  r.accuracy = j.at("accuracy").get<double>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  r.macro_f1_present = j.value("macro_f1_present", 0.0);
  r.macro_f1_convention = j.value("macro_f1_convention", "all-classes");
  for (const auto& [key, value] : j.at("per_class_f1").items()) {
    r.per_class_f1[std::stoi(key)] = value.get<double>();
  }
  r.confusion.num_classes = j.at("num_classes").get<int>();
  r.confusion.counts = j.at("confusion").get<std::vector<std::vector<size_t>>>();
  return r;
}

void write_report_json(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << report.to_json().dump(2) << "\n";
}

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };
  out << "metric,value\n";
  out << "method," << report.method << "\n";
  out << "split," << report.split << "\n";
  out << "sample_count," << report.sample_count << "\n";
  out << "accuracy," << num(report.accuracy) << "\n";
  out << "macro_f1," << num(report.macro_f1) << "\n";
  out << "macro_f1_present," << num(report.macro_f1_present) << "\n";
  for (const auto& [c, f1] : report.per_class_f1) {
    out << "f1_class_" << c << "," << num(f1) << "\n";
  }
}

std::string format_relative_improvement(double score, double baseline) {
  if (baseline == 0.0) return "n/a";
  const double pct = 100.0 * (score - baseline) / baseline;
  const auto rounded = static_cast<long long>(std::llround(pct));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+lld%%", rounded);
  return buf;
}

void compare_methods(const std::vector<EvalReport>& reports, const std::string& designated,
                     const std::filesystem::path& out_csv) {
  if (reports.size() < 2) throw ValidationError("compare_methods: need at least 2 reports");
  const std::string& split = reports.front().split;
  const EvalReport* chosen = nullptr;
  for (const auto& r : reports) {
    if (r.split != split) {
      throw ValidationError("compare_methods: mismatched splits ('" + split + "' vs '" +
                            r.split + "')");
    }
    if (r.method == designated) chosen = &r;
  }
  if (chosen == nullptr) {
    throw ValidationError("compare_methods: no report from method '" + designated + "'");
  }

  // best OTHER method per metric
  double best_acc = 0.0, best_f1 = 0.0;
  for (const auto& r : reports) {
    if (r.method == designated) continue;
    best_acc = std::max(best_acc, r.accuracy);
    best_f1 = std::max(best_f1, r.macro_f1);
  }

  std::ofstream out(out_csv, std::ios::binary);
  if (!out) throw IoError("cannot write '" + out_csv.string() + "'");
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };
  out << "method,accuracy,macro_f1\n";
  for (const auto& r : reports) {
    out << r.method << "," << num(r.accuracy) << "," << num(r.macro_f1) << "\n";
  }
  out << "relative_improvement," << format_relative_improvement(chosen->accuracy, best_acc)
      << "," << format_relative_improvement(chosen->macro_f1, best_f1) << "\n";
}

void write_per_class_table(const std::vector<EvalReport>& reports,
                           const std::map<int, std::string>& class_names,
                           const std::filesystem::path& out_csv) {
  if (reports.empty()) throw ValidationError("write_per_class_table: no reports");
  std::ofstream out(out_csv, std::ios::binary);
  if (!out) throw IoError("cannot write '" + out_csv.string() + "'");
  out << "class";
  for (const auto& r : reports) out << "," << r.method;
  out << "\n";
  char buf[64];
  for (const auto& [id, name] : class_names) {
    out << name;
    for (const auto& r : reports) {
      auto it = r.per_class_f1.find(id);
      const double f1 = it == r.per_class_f1.end() ? 0.0 : it->second;
      if (f1 == 0.0) {
        out << ",-";  // dash marks zero F1
      } else {
        std::snprintf(buf, sizeof(buf), "%.6f", f1);
        out << "," << buf;
      }
    }
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// PCA projection

EmbeddingFile read_embedding_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string header;
  if (!std::getline(in, header)) throw ParseError(path.string() + ": empty embedding file");

  size_t dim = 0;
  {
    std::stringstream ss(header);
    std::string col;
    size_t cols = 0;
    while (std::getline(ss, col, ',')) ++cols;
    if (cols < 4) throw ParseError(path.string() + ": malformed embedding header");
    dim = cols - 3;
  }

  EmbeddingFile file;
  std::vector<std::vector<double>> vecs;
  std::string line;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    EmbeddingRow row;
    if (!std::getline(ss, row.id, ',')) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    std::getline(ss, field, ',');
    row.class_id = std::stoi(field);
    std::getline(ss, row.kind, ',');
    std::vector<double> v;
    v.reserve(dim);
    while (std::getline(ss, field, ',')) v.push_back(std::stod(field));
    if (v.size() != dim) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(dim) + " floats, got " + std::to_string(v.size()));
    }
    file.rows.push_back(std::move(row));
    vecs.push_back(std::move(v));
  }

  file.vectors.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(vecs.size()));
  for (size_t j = 0; j < vecs.size(); ++j) {
    for (size_t i = 0; i < dim; ++i) {
      file.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = vecs[j][i];
    }
  }
  return file;
}

Eigen::MatrixXd pca_project_matrix(const Eigen::MatrixXd& vectors) {
  const Eigen::Index n = vectors.cols();
  if (n < 3) throw ValidationError("pca_project: need at least 3 vectors");

  const Eigen::VectorXd mean = vectors.rowwise().mean();
  const Eigen::MatrixXd centered = vectors.colwise() - mean;
  const Eigen::MatrixXd cov =
      centered * centered.transpose() / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("pca_project: eigensolver failed");
  // eigenvalues ascend; the top two components are the last two columns
  const Eigen::Index d = cov.rows();
  const double lambda1 = solver.eigenvalues()(d - 1);
  const double lambda2 = solver.eigenvalues()(d - 2);
  if (!(lambda2 > lambda1 * 1e-12) || lambda1 <= 0.0) {
    throw ValidationError("pca_project: data has rank below 2");
  }

  Eigen::MatrixXd components(d, 2);
  components.col(0) = solver.eigenvectors().col(d - 1);
  components.col(1) = solver.eigenvectors().col(d - 2);
  // Deterministic sign: flip each component so its largest-magnitude
  // coordinate is positive.
  for (int c = 0; c < 2; ++c) {
    Eigen::Index arg = 0;
    components.col(c).cwiseAbs().maxCoeff(&arg);
    if (components(arg, c) < 0.0) components.col(c) = -components.col(c);
  }
  return components.transpose() * centered;  // 2 x n
}

void pca_project(const EmbeddingFile& embeddings, const std::filesystem::path& out_csv) {
  const Eigen::MatrixXd proj = pca_project_matrix(embeddings.vectors);
  std::ofstream out(out_csv, std::ios::binary);
  if (!out) throw IoError("cannot write '" + out_csv.string() + "'");
  out << "id,class,kind,x,y\n";
  char buf[32];
  for (size_t i = 0; i < embeddings.rows.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    out << embeddings.rows[i].id << "," << embeddings.rows[i].class_id << ","
        << embeddings.rows[i].kind;
    std::snprintf(buf, sizeof(buf), "%.17g", proj(0, j));
    out << "," << buf;
    std::snprintf(buf, sizeof(buf), "%.17g", proj(1, j));
    out << "," << buf << "\n";
  }
}

void pca_project_file(const std::filesystem::path& embedding_csv,
                      const std::filesystem::path& out_csv) {
  pca_project(read_embedding_csv(embedding_csv), out_csv);
}

}  // namespace salm::evalviz

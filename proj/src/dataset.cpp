#include "gradband/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "gradband/rng.hpp"

namespace gradband {

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? std::string() : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& cell, std::size_t line_no) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != cell.size() || !std::isfinite(value)) {
    throw ConfigError("dataset line " + std::to_string(line_no) + ": not a finite number: '" + cell + "'");
  }
  return value;
}

}  // namespace

Dataset parse_dataset_csv(const std::string& text, const DatasetOptions& options) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) header = split_row(line);
  }
  if (header.empty()) throw ConfigError("dataset: missing header row");

  Index label_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "label") label_col = static_cast<Index>(c);
  }
  if (label_col < 0) throw ConfigError("dataset: header has no 'label' column");
  const Index num_features = static_cast<Index>(header.size()) - 1;
  if (num_features < 1) throw ConfigError("dataset: no feature columns");

  std::vector<double> values;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_row(line);
    if (cells.size() != header.size()) {
      throw ConfigError("dataset line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " columns, got " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const double v = parse_number(cells[c], line_no);
      if (static_cast<Index>(c) == label_col) {
        if (v != std::floor(v) || v < 0) {
          throw ConfigError("dataset line " + std::to_string(line_no) + ": label must be a non-negative integer");
        }
        labels.push_back(static_cast<int>(v));
      } else {
        values.push_back(v);
      }
    }
  }
  if (labels.empty()) throw ConfigError("dataset: no data rows");

  Dataset data;
  const Index rows = static_cast<Index>(labels.size());
  data.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, num_features);
  data.labels = Eigen::Map<const VectorXi>(labels.data(), rows);
  data.num_classes = data.labels.maxCoeff() + 1;

  if (options.standardize) {
    const Eigen::RowVectorXd mean = data.features.colwise().mean();
    data.features.rowwise() -= mean;
    const Eigen::RowVectorXd sd = (data.features.colwise().squaredNorm() / static_cast<double>(rows)).cwiseSqrt();
    for (Index c = 0; c < num_features; ++c) {
      if (sd(c) > 0.0) data.features.col(c) /= sd(c);
    }
  }
  if (options.append_bias) {
    data.features.conservativeResize(Eigen::NoChange, num_features + 1);
    data.features.col(num_features).setOnes();
  }
  return data;
}

Dataset load_dataset_csv(const std::string& path, const DatasetOptions& options) {
  std::ifstream file(path);
  if (!file) throw ConfigError("dataset: cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << file.rdbuf();
  return parse_dataset_csv(buffer.str(), options);
}

Dataset synthetic_multiclass(int num_classes, int dim, Index rows, double spread, std::uint64_t seed) {
  if (num_classes < 2 || dim < 1 || rows < num_classes) {
    throw ConfigError("synthetic_multiclass: need >= 2 classes, d >= 1 and one row per class");
  }
  Engine rng = make_stream(seed, Lane::test, 0, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd centers(num_classes, dim);
  for (Index k = 0; k < centers.size(); ++k) centers.data()[k] = normal(rng);

  Dataset data;
  data.num_classes = num_classes;
  data.features.resize(rows, dim);
  data.labels.resize(rows);
  for (Index r = 0; r < rows; ++r) {
    const int label = static_cast<int>(r % num_classes);
    data.labels(r) = label;
    for (Index c = 0; c < dim; ++c) data.features(r, c) = centers(label, c) + spread * normal(rng);
  }
  return data;
}

}  // namespace gradband

#include "gradband/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

namespace gradband {

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_trace_csv(std::ostream& os, const TrainTrace& trace) {
  const Index p = trace.rows.empty() ? 0 : trace.rows.front().params.size();
  os << "iteration";
  for (Index i = 0; i < p; ++i) os << ",param_" << i;
  os << ",grad_norm,spread,eval_regret_mean,eval_regret_stderr\n";
  for (const TraceRow& row : trace.rows) {
    os << row.iteration;
    for (Index i = 0; i < p; ++i) os << ',' << format_number(row.params(i));
    os << ',' << format_number(row.grad_norm) << ',' << format_number(row.spread) << ','
       << format_number(row.eval_regret_mean) << ',' << format_number(row.eval_regret_stderr) << '\n';
  }
}

void write_eval_csv(std::ostream& os, const std::vector<EvalReport>& reports) {
  os << "policy,prior,n,instances,regret_mean,regret_stderr\n";
  for (const EvalReport& r : reports) {
    os << r.policy << ',' << r.prior << ',' << r.horizon << ',' << r.num_instances << ',' << format_number(r.regret_mean)
       << ',' << format_number(r.regret_stderr) << '\n';
  }
}

void write_matrix_csv(std::ostream& os, const std::vector<std::string>& row_labels,
                      const std::vector<std::string>& col_labels, const MatrixXd& values) {
  os << "row";
  for (const std::string& c : col_labels) os << ',' << c;
  os << '\n';
  for (Index i = 0; i < values.rows(); ++i) {
    os << row_labels[static_cast<std::size_t>(i)];
    for (Index j = 0; j < values.cols(); ++j) os << ',' << format_number(values(i, j));
    os << '\n';
  }
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json doc;
  doc["policy"] = report.policy;
  doc["prior"] = report.prior;
  doc["n"] = report.horizon;
  doc["num_instances"] = report.num_instances;
  doc["seed"] = report.seed;
  doc["regret_mean"] = report.regret_mean;
  doc["regret_stderr"] = report.regret_stderr;
  doc["reward_mean"] = report.reward_mean;
  doc["curve"] = std::vector<double>(report.curve.data(), report.curve.data() + report.curve.size());
  return doc;
}

nlohmann::json params_to_json(const std::string& policy, const VectorXd& params, Index dim) {
  nlohmann::json doc;
  doc["policy"] = policy;
  doc["params"] = std::vector<double>(params.data(), params.data() + params.size());
  if (dim > 0) {
    doc["layout"] = "column_major";
    doc["rows"] = dim;
    doc["cols"] = dim;
  }
  return doc;
}

VectorXd params_from_json(const nlohmann::json& doc) {
  if (!doc.contains("params") || !doc["params"].is_array()) throw ConfigError("params file lacks a 'params' array");
  const auto values = doc["params"].get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(values.data(), static_cast<Index>(values.size()));
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot open '" + path + "' for writing");
  os << text;
  if (!os) throw InputError("failed writing '" + path + "'");
}

}  // namespace gradband

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "gradband/eval.hpp"
#include "gradband/gradband.hpp"

namespace gradband {

/// Shortest round-trip decimal form; empty for NaN.
std::string format_number(double v);

/// Columns: iteration, param_0..param_{p-1}, grad_norm, spread,
/// eval_regret_mean, eval_regret_stderr.
void write_trace_csv(std::ostream& os, const TrainTrace& trace);

/// Columns: policy, prior, n, instances, regret_mean, regret_stderr.
void write_eval_csv(std::ostream& os, const std::vector<EvalReport>& reports);

/// Square matrix with a header row of column labels and a leading label column.
void write_matrix_csv(std::ostream& os, const std::vector<std::string>& row_labels,
                      const std::vector<std::string>& col_labels, const MatrixXd& values);

nlohmann::json to_json(const EvalReport& report);
nlohmann::json params_to_json(const std::string& policy, const VectorXd& params, Index dim = 0);

/// Reads the "params" array written by params_to_json.
VectorXd params_from_json(const nlohmann::json& doc);

/// Writes `text` to `path`, throwing InputError on failure.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace gradband

#pragma once

#include <string>

#include "gradband/core.hpp"

namespace gradband {

/// Labeled feature matrix backing a multiclass-classification bandit.
struct Dataset {
  MatrixXd features;  // rows x d
  VectorXi labels;    // rows, each in [0, num_classes)
  int num_classes = 0;

  Index rows() const { return features.rows(); }
  Index dim() const { return features.cols(); }
};

struct DatasetOptions {
  bool standardize = true;
  bool append_bias = false;
};

/// Reads a CSV with a header row, an integer `label` column and numeric
/// feature columns. Standardization uses statistics over the whole file;
/// constant columns are only centered.
Dataset load_dataset_csv(const std::string& path, const DatasetOptions& options = {});

/// Same as load_dataset_csv but from in-memory CSV text.
Dataset parse_dataset_csv(const std::string& text, const DatasetOptions& options = {});

/// Gaussian class clusters: label k has features N(centers.row(k), spread^2 I).
Dataset synthetic_multiclass(int num_classes, int dim, Index rows, double spread,
                             std::uint64_t seed);

}  // namespace gradband

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pmst/rng.hpp"

namespace pmst::forest {

/// A feature row; binds to rows of column-major matrices without copying.
using RowRef = Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

struct ForestConfig {
  int n_tree = 500;
  int mtry = 0;  // 0: ceil(p / 3)
  int min_leaf = 5;
  bool bootstrap = true;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  /// mtry resolved for p features. Throws InvalidArgument on invalid settings.
  [[nodiscard]] int resolved_mtry(int p) const;
};

struct Node {
  int var = -1;  // -1 for a leaf
  double value = 0.0;  // split threshold (go left when x <= value) or leaf mean
  int left = -1;
  int right = -1;
  int count = 0;  // training rows reaching the node, bootstrap copies included
};

struct RegressionTree {
  std::vector<Node> nodes;  // nodes[0] is the root
  std::vector<std::size_t> oob_indices;  // rows never drawn into the bootstrap sample

  [[nodiscard]] double predict(RowRef x) const;
  [[nodiscard]] int depth() const;
  [[nodiscard]] std::size_t num_leaves() const;
};

/// Greedy CART on the rows listed in `sample` (repeats allowed). At each node
/// mtry columns are drawn without replacement; the split minimising the
/// children's SSE over midpoints of consecutive distinct values wins, ties to
/// the lowest column and then the lowest threshold. Throws EmptyInput.
RegressionTree fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::span<const std::size_t> sample,
                        const ForestConfig& cfg, CounterRng& rng);
/// All rows once.
RegressionTree fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestConfig& cfg, CounterRng& rng);

struct Forest {
  std::vector<RegressionTree> trees;
  std::vector<std::string> features;
  double oob_mse = 0.0;  // NaN when no row is out of bag
  Eigen::VectorXd oob_prediction;  // NaN for rows in every bootstrap sample
  std::size_t num_rows = 0;

  /// Mean of the tree predictions.
  [[nodiscard]] double predict(RowRef x) const;
  [[nodiscard]] Eigen::VectorXd predict_rows(const Eigen::MatrixXd& x) const;
};

/// Tree k is grown from the stream CounterRng(seed, k), so the forest does not
/// depend on the thread count. Throws EmptyInput, InvalidArgument.
Forest fit_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestConfig& cfg,
                  std::vector<std::string> features = {});

nlohmann::json to_json(const Forest& f);
Forest forest_from_json(const nlohmann::json& j);

}  // namespace pmst::forest

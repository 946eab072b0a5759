#include "pmst/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pmst/data.hpp"
#include "pmst/error.hpp"
#include "pmst/parallel.hpp"

namespace pmst::forest {

using Index = Eigen::Index;

int ForestConfig::resolved_mtry(int p) const {
  if (n_tree < 1) throw Error(ErrorCode::InvalidArgument, "n_tree must be >= 1");
  if (min_leaf < 1) throw Error(ErrorCode::InvalidArgument, "min_leaf must be >= 1");
  if (p < 1) throw Error(ErrorCode::EmptyInput, "no predictors");
  const int m = mtry > 0 ? mtry : (p + 2) / 3;
  if (m > p) throw Error(ErrorCode::InvalidArgument, "mtry must be <= number of predictors");
  return m;
}

double RegressionTree::predict(RowRef x) const {
  int k = 0;
  while (nodes[static_cast<std::size_t>(k)].var >= 0) {
    const Node& n = nodes[static_cast<std::size_t>(k)];
    k = x(n.var) <= n.value ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(k)].value;
}

int RegressionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    best = std::max(best, d[k]);
    if (nodes[k].var >= 0) {
      d[static_cast<std::size_t>(nodes[k].left)] = d[k] + 1;
      d[static_cast<std::size_t>(nodes[k].right)] = d[k] + 1;
    }
  }
  return best;
}

std::size_t RegressionTree::num_leaves() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.var < 0; }));
}

namespace {

struct Split {
  int var = -1;
  double value = 0.0;
  double score = 0.0;  // sL^2/nL + sR^2/nR, larger is better
};

class Builder {
 public:
  Builder(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestConfig& cfg, int mtry, CounterRng& rng)
      : x_(x), y_(y), cfg_(cfg), mtry_(mtry), rng_(rng), columns_(static_cast<std::size_t>(x.cols())) {}

  RegressionTree build(std::vector<std::size_t> rows) {
    RegressionTree tree;
    tree.nodes.emplace_back();
    struct Task {
      int node;
      std::size_t begin, end;
    };
    rows_ = std::move(rows);
    std::vector<Task> stack = {{0, 0, rows_.size()}};
    while (!stack.empty()) {
      const Task task = stack.back();
      stack.pop_back();
      const std::size_t m = task.end - task.begin;
      double sum = 0.0, sumsq = 0.0;
      for (std::size_t a = task.begin; a < task.end; ++a) {
        const double v = y_(static_cast<Index>(rows_[a]));
        sum += v;
        sumsq += v * v;
      }
      Node node;
      node.count = static_cast<int>(m);
      node.value = sum / static_cast<double>(m);
      const Split split = m >= 2 * static_cast<std::size_t>(cfg_.min_leaf) ? best_split(task.begin, task.end, sum, sumsq)
                                                                          : Split{};
      if (split.var < 0) {
        tree.nodes[static_cast<std::size_t>(task.node)] = node;
        continue;
      }
      const auto mid = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(task.begin),
                                             rows_.begin() + static_cast<std::ptrdiff_t>(task.end), [&](std::size_t r) {
                                               return x_(static_cast<Index>(r), split.var) <= split.value;
                                             });
      const auto cut = static_cast<std::size_t>(mid - rows_.begin());
      node.var = split.var;
      node.value = split.value;
      node.left = static_cast<int>(tree.nodes.size());
      node.right = node.left + 1;
      tree.nodes[static_cast<std::size_t>(task.node)] = node;
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      stack.push_back({node.right, cut, task.end});
      stack.push_back({node.left, task.begin, cut});
    }
    return tree;
  }

 private:
  Split best_split(std::size_t begin, std::size_t end, double sum, double sumsq) {
    const std::size_t m = end - begin;
    const double n = static_cast<double>(m);
    const double parent = sum * sum / n;
    // Node SSE below rounding level: nothing to gain.
    if (sumsq - parent <= 1e-12 * sumsq) return {};
    // Partial Fisher-Yates draw of mtry columns, then scanned in index order.
    std::iota(columns_.begin(), columns_.end(), 0);
    for (int k = 0; k < mtry_; ++k) {
      const auto j = static_cast<std::size_t>(k) + static_cast<std::size_t>(rng_.below(columns_.size() - static_cast<std::size_t>(k)));
      std::swap(columns_[static_cast<std::size_t>(k)], columns_[j]);
    }
    std::sort(columns_.begin(), columns_.begin() + mtry_);

    Split best;
    best.score = parent;
    const std::size_t leaf = static_cast<std::size_t>(cfg_.min_leaf);
    buffer_.resize(m);
    for (int c = 0; c < mtry_; ++c) {
      const int var = columns_[static_cast<std::size_t>(c)];
      for (std::size_t a = 0; a < m; ++a) {
        const auto r = static_cast<Index>(rows_[begin + a]);
        buffer_[a] = {x_(r, var), y_(r)};
      }
      std::sort(buffer_.begin(), buffer_.end(), [](const auto& p, const auto& q) { return p.first < q.first; });
      if (buffer_.front().first == buffer_.back().first) continue;
      double left = 0.0;
      for (std::size_t a = 0; a + 1 < m; ++a) {
        left += buffer_[a].second;
        if (buffer_[a].first == buffer_[a + 1].first) continue;
        const std::size_t nl = a + 1, nr = m - nl;
        if (nl < leaf) continue;
        if (nr < leaf) break;
        const double right = sum - left;
        const double score = left * left / static_cast<double>(nl) + right * right / static_cast<double>(nr);
        if (score > best.score) {
          best.var = var;
          best.value = 0.5 * (buffer_[a].first + buffer_[a + 1].first);
          // Guard against midpoints that round onto the upper value.
          if (!(best.value < buffer_[a + 1].first)) best.value = buffer_[a].first;
          best.score = score;
        }
      }
    }
    // A split must reduce the SSE by more than rounding noise.
    if (best.var >= 0 && best.score - parent <= 1e-12 * sumsq) return {};
    return best;
  }

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& y_;
  const ForestConfig& cfg_;
  int mtry_;
  CounterRng& rng_;
  std::vector<int> columns_;
  std::vector<std::size_t> rows_;
  std::vector<std::pair<double, double>> buffer_;
};

void check_input(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() != y.size()) throw Error(ErrorCode::LengthMismatch, "X rows must equal length of y");
  if (y.size() == 0 || x.cols() == 0) throw Error(ErrorCode::EmptyInput, "no training rows");
  if (!x.allFinite() || !y.allFinite()) throw Error(ErrorCode::NonFiniteInput, "forest inputs must be finite");
}

}  // namespace

RegressionTree fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::span<const std::size_t> sample,
                        const ForestConfig& cfg, CounterRng& rng) {
  check_input(x, y);
  const int mtry = cfg.resolved_mtry(static_cast<int>(x.cols()));
  if (sample.empty()) throw Error(ErrorCode::EmptyInput, "empty sample");
  Builder b(x, y, cfg, mtry, rng);
  return b.build(std::vector<std::size_t>(sample.begin(), sample.end()));
}

RegressionTree fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestConfig& cfg, CounterRng& rng) {
  std::vector<std::size_t> all(static_cast<std::size_t>(y.size()));
  std::iota(all.begin(), all.end(), 0);
  return fit_tree(x, y, all, cfg, rng);
}

double Forest::predict(RowRef x) const {
  double s = 0.0;
  for (const auto& t : trees) s += t.predict(x);
  return s / static_cast<double>(trees.size());
}

Eigen::VectorXd Forest::predict_rows(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out(x.rows());
  for (Index r = 0; r < x.rows(); ++r) out(r) = predict(x.row(r));
  return out;
}

Forest fit_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestConfig& cfg,
                  std::vector<std::string> features) {
  check_input(x, y);
  (void)cfg.resolved_mtry(static_cast<int>(x.cols()));
  const auto n = static_cast<std::size_t>(y.size());
  if (n < 2 * static_cast<std::size_t>(cfg.min_leaf))
    throw Error(ErrorCode::EmptyInput, "fewer than 2 * min_leaf training rows");
  Forest f;
  f.features = std::move(features);
  f.num_rows = n;
  f.trees.resize(static_cast<std::size_t>(cfg.n_tree));
  parallel_for(f.trees.size(), cfg.threads, [&](std::size_t k) {
    CounterRng rng(cfg.seed, k);
    std::vector<std::size_t> sample(n);
    std::vector<char> drawn(n, 0);
    if (cfg.bootstrap) {
      for (auto& s : sample) {
        s = static_cast<std::size_t>(rng.below(n));
        drawn[s] = 1;
      }
      std::sort(sample.begin(), sample.end());
    } else {
      std::iota(sample.begin(), sample.end(), 0);
      std::fill(drawn.begin(), drawn.end(), 1);
    }
    RegressionTree tree = fit_tree(x, y, sample, cfg, rng);
    for (std::size_t r = 0; r < n; ++r)
      if (!drawn[r]) tree.oob_indices.push_back(r);
    f.trees[k] = std::move(tree);
  });

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Index>(n));
  Eigen::VectorXi count = Eigen::VectorXi::Zero(static_cast<Index>(n));
  for (const auto& t : f.trees)
    for (std::size_t r : t.oob_indices) {
      sum(static_cast<Index>(r)) += t.predict(x.row(static_cast<Index>(r)));
      ++count(static_cast<Index>(r));
    }
  f.oob_prediction = Eigen::VectorXd::Constant(static_cast<Index>(n), kNaN);
  double sse = 0.0;
  std::size_t used = 0;
  for (Index r = 0; r < static_cast<Index>(n); ++r) {
    if (count(r) == 0) continue;
    f.oob_prediction(r) = sum(r) / count(r);
    const double e = y(r) - f.oob_prediction(r);
    sse += e * e;
    ++used;
  }
  f.oob_mse = used > 0 ? sse / static_cast<double>(used) : kNaN;
  return f;
}

nlohmann::json to_json(const Forest& f) {
  // Flat arrays per tree keep the file compact.
  auto trees = nlohmann::json::array();
  for (const auto& t : f.trees) {
    std::vector<int> var, left, right, count;
    std::vector<double> value;
    for (const auto& n : t.nodes) {
      var.push_back(n.var);
      value.push_back(n.value);
      left.push_back(n.left);
      right.push_back(n.right);
      count.push_back(n.count);
    }
    trees.push_back(
        {{"var", var}, {"value", value}, {"left", left}, {"right", right}, {"count", count}, {"oob", t.oob_indices}});
  }
  nlohmann::json j = {{"features", f.features}, {"num_rows", f.num_rows}, {"trees", trees}};
  j["oob_mse"] = std::isfinite(f.oob_mse) ? nlohmann::json(f.oob_mse) : nlohmann::json(nullptr);
  return j;
}

Forest forest_from_json(const nlohmann::json& j) {
  Forest f;
  f.features = j.at("features").get<std::vector<std::string>>();
  f.num_rows = j.at("num_rows").get<std::size_t>();
  f.oob_mse = j.at("oob_mse").is_null() ? kNaN : j.at("oob_mse").get<double>();
  for (const auto& t : j.at("trees")) {
    RegressionTree tree;
    const auto var = t.at("var").get<std::vector<int>>();
    const auto value = t.at("value").get<std::vector<double>>();
    const auto left = t.at("left").get<std::vector<int>>();
    const auto right = t.at("right").get<std::vector<int>>();
    const auto count = t.at("count").get<std::vector<int>>();
    for (std::size_t k = 0; k < var.size(); ++k) tree.nodes.push_back({var[k], value[k], left[k], right[k], count[k]});
    tree.oob_indices = t.at("oob").get<std::vector<std::size_t>>();
    f.trees.push_back(std::move(tree));
  }
  if (f.trees.empty()) throw Error(ErrorCode::ParseError, "forest has no trees");
  return f;
}

}  // namespace pmst::forest

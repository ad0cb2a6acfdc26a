#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fdc/dataset.hpp"
#include "fdc/error.hpp"
#include "fdc/predictor.hpp"

namespace fdc {

/// Regression tree node. Leaves have `feature < 0`. Numeric splits send
/// x <= threshold left; categorical splits send levels in `left_levels` left
/// (level indices refer to the tree's schema).
struct CartNode {
  int feature = -1;
  double threshold = 0.0;
  std::vector<std::size_t> left_levels;
  std::size_t left = 0;
  std::size_t right = 0;
  double value = 0.0;      // mean target of the training rows reaching this node
  std::size_t count = 0;   // number of those rows

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const CartNode&, const CartNode&) = default;
};

class CartModel final : public Predictor {
 public:
  /// Nodes in preorder with the root at index 0.
  CartModel(Schema schema, std::vector<CartNode> nodes, int max_depth, std::size_t min_leaf)
      : schema_(std::move(schema)), nodes_(std::move(nodes)), max_depth_(max_depth), min_leaf_(min_leaf) {
    validate();
  }

  const Schema& schema() const override { return schema_; }
  const std::vector<CartNode>& nodes() const noexcept { return nodes_; }
  int max_depth() const noexcept { return max_depth_; }
  std::size_t min_leaf() const noexcept { return min_leaf_; }

  int depth() const { return depth_from(0); }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const CartNode& n) { return n.is_leaf(); }));
  }

  /// Sorted distinct indices of features used by any split.
  std::vector<std::size_t> split_features() const {
    std::set<std::size_t> used;
    for (const auto& n : nodes_) {
      if (!n.is_leaf()) used.insert(static_cast<std::size_t>(n.feature));
    }
    return {used.begin(), used.end()};
  }

  double predict_row(std::span<const double> row) const {
    std::size_t k = 0;
    while (!nodes_[k].is_leaf()) {
      const CartNode& n = nodes_[k];
      const double v = row[static_cast<std::size_t>(n.feature)];
      bool go_left = false;
      if (schema_[static_cast<std::size_t>(n.feature)].kind.is_numeric()) {
        go_left = v <= n.threshold;
      } else {
        const auto level = static_cast<std::size_t>(v);
        go_left = std::find(n.left_levels.begin(), n.left_levels.end(), level) != n.left_levels.end();
      }
      k = go_left ? n.left : n.right;
    }
    return nodes_[k].value;
  }

  friend bool operator==(const CartModel& a, const CartModel& b) {
    return a.schema_ == b.schema_ && a.nodes_ == b.nodes_ && a.max_depth_ == b.max_depth_ && a.min_leaf_ == b.min_leaf_;
  }

 protected:
  std::vector<double> do_predict(const RowBatch& rows) const override {
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = predict_row(rows.row(i));
    return out;
  }

 private:
  int depth_from(std::size_t k) const {
    const CartNode& n = nodes_[k];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_from(n.left), depth_from(n.right));
  }

  void validate() const {
    auto bad = [](const std::string& what) { throw ModelError(ModelErrc::InvariantViolation, what); };
    if (max_depth_ < 0) bad("negative max_depth");
    if (min_leaf_ == 0) bad("min_leaf must be positive");
    if (nodes_.empty()) bad("tree has no nodes");
    // Preorder layout: children follow their parent; every node is reached once.
    std::vector<int> reached(nodes_.size(), 0);
    std::vector<std::pair<std::size_t, int>> stack{{0, 0}};
    reached[0] = 1;
    while (!stack.empty()) {
      const auto [k, depth] = stack.back();
      stack.pop_back();
      const CartNode& n = nodes_[k];
      if (!std::isfinite(n.value)) bad("non-finite node value");
      if (n.is_leaf()) {
        if (n.count < min_leaf_) bad("leaf " + std::to_string(k) + " covers fewer than min_leaf rows");
        continue;
      }
      if (depth + 1 > max_depth_) bad("tree depth exceeds max_depth " + std::to_string(max_depth_));
      if (static_cast<std::size_t>(n.feature) >= schema_.size()) bad("split feature out of range");
      const auto& kind = schema_[static_cast<std::size_t>(n.feature)].kind;
      if (kind.is_numeric() && !std::isfinite(n.threshold)) bad("non-finite threshold");
      if (kind.is_categorical()) {
        if (n.left_levels.empty()) bad("categorical split with empty level set");
        for (std::size_t l : n.left_levels) {
          if (l >= kind.levels.size()) bad("split level out of range");
        }
      }
      for (std::size_t child : {n.left, n.right}) {
        if (child <= k || child >= nodes_.size()) bad("child index out of preorder range");
        if (reached[child]++) bad("node reached twice");
        stack.emplace_back(child, depth + 1);
      }
    }
    if (std::find(reached.begin(), reached.end(), 0) != reached.end()) bad("unreachable node");
  }

  Schema schema_;
  std::vector<CartNode> nodes_;
  int max_depth_;
  std::size_t min_leaf_;
};

namespace cart_detail {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  std::vector<std::size_t> left_levels;
  double gain = 0.0;
};

struct Builder {
  const Dataset& data;
  std::span<const double> y;
  int max_depth;
  std::size_t min_leaf;
  std::vector<CartNode> nodes;

  static double sse(double sum, double sum_sq, double count) {
    return std::max(0.0, sum_sq - sum * sum / count);
  }

  // Scan an ordered sequence of (group key, row) pairs, considering a cut after
  // every position where the key changes. Returns the best gain and cut.
  template <typename Key>
  static std::pair<double, std::size_t> best_cut(const std::vector<std::size_t>& order, Key key,
                                                 std::span<const double> y, std::size_t min_leaf, double parent_sse) {
    const std::size_t m = order.size();
    double total = 0.0, total_sq = 0.0;
    for (std::size_t i : order) {
      total += y[i];
      total_sq += y[i] * y[i];
    }
    double best_gain = 0.0;
    std::size_t best_pos = 0;
    double left = 0.0, left_sq = 0.0;
    for (std::size_t pos = 1; pos < m; ++pos) {
      const double v = y[order[pos - 1]];
      left += v;
      left_sq += v * v;
      if (key(order[pos - 1]) == key(order[pos])) continue;
      if (pos < min_leaf || m - pos < min_leaf) continue;
      const double lc = static_cast<double>(pos);
      const double rc = static_cast<double>(m - pos);
      const double child = sse(left, left_sq, lc) + sse(total - left, total_sq - left_sq, rc);
      const double gain = parent_sse - child;
      if (gain > best_gain * (1.0 + 1e-12) + 1e-300) {
        best_gain = gain;
        best_pos = pos;
      }
    }
    return {best_gain, best_pos};
  }

  Split find_split(const std::vector<std::size_t>& rows, double parent_sse) const {
    Split best;
    for (std::size_t j = 0; j < data.features(); ++j) {
      const auto col = data.column(j);
      std::vector<std::size_t> order = rows;
      Split candidate;
      candidate.feature = static_cast<int>(j);
      if (data.feature(j).kind.is_numeric()) {
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return col[a] < col[b]; });
        const auto [gain, pos] = best_cut(order, [&](std::size_t i) { return col[i]; }, y, min_leaf, parent_sse);
        if (pos == 0) continue;
        candidate.gain = gain;
        candidate.threshold = 0.5 * (col[order[pos - 1]] + col[order[pos]]);
      } else {
        // Order levels by mean target, then treat the rank as a numeric key.
        const std::size_t levels = data.feature(j).kind.levels.size();
        std::vector<double> sum(levels, 0.0);
        std::vector<std::size_t> count(levels, 0);
        for (std::size_t i : rows) {
          const auto l = static_cast<std::size_t>(col[i]);
          sum[l] += y[i];
          ++count[l];
        }
        std::vector<std::size_t> present;
        for (std::size_t l = 0; l < levels; ++l) {
          if (count[l]) present.push_back(l);
        }
        if (present.size() < 2) continue;
        std::stable_sort(present.begin(), present.end(), [&](std::size_t a, std::size_t b) {
          return sum[a] / static_cast<double>(count[a]) < sum[b] / static_cast<double>(count[b]);
        });
        std::vector<std::size_t> rank(levels, 0);
        for (std::size_t r = 0; r < present.size(); ++r) rank[present[r]] = r;
        auto level_rank = [&](std::size_t i) { return rank[static_cast<std::size_t>(col[i])]; };
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return level_rank(a) < level_rank(b); });
        const auto [gain, pos] = best_cut(order, level_rank, y, min_leaf, parent_sse);
        if (pos == 0) continue;
        candidate.gain = gain;
        const std::size_t cut_rank = level_rank(order[pos - 1]);
        for (std::size_t r = 0; r <= cut_rank; ++r) candidate.left_levels.push_back(present[r]);
        std::sort(candidate.left_levels.begin(), candidate.left_levels.end());
      }
      if (best.feature < 0 || candidate.gain > best.gain * (1.0 + 1e-12) + 1e-300) best = std::move(candidate);
    }
    return best;
  }

  std::size_t grow(const std::vector<std::size_t>& rows, int depth) {
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i : rows) {
      sum += y[i];
      sum_sq += y[i] * y[i];
    }
    const double count = static_cast<double>(rows.size());
    const std::size_t k = nodes.size();
    nodes.push_back({});
    nodes[k].value = sum / count;
    nodes[k].count = rows.size();

    bool constant = true;
    for (std::size_t i : rows) constant = constant && y[i] == y[rows.front()];
    if (depth >= max_depth || constant || rows.size() < 2 * min_leaf) return k;

    const Split split = find_split(rows, sse(sum, sum_sq, count));
    if (split.feature < 0 || !(split.gain > 0.0)) return k;

    const auto col = data.column(static_cast<std::size_t>(split.feature));
    const bool numeric = data.feature(static_cast<std::size_t>(split.feature)).kind.is_numeric();
    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t i : rows) {
      bool go_left = false;
      if (numeric) {
        go_left = col[i] <= split.threshold;
      } else {
        const auto l = static_cast<std::size_t>(col[i]);
        go_left = std::find(split.left_levels.begin(), split.left_levels.end(), l) != split.left_levels.end();
      }
      (go_left ? left_rows : right_rows).push_back(i);
    }

    nodes[k].feature = split.feature;
    nodes[k].threshold = numeric ? split.threshold : 0.0;
    nodes[k].left_levels = split.left_levels;
    const std::size_t left = grow(left_rows, depth + 1);
    const std::size_t right = grow(right_rows, depth + 1);
    nodes[k].left = left;
    nodes[k].right = right;
    return k;
  }
};

}  // namespace cart_detail

/// Greedy variance-reduction regression tree. Numeric splits sit at midpoints
/// between consecutive distinct values; categorical splits take a prefix of the
/// levels ordered by mean target. Growth stops at max_depth, when a child would
/// hold fewer than min_leaf rows, or when the node's target is constant.
inline CartModel fit_cart(const Dataset& data, int max_depth, std::size_t min_leaf) {
  if (max_depth < 1) throw ConfigError("max_depth must be positive");
  if (min_leaf < 1) throw ConfigError("min_leaf must be positive");
  if (data.rows() < min_leaf) throw ConfigError("fewer rows than min_leaf");
  cart_detail::Builder builder{data, data.target(), max_depth, min_leaf, {}};
  std::vector<std::size_t> rows(data.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  builder.grow(rows, 0);
  return CartModel(data.schema(), std::move(builder.nodes), max_depth, min_leaf);
}

}  // namespace fdc

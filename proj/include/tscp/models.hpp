#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <variant>
#include <vector>

#include "tscp/core.hpp"
#include "tscp/rng.hpp"

namespace tscp {

enum class RegressorKind { ridge, bagged_trees };

/// Everything needed to fit a regressor deterministically.
struct RegressorSpec {
  RegressorKind kind = RegressorKind::ridge;
  std::size_t tree_count = 100;
  std::size_t min_leaf = 1;
  std::size_t max_features = 0;  ///< 0 means "all features"
  double ridge_penalty = 0.0;
  std::uint64_t seed = 0;
};

/// Ridge regression with centered features and an unpenalized intercept, so
/// the prediction at the feature mean is exactly the target mean.
class RidgeModel {
 public:
  static RidgeModel fit(const Matrix& X, const std::vector<double>& y,
                        double penalty) {
    if (penalty < 0.0) throw std::invalid_argument("negative ridge penalty");
    const auto n = static_cast<Eigen::Index>(X.rows);
    const auto d = static_cast<Eigen::Index>(X.cols);
    using RowMat =
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMat> Xm(X.data.data(), n, d);
    Eigen::Map<const Eigen::VectorXd> ym(y.data(), n);

    const Eigen::RowVectorXd x_mean = Xm.colwise().mean();
    const double y_mean = ym.mean();
    const Eigen::MatrixXd Xc = Xm.rowwise() - x_mean;
    const Eigen::VectorXd yc = ym.array() - y_mean;

    Eigen::VectorXd w;
    if (penalty > 0.0) {
      Eigen::MatrixXd gram = Xc.transpose() * Xc;
      gram.diagonal().array() += penalty;
      w = gram.llt().solve(Xc.transpose() * yc);
    } else {
      w = Xc.colPivHouseholderQr().solve(yc);
    }

    RidgeModel m;
    m.weights_.assign(w.data(), w.data() + d);
    m.intercept_ = y_mean - x_mean * w;
    return m;
  }

  double predict(const double* row) const {
    double out = intercept_;
    for (std::size_t j = 0; j < weights_.size(); ++j) out += weights_[j] * row[j];
    return out;
  }

 private:
  std::vector<double> weights_;
  double intercept_ = 0.0;
};

namespace detail {

/// One CART regression tree stored as a flat node array.
class Tree {
 public:
  /// Builds on the rows listed in `idx` (with multiplicity). Splits minimize
  /// the summed child squared error; ties keep the first candidate scanned,
  /// i.e. the lowest feature index, then the lowest threshold.
  void build(const Matrix& X, const std::vector<double>& y,
             std::vector<std::size_t> idx, std::size_t min_leaf,
             std::size_t max_features, Rng& rng) {
    min_leaf_ = std::max<std::size_t>(1, min_leaf);
    max_features_ = max_features;
    nodes_.clear();
    grow(X, y, std::move(idx), rng);
  }

  double predict(const double* row) const {
    int node = 0;
    while (nodes_[static_cast<std::size_t>(node)].feature >= 0) {
      const auto& nd = nodes_[static_cast<std::size_t>(node)];
      node = (row[nd.feature] <= nd.threshold) ? nd.left : nd.right;
    }
    return nodes_[static_cast<std::size_t>(node)].value;
  }

 private:
  struct Node {
    int feature = -1;  ///< -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;
  };

  int grow(const Matrix& X, const std::vector<double>& y,
           std::vector<std::size_t> idx, Rng& rng) {
    const int me = static_cast<int>(nodes_.size());
    nodes_.emplace_back();

    double sum = 0.0;
    for (auto i : idx) sum += y[i];
    const double n_node = static_cast<double>(idx.size());
    nodes_[static_cast<std::size_t>(me)].value = sum / n_node;

    if (idx.size() < 2 * min_leaf_) return me;

    // Feature candidates: a deterministic draw of max_features distinct
    // features, scanned in ascending order for reproducible tie-breaking.
    const std::size_t d = X.cols;
    std::vector<std::size_t> feats(d);
    std::iota(feats.begin(), feats.end(), 0);
    if (max_features_ < d) {
      for (std::size_t k = 0; k < max_features_; ++k) {
        std::swap(feats[k], feats[k + rng.below(d - k)]);
      }
      feats.resize(max_features_);
      std::sort(feats.begin(), feats.end());
    }

    double best_cost = kInf;
    std::size_t best_feat = 0;
    double best_thr = 0.0;
    std::vector<std::pair<double, double>> xv;  // (feature value, target)
    xv.reserve(idx.size());
    for (std::size_t f : feats) {
      xv.clear();
      for (auto i : idx) xv.emplace_back(X.at(i, f), y[i]);
      std::sort(xv.begin(), xv.end());
      // Prefix scan: cost(split) = sum of child SSEs via sum/sumsq prefixes.
      double ls = 0.0, ls2 = 0.0;
      double rs = 0.0, rs2 = 0.0;
      for (const auto& [xval, yval] : xv) {
        rs += yval;
        rs2 += yval * yval;
      }
      for (std::size_t k = 0; k + 1 < xv.size(); ++k) {
        ls += xv[k].second;
        ls2 += xv[k].second * xv[k].second;
        rs -= xv[k].second;
        rs2 -= xv[k].second * xv[k].second;
        if (xv[k].first == xv[k + 1].first) continue;  // no gap to split in
        const std::size_t nl = k + 1, nr = xv.size() - nl;
        if (nl < min_leaf_ || nr < min_leaf_) continue;
        const double cost = (ls2 - ls * ls / static_cast<double>(nl)) +
                            (rs2 - rs * rs / static_cast<double>(nr));
        if (cost < best_cost) {
          best_cost = cost;
          best_feat = f;
          best_thr = 0.5 * (xv[k].first + xv[k + 1].first);
        }
      }
    }
    if (!std::isfinite(best_cost)) return me;  // no admissible split

    std::vector<std::size_t> left_idx, right_idx;
    for (auto i : idx) {
      (X.at(i, best_feat) <= best_thr ? left_idx : right_idx).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();

    nodes_[static_cast<std::size_t>(me)].feature = static_cast<int>(best_feat);
    nodes_[static_cast<std::size_t>(me)].threshold = best_thr;
    const int l = grow(X, y, std::move(left_idx), rng);
    nodes_[static_cast<std::size_t>(me)].left = l;
    const int r = grow(X, y, std::move(right_idx), rng);
    nodes_[static_cast<std::size_t>(me)].right = r;
    return me;
  }

  std::vector<Node> nodes_;
  std::size_t min_leaf_ = 1;
  std::size_t max_features_ = 0;
};

}  // namespace detail

/// Bagged CART regression trees (a random forest once max_features < d).
class ForestModel {
 public:
  /// `resample` controls the per-tree bootstrap; ensembles that already
  /// resampled their rows pass false so the rows are not bootstrapped again.
  static ForestModel fit(const RegressorSpec& spec, const Matrix& X,
                         const std::vector<double>& y, bool resample) {
    if (spec.tree_count == 0) throw std::invalid_argument("tree_count == 0");
    const std::size_t n = X.rows, d = X.cols;
    std::size_t mf = spec.max_features == 0 ? d : spec.max_features;
    if (mf > d) throw std::invalid_argument("max_features exceeds columns");

    ForestModel m;
    // Without a bootstrap and with every feature in play each tree is the
    // same deterministic CART, so one tree represents the whole forest.
    const std::size_t n_trees =
        (!resample && mf == d) ? 1 : spec.tree_count;
    m.trees_.resize(n_trees);
    Rng rng(spec.seed);
    std::vector<std::size_t> idx(n);
    for (std::size_t b = 0; b < n_trees; ++b) {
      if (resample) {
        for (auto& i : idx) i = rng.below(n);
      } else {
        std::iota(idx.begin(), idx.end(), 0);
      }
      m.trees_[b].build(X, y, idx, spec.min_leaf, mf, rng);
    }
    return m;
  }

  double predict(const double* row) const {
    double sum = 0.0;
    for (const auto& t : trees_) sum += t.predict(row);
    return sum / static_cast<double>(trees_.size());
  }

 private:
  std::vector<detail::Tree> trees_;
};

/// A fitted regressor; predict is deterministic given the fitted state.
class FittedModel {
 public:
  explicit FittedModel(RidgeModel m) : impl_(std::move(m)) {}
  explicit FittedModel(ForestModel m) : impl_(std::move(m)) {}

  double predict(const double* row) const {
    return std::visit([&](const auto& m) { return m.predict(row); }, impl_);
  }
  double predict(const std::vector<double>& row) const {
    return predict(row.data());
  }

 private:
  std::variant<RidgeModel, ForestModel> impl_;
};

inline void check_fit_inputs(const Matrix& X, const std::vector<double>& y) {
  if (X.rows == 0 || X.cols == 0 || X.rows != y.size()) {
    throw std::invalid_argument("dimension mismatch");
  }
}

/// Fits a model for the given RegressorSpec; bagged trees bootstrap their rows internally.
inline FittedModel fit(const RegressorSpec& spec, const Matrix& X,
                       const std::vector<double>& y) {
  check_fit_inputs(X, y);
  if (spec.kind == RegressorKind::ridge) {
    return FittedModel(RidgeModel::fit(X, y, spec.ridge_penalty));
  }
  return FittedModel(ForestModel::fit(spec, X, y, /*resample=*/true));
}

/// One member of a bootstrap ensemble: the fitted model plus the row index
/// multiset it was trained on (in draw order).
struct EnsembleMember {
  FittedModel model;
  std::vector<std::size_t> indices;
};

/// Fits B models on with-replacement row resamples. Tree members do not
/// bootstrap again internally; their rows were already resampled here. The
/// optional `forced_samples` pins the index multisets (test hook).
inline std::vector<EnsembleMember> fit_bootstrap_ensemble(
    const RegressorSpec& spec, const Matrix& X, const std::vector<double>& y,
    std::size_t B, std::uint64_t seed,
    const std::vector<std::vector<std::size_t>>* forced_samples = nullptr) {
  check_fit_inputs(X, y);
  if (B == 0) throw std::invalid_argument("B == 0");
  if (forced_samples && forced_samples->size() != B) {
    throw std::invalid_argument("forced sample count != B");
  }
  const std::size_t n = X.rows;
  Rng rng(seed);
  std::vector<EnsembleMember> members;
  members.reserve(B);
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<std::size_t> idx(n);
    if (forced_samples) {
      idx = (*forced_samples)[b];
    } else {
      for (auto& i : idx) i = rng.below(n);
    }
    Matrix Xb(idx.size(), X.cols);
    std::vector<double> yb(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      std::copy(X.row(idx[r]), X.row(idx[r]) + X.cols, Xb.row(r));
      yb[r] = y[idx[r]];
    }
    RegressorSpec member_spec = spec;
    member_spec.seed = mix_seed(seed, b + 1);
    FittedModel model =
        spec.kind == RegressorKind::ridge
            ? FittedModel(RidgeModel::fit(Xb, yb, spec.ridge_penalty))
            : FittedModel(ForestModel::fit(member_spec, Xb, yb,
                                           /*resample=*/false));
    members.push_back(EnsembleMember{std::move(model), std::move(idx)});
  }
  return members;
}

}  // namespace tscp

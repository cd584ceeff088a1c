#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "fraudkit/dataset.hpp"

namespace fraudkit::neighbors {

// sqrt(sum_i (x_i - y_i)^2). Throws on length mismatch.
double euclidean_distance(std::span<const double> x, std::span<const double> y);

enum class IndexStrategy { brute, tree, automatic };

// `automatic` uses the tree up to this many dimensions, brute force above.
inline constexpr std::size_t kTreeMaxDims = 8;

struct NeighborQueryResult {
  std::vector<RowId> neighbor_ids;     // nearest first
  std::vector<double> distances;       // nondecreasing
  std::vector<std::size_t> positions;  // row positions in the indexed matrix
};

// Exact k-nearest-neighbour search over a fixed point set.
//
// Ordering is by (squared distance, id): equidistant points come back
// lower id first. Every path computes squared distances with the same
// fixed summation order, so the brute-force scan and the k-d tree return
// bit-identical results.
//
// Immutable after build; concurrent queries are safe.
class NeighborIndex {
 public:
  // `ids` defaults to 0..n-1 and must be unique.
  static NeighborIndex build(FeatureMatrix points, IndexStrategy strategy = IndexStrategy::automatic,
                             std::vector<RowId> ids = {});

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dims() const noexcept { return static_cast<std::size_t>(points_->cols()); }
  bool uses_tree() const noexcept { return tree_ != nullptr; }
  const std::vector<RowId>& ids() const noexcept { return ids_; }

  // The k nearest points to `q`, skipping the point whose id is `exclude`.
  NeighborQueryResult query(std::span<const double> q, std::size_t k,
                            std::optional<RowId> exclude = std::nullopt) const;

  // Leave-one-out query for each listed indexed position: the k nearest
  // other points. Runs in parallel; results are in `positions` order.
  std::vector<NeighborQueryResult> query_self(const std::vector<std::size_t>& positions,
                                              std::size_t k) const;

  struct Tree;

 private:
  NeighborIndex() = default;
  NeighborQueryResult search(const double* q, std::size_t k, std::optional<RowId> exclude) const;

  std::shared_ptr<const FeatureMatrix> points_;
  std::vector<RowId> ids_;
  std::shared_ptr<const Tree> tree_;
};

// From possibly ragged rows; throws unless every row has the same length.
NeighborIndex build_index(const std::vector<std::vector<double>>& rows,
                          IndexStrategy strategy = IndexStrategy::automatic);

// Convenience for rows of a LabeledDataset, indexed by their row ids.
NeighborIndex build_index(const LabeledDataset& d, IndexStrategy strategy = IndexStrategy::automatic);

NeighborQueryResult knn_query(const NeighborIndex& index, std::span<const double> q, std::size_t k,
                              std::optional<RowId> exclude = std::nullopt);

// Majority-vote k-NN classifier over a training set. Ties between
// equidistant training points resolve by lower original row id, which
// makes predictions independent of training-row order.
class KnnModel {
 public:
  KnnModel(LabeledDataset train, std::size_t k = 5,
           IndexStrategy strategy = IndexStrategy::automatic);

  std::size_t k() const noexcept { return k_; }
  const LabeledDataset& train() const noexcept { return train_; }
  const NeighborIndex& index() const noexcept { return index_; }

 private:
  LabeledDataset train_;
  std::size_t k_;
  NeighborIndex index_;
};

struct KnnPrediction {
  Label label;
  double score;  // fraction of the k neighbours labelled 1
};

// label = 1 iff score > 1/2; an exact 1/2 (even k) takes the label of the
// single nearest neighbour.
KnnPrediction knn_classify(const KnnModel& model, std::span<const double> q);

// knn_classify over every row of `queries`, in parallel.
std::vector<KnnPrediction> knn_classify_all(const KnnModel& model, const FeatureMatrix& queries);

}  // namespace fraudkit::neighbors

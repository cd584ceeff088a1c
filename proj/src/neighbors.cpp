#include "fraudkit/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "fraudkit/error.hpp"

namespace fraudkit::neighbors {

double euclidean_distance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error("euclidean_distance: lengths " + std::to_string(x.size()) + " and " +
                std::to_string(y.size()) + " differ");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - y[i];
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

namespace {

constexpr std::size_t kLeafSize = 16;

struct Candidate {
  double d2;
  RowId id;
  std::size_t pos;
};

bool closer(const Candidate& a, const Candidate& b) {
  return a.d2 < b.d2 || (a.d2 == b.d2 && a.id < b.id);
}

// Bounded max-heap holding the k best candidates seen so far.
class Candidates {
 public:
  explicit Candidates(std::size_t k) : k_(k) { heap_.reserve(k); }

  bool full() const { return heap_.size() == k_; }
  double worst_d2() const {
    return full() ? heap_.front().d2 : std::numeric_limits<double>::infinity();
  }

  void offer(const Candidate& c) {
    if (!full()) {
      heap_.push_back(c);
      std::push_heap(heap_.begin(), heap_.end(), closer);
    } else if (closer(c, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), closer);
      heap_.back() = c;
      std::push_heap(heap_.begin(), heap_.end(), closer);
    }
  }

  NeighborQueryResult finish() {
    std::sort_heap(heap_.begin(), heap_.end(), closer);
    NeighborQueryResult r;
    r.neighbor_ids.reserve(heap_.size());
    r.distances.reserve(heap_.size());
    r.positions.reserve(heap_.size());
    for (const auto& c : heap_) {
      r.neighbor_ids.push_back(c.id);
      r.distances.push_back(std::sqrt(c.d2));
      r.positions.push_back(c.pos);
    }
    return r;
  }

 private:
  std::size_t k_;
  std::vector<Candidate> heap_;
};

// Squared distance with four running sums combined as (s0 + s1) + (s2 + s3).
// Every search path uses this one function, so brute force and the tree
// agree bit for bit. Gives up early (returning a value > bound) once the
// combined partial sums exceed `bound`; rounded sums of nonnegative terms
// never decrease, so abandoned points are strictly worse than bound.
inline double squared_distance(const double* a, const double* b, std::size_t dims, double bound) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 8 <= dims; j += 8) {
    for (std::size_t u = 0; u < 8; u += 4) {
      const double d0 = a[j + u] - b[j + u];
      const double d1 = a[j + u + 1] - b[j + u + 1];
      const double d2 = a[j + u + 2] - b[j + u + 2];
      const double d3 = a[j + u + 3] - b[j + u + 3];
      s0 += d0 * d0;
      s1 += d1 * d1;
      s2 += d2 * d2;
      s3 += d3 * d3;
    }
    const double partial = (s0 + s1) + (s2 + s3);
    if (partial > bound) return partial;
  }
  for (; j + 4 <= dims; j += 4) {
    const double d0 = a[j] - b[j];
    const double d1 = a[j + 1] - b[j + 1];
    const double d2 = a[j + 2] - b[j + 2];
    const double d3 = a[j + 3] - b[j + 3];
    s0 += d0 * d0;
    s1 += d1 * d1;
    s2 += d2 * d2;
    s3 += d3 * d3;
  }
  for (; j < dims; ++j) {
    const double d = a[j] - b[j];
    s0 += d * d;
  }
  return (s0 + s1) + (s2 + s3);
}

constexpr std::size_t kScreenMinQueries = 256;
constexpr Eigen::Index kQueryBlock = 256;
constexpr Eigen::Index kPointBlock = 1024;

// Leave-one-out brute force for many indexed queries at once. A block
// matrix product gives |q|^2 + |p|^2 - 2 q.p for every pair; that estimate
// is only a screen. Any point whose estimate comes within a generous
// rounding margin of the current k-th best is re-measured with
// squared_distance, so the result equals the plain scan exactly.
std::vector<NeighborQueryResult> screened_self_search(const FeatureMatrix& pts, const std::vector<RowId>& ids,
                                                      const std::vector<std::size_t>& positions,
                                                      std::size_t k) {
  const Eigen::Index n = pts.rows();
  const auto dims = static_cast<std::size_t>(pts.cols());
  const Eigen::VectorXd norms = pts.rowwise().squaredNorm();
  // Rounding in the estimate and in squared_distance is below ~4 d u (|q|^2 + |p|^2).
  const double margin = 1e-12 * static_cast<double>(std::max<std::size_t>(dims, 8)) / 8.0;

  std::vector<NeighborQueryResult> out(positions.size());
  const auto blocks = static_cast<std::int64_t>((positions.size() + kQueryBlock - 1) / kQueryBlock);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t b = 0; b < blocks; ++b) {
    const std::size_t first = static_cast<std::size_t>(b) * kQueryBlock;
    const std::size_t count = std::min<std::size_t>(kQueryBlock, positions.size() - first);
    FeatureMatrix queries(static_cast<Eigen::Index>(count), pts.cols());
    for (std::size_t i = 0; i < count; ++i) {
      queries.row(static_cast<Eigen::Index>(i)) = pts.row(static_cast<Eigen::Index>(positions[first + i]));
    }
    std::vector<Candidates> best(count, Candidates(k));
    std::vector<std::uint32_t> hits(static_cast<std::size_t>(kPointBlock));
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> dots(static_cast<Eigen::Index>(count), kPointBlock);

    for (Eigen::Index start = 0; start < n; start += kPointBlock) {
      const Eigen::Index width = std::min(kPointBlock, n - start);
      dots.leftCols(width).noalias() = queries * pts.middleRows(start, width).transpose();
      const double* block_norms = norms.data() + start;
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t self = positions[first + i];
        const double nq = norms(static_cast<Eigen::Index>(self));
        const double* q = queries.row(static_cast<Eigen::Index>(i)).data();
        const double* row = dots.row(static_cast<Eigen::Index>(i)).data();
        Candidates& c = best[i];
        // Branch-free pass collecting the survivors of the screen.
        const double threshold = c.worst_d2();
        std::size_t found = 0;
        for (Eigen::Index j = 0; j < width; ++j) {
          const double sum = nq + block_norms[j];
          hits[found] = static_cast<std::uint32_t>(j);
          found += (sum - 2.0 * row[j] - margin * sum) <= threshold;
        }
        for (std::size_t h = 0; h < found; ++h) {
          const auto pos = static_cast<std::size_t>(start + hits[h]);
          if (pos == self) continue;
          const double d2 = squared_distance(pts.row(static_cast<Eigen::Index>(pos)).data(), q, dims, c.worst_d2());
          if (!c.full() || d2 <= c.worst_d2()) c.offer({d2, ids[pos], pos});
        }
      }
    }
    for (std::size_t i = 0; i < count; ++i) out[first + i] = best[i].finish();
  }
  return out;
}

}  // namespace

struct NeighborIndex::Tree {
  struct Node {
    std::size_t begin;
    std::size_t end;
    std::int64_t left = -1;
    std::int64_t right = -1;
  };
  std::vector<Node> nodes;
  std::vector<double> lo;  // nodes.size() * dims
  std::vector<double> hi;
  std::vector<std::size_t> order;  // point positions, grouped by leaf
  std::size_t dims = 0;

  std::size_t build(const FeatureMatrix& pts, std::size_t begin, std::size_t end) {
    const std::size_t id = nodes.size();
    nodes.push_back({begin, end});
    lo.resize(lo.size() + dims, std::numeric_limits<double>::infinity());
    hi.resize(hi.size() + dims, -std::numeric_limits<double>::infinity());
    for (std::size_t i = begin; i < end; ++i) {
      const double* p = pts.row(static_cast<Eigen::Index>(order[i])).data();
      for (std::size_t j = 0; j < dims; ++j) {
        lo[id * dims + j] = std::min(lo[id * dims + j], p[j]);
        hi[id * dims + j] = std::max(hi[id * dims + j], p[j]);
      }
    }
    if (end - begin <= kLeafSize) return id;

    std::size_t axis = 0;
    double spread = -1.0;
    for (std::size_t j = 0; j < dims; ++j) {
      const double s = hi[id * dims + j] - lo[id * dims + j];
      if (s > spread) {
        spread = s;
        axis = j;
      }
    }
    if (spread <= 0.0) return id;  // all points coincide

    const std::size_t mid = begin + (end - begin) / 2;
    const auto ax = static_cast<Eigen::Index>(axis);
    std::nth_element(order.begin() + static_cast<std::ptrdiff_t>(begin),
                     order.begin() + static_cast<std::ptrdiff_t>(mid),
                     order.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                       const double va = pts(static_cast<Eigen::Index>(a), ax);
                       const double vb = pts(static_cast<Eigen::Index>(b), ax);
                       return va < vb || (va == vb && a < b);
                     });
    const auto left = build(pts, begin, mid);
    const auto right = build(pts, mid, end);
    nodes[id].left = static_cast<std::int64_t>(left);
    nodes[id].right = static_cast<std::int64_t>(right);
    return id;
  }

  double box_d2(std::size_t node, const double* q) const {
    double sum = 0.0;
    const double* l = &lo[node * dims];
    const double* h = &hi[node * dims];
    for (std::size_t j = 0; j < dims; ++j) {
      double d = 0.0;
      if (q[j] < l[j]) {
        d = l[j] - q[j];
      } else if (q[j] > h[j]) {
        d = q[j] - h[j];
      }
      sum += d * d;
    }
    return sum;
  }
};

NeighborIndex NeighborIndex::build(FeatureMatrix points, IndexStrategy strategy, std::vector<RowId> ids) {
  if (points.rows() == 0) throw Error("build_index: empty point set");
  if (points.cols() == 0) throw Error("build_index: points have no coordinates");
  const auto n = static_cast<std::size_t>(points.rows());
  if (ids.empty()) {
    ids.resize(n);
    std::iota(ids.begin(), ids.end(), RowId{0});
  }
  if (ids.size() != n) throw Error("build_index: id count does not match point count");
  std::unordered_set<RowId> seen(ids.begin(), ids.end());
  if (seen.size() != n) throw Error("build_index: duplicate point ids");

  NeighborIndex index;
  index.points_ = std::make_shared<const FeatureMatrix>(std::move(points));
  index.ids_ = std::move(ids);

  const bool use_tree = strategy == IndexStrategy::tree ||
                        (strategy == IndexStrategy::automatic && index.dims() <= kTreeMaxDims);
  if (use_tree) {
    auto tree = std::make_shared<Tree>();
    tree->dims = index.dims();
    tree->order.resize(n);
    std::iota(tree->order.begin(), tree->order.end(), std::size_t{0});
    tree->build(*index.points_, 0, n);
    index.tree_ = std::move(tree);
  }
  return index;
}

NeighborQueryResult NeighborIndex::search(const double* q, std::size_t k,
                                          std::optional<RowId> exclude) const {
  const std::size_t dims = this->dims();
  const FeatureMatrix& pts = *points_;
  Candidates best(k);

  auto scan = [&](std::size_t pos) {
    const RowId id = ids_[pos];
    if (exclude && id == *exclude) return;
    const double d2 = squared_distance(pts.row(static_cast<Eigen::Index>(pos)).data(), q, dims,
                                       best.worst_d2());
    if (!best.full() || d2 <= best.worst_d2()) best.offer({d2, id, pos});
  };

  if (!tree_) {
    for (std::size_t pos = 0; pos < size(); ++pos) scan(pos);
    return best.finish();
  }

  const Tree& t = *tree_;
  // Explicit stack of (node, lower bound on squared distance).
  std::vector<std::pair<std::size_t, double>> stack{{0, t.box_d2(0, q)}};
  while (!stack.empty()) {
    const auto [node, bound] = stack.back();
    stack.pop_back();
    // Equal bounds may still hold a tie with a lower id.
    if (best.full() && bound > best.worst_d2()) continue;
    const auto& nd = t.nodes[node];
    if (nd.left < 0) {
      for (std::size_t i = nd.begin; i < nd.end; ++i) scan(t.order[i]);
      continue;
    }
    const auto l = static_cast<std::size_t>(nd.left);
    const auto r = static_cast<std::size_t>(nd.right);
    const double dl = t.box_d2(l, q);
    const double dr = t.box_d2(r, q);
    // Push the farther child first so the nearer one is searched first.
    if (dl <= dr) {
      stack.emplace_back(r, dr);
      stack.emplace_back(l, dl);
    } else {
      stack.emplace_back(l, dl);
      stack.emplace_back(r, dr);
    }
  }
  return best.finish();
}

NeighborQueryResult NeighborIndex::query(std::span<const double> q, std::size_t k,
                                         std::optional<RowId> exclude) const {
  if (q.size() != dims()) {
    throw Error("knn_query: query has " + std::to_string(q.size()) + " dims, index has " +
                std::to_string(dims()));
  }
  std::size_t available = size();
  if (exclude && std::find(ids_.begin(), ids_.end(), *exclude) != ids_.end()) --available;
  if (k < 1 || k > available) {
    throw Error("knn_query: k = " + std::to_string(k) + " but " + std::to_string(available) +
                " points are available");
  }
  return search(q.data(), k, exclude);
}

std::vector<NeighborQueryResult> NeighborIndex::query_self(const std::vector<std::size_t>& positions,
                                                           std::size_t k) const {
  if (k < 1 || k + 1 > size()) {
    throw Error("knn_query: k = " + std::to_string(k) + " but " + std::to_string(size() - 1) +
                " other points are available");
  }
  if (!tree_ && positions.size() >= kScreenMinQueries) return screened_self_search(*points_, ids_, positions, k);
  std::vector<NeighborQueryResult> out(positions.size());
  const auto n = static_cast<std::int64_t>(positions.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto pos = positions[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] =
        search(points_->row(static_cast<Eigen::Index>(pos)).data(), k, ids_[pos]);
  }
  return out;
}

NeighborIndex build_index(const std::vector<std::vector<double>>& rows, IndexStrategy strategy) {
  if (rows.empty()) throw Error("build_index: empty point set");
  const auto dims = rows.front().size();
  FeatureMatrix pts(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dims));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dims) {
      throw Error("build_index: row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                  " coordinates, expected " + std::to_string(dims));
    }
    for (std::size_t j = 0; j < dims; ++j) pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return NeighborIndex::build(std::move(pts), strategy);
}

NeighborIndex build_index(const LabeledDataset& d, IndexStrategy strategy) {
  return NeighborIndex::build(d.features(), strategy, d.row_ids());
}

NeighborQueryResult knn_query(const NeighborIndex& index, std::span<const double> q, std::size_t k,
                              std::optional<RowId> exclude) {
  return index.query(q, k, exclude);
}

KnnModel::KnnModel(LabeledDataset train, std::size_t k, IndexStrategy strategy)
    : train_(std::move(train)), k_(k), index_(build_index(train_, strategy)) {
  if (k_ < 1 || k_ > train_.rows()) {
    throw Error("KnnModel: k = " + std::to_string(k_) + " with " + std::to_string(train_.rows()) +
                " training rows");
  }
}

namespace {

KnnPrediction vote(const KnnModel& model, const NeighborQueryResult& nn) {
  std::size_t fraud = 0;
  for (auto pos : nn.positions) fraud += model.train().labels()[pos];
  const std::size_t k = nn.positions.size();
  const double score = static_cast<double>(fraud) / static_cast<double>(k);
  Label label;
  if (2 * fraud > k) {
    label = kFraud;
  } else if (2 * fraud < k) {
    label = kGenuine;
  } else {
    label = model.train().labels()[nn.positions.front()];
  }
  return {label, score};
}

}  // namespace

KnnPrediction knn_classify(const KnnModel& model, std::span<const double> q) {
  return vote(model, model.index().query(q, model.k()));
}

std::vector<KnnPrediction> knn_classify_all(const KnnModel& model, const FeatureMatrix& queries) {
  if (static_cast<std::size_t>(queries.cols()) != model.index().dims()) {
    throw Error("knn_classify: query dims do not match the model");
  }
  std::vector<KnnPrediction> out(static_cast<std::size_t>(queries.rows()));
  const auto n = static_cast<std::int64_t>(queries.rows());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto row = queries.row(static_cast<Eigen::Index>(i));
    out[static_cast<std::size_t>(i)] =
        vote(model, model.index().query(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), model.k()));
  }
  return out;
}

}  // namespace fraudkit::neighbors

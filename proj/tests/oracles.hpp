// Brute-force re-implementations used as test oracles. Written straight
// from the rule definitions, sharing no code paths with the library apart
// from the dataset type and the condensation visiting order (an input).
#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "fraudkit/dataset.hpp"
#include "fraudkit/rng.hpp"

namespace oracle {

using fraudkit::FeatureMatrix;
using fraudkit::Label;
using fraudkit::LabeledDataset;
using fraudkit::RowId;

struct Point {
  std::vector<double> x;
  Label y;
  RowId id;
};

inline std::vector<Point> points_of(const LabeledDataset& d) {
  std::vector<Point> pts;
  for (std::size_t i = 0; i < d.rows(); ++i) {
    const auto row = d.features().row(static_cast<Eigen::Index>(i));
    pts.push_back({std::vector<double>(row.data(), row.data() + row.size()), d.labels()[i], d.row_ids()[i]});
  }
  return pts;
}

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

// Indices into `pts` of the k nearest to q, by (squared distance, id),
// skipping index `self` (pass pts.size() to skip nothing).
inline std::vector<std::size_t> nearest(const std::vector<Point>& pts, const std::vector<double>& q,
                                        std::size_t k, std::size_t self) {
  std::vector<std::pair<std::pair<double, RowId>, std::size_t>> all;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i != self) all.push_back({{sq_dist(pts[i].x, q), pts[i].id}, i});
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k && i < all.size(); ++i) out.push_back(all[i].second);
  return out;
}

// Ids removed by one simultaneous ENN pass.
inline std::set<RowId> enn_removed(const std::vector<Point>& pts, std::size_t k) {
  std::set<RowId> removed;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].y != 0) continue;
    std::size_t minority = 0;
    for (auto j : nearest(pts, pts[i].x, k, i)) minority += pts[j].y;
    if (2 * minority > k) removed.insert(pts[i].id);
  }
  return removed;
}

inline std::vector<Point> without(const std::vector<Point>& pts, const std::set<RowId>& ids) {
  std::vector<Point> out;
  for (const auto& p : pts) {
    if (!ids.contains(p.id)) out.push_back(p);
  }
  return out;
}

struct RennResult {
  std::set<RowId> removed;
  std::size_t passes = 0;
};

inline RennResult renn_removed(std::vector<Point> pts, std::size_t k, std::size_t max_iter) {
  RennResult r;
  while (r.passes < max_iter && pts.size() > k) {
    const auto gone = enn_removed(pts, k);
    ++r.passes;
    if (gone.empty()) break;
    r.removed.insert(gone.begin(), gone.end());
    pts = without(pts, gone);
  }
  return r;
}

inline std::set<std::pair<RowId, RowId>> tomek(const std::vector<Point>& pts) {
  std::set<std::pair<RowId, RowId>> links;
  for (std::size_t a = 0; a < pts.size(); ++a) {
    for (std::size_t b = a + 1; b < pts.size(); ++b) {
      if (pts[a].y == pts[b].y) continue;
      if (nearest(pts, pts[a].x, 1, a).front() == b && nearest(pts, pts[b].x, 1, b).front() == a) {
        links.insert(std::minmax(pts[a].id, pts[b].id));
      }
    }
  }
  return links;
}

inline std::set<RowId> tomek_majority(const std::vector<Point>& pts) {
  std::set<RowId> out;
  std::set<RowId> majority;
  for (const auto& p : pts) {
    if (p.y == 0) majority.insert(p.id);
  }
  for (const auto& [a, b] : tomek(pts)) {
    if (majority.contains(a)) out.insert(a);
    if (majority.contains(b)) out.insert(b);
  }
  return out;
}

// One-step CNN given the majority visiting order (first entry seeds the store).
inline std::set<RowId> cnn_removed(const std::vector<Point>& pts, const std::vector<RowId>& order) {
  std::vector<Point> store;
  for (const auto& p : pts) {
    if (p.y == 1) store.push_back(p);
  }
  auto find = [&](RowId id) {
    for (const auto& p : pts) {
      if (p.id == id) return p;
    }
    throw std::logic_error("id");
  };
  store.push_back(find(order.front()));
  std::set<RowId> removed;
  for (std::size_t v = 1; v < order.size(); ++v) {
    const Point p = find(order[v]);
    const auto nn = nearest(store, p.x, 1, store.size()).front();
    if (store[nn].y == 1) {
      store.push_back(p);
    } else {
      removed.insert(p.id);
    }
  }
  return removed;
}

// Mann-Whitney statistic: P(score_pos > score_neg) + 0.5 P(equal).
inline double pair_auc(const std::vector<Label>& y, const std::vector<double>& s) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) {
        wins += 1.0;
      } else if (s[i] == s[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / pairs;
}

// Plain logistic regression by full-batch gradient descent; returns the
// training accuracy at threshold 0.5.
inline double logistic_regression_accuracy(const LabeledDataset& d, std::size_t iterations = 2000,
                                           double lr = 0.5) {
  const auto n = d.rows();
  const auto dims = d.dims();
  std::vector<double> w(dims, 0.0);
  double b = 0.0;
  auto prob = [&](std::size_t i) {
    double z = b;
    for (std::size_t j = 0; j < dims; ++j) z += w[j] * d.features()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return 1.0 / (1.0 + std::exp(-z));
  };
  for (std::size_t it = 0; it < iterations; ++it) {
    std::vector<double> gw(dims, 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double err = prob(i) - d.labels()[i];
      for (std::size_t j = 0; j < dims; ++j) gw[j] += err * d.features()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      gb += err;
    }
    for (std::size_t j = 0; j < dims; ++j) w[j] -= lr * gw[j] / static_cast<double>(n);
    b -= lr * gb / static_cast<double>(n);
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) correct += (prob(i) >= 0.5) == (d.labels()[i] == 1);
  return static_cast<double>(correct) / static_cast<double>(n);
}

// Random small dataset with coordinates on a coarse grid, so ties and
// exact translations occur. Both classes are guaranteed present.
inline LabeledDataset random_small(fraudkit::Rng& rng, std::size_t max_rows = 30, std::size_t max_dims = 3) {
  const std::size_t n = 4 + rng.below(max_rows - 3);
  const std::size_t dims = 1 + rng.below(max_dims);
  FeatureMatrix f(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dims));
  std::vector<Label> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.uniform() < 0.3 ? 1 : 0;
    for (std::size_t j = 0; j < dims; ++j) {
      f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(rng.below(9)) * 0.5 + (y[i] ? 1.0 : 0.0);
    }
  }
  y[0] = 0;
  y[1] = 1;
  std::vector<RowId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = 100 + 3 * i;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < dims; ++j) names.push_back("f" + std::to_string(j));
  return LabeledDataset(std::move(f), std::move(y), std::move(ids), std::move(names));
}

}  // namespace oracle

#include "fraudkit/resample.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "fraudkit/error.hpp"
#include "fraudkit/rng.hpp"

namespace fraudkit::resample {

std::string to_string(Method m) {
  switch (m) {
    case Method::none: return "none";
    case Method::enn: return "ENN";
    case Method::renn: return "RENN";
    case Method::oss: return "OSS";
    case Method::ncr: return "NCR";
  }
  return "?";
}

std::string to_string(OssOrder o) { return o == OssOrder::tomek_first ? "tomek_first" : "condense_first"; }

std::string to_string(RemovalReason r) {
  switch (r) {
    case RemovalReason::edited: return "edited";
    case RemovalReason::tomek: return "tomek";
    case RemovalReason::redundant: return "redundant";
    case RemovalReason::ratio: return "ratio";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  for (auto m : {Method::none, Method::enn, Method::renn, Method::oss, Method::ncr}) {
    if (s == to_string(m)) return m;
  }
  throw Error("unknown sampler method '" + s + "' (expected none, ENN, RENN, OSS or NCR)");
}

OssOrder parse_oss_order(const std::string& s) {
  if (s == "tomek_first") return OssOrder::tomek_first;
  if (s == "condense_first") return OssOrder::condense_first;
  throw Error("unknown oss_order '" + s + "' (expected tomek_first or condense_first)");
}

RemovalReason parse_reason(const std::string& s) {
  for (auto r : {RemovalReason::edited, RemovalReason::tomek, RemovalReason::redundant,
                 RemovalReason::ratio}) {
    if (s == to_string(r)) return r;
  }
  throw Error("unknown removal reason '" + s + "'");
}

std::vector<RowId> SamplerOutcome::removed_ids() const {
  std::vector<RowId> ids;
  ids.reserve(removed.size());
  for (const auto& r : removed) ids.push_back(r.row_id);
  return ids;
}

namespace {

void require_both_classes(const LabeledDataset& d, const char* who) {
  const auto c = class_counts(d);
  if (c.majority == 0 || c.minority == 0) {
    throw Error(std::string(who) + ": input must contain both classes (majority " +
                std::to_string(c.majority) + ", minority " + std::to_string(c.minority) + ")");
  }
}

// Splits `d` by a per-position removal flag. Removals are returned in
// ascending row-id order.
std::pair<LabeledDataset, std::vector<Removal>> apply_removals(const LabeledDataset& d,
                                                               const std::vector<char>& remove,
                                                               RemovalReason reason) {
  std::vector<std::size_t> keep;
  std::vector<Removal> removed;
  for (std::size_t i = 0; i < d.rows(); ++i) {
    if (remove[i]) {
      removed.push_back({d.row_ids()[i], d.labels()[i], reason});
    } else {
      keep.push_back(i);
    }
  }
  std::sort(removed.begin(), removed.end(),
            [](const Removal& a, const Removal& b) { return a.row_id < b.row_id; });
  return {d.select(keep), std::move(removed)};
}

std::vector<std::size_t> majority_positions(const LabeledDataset& d) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < d.rows(); ++i) {
    if (d.labels()[i] == kGenuine) out.push_back(i);
  }
  return out;
}

bool minority_majority_vote(std::size_t minority_neighbors, std::size_t k) {
  return 2 * minority_neighbors > k;
}

void append(std::vector<Removal>& into, std::vector<Removal> more) {
  into.insert(into.end(), more.begin(), more.end());
}

void check_enn_k(const LabeledDataset& d, std::size_t k, const char* who) {
  if (k < 1) throw Error(std::string(who) + ": k must be at least 1");
  if (k >= d.rows()) {
    throw Error(std::string(who) + ": k = " + std::to_string(k) + " needs more than " +
                std::to_string(d.rows()) + " rows");
  }
}

}  // namespace

bool NeighborTable::covers(const LabeledDataset& d, std::size_t need) const {
  return k >= need && row_ids == d.row_ids();
}

NeighborTable neighbor_table(const LabeledDataset& d, std::size_t k, neighbors::IndexStrategy strategy) {
  if (k < 1 || k >= d.rows()) throw Error("neighbor_table: k must lie in [1, rows)");
  const auto index = neighbors::build_index(d, strategy);
  std::vector<std::size_t> all(d.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto nn = index.query_self(all, k);
  NeighborTable t{k, d.row_ids(), {}};
  t.nearest.reserve(d.rows() * k);
  for (const auto& r : nn) t.nearest.insert(t.nearest.end(), r.positions.begin(), r.positions.end());
  return t;
}

SamplerOutcome enn(const LabeledDataset& d, std::size_t k, neighbors::IndexStrategy strategy,
                   const NeighborTable* table) {
  require_both_classes(d, "enn");
  check_enn_k(d, k, "enn");
  const auto majority = majority_positions(d);
  std::vector<char> remove(d.rows(), 0);
  auto vote = [&](std::size_t row, const std::size_t* nearest) {
    std::size_t minority = 0;
    for (std::size_t j = 0; j < k; ++j) minority += d.labels()[nearest[j]];
    if (minority_majority_vote(minority, k)) remove[row] = 1;
  };
  if (table && table->covers(d, k)) {
    for (auto pos : majority) vote(pos, table->row(pos));
  } else {
    const auto nn = neighbors::build_index(d, strategy).query_self(majority, k);
    for (std::size_t i = 0; i < majority.size(); ++i) vote(majority[i], nn[i].positions.data());
  }
  auto [kept, removed] = apply_removals(d, remove, RemovalReason::edited);
  return {std::move(kept), std::move(removed), 1};
}

SamplerOutcome renn(const LabeledDataset& d, std::size_t k, std::size_t max_iter,
                    neighbors::IndexStrategy strategy, const NeighborTable* table) {
  require_both_classes(d, "renn");
  check_enn_k(d, k, "renn");
  if (max_iter < 1) throw Error("renn: max_iter must be at least 1");

  // A row's k nearest neighbours in a subset are unchanged as long as all
  // of them survive, so only rows that lost a neighbour are re-queried.
  struct Cached {
    std::vector<RowId> neighbors;
    bool remove;
  };
  std::unordered_map<RowId, Cached> cache;
  std::unordered_set<RowId> last_removed;

  if (table && table->covers(d, k)) {
    for (auto pos : majority_positions(d)) {
      const std::size_t* nearest = table->row(pos);
      std::vector<RowId> ids;
      std::size_t minority = 0;
      for (std::size_t j = 0; j < k; ++j) {
        ids.push_back(d.row_ids()[nearest[j]]);
        minority += d.labels()[nearest[j]];
      }
      cache[d.row_ids()[pos]] = {std::move(ids), minority_majority_vote(minority, k)};
    }
  }

  SamplerOutcome out{d, {}, 0};
  while (out.passes < max_iter) {
    const LabeledDataset& current = out.kept;
    if (current.rows() <= k) break;
    const auto majority = majority_positions(current);

    std::vector<std::size_t> stale;
    for (auto pos : majority) {
      const auto it = cache.find(current.row_ids()[pos]);
      bool fresh = it != cache.end();
      if (fresh) {
        for (RowId nb : it->second.neighbors) {
          if (last_removed.contains(nb)) {
            fresh = false;
            break;
          }
        }
      }
      if (!fresh) stale.push_back(pos);
    }
    std::vector<neighbors::NeighborQueryResult> nn;
    if (!stale.empty()) nn = neighbors::build_index(current, strategy).query_self(stale, k);
    for (std::size_t i = 0; i < stale.size(); ++i) {
      std::size_t minority = 0;
      for (auto pos : nn[i].positions) minority += current.labels()[pos];
      cache[current.row_ids()[stale[i]]] = {nn[i].neighbor_ids, minority_majority_vote(minority, k)};
    }

    std::vector<char> remove(current.rows(), 0);
    bool any = false;
    for (auto pos : majority) {
      if (cache.at(current.row_ids()[pos]).remove) {
        remove[pos] = 1;
        any = true;
      }
    }
    ++out.passes;
    if (!any) break;
    auto [kept, removed] = apply_removals(current, remove, RemovalReason::edited);
    last_removed.clear();
    for (const auto& r : removed) {
      last_removed.insert(r.row_id);
      cache.erase(r.row_id);
    }
    out.kept = std::move(kept);
    append(out.removed, std::move(removed));
  }
  return out;
}

std::vector<std::pair<RowId, RowId>> tomek_links(const LabeledDataset& d,
                                                 neighbors::IndexStrategy strategy,
                                                 const NeighborTable* table) {
  require_both_classes(d, "tomek_links");
  std::vector<std::size_t> first(d.rows());
  if (table && table->covers(d, 1)) {
    for (std::size_t i = 0; i < d.rows(); ++i) first[i] = table->row(i)[0];
  } else {
    std::vector<std::size_t> all(d.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto nn = neighbors::build_index(d, strategy).query_self(all, 1);
    for (std::size_t i = 0; i < d.rows(); ++i) first[i] = nn[i].positions.front();
  }
  std::vector<std::pair<RowId, RowId>> links;
  for (std::size_t a = 0; a < d.rows(); ++a) {
    const auto b = first[a];
    if (first[b] == a && d.labels()[a] != d.labels()[b] &&
        d.row_ids()[a] < d.row_ids()[b]) {
      links.emplace_back(d.row_ids()[a], d.row_ids()[b]);
    }
  }
  std::sort(links.begin(), links.end());
  return links;
}

std::vector<RowId> cnn_visit_order(const LabeledDataset& d, std::uint64_t seed) {
  std::vector<RowId> order;
  for (auto pos : majority_positions(d)) order.push_back(d.row_ids()[pos]);
  Rng rng(seed);
  rng.shuffle(order);
  return order;
}

SamplerOutcome cnn_condense(const LabeledDataset& d, std::uint64_t seed) {
  require_both_classes(d, "cnn_condense");
  const auto order = cnn_visit_order(d, seed);
  std::unordered_map<RowId, std::size_t> position;
  for (std::size_t i = 0; i < d.rows(); ++i) position.emplace(d.row_ids()[i], i);

  const std::size_t dims = d.dims();
  std::vector<double> store;  // row-major copies of stored points
  std::vector<RowId> store_ids;
  std::vector<Label> store_labels;
  auto add = [&](std::size_t pos) {
    const auto row = d.features().row(static_cast<Eigen::Index>(pos));
    store.insert(store.end(), row.data(), row.data() + dims);
    store_ids.push_back(d.row_ids()[pos]);
    store_labels.push_back(d.labels()[pos]);
  };
  for (std::size_t i = 0; i < d.rows(); ++i) {
    if (d.labels()[i] == kFraud) add(i);
  }

  std::vector<char> stored(d.rows(), 0);
  stored[position.at(order.front())] = 1;
  add(position.at(order.front()));

  for (std::size_t v = 1; v < order.size(); ++v) {
    const auto pos = position.at(order[v]);
    const double* q = d.features().row(static_cast<Eigen::Index>(pos)).data();
    double best = std::numeric_limits<double>::infinity();
    RowId best_id = 0;
    Label best_label = kGenuine;
    for (std::size_t s = 0; s < store_ids.size(); ++s) {
      const double* p = &store[s * dims];
      double d2 = 0.0;
      for (std::size_t j = 0; j < dims && d2 <= best; ++j) {
        const double diff = p[j] - q[j];
        d2 += diff * diff;
      }
      if (d2 < best || (d2 == best && store_ids[s] < best_id)) {
        best = d2;
        best_id = store_ids[s];
        best_label = store_labels[s];
      }
    }
    if (best_label == kFraud) {
      stored[pos] = 1;
      add(pos);
    }
  }

  std::vector<char> remove(d.rows(), 0);
  for (std::size_t i = 0; i < d.rows(); ++i) remove[i] = d.labels()[i] == kGenuine && !stored[i];
  auto [kept, removed] = apply_removals(d, remove, RemovalReason::redundant);
  return {std::move(kept), std::move(removed), 0};
}

namespace {

SamplerOutcome remove_tomek_majority(const LabeledDataset& d, neighbors::IndexStrategy strategy,
                                     const NeighborTable* table) {
  std::unordered_set<RowId> linked;
  for (const auto& [a, b] : tomek_links(d, strategy, table)) {
    linked.insert(a);
    linked.insert(b);
  }
  std::vector<char> remove(d.rows(), 0);
  for (std::size_t i = 0; i < d.rows(); ++i) {
    remove[i] = d.labels()[i] == kGenuine && linked.contains(d.row_ids()[i]);
  }
  auto [kept, removed] = apply_removals(d, remove, RemovalReason::tomek);
  return {std::move(kept), std::move(removed), 0};
}

bool has_majority(const LabeledDataset& d) { return class_counts(d).majority > 0; }

}  // namespace

SamplerOutcome oss(const LabeledDataset& d, const SamplerConfig& cfg, const NeighborTable* table) {
  require_both_classes(d, "oss");
  SamplerOutcome first = cfg.oss_order == OssOrder::tomek_first ? remove_tomek_majority(d, cfg.strategy, table)
                                                          : cnn_condense(d, cfg.seed);
  if (!has_majority(first.kept)) return first;
  SamplerOutcome second = cfg.oss_order == OssOrder::tomek_first
                              ? cnn_condense(first.kept, cfg.seed)
                              : remove_tomek_majority(first.kept, cfg.strategy, nullptr);
  append(first.removed, std::move(second.removed));
  first.kept = std::move(second.kept);
  return first;
}

SamplerOutcome ncr(const LabeledDataset& d, const SamplerConfig& cfg, const NeighborTable* table) {
  require_both_classes(d, "ncr");
  SamplerOutcome out = enn(d, cfg.enn_k, cfg.strategy, table);
  const auto after_enn = class_counts(out.kept);
  // Guard: the majority must stay above half the minority size.
  if (2 * after_enn.majority <= after_enn.minority) return out;
  SamplerOutcome condensed = cnn_condense(out.kept, cfg.seed);
  if (2 * class_counts(condensed.kept).majority <= after_enn.minority) return out;
  append(out.removed, std::move(condensed.removed));
  out.kept = std::move(condensed.kept);
  return out;
}

SamplerOutcome enforce_ratio(SamplerOutcome o, double target_ratio, std::uint64_t seed) {
  if (!(target_ratio >= 1.0)) throw Error("enforce_ratio: target ratio must be at least 1");
  const auto c = class_counts(o.kept);
  if (c.minority == 0) return o;
  if (!(static_cast<double>(c.majority) > target_ratio * static_cast<double>(c.minority))) return o;
  const auto target =
      static_cast<std::size_t>(std::ceil(target_ratio * static_cast<double>(c.minority)));
  if (target >= c.majority) return o;

  auto majority = majority_positions(o.kept);
  Rng rng(seed);
  rng.shuffle(majority);
  std::vector<char> remove(o.kept.rows(), 0);
  for (std::size_t i = 0; i < c.majority - target; ++i) remove[majority[i]] = 1;
  auto [kept, removed] = apply_removals(o.kept, remove, RemovalReason::ratio);
  o.kept = std::move(kept);
  append(o.removed, std::move(removed));
  return o;
}

std::size_t neighbor_need(const SamplerConfig& cfg) {
  switch (cfg.method) {
    case Method::none: return 0;
    case Method::oss: return cfg.oss_order == OssOrder::tomek_first ? 1 : 0;
    default: return cfg.enn_k;
  }
}

SamplerOutcome run_sampler(const LabeledDataset& d, const SamplerConfig& cfg,
                           std::uint64_t ratio_seed, const NeighborTable* table) {
  SamplerOutcome out;
  switch (cfg.method) {
    case Method::none: out = {d, {}, 0}; break;
    case Method::enn: out = enn(d, cfg.enn_k, cfg.strategy, table); break;
    case Method::renn: out = renn(d, cfg.enn_k, cfg.renn_max_iter, cfg.strategy, table); break;
    case Method::oss: out = oss(d, cfg, table); break;
    case Method::ncr: out = ncr(d, cfg, table); break;
  }
  if (cfg.target_ratio) out = enforce_ratio(std::move(out), *cfg.target_ratio, ratio_seed);
  return out;
}

void write_audit_csv(const SamplerOutcome& o, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "row_id,label,reason\n";
  for (const auto& r : o.removed) {
    out << r.row_id << ',' << static_cast<int>(r.label) << ',' << to_string(r.reason) << '\n';
  }
  if (!out) throw Error("error writing " + path.string());
}

std::vector<Removal> read_audit_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "row_id,label,reason") throw ParseError(path.string() + ": bad audit header", 1);
  std::vector<Removal> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw ParseError(path.string() + ": malformed audit row", line_no);
    }
    try {
      const auto label = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
      if (label != 0 && label != 1) throw Error("label");
      out.push_back({std::stoull(line.substr(0, c1)), static_cast<Label>(label),
                     parse_reason(line.substr(c2 + 1))});
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": malformed audit row", line_no);
    }
  }
  return out;
}

}  // namespace fraudkit::resample

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fraudkit/dataset.hpp"
#include "fraudkit/neighbors.hpp"

namespace fraudkit::resample {

// Under-sampling rules. Every rule removes majority (label 0) rows only.
enum class Method { none, enn, renn, oss, ncr };

// tomek_first: Tomek-link removal, then condensation. condense_first: the
// classic order, condensation then Tomek-link removal.
enum class OssOrder { tomek_first, condense_first };

enum class RemovalReason { edited, tomek, redundant, ratio };

std::string to_string(Method m);
std::string to_string(OssOrder o);
std::string to_string(RemovalReason r);
Method parse_method(const std::string& s);
OssOrder parse_oss_order(const std::string& s);
RemovalReason parse_reason(const std::string& s);

struct SamplerConfig {
  Method method = Method::none;
  std::size_t enn_k = 3;
  std::size_t renn_max_iter = 100;
  std::uint64_t seed = 0;
  std::optional<double> target_ratio = 10.0;  // majority : minority
  OssOrder oss_order = OssOrder::tomek_first;
  neighbors::IndexStrategy strategy = neighbors::IndexStrategy::automatic;
};

struct Removal {
  RowId row_id;
  Label label;
  RemovalReason reason;
  bool operator==(const Removal&) const = default;
};

struct SamplerOutcome {
  LabeledDataset kept;           // surviving rows, input order
  std::vector<Removal> removed;  // stage by stage, ascending id within a stage
  std::size_t passes = 0;        // ENN passes executed (ENN, RENN, NCR)

  std::vector<RowId> removed_ids() const;
};

// Leave-one-out k nearest neighbours (row positions, nearest first) of
// every row of one dataset. ENN, RENN, Tomek links, OSS and NCR accept a
// table for their input set and then skip their own full neighbour pass;
// a table with a larger k serves any smaller k.
struct NeighborTable {
  std::size_t k = 0;
  std::vector<RowId> row_ids;        // identifies the dataset it was built for
  std::vector<std::size_t> nearest;  // rows * k

  bool covers(const LabeledDataset& d, std::size_t need) const;
  const std::size_t* row(std::size_t pos) const { return nearest.data() + pos * k; }
};

NeighborTable neighbor_table(const LabeledDataset& d, std::size_t k,
                             neighbors::IndexStrategy strategy = neighbors::IndexStrategy::automatic);

// Removes every majority row for which strictly more than k/2 of its k
// nearest other rows are minority. Decisions all use the input set.
SamplerOutcome enn(const LabeledDataset& d, std::size_t k,
                   neighbors::IndexStrategy strategy = neighbors::IndexStrategy::automatic,
                   const NeighborTable* table = nullptr);

// ENN repeated on the survivors until a pass removes nothing or max_iter
// passes have run.
SamplerOutcome renn(const LabeledDataset& d, std::size_t k, std::size_t max_iter,
                    neighbors::IndexStrategy strategy = neighbors::IndexStrategy::automatic,
                    const NeighborTable* table = nullptr);

// Opposite-label pairs that are each other's nearest neighbour, as
// (lower id, higher id), sorted.
std::vector<std::pair<RowId, RowId>> tomek_links(
    const LabeledDataset& d, neighbors::IndexStrategy strategy = neighbors::IndexStrategy::automatic,
    const NeighborTable* table = nullptr);

// Visiting order of the majority rows used by cnn_condense: the first
// entry seeds the store, the rest are visited in sequence.
std::vector<RowId> cnn_visit_order(const LabeledDataset& d, std::uint64_t seed);

// One-step condensed nearest neighbour. The store starts with every
// minority row plus the first majority row of cnn_visit_order; each
// remaining majority row joins the store iff the store's 1-NN labels it
// minority. Majority rows never stored are removed as redundant.
SamplerOutcome cnn_condense(const LabeledDataset& d, std::uint64_t seed);

// One-sided selection: Tomek-link majority members plus condensation, in
// the order given by cfg.oss_order.
SamplerOutcome oss(const LabeledDataset& d, const SamplerConfig& cfg, const NeighborTable* table = nullptr);

// Neighbourhood cleaning: ENN (cfg.enn_k), then condensation of the
// survivors unless that would leave majority <= minority / 2, in which
// case the condensation stage is skipped.
SamplerOutcome ncr(const LabeledDataset& d, const SamplerConfig& cfg, const NeighborTable* table = nullptr);

// Randomly drops further majority rows until majority == ceil(ratio *
// minority), when the current ratio exceeds `target_ratio`.
SamplerOutcome enforce_ratio(SamplerOutcome o, double target_ratio, std::uint64_t seed);

// The configured method followed by enforce_ratio when a target is set.
// `ratio_seed` drives the ratio step; cfg.seed drives condensation.
SamplerOutcome run_sampler(const LabeledDataset& d, const SamplerConfig& cfg,
                           std::uint64_t ratio_seed, const NeighborTable* table = nullptr);

// Largest k any neighbour-based stage of `cfg` needs on its input set, or 0.
std::size_t neighbor_need(const SamplerConfig& cfg);

// row_id,label,reason
void write_audit_csv(const SamplerOutcome& o, const std::filesystem::path& path);
std::vector<Removal> read_audit_csv(const std::filesystem::path& path);

}  // namespace fraudkit::resample

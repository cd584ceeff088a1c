#include "fraudkit/config.hpp"

#include <algorithm>
#include <fstream>

#include "fraudkit/error.hpp"

namespace fraudkit {

using nlohmann::json;

std::string to_string(ResampleScope s) {
  return s == ResampleScope::before_split ? "before_split" : "train_only";
}

std::string to_string(neighbors::IndexStrategy s) {
  switch (s) {
    case neighbors::IndexStrategy::brute: return "brute";
    case neighbors::IndexStrategy::tree: return "tree";
    case neighbors::IndexStrategy::automatic: return "auto";
  }
  return "?";
}

std::string to_string(net::Optimizer o) { return o == net::Optimizer::adam ? "adam" : "sgd"; }
std::string to_string(ingest::Scaling s) { return s == ingest::Scaling::zscore ? "zscore" : "none"; }
std::string to_string(ingest::FitScope s) {
  return s == ingest::FitScope::whole_dataset ? "whole_dataset" : "train_only";
}

namespace {

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// Collects field errors while reading a JSON tree.
class FieldReader {
 public:
  std::vector<std::string> errors;

  void error(const std::string& path, const std::string& msg) { errors.push_back(path + ": " + msg); }

  bool object(const json& j, const std::string& path) {
    if (!j.is_object()) {
      error(path, "expected an object");
      return false;
    }
    return true;
  }

  void known_keys(const json& obj, const std::string& prefix, const std::vector<std::string>& keys) {
    for (const auto& [key, value] : obj.items()) {
      if (std::find(keys.begin(), keys.end(), key) != keys.end()) continue;
      std::string best;
      std::size_t best_d = SIZE_MAX;
      for (const auto& k : keys) {
        const auto d = edit_distance(key, k);
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      std::string msg = "unknown key";
      if (best_d <= std::max<std::size_t>(2, key.size() / 3)) msg += " (did you mean '" + best + "'?)";
      error(join(prefix, key), msg);
    }
  }

  static std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
  }

  template <typename T, typename Check>
  void number(const json& obj, const std::string& prefix, const std::string& key, T& out, Check ok,
              const char* requirement) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    const auto path = join(prefix, key);
    if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        error(path, "expected a non-negative integer");
        return;
      }
      out = static_cast<T>(v.get<std::uint64_t>());
    } else {
      if (!v.is_number()) {
        error(path, "expected a number");
        return;
      }
      out = v.get<T>();
    }
    if (!ok(out)) error(path, requirement);
  }

  template <typename T>
  void unsigned_value(const json& obj, const std::string& prefix, const std::string& key, T& out) {
    number(obj, prefix, key, out, [](T) { return true; }, "");
  }

  void boolean(const json& obj, const std::string& prefix, const std::string& key, bool& out) {
    if (!obj.contains(key)) return;
    if (!obj.at(key).is_boolean()) {
      error(join(prefix, key), "expected true or false");
      return;
    }
    out = obj.at(key).get<bool>();
  }

  template <typename Parse>
  void choice(const json& obj, const std::string& prefix, const std::string& key, Parse parse) {
    if (!obj.contains(key)) return;
    if (!obj.at(key).is_string()) {
      error(join(prefix, key), "expected a string");
      return;
    }
    try {
      parse(obj.at(key).get<std::string>());
    } catch (const Error& e) {
      error(join(prefix, key), e.what());
    }
  }
};

ingest::Scaling parse_scaling(const std::string& s) {
  if (s == "zscore") return ingest::Scaling::zscore;
  if (s == "none") return ingest::Scaling::none;
  throw Error("expected zscore or none, got '" + s + "'");
}

ingest::FitScope parse_fit_scope(const std::string& s) {
  if (s == "whole_dataset") return ingest::FitScope::whole_dataset;
  if (s == "train_only") return ingest::FitScope::train_only;
  throw Error("expected whole_dataset or train_only, got '" + s + "'");
}

ResampleScope parse_resample_scope(const std::string& s) {
  if (s == "before_split") return ResampleScope::before_split;
  if (s == "train_only") return ResampleScope::train_only;
  throw Error("expected before_split or train_only, got '" + s + "'");
}

neighbors::IndexStrategy parse_strategy(const std::string& s) {
  if (s == "auto") return neighbors::IndexStrategy::automatic;
  if (s == "brute") return neighbors::IndexStrategy::brute;
  if (s == "tree") return neighbors::IndexStrategy::tree;
  throw Error("expected auto, brute or tree, got '" + s + "'");
}

net::Optimizer parse_optimizer(const std::string& s) {
  if (s == "adam") return net::Optimizer::adam;
  if (s == "sgd") return net::Optimizer::sgd;
  throw Error("expected adam or sgd, got '" + s + "'");
}

const std::vector<std::string> kTopKeys = {"data_path",  "output_dir", "master_seed",    "preprocess",
                                           "split",      "resample_scope", "samplers",   "knn",
                                           "neighbor_index", "train"};
const std::vector<std::string> kPreprocessKeys = {"drop_columns", "scaling", "column_scaling", "fit_scope"};
const std::vector<std::string> kSplitKeys = {"train_fraction", "stratified", "seed"};
const std::vector<std::string> kSamplerKeys = {"method", "enn_k",      "renn_max_iter", "seed",
                                               "ratio_seed", "target_ratio", "oss_order"};
const std::vector<std::string> kKnnKeys = {"k"};
const std::vector<std::string> kTrainKeys = {"epochs",        "batch_size",         "optimizer",
                                             "learning_rate", "classify_threshold", "seed"};

}  // namespace

ConfigValidation parse_config(const json& doc) {
  FieldReader r;
  ExperimentConfig c;
  if (!r.object(doc, "<root>")) return {std::nullopt, r.errors};
  r.known_keys(doc, "", kTopKeys);

  if (!doc.contains("data_path") || !doc.at("data_path").is_string() ||
      doc.at("data_path").get<std::string>().empty()) {
    r.error("data_path", "required, expected a non-empty string");
  } else {
    c.data_path = doc.at("data_path").get<std::string>();
  }
  if (doc.contains("output_dir")) {
    if (!doc.at("output_dir").is_string() || doc.at("output_dir").get<std::string>().empty()) {
      r.error("output_dir", "expected a non-empty string");
    } else {
      c.output_dir = doc.at("output_dir").get<std::string>();
    }
  }
  r.unsigned_value(doc, "", "master_seed", c.master_seed);
  r.choice(doc, "", "resample_scope", [&](const std::string& s) { c.resample_scope = parse_resample_scope(s); });
  r.choice(doc, "", "neighbor_index", [&](const std::string& s) { c.index_strategy = parse_strategy(s); });

  if (doc.contains("preprocess") && r.object(doc.at("preprocess"), "preprocess")) {
    const auto& p = doc.at("preprocess");
    r.known_keys(p, "preprocess", kPreprocessKeys);
    if (p.contains("drop_columns")) {
      const auto& dc = p.at("drop_columns");
      if (!dc.is_array() || !std::all_of(dc.begin(), dc.end(), [](const json& v) { return v.is_string(); })) {
        r.error("preprocess.drop_columns", "expected an array of column names");
      } else {
        c.preprocess.drop_columns.clear();
        for (const auto& v : dc) c.preprocess.drop_columns.insert(v.get<std::string>());
      }
    }
    r.choice(p, "preprocess", "scaling", [&](const std::string& s) { c.preprocess.default_scaling = parse_scaling(s); });
    r.choice(p, "preprocess", "fit_scope", [&](const std::string& s) { c.preprocess.fit_scope = parse_fit_scope(s); });
    if (p.contains("column_scaling") && r.object(p.at("column_scaling"), "preprocess.column_scaling")) {
      for (const auto& [col, v] : p.at("column_scaling").items()) {
        r.choice(p.at("column_scaling"), "preprocess.column_scaling", col,
                 [&](const std::string& s) { c.preprocess.column_scaling[col] = parse_scaling(s); });
      }
    }
  }

  c.split.seed = c.master_seed + 1;
  if (doc.contains("split") && r.object(doc.at("split"), "split")) {
    const auto& s = doc.at("split");
    r.known_keys(s, "split", kSplitKeys);
    r.number(s, "split", "train_fraction", c.split.train_fraction,
             [](double f) { return f > 0.0 && f < 1.0; }, "must lie strictly between 0 and 1");
    r.boolean(s, "split", "stratified", c.split.stratified);
    r.unsigned_value(s, "split", "seed", c.split.seed);
  }

  std::vector<json> sampler_docs;
  if (doc.contains("samplers")) {
    const auto& s = doc.at("samplers");
    if (!s.is_array()) {
      r.error("samplers", "expected an array");
    } else if (s.empty()) {
      r.error("samplers", "at least one sampler is required (use \"none\" for a baseline)");
    } else {
      sampler_docs.assign(s.begin(), s.end());
    }
  } else {
    sampler_docs = {"ENN", "RENN", "OSS", "NCR"};
  }
  for (std::size_t i = 0; i < sampler_docs.size(); ++i) {
    const std::string path = "samplers[" + std::to_string(i) + "]";
    json entry = sampler_docs[i].is_string() ? json{{"method", sampler_docs[i]}} : sampler_docs[i];
    if (!r.object(entry, path)) continue;
    r.known_keys(entry, path, kSamplerKeys);
    SamplerEntry e;
    e.sampler.seed = c.master_seed + 100 + i;
    e.ratio_seed = c.master_seed + 200 + i;
    if (!entry.contains("method")) {
      r.error(path + ".method", "required");
    } else {
      r.choice(entry, path, "method", [&](const std::string& m) { e.sampler.method = resample::parse_method(m); });
    }
    r.number(entry, path, "enn_k", e.sampler.enn_k, [](std::size_t k) { return k >= 1; }, "must be >= 1");
    r.number(entry, path, "renn_max_iter", e.sampler.renn_max_iter, [](std::size_t k) { return k >= 1; },
             "must be >= 1");
    r.unsigned_value(entry, path, "seed", e.sampler.seed);
    r.unsigned_value(entry, path, "ratio_seed", e.ratio_seed);
    // The none baseline trains on unsampled data unless a ratio is asked for.
    if (e.sampler.method == resample::Method::none) e.sampler.target_ratio.reset();
    if (entry.contains("target_ratio")) {
      if (entry.at("target_ratio").is_null()) {
        e.sampler.target_ratio.reset();
      } else {
        double ratio = 0.0;
        r.number(entry, path, "target_ratio", ratio, [](double v) { return v >= 1.0; }, "must be >= 1 (or null)");
        e.sampler.target_ratio = ratio;
      }
    }
    r.choice(entry, path, "oss_order", [&](const std::string& o) { e.sampler.oss_order = resample::parse_oss_order(o); });
    c.samplers.push_back(e);
  }

  if (doc.contains("knn") && r.object(doc.at("knn"), "knn")) {
    r.known_keys(doc.at("knn"), "knn", kKnnKeys);
    r.number(doc.at("knn"), "knn", "k", c.knn_k, [](std::size_t k) { return k >= 1; }, "must be >= 1");
  }

  c.dnn_seed = c.master_seed + 300;
  if (doc.contains("train") && r.object(doc.at("train"), "train")) {
    const auto& t = doc.at("train");
    r.known_keys(t, "train", kTrainKeys);
    r.number(t, "train", "epochs", c.train.epochs, [](std::size_t v) { return v >= 1; }, "must be >= 1");
    r.number(t, "train", "batch_size", c.train.batch_size, [](std::size_t v) { return v >= 1; }, "must be >= 1");
    r.choice(t, "train", "optimizer", [&](const std::string& s) { c.train.optimizer = parse_optimizer(s); });
    r.number(t, "train", "learning_rate", c.train.learning_rate, [](double v) { return v >= 0.0; },
             "must be >= 0");
    r.number(t, "train", "classify_threshold", c.train.classify_threshold,
             [](double v) { return v > 0.0 && v < 1.0; }, "must lie strictly between 0 and 1");
    r.unsigned_value(t, "train", "seed", c.dnn_seed);
  }

  for (auto& e : c.samplers) e.sampler.strategy = c.index_strategy;
  if (c.preprocess.fit_scope == ingest::FitScope::train_only &&
      c.resample_scope != ResampleScope::train_only) {
    r.error("preprocess.fit_scope",
            "train_only requires resample_scope = train_only (samplers need scaled features "
            "before the split otherwise)");
  }

  if (!r.errors.empty()) return {std::nullopt, r.errors};
  return {c, {}};
}

ConfigValidation validate_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return {std::nullopt, {path.string() + ": cannot open"}};
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    return {std::nullopt, {path.string() + ": " + e.what()}};
  }
  auto result = parse_config(doc);
  // Relative paths in a config file are relative to the file itself.
  if (result.config) {
    const auto base = path.parent_path();
    auto& c = *result.config;
    if (c.data_path.is_relative()) c.data_path = (base / c.data_path).lexically_normal();
    if (c.output_dir.is_relative()) c.output_dir = (base / c.output_dir).lexically_normal();
  }
  return result;
}

json to_json(const ExperimentConfig& c) {
  json preprocess = {
      {"drop_columns", json(std::vector<std::string>(c.preprocess.drop_columns.begin(),
                                                     c.preprocess.drop_columns.end()))},
      {"scaling", to_string(c.preprocess.default_scaling)},
      {"column_scaling", json::object()},
      {"fit_scope", to_string(c.preprocess.fit_scope)},
  };
  for (const auto& [col, s] : c.preprocess.column_scaling) preprocess["column_scaling"][col] = to_string(s);

  json samplers = json::array();
  for (const auto& e : c.samplers) {
    samplers.push_back({
        {"method", resample::to_string(e.sampler.method)},
        {"enn_k", e.sampler.enn_k},
        {"renn_max_iter", e.sampler.renn_max_iter},
        {"seed", e.sampler.seed},
        {"ratio_seed", e.ratio_seed},
        {"target_ratio", e.sampler.target_ratio ? json(*e.sampler.target_ratio) : json(nullptr)},
        {"oss_order", resample::to_string(e.sampler.oss_order)},
    });
  }
  return {
      {"data_path", c.data_path.string()},
      {"output_dir", c.output_dir.string()},
      {"master_seed", c.master_seed},
      {"preprocess", preprocess},
      {"split", {{"train_fraction", c.split.train_fraction}, {"stratified", c.split.stratified}, {"seed", c.split.seed}}},
      {"resample_scope", to_string(c.resample_scope)},
      {"samplers", samplers},
      {"knn", {{"k", c.knn_k}}},
      {"neighbor_index", to_string(c.index_strategy)},
      {"train",
       {{"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"optimizer", to_string(c.train.optimizer)},
        {"learning_rate", c.train.learning_rate},
        {"classify_threshold", c.train.classify_threshold},
        {"seed", c.dnn_seed}}},
  };
}

}  // namespace fraudkit

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "datamech/canonical.hpp"
#include "datamech/dates.hpp"
#include "datamech/digest.hpp"
#include "datamech/errors.hpp"
#include "datamech/rng.hpp"
#include "datamech/text.hpp"
#include "datamech/types.hpp"

namespace datamech {

// Deterministic stand-in for a pretrained sentence encoder: hashed word
// n-gram counts, L2-normalized.
struct EmbeddingConfig {
  int dimension = 256;
  int ngram_order = 2;
  int kmeans_k = 50;
  std::uint64_t kmeans_seed = 0;
  int kmeans_max_iters = 100;

  void validate() const {
    if (dimension < 8) throw ConfigError("embedding dimension must be >= 8");
    if (ngram_order < 1) throw ConfigError("ngram_order must be >= 1");
    if (kmeans_k < 1) throw ConfigError("kmeans_k must be >= 1");
    if (kmeans_max_iters < 1) throw ConfigError("kmeans_max_iters must be >= 1");
  }
};

struct DocEmbedding {
  std::vector<double> values;
  bool degenerate = false;  // no tokens: zero vector, left unnormalized
};

enum class DiversityMode { gini_simpson, shannon_normalized };

// Composite quality report for one agent, with reproducibility digests.
struct QualityReport {
  std::string agent_id;
  double cleanliness = 0.0;
  double diversity = 0.0;
  double novelty = 0.0;
  double metadata_richness = 0.0;
  double composite = 0.0;
  std::string params_hash;
  std::string content_hash;
};

inline DocEmbedding embed_document(const std::string& text, const EmbeddingConfig& cfg) {
  cfg.validate();
  DocEmbedding e;
  e.values.assign(static_cast<std::size_t>(cfg.dimension), 0.0);
  const std::vector<std::string> tokens = tokenize(text);
  if (tokens.empty()) {
    e.degenerate = true;
    return e;
  }
  for (int order = 1; order <= cfg.ngram_order; ++order) {
    if (static_cast<std::size_t>(order) > tokens.size()) break;
    for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
      std::string gram = std::to_string(order);
      for (int j = 0; j < order; ++j) {
        gram += '\x1f';
        gram += tokens[i + j];
      }
      const std::uint64_t h = fnv1a64(gram);
      const std::size_t idx = h % static_cast<std::uint64_t>(cfg.dimension);
      e.values[idx] += (h >> 63) ? 1.0 : -1.0;
    }
  }
  double norm = 0.0;
  for (double v : e.values) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    // All counts cancelled; treat like an empty document.
    e.degenerate = true;
    return e;
  }
  for (double& v : e.values) v /= norm;
  return e;
}

inline std::vector<DocEmbedding> embed_documents(const std::vector<std::string>& documents,
                                                 const EmbeddingConfig& cfg) {
  std::vector<DocEmbedding> out;
  out.reserve(documents.size());
  for (const auto& doc : documents) out.push_back(embed_document(doc, cfg));
  return out;
}

namespace detail {

inline double sq_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Seeded k-means++ followed by Lloyd iterations. Ties always resolve to the
// lowest index, so results are a pure function of (points, k, seed).
inline std::vector<int> kmeans(const std::vector<std::vector<double>>& points, int k,
                               std::uint64_t seed, int max_iters) {
  const std::size_t n = points.size();
  std::vector<std::vector<double>> centers;
  centers.reserve(static_cast<std::size_t>(k));
  Rng rng(seed);

  centers.push_back(points[rng.below(n)]);
  std::vector<double> best_d2(n, 0.0);
  while (centers.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d2 = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) d2 = std::min(d2, sq_distance(points[i], c));
      best_d2[i] = d2;
      total += d2;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double r = rng.unit() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += best_d2[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    }
    centers.push_back(points[pick]);
  }

  std::vector<int> assign(n, 0);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_dist = sq_distance(points[i], centers[0]);
      for (int c = 1; c < k; ++c) {
        const double d = sq_distance(points[i], centers[static_cast<std::size_t>(c)]);
        if (d < best_dist) {
          best_dist = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    for (int c = 0; c < k; ++c) {
      std::vector<double> mean(points[0].size(), 0.0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] == c) {
          for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += points[i][d];
          ++count;
        }
      }
      if (count > 0) {
        for (double& v : mean) v /= static_cast<double>(count);
        centers[static_cast<std::size_t>(c)] = std::move(mean);
      }
      // Empty clusters keep their previous center.
    }
  }
  return assign;
}

inline bool is_ascii_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
inline bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

inline std::size_t codepoint_length(const std::string& utf8) {
  std::size_t n = 0;
  for (unsigned char c : utf8) {
    if ((c & 0xc0) != 0x80) ++n;
  }
  return n;
}

}  // namespace detail

// Error count behind the cleanliness metric: non-printable characters,
// long letter/digit mixtures, character runs, and (optionally) tokens
// missing from a wordlist.
inline std::size_t count_cleanliness_errors(const DatasetDescriptor& dataset,
                                            const std::set<std::string>* wordlist = nullptr) {
  std::size_t errors = 0;
  for (const auto& doc : dataset.documents) {
    for (unsigned char c : doc) {
      if ((c < 0x20 && c != '\n' && c != '\t' && c != '\r') || c == 0x7f) ++errors;
    }
    for (const auto& token : tokenize(doc)) {
      bool has_letter = false;
      bool has_digit = false;
      for (char c : token) {
        has_letter = has_letter || detail::is_ascii_letter(c);
        has_digit = has_digit || detail::is_ascii_digit(c);
      }
      if (has_letter && has_digit && detail::codepoint_length(token) > 12) ++errors;

      // Each maximal run of >= 5 identical bytes counts once.
      std::size_t run = 1;
      for (std::size_t i = 1; i <= token.size(); ++i) {
        if (i < token.size() && token[i] == token[i - 1]) {
          ++run;
        } else {
          if (run >= 5) ++errors;
          run = 1;
        }
      }
      if (wordlist != nullptr && wordlist->find(token) == wordlist->end()) ++errors;
    }
  }
  return errors;
}

// Cleanliness = clamp(1 - scale_k * errors / token_count, 0, 1).
inline double cleanliness(const DatasetDescriptor& dataset, double scale_k,
                          const std::set<std::string>* wordlist = nullptr) {
  if (scale_k <= 0.0) throw ConfigError("cleanliness: scale_k must be > 0");
  if (dataset.token_count == 0) {
    throw DataError("cleanliness: dataset '" + dataset.id + "' has no tokens");
  }
  const double rate = static_cast<double>(count_cleanliness_errors(dataset, wordlist)) /
                      static_cast<double>(dataset.token_count);
  return std::clamp(1.0 - scale_k * rate, 0.0, 1.0);
}

// Clusters document embeddings and measures the cluster-size distribution.
// Documents are clustered in content-hash order, so the result does not
// depend on submission order.
inline double diversity(const DatasetDescriptor& dataset, const EmbeddingConfig& cfg,
                        DiversityMode mode = DiversityMode::shannon_normalized) {
  cfg.validate();
  if (dataset.documents.empty()) {
    throw DataError("diversity: dataset '" + dataset.id + "' has no documents");
  }
  const std::size_t n = dataset.documents.size();
  const int k_eff = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg.kmeans_k), n));
  if (k_eff == 1) return 0.0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::string> hashes(n);
  for (std::size_t i = 0; i < n; ++i) hashes[i] = sha256_hex(dataset.documents[i]);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return hashes[a] < hashes[b]; });

  std::vector<std::vector<double>> points;
  points.reserve(n);
  for (std::size_t i : order) {
    points.push_back(embed_document(dataset.documents[i], cfg).values);
  }

  const std::vector<int> assign = detail::kmeans(points, k_eff, cfg.kmeans_seed, cfg.kmeans_max_iters);
  std::vector<double> proportions(static_cast<std::size_t>(k_eff), 0.0);
  for (int a : assign) proportions[static_cast<std::size_t>(a)] += 1.0;
  for (double& p : proportions) p /= static_cast<double>(n);

  if (mode == DiversityMode::gini_simpson) {
    double sum_sq = 0.0;
    for (double p : proportions) sum_sq += p * p;
    return 1.0 - sum_sq;
  }
  double entropy = 0.0;
  for (double p : proportions) {
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return entropy / std::log(static_cast<double>(k_eff));
}

// Novelty = w1' * Recency + w2' * (1 - DuplicationScore).
inline double novelty(const DatasetDescriptor& dataset, const std::vector<DocEmbedding>& reference,
                      Date current_date, long max_range_days,
                      const std::array<double, 2>& weights, const EmbeddingConfig& cfg) {
  if (reference.empty()) throw ConfigError("novelty: reference corpus is empty");
  if (max_range_days <= 0) throw ConfigError("novelty: max_range_days must be > 0");
  if (dataset.documents.empty()) {
    throw DataError("novelty: dataset '" + dataset.id + "' has no documents");
  }

  double recency = 0.0;
  for (const Date& d : dataset.doc_dates) {
    const double age = static_cast<double>(current_date.days - d.days);
    recency += std::clamp(1.0 - age / static_cast<double>(max_range_days), 0.0, 1.0);
  }
  recency /= static_cast<double>(dataset.doc_dates.size());

  double duplication = 0.0;
  for (const auto& doc : dataset.documents) {
    const DocEmbedding e = embed_document(doc, cfg);
    double best = 0.0;
    for (const auto& ref : reference) {
      double dot = 0.0;
      for (std::size_t i = 0; i < e.values.size(); ++i) dot += e.values[i] * ref.values[i];
      best = std::max(best, dot);
    }
    duplication += std::clamp(best, 0.0, 1.0);
  }
  duplication /= static_cast<double>(dataset.documents.size());

  return weights[0] * recency + weights[1] * (1.0 - duplication);
}

// Fraction of expected metadata fields present with a non-empty value.
inline double metadata_richness(const DatasetDescriptor& dataset,
                                const std::vector<std::string>& expected_fields) {
  if (expected_fields.empty()) throw ConfigError("metadata_richness: expected_fields is empty");
  std::size_t filled = 0;
  for (const auto& field : expected_fields) {
    auto it = dataset.metadata.find(field);
    if (it != dataset.metadata.end() && it->second.has_value() && !it->second->empty()) ++filled;
  }
  return static_cast<double>(filled) / static_cast<double>(expected_fields.size());
}

// Full oracle parameter set. Everything that can influence a score is in
// here and is folded into params_hash.
struct OracleConfig {
  std::array<double, 4> quality_weights = {0.25, 0.25, 0.25, 0.25};
  std::array<double, 2> novelty_weights = {0.5, 0.5};
  double cleanliness_scale_k = 50.0;
  DiversityMode diversity_mode = DiversityMode::shannon_normalized;
  EmbeddingConfig embedding;
  std::vector<std::string> expected_fields = {"author", "date", "language", "license", "source"};
  Date current_date;
  long max_range_days = 365;
  std::vector<std::string> reference_docs;
  std::optional<std::set<std::string>> wordlist;

  json params_json() const {
    json j;
    j["quality_weights"] = quality_weights;
    j["novelty_weights"] = novelty_weights;
    j["cleanliness_scale_k"] = cleanliness_scale_k;
    j["diversity_mode"] =
        diversity_mode == DiversityMode::gini_simpson ? "gini_simpson" : "shannon_normalized";
    j["embedding"] = {{"dimension", embedding.dimension},
                      {"ngram_order", embedding.ngram_order},
                      {"kmeans_k", embedding.kmeans_k},
                      {"kmeans_seed", embedding.kmeans_seed},
                      {"kmeans_max_iters", embedding.kmeans_max_iters}};
    j["expected_fields"] = expected_fields;
    j["current_date"] = format_date(current_date);
    j["max_range_days"] = max_range_days;
    j["reference_digest"] = canonical_digest(json(reference_docs));
    j["wordlist_digest"] =
        wordlist
            ? json(canonical_digest(json(std::vector<std::string>(wordlist->begin(), wordlist->end()))))
            : json();
    return j;
  }
};

// Canonical serialization of a dataset, the preimage of content_hash.
inline json dataset_to_json(const DatasetDescriptor& d) {
  json docs = json::array();
  for (std::size_t i = 0; i < d.documents.size(); ++i) {
    docs.push_back({{"text", d.documents[i]}, {"date", format_date(d.doc_dates[i])}});
  }
  json meta = json::object();
  for (const auto& [key, value] : d.metadata) {
    meta[key] = value ? json(*value) : json();
  }
  return json{{"id", d.id},
              {"documents", docs},
              {"metadata", meta},
              {"token_count", d.token_count}};
}

// Composite score per the oracle configuration. Re-running on the same
// dataset and parameters reproduces the report byte for byte.
inline QualityReport score_dataset(const DatasetDescriptor& dataset, const OracleConfig& cfg) {
  dataset.validate();
  std::vector<DocEmbedding> reference;
  for (const auto& e : embed_documents(cfg.reference_docs, cfg.embedding)) {
    if (!e.degenerate) reference.push_back(e);
  }
  if (reference.empty()) throw ConfigError("score: reference corpus is empty or degenerate");

  QualityReport r;
  r.agent_id = dataset.id;
  r.cleanliness =
      cleanliness(dataset, cfg.cleanliness_scale_k, cfg.wordlist ? &*cfg.wordlist : nullptr);
  r.diversity = diversity(dataset, cfg.embedding, cfg.diversity_mode);
  r.novelty = novelty(dataset, reference, cfg.current_date, cfg.max_range_days,
                      cfg.novelty_weights, cfg.embedding);
  r.metadata_richness = metadata_richness(dataset, cfg.expected_fields);
  r.composite = cfg.quality_weights[0] * r.cleanliness + cfg.quality_weights[1] * r.diversity +
                cfg.quality_weights[2] * r.novelty + cfg.quality_weights[3] * r.metadata_richness;
  r.params_hash = canonical_digest(cfg.params_json());
  r.content_hash = canonical_digest(dataset_to_json(dataset));
  return r;
}

inline void to_json(json& j, const QualityReport& r) {
  j = json{{"agent_id", r.agent_id},
           {"cleanliness", r.cleanliness},
           {"diversity", r.diversity},
           {"novelty", r.novelty},
           {"metadata_richness", r.metadata_richness},
           {"composite", r.composite},
           {"params_hash", r.params_hash},
           {"content_hash", r.content_hash}};
}

inline void from_json(const json& j, QualityReport& r) {
  j.at("agent_id").get_to(r.agent_id);
  j.at("cleanliness").get_to(r.cleanliness);
  j.at("diversity").get_to(r.diversity);
  j.at("novelty").get_to(r.novelty);
  j.at("metadata_richness").get_to(r.metadata_richness);
  j.at("composite").get_to(r.composite);
  j.at("params_hash").get_to(r.params_hash);
  j.at("content_hash").get_to(r.content_hash);
}

}  // namespace datamech

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vimp/evalmetrics.hpp"

namespace vimp::retrieval {

// Brute-force Euclidean index over standardized drum embeddings. The
// standardization stats are computed over the whole embedding set (drums and
// imitations) so that query-time ranks match the evaluation harness exactly.
struct EmbeddingIndex {
  std::vector<double> mean, sd;  // per dimension; sd == 0 marks a dropped dim

  struct Entry {
    std::string id;
    dataio::DrumType drum_type = dataio::DrumType::kick;
    std::vector<double> v;  // standardized
  };
  std::vector<Entry> entries;

  int dim() const { return static_cast<int>(mean.size()); }
};

EmbeddingIndex build_index(const metrics::EmbeddingSet& emb);

struct Hit {
  std::string id;
  double distance = 0.0;
};

// Ascending distance, ties broken by id. class_filter restricts candidates.
std::vector<Hit> query(const EmbeddingIndex& idx, const std::vector<double>& raw_query, int k,
                       std::optional<dataio::DrumType> class_filter = std::nullopt);

// Index file, magic VIMPIDX.
void save_index(const std::string& path, const EmbeddingIndex& idx);
EmbeddingIndex load_index(const std::string& path);

}  // namespace vimp::retrieval

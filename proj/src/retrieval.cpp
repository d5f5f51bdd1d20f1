#include "vimp/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace vimp::retrieval {

EmbeddingIndex build_index(const metrics::EmbeddingSet& emb) {
  if (emb.entries.empty()) throw ValidationError("build_index: empty embedding set");
  const std::size_t d = emb.feature_names.size();

  EmbeddingIndex idx;
  idx.mean.assign(d, 0.0);
  idx.sd.assign(d, 0.0);
  for (const auto& e : emb.entries)
    for (std::size_t j = 0; j < d; ++j) idx.mean[j] += e.values[j];
  for (std::size_t j = 0; j < d; ++j) idx.mean[j] /= static_cast<double>(emb.entries.size());
  for (const auto& e : emb.entries)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = e.values[j] - idx.mean[j];
      idx.sd[j] += c * c;
    }
  for (std::size_t j = 0; j < d; ++j) {
    idx.sd[j] = std::sqrt(idx.sd[j] / static_cast<double>(emb.entries.size()));
    if (idx.sd[j] <= 1e-12) idx.sd[j] = 0.0;  // dropped dimension
  }

  for (const auto& e : emb.entries) {
    if (e.sound_type != dataio::SoundType::drum) continue;
    EmbeddingIndex::Entry entry;
    entry.id = e.id;
    entry.drum_type = e.drum_type;
    entry.v.resize(d);
    for (std::size_t j = 0; j < d; ++j)
      entry.v[j] = idx.sd[j] > 0.0 ? (e.values[j] - idx.mean[j]) / idx.sd[j] : 0.0;
    idx.entries.push_back(std::move(entry));
  }
  if (idx.entries.empty()) throw ValidationError("build_index: no drum embeddings to index");
  std::sort(idx.entries.begin(), idx.entries.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  return idx;
}

std::vector<Hit> query(const EmbeddingIndex& idx, const std::vector<double>& raw_query, int k,
                       std::optional<dataio::DrumType> class_filter) {
  if (static_cast<int>(raw_query.size()) != idx.dim())
    throw ValidationError("query: expected a vector of length " + std::to_string(idx.dim()));
  if (k <= 0) return {};

  std::vector<double> q(raw_query.size());
  for (std::size_t j = 0; j < q.size(); ++j)
    q[j] = idx.sd[j] > 0.0 ? (raw_query[j] - idx.mean[j]) / idx.sd[j] : 0.0;

  std::vector<Hit> hits;
  for (const auto& e : idx.entries) {
    if (class_filter && e.drum_type != *class_filter) continue;
    double acc = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) acc += (q[j] - e.v[j]) * (q[j] - e.v[j]);
    hits.push_back({e.id, std::sqrt(acc)});
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.id < b.id;
  });
  if (static_cast<int>(hits.size()) > k) hits.resize(k);
  return hits;
}

void save_index(const std::string& path, const EmbeddingIndex& idx) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os.write("VIMPIDX", 7);
  write_u16(os, 1);
  write_u32(os, static_cast<std::uint32_t>(idx.dim()));
  for (double v : idx.mean) write_f64(os, v);
  for (double v : idx.sd) write_f64(os, v);
  write_u32(os, static_cast<std::uint32_t>(idx.entries.size()));
  for (const auto& e : idx.entries) {
    write_str(os, e.id);
    write_u16(os, static_cast<std::uint16_t>(e.drum_type));
    for (double v : e.v) write_f64(os, v);
  }
  if (!os) throw IoError("short write to " + path);
}

EmbeddingIndex load_index(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[7];
  is.read(magic, 7);
  if (!is || std::memcmp(magic, "VIMPIDX", 7) != 0) throw FormatError(path + ": bad index magic");
  if (read_u16(is) != 1) throw FormatError(path + ": unsupported index version");
  EmbeddingIndex idx;
  const std::uint32_t dim = read_u32(is);
  idx.mean.resize(dim);
  idx.sd.resize(dim);
  for (auto& v : idx.mean) v = read_f64(is);
  for (auto& v : idx.sd) v = read_f64(is);
  const std::uint32_t count = read_u32(is);
  idx.entries.resize(count);
  for (auto& e : idx.entries) {
    e.id = read_str(is);
    e.drum_type = static_cast<dataio::DrumType>(read_u16(is));
    e.v.resize(dim);
    for (auto& v : e.v) v = read_f64(is);
  }
  return idx;
}

}  // namespace vimp::retrieval

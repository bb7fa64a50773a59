#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <queue>
#include <sstream>

#include "salm/errors.hpp"
#include "salm/retrieve.hpp"
#include "salm/rng.hpp"

namespace salm::retrieve {

namespace {

// (distance, id) ordering; the id component makes every comparison
// deterministic under distance ties.
using Scored = std::pair<double, uint32_t>;

}  // namespace

double AnnIndex::dist(const Eigen::VectorXd& q, uint32_t id) const {
  return 1.0 - q.dot(vectors_.col(static_cast<Eigen::Index>(id)));
}

std::vector<Scored> AnnIndex::search_layer(const Eigen::VectorXd& q, uint32_t entry, size_t ef,
                                           int level) const {
  std::vector<char> visited(nodes_.size(), 0);
  // candidates: closest first; results: farthest first, capped at ef
  std::priority_queue<Scored, std::vector<Scored>, std::greater<>> candidates;
  std::priority_queue<Scored> results;

  const double d0 = dist(q, entry);
  candidates.push({d0, entry});
  results.push({d0, entry});
  visited[entry] = 1;

  while (!candidates.empty()) {
    const auto [d, id] = candidates.top();
    if (d > results.top().first && results.size() >= ef) break;
    candidates.pop();

    for (uint32_t nb : nodes_[id].neighbors[static_cast<size_t>(level)]) {
      if (visited[nb]) continue;
      visited[nb] = 1;
      const double dn = dist(q, nb);
      if (results.size() < ef || dn < results.top().first) {
        candidates.push({dn, nb});
        results.push({dn, nb});
        if (results.size() > ef) results.pop();
      }
    }
  }

  std::vector<Scored> out;
  out.reserve(results.size());
  while (!results.empty()) {
    out.push_back(results.top());
    results.pop();
  }
  std::sort(out.begin(), out.end());
  return out;
}

void AnnIndex::connect(uint32_t id, int level, const std::vector<Scored>& candidates) {
  const size_t cap = level == 0 ? static_cast<size_t>(2 * params_.max_neighbors)
                                : static_cast<size_t>(params_.max_neighbors);
  const size_t want = std::min(candidates.size(), static_cast<size_t>(params_.max_neighbors));

  auto& own = nodes_[id].neighbors[static_cast<size_t>(level)];
  for (size_t i = 0; i < want; ++i) {
    const uint32_t nb = candidates[i].second;
    own.push_back(nb);
    auto& theirs = nodes_[nb].neighbors[static_cast<size_t>(level)];
    theirs.push_back(id);
    if (theirs.size() > cap) {
      // keep the cap closest links, ties by id
      const Eigen::VectorXd& v = vectors_.col(static_cast<Eigen::Index>(nb));
      std::vector<Scored> scored;
      scored.reserve(theirs.size());
      for (uint32_t t : theirs) scored.push_back({dist(v, t), t});
      std::sort(scored.begin(), scored.end());
      theirs.clear();
      for (size_t k = 0; k < cap; ++k) theirs.push_back(scored[k].second);
    }
  }
}

void AnnIndex::insert(uint32_t id, Rng& level_rng) {
  const double ml = 1.0 / std::log(static_cast<double>(params_.max_neighbors));
  const int level = static_cast<int>(std::floor(-std::log(level_rng.next_unit_open()) * ml));

  Node node;
  node.level = level;
  node.neighbors.resize(static_cast<size_t>(level) + 1);
  nodes_[id] = std::move(node);

  if (max_level_ < 0) {  // first point
    entry_point_ = id;
    max_level_ = level;
    return;
  }

  const Eigen::VectorXd q = vectors_.col(static_cast<Eigen::Index>(id));
  uint32_t ep = entry_point_;

  for (int lc = max_level_; lc > level; --lc) {
    ep = search_layer(q, ep, 1, lc).front().second;
  }
  for (int lc = std::min(level, max_level_); lc >= 0; --lc) {
    auto candidates = search_layer(q, ep, static_cast<size_t>(params_.ef_construction), lc);
    connect(id, lc, candidates);
    ep = candidates.front().second;
  }
  if (level > max_level_) {
    entry_point_ = id;
    max_level_ = level;
  }
}

AnnIndex AnnIndex::build(const Eigen::MatrixXd& vectors, const std::vector<int>& labels,
                         const AnnParams& params) {
  if (vectors.cols() == 0) throw ValidationError("ann_build: no vectors");
  if (static_cast<size_t>(vectors.cols()) != labels.size()) {
    throw ValidationError("ann_build: vector/label count mismatch");
  }
  if (params.max_neighbors < 2) throw ConfigError("ann_build: max_neighbors must be >= 2");
  if (params.ef_construction < 1) throw ConfigError("ann_build: ef_construction must be >= 1");

  AnnIndex index;
  index.params_ = params;
  index.vectors_ = vectors;
  index.labels_ = labels;
  index.nodes_.resize(labels.size());

  Rng level_rng(Rng::derive(params.seed, 0x686e7377ULL));
  for (uint32_t id = 0; id < labels.size(); ++id) index.insert(id, level_rng);
  return index;
}

std::vector<std::pair<size_t, double>> AnnIndex::query(const Eigen::VectorXd& q,
                                                       size_t k) const {
  return query(q, k, params_.ef_search);
}

std::vector<std::pair<size_t, double>> AnnIndex::query(const Eigen::VectorXd& q, size_t k,
                                                       int ef_search) const {
  if (nodes_.empty()) throw ValidationError("ann_query: empty index");
  if (k < 1) throw ValidationError("ann_query: k must be >= 1");
  if (k > size()) throw ValidationError("ann_query: k exceeds stored count");

  std::vector<Scored> found;
  if (static_cast<size_t>(ef_search) >= size()) {
    // Exact scan: with ef covering every stored point the graph walk adds
    // nothing, so degrade to brute force and guarantee recall 1.
    found.reserve(size());
    for (uint32_t id = 0; id < size(); ++id) found.push_back({dist(q, id), id});
    std::sort(found.begin(), found.end());
  } else {
    uint32_t ep = entry_point_;
    for (int lc = max_level_; lc >= 1; --lc) {
      ep = search_layer(q, ep, 1, lc).front().second;
    }
    const size_t ef = std::max<size_t>(static_cast<size_t>(std::max(ef_search, 1)), k);
    found = search_layer(q, ep, ef, 0);
  }

  std::vector<std::pair<size_t, double>> out;
  out.reserve(std::min(k, found.size()));
  for (size_t i = 0; i < found.size() && i < k; ++i) {
    out.emplace_back(found[i].second, found[i].first);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kAnnMagic[8] = {'S', 'A', 'L', 'M', 'H', 'N', 'S', 'W'};

template <typename T>
void put(std::string& buf, T v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(const std::string& buf, size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw ParseError("corrupt index: truncated file");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void AnnIndex::save(const std::filesystem::path& path) const {
  std::string buf;
  buf.append(kAnnMagic, sizeof(kAnnMagic));
  put<uint32_t>(buf, kAnnFormatVersion);
  put<int32_t>(buf, params_.max_neighbors);
  put<int32_t>(buf, params_.ef_construction);
  put<int32_t>(buf, params_.ef_search);
  put<uint64_t>(buf, params_.seed);
  put<uint64_t>(buf, static_cast<uint64_t>(vectors_.rows()));
  put<uint64_t>(buf, static_cast<uint64_t>(labels_.size()));
  put<uint32_t>(buf, entry_point_);
  put<int32_t>(buf, max_level_);
  for (int label : labels_) put<int32_t>(buf, label);
  buf.append(reinterpret_cast<const char*>(vectors_.data()),
             static_cast<size_t>(vectors_.size()) * sizeof(double));
  for (const auto& node : nodes_) {
    put<int32_t>(buf, node.level);
    for (const auto& adj : node.neighbors) {
      put<uint32_t>(buf, static_cast<uint32_t>(adj.size()));
      for (uint32_t id : adj) put<uint32_t>(buf, id);
    }
  }
  put<uint64_t>(buf, fnv1a64(buf));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

AnnIndex AnnIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();

  if (buf.size() < sizeof(kAnnMagic) + sizeof(uint64_t) ||
      std::memcmp(buf.data(), kAnnMagic, sizeof(kAnnMagic)) != 0) {
    throw ParseError("corrupt index: bad magic in '" + path.string() + "'");
  }
  {
    size_t tail = buf.size() - sizeof(uint64_t);
    const uint64_t stored = take<uint64_t>(buf, tail);
    if (stored != fnv1a64(std::string_view(buf.data(), buf.size() - sizeof(uint64_t)))) {
      throw ParseError("corrupt index: checksum mismatch in '" + path.string() + "'");
    }
  }

  size_t pos = sizeof(kAnnMagic);
  const auto version = take<uint32_t>(buf, pos);
  if (version != kAnnFormatVersion) {
    throw ParseError("unsupported index format version " + std::to_string(version));
  }

  AnnIndex index;
  index.params_.max_neighbors = take<int32_t>(buf, pos);
  index.params_.ef_construction = take<int32_t>(buf, pos);
  index.params_.ef_search = take<int32_t>(buf, pos);
  index.params_.seed = take<uint64_t>(buf, pos);
  const auto dim = take<uint64_t>(buf, pos);
  const auto count = take<uint64_t>(buf, pos);
  index.entry_point_ = take<uint32_t>(buf, pos);
  index.max_level_ = take<int32_t>(buf, pos);

  index.labels_.resize(count);
  for (auto& label : index.labels_) label = take<int32_t>(buf, pos);

  index.vectors_.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(count));
  const size_t vec_bytes = static_cast<size_t>(dim) * count * sizeof(double);
  if (pos + vec_bytes > buf.size()) throw ParseError("corrupt index: truncated vectors");
  std::memcpy(index.vectors_.data(), buf.data() + pos, vec_bytes);
  pos += vec_bytes;

  index.nodes_.resize(count);
  for (auto& node : index.nodes_) {
    node.level = take<int32_t>(buf, pos);
    if (node.level < 0 || node.level > 64) throw ParseError("corrupt index: bad level");
    node.neighbors.resize(static_cast<size_t>(node.level) + 1);
    for (auto& adj : node.neighbors) {
      const auto n = take<uint32_t>(buf, pos);
      adj.resize(n);
      for (auto& id : adj) {
        id = take<uint32_t>(buf, pos);
        if (id >= count) throw ParseError("corrupt index: neighbor id out of range");
      }
    }
  }
  return index;
}

}  // namespace salm::retrieve

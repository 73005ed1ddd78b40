#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "wardflow/isotime.hpp"
#include "wardflow/types.hpp"

namespace wardflow {

struct GraphSummary {
  std::size_t num_nodes = 0;
  std::size_t num_edges = 0;  // distinct directed edges, self-loops excluded
  double mean_clustering = 0.0;
  double mean_degree = 0.0;  // 2|E|/|V|
};

inline double mean_degree(std::size_t num_nodes, std::size_t num_edges) {
  if (num_nodes == 0) return 0.0;
  return 2.0 * static_cast<double>(num_edges) / static_cast<double>(num_nodes);
}

struct NodeDegrees {
  std::uint64_t in_weight = 0;   // self-loop weight included
  std::uint64_t out_weight = 0;  // self-loop weight included
  std::uint32_t neighbor_count = 0;  // union of in/out neighbors, self excluded
};

/// Immutable directed weighted graph for one calendar year. Nodes are the
/// venues with at least one transition endpoint in the period. Self-loops
/// are stored as edges but never enter neighbor sets, clustering, or the
/// summary's edge count.
class SnapshotGraph {
public:
  struct Edge {
    std::uint32_t origin;
    std::uint32_t dest;
    std::uint64_t weight;  // >= 1
  };

  SnapshotGraph() = default;

  /// Edges must be one entry per distinct (origin, dest) pair with its count.
  SnapshotGraph(int year, std::vector<Edge> edges) : year_(year) {
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
      return a.origin != b.origin ? a.origin < b.origin : a.dest < b.dest;
    });
    edges_ = std::move(edges);

    std::vector<std::uint32_t> ids;
    ids.reserve(edges_.size() * 2);
    for (const auto& e : edges_) {
      ids.push_back(e.origin);
      ids.push_back(e.dest);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    nodes_ = std::move(ids);

    const std::uint32_t n = static_cast<std::uint32_t>(nodes_.size());
    std::vector<std::uint32_t> out_deg(n, 0), in_deg(n, 0);
    total_weight_ = 0;
    nonself_edges_ = 0;
    for (auto& e : edges_) {
      total_weight_ += e.weight;
      if (e.origin != e.dest) ++nonself_edges_;
      std::uint32_t o = pos(e.origin), d = pos(e.dest);
      ++out_deg[o];
      ++in_deg[d];
    }
    out_off_.assign(n + 1, 0);
    in_off_.assign(n + 1, 0);
    for (std::uint32_t i = 0; i < n; ++i) {
      out_off_[i + 1] = out_off_[i] + out_deg[i];
      in_off_[i + 1] = in_off_[i] + in_deg[i];
    }
    out_dst_.resize(edges_.size());
    out_w_.resize(edges_.size());
    in_src_.resize(edges_.size());
    in_w_.resize(edges_.size());
    std::vector<std::uint32_t> ofill(out_off_.begin(), out_off_.end() - 1);
    std::vector<std::uint32_t> ifill(in_off_.begin(), in_off_.end() - 1);
    for (const auto& e : edges_) {
      std::uint32_t o = pos(e.origin), d = pos(e.dest);
      out_dst_[ofill[o]] = d;
      out_w_[ofill[o]++] = e.weight;
      in_src_[ifill[d]] = o;
      in_w_[ifill[d]++] = e.weight;
    }

    // Union neighborhood (in + out, self excluded), sorted per node.
    nbr_off_.assign(n + 1, 0);
    std::vector<std::uint32_t> scratch;
    std::vector<std::vector<std::uint32_t>> nbrs(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      scratch.clear();
      for (std::uint32_t k = out_off_[i]; k < out_off_[i + 1]; ++k)
        if (out_dst_[k] != i) scratch.push_back(out_dst_[k]);
      for (std::uint32_t k = in_off_[i]; k < in_off_[i + 1]; ++k)
        if (in_src_[k] != i) scratch.push_back(in_src_[k]);
      std::sort(scratch.begin(), scratch.end());
      scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
      nbrs[i] = scratch;
      nbr_off_[i + 1] = nbr_off_[i] + static_cast<std::uint32_t>(scratch.size());
    }
    nbr_.resize(nbr_off_[n]);
    for (std::uint32_t i = 0; i < n; ++i)
      std::copy(nbrs[i].begin(), nbrs[i].end(), nbr_.begin() + nbr_off_[i]);
  }

  int year() const { return year_; }
  std::size_t num_nodes() const { return nodes_.size(); }
  /// Distinct directed edges excluding self-loops (the summary convention).
  std::size_t num_edges() const { return nonself_edges_; }
  /// Distinct stored edges including self-loops.
  std::size_t stored_edges() const { return edges_.size(); }
  /// Sum of edge weights = retained transitions for the period.
  std::uint64_t total_weight() const { return total_weight_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::uint32_t>& nodes() const { return nodes_; }

  bool contains(std::uint32_t venue) const {
    return std::binary_search(nodes_.begin(), nodes_.end(), venue);
  }

  NodeDegrees node_degrees(std::uint32_t venue) const {
    std::uint32_t i = checked_pos(venue);
    NodeDegrees d;
    for (std::uint32_t k = in_off_[i]; k < in_off_[i + 1]; ++k) d.in_weight += in_w_[k];
    for (std::uint32_t k = out_off_[i]; k < out_off_[i + 1]; ++k) d.out_weight += out_w_[k];
    d.neighbor_count = nbr_off_[i + 1] - nbr_off_[i];
    return d;
  }

  /// C_i = L_i / (k_i (k_i - 1)) with k_i the union neighbor count and L_i
  /// the number of directed edges among those neighbors. 0 when k_i < 2.
  double local_clustering(std::uint32_t venue) const {
    std::uint32_t i = checked_pos(venue);
    std::vector<std::uint32_t> stamp(nodes_.size(), 0);
    return clustering_at(i, stamp, 1);
  }

  /// Clustering for every node, indexed like nodes().
  std::vector<double> all_clustering() const {
    std::vector<double> c(nodes_.size(), 0.0);
    std::vector<std::uint32_t> stamp(nodes_.size(), 0);
    for (std::uint32_t i = 0; i < nodes_.size(); ++i)
      c[i] = clustering_at(i, stamp, i + 1);
    return c;
  }

  GraphSummary summarize() const {
    GraphSummary s;
    s.num_nodes = num_nodes();
    s.num_edges = num_edges();
    if (s.num_nodes == 0) return s;
    auto c = all_clustering();
    double sum = 0.0;
    for (double v : c) sum += v;
    s.mean_clustering = sum / static_cast<double>(c.size());
    s.mean_degree = mean_degree(s.num_nodes, s.num_edges);
    return s;
  }

  /// Position of a venue in nodes(); callers must know the venue is present.
  std::uint32_t pos(std::uint32_t venue) const {
    return static_cast<std::uint32_t>(
        std::lower_bound(nodes_.begin(), nodes_.end(), venue) - nodes_.begin());
  }

private:
  std::uint32_t checked_pos(std::uint32_t venue) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), venue);
    if (it == nodes_.end() || *it != venue)
      throw data_error("node not in snapshot: venue index " + std::to_string(venue));
    return static_cast<std::uint32_t>(it - nodes_.begin());
  }

  double clustering_at(std::uint32_t i, std::vector<std::uint32_t>& stamp,
                       std::uint32_t cur) const {
    std::uint32_t k = nbr_off_[i + 1] - nbr_off_[i];
    if (k < 2) return 0.0;
    for (std::uint32_t idx = nbr_off_[i]; idx < nbr_off_[i + 1]; ++idx)
      stamp[nbr_[idx]] = cur;
    std::uint64_t links = 0;
    for (std::uint32_t idx = nbr_off_[i]; idx < nbr_off_[i + 1]; ++idx) {
      std::uint32_t u = nbr_[idx];
      for (std::uint32_t e = out_off_[u]; e < out_off_[u + 1]; ++e) {
        std::uint32_t v = out_dst_[e];
        if (v != u && stamp[v] == cur) ++links;
      }
    }
    return static_cast<double>(links) /
           (static_cast<double>(k) * static_cast<double>(k - 1));
  }

  int year_ = 0;
  std::vector<std::uint32_t> nodes_;  // venue indexes, sorted
  std::vector<Edge> edges_;           // sorted by (origin, dest)
  std::uint64_t total_weight_ = 0;
  std::size_t nonself_edges_ = 0;
  std::vector<std::uint32_t> out_off_, out_dst_, in_off_, in_src_;
  std::vector<std::uint64_t> out_w_, in_w_;
  std::vector<std::uint32_t> nbr_off_, nbr_;
};

/// Builds the snapshot for one calendar year; membership is decided by the
/// year of t_origin. A year with no transitions yields a valid empty graph.
inline SnapshotGraph build_snapshot(const TransitionLog& log, int year) {
  std::unordered_map<std::uint64_t, std::uint64_t> counts;
  counts.reserve(log.transitions.size() / 2 + 16);
  for (const auto& tr : log.transitions) {
    if (year_of_epoch(tr.t_origin) != year) continue;
    std::uint64_t key = (static_cast<std::uint64_t>(tr.origin) << 32) | tr.dest;
    ++counts[key];
  }
  std::vector<SnapshotGraph::Edge> edges;
  edges.reserve(counts.size());
  for (const auto& [key, w] : counts)
    edges.push_back({static_cast<std::uint32_t>(key >> 32),
                     static_cast<std::uint32_t>(key & 0xffffffffu), w});
  return SnapshotGraph(year, std::move(edges));
}

}  // namespace wardflow

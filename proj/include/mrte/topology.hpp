#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mrte/linalg.hpp"

namespace mrte {

struct Link {
  int from = -1;
  int to = -1;
  double capacity = 0.0;
};

// Directed-link network graph. Every physical cable appears as two directed
// links with independent capacities. Construction validates: no self loops,
// no duplicate links, strictly positive capacities, symmetric link set,
// strong connectivity.
class Topology {
 public:
  Topology(int nodes, std::vector<Link> links);

  static Topology from_json(const nlohmann::json& j);
  static Topology load(const std::string& path);
  nlohmann::json to_json() const;
  void save(const std::string& path) const;

  int nodes() const { return nodes_; }
  int num_links() const { return static_cast<int>(links_.size()); }
  const std::vector<Link>& links() const { return links_; }
  const Link& link(int id) const { return links_[static_cast<std::size_t>(id)]; }

  // -1 when no such directed link exists.
  int link_index(int from, int to) const;
  const std::vector<int>& out_links(int node) const { return out_links_[static_cast<std::size_t>(node)]; }
  const std::vector<int>& in_links(int node) const { return in_links_[static_cast<std::size_t>(node)]; }

  Vector capacities() const;
  void set_capacities(const Vector& caps);
  double max_capacity() const;

 private:
  int nodes_;
  std::vector<Link> links_;
  std::vector<std::vector<int>> out_links_, in_links_;
  std::vector<int> link_lookup_;  // nodes*nodes, -1 when absent
};

// Tie-broken equal-weight shortest paths for every ordered pair, stored as
// link sequences. Ties are broken toward the lexicographically smallest node
// sequence under `tie_rank` (defaults to node-ID order); permuting tie_rank
// together with a node relabeling reproduces the permuted table.
class PathTable {
 public:
  static PathTable compute(const Topology& topo, const std::vector<int>& tie_rank = {});

  const std::vector<int>& path(int src, int dst) const {
    return paths_[static_cast<std::size_t>(src * n_ + dst)];
  }
  int distance(int src, int dst) const { return dist_[static_cast<std::size_t>(src * n_ + dst)]; }
  int nodes() const { return n_; }

 private:
  int n_ = 0;
  std::vector<std::vector<int>> paths_;
  std::vector<int> dist_;
};

// Concatenation of the precomputed shortest paths src->m and m->dst.
// `links` lists every traversal in order; a link appearing twice is charged
// twice.
struct MiddlepointPath {
  int src = -1, dst = -1, middlepoint = -1;
  std::vector<int> links;

  // (link id, traversal count), ascending by link id.
  std::vector<std::pair<int, int>> multiplicities() const;
};

MiddlepointPath middlepoint_path(const PathTable& table, int src, int dst, int m);

// The N-1 candidate middlepoints for demands out of `src`, ascending node ID.
// m == dst denotes the direct shortest path.
std::vector<int> action_set(const Topology& topo, int src);

}  // namespace mrte

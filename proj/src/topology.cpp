#include "mrte/topology.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>

#include "mrte/error.hpp"

namespace mrte {

using nlohmann::json;

Topology::Topology(int nodes, std::vector<Link> links)
    : nodes_(nodes), links_(std::move(links)) {
  if (nodes_ < 2) throw ValidationError("topology: need at least 2 nodes");
  out_links_.assign(static_cast<std::size_t>(nodes_), {});
  in_links_.assign(static_cast<std::size_t>(nodes_), {});
  link_lookup_.assign(static_cast<std::size_t>(nodes_) * nodes_, -1);

  for (int id = 0; id < num_links(); ++id) {
    const Link& l = links_[static_cast<std::size_t>(id)];
    const std::string where = "link " + std::to_string(id) + " (" + std::to_string(l.from) +
                              "->" + std::to_string(l.to) + ")";
    if (l.from < 0 || l.from >= nodes_ || l.to < 0 || l.to >= nodes_)
      throw ValidationError("topology: node id out of range at " + where);
    if (l.from == l.to) throw ValidationError("topology: self loop at " + where);
    if (!(l.capacity > 0.0))
      throw ValidationError("topology: capacity must be strictly positive at " + where);
    int& slot = link_lookup_[static_cast<std::size_t>(l.from) * nodes_ + l.to];
    if (slot != -1) throw ValidationError("topology: duplicate directed link at " + where);
    slot = id;
    out_links_[static_cast<std::size_t>(l.from)].push_back(id);
    in_links_[static_cast<std::size_t>(l.to)].push_back(id);
  }
  for (int id = 0; id < num_links(); ++id) {
    const Link& l = links_[static_cast<std::size_t>(id)];
    if (link_index(l.to, l.from) == -1)
      throw ValidationError("topology: missing reverse direction for link " + std::to_string(id) +
                            " (" + std::to_string(l.from) + "->" + std::to_string(l.to) + ")");
  }
  for (auto& v : out_links_) std::sort(v.begin(), v.end(), [this](int a, int b) {
    return links_[static_cast<std::size_t>(a)].to < links_[static_cast<std::size_t>(b)].to;
  });

  // Symmetric link set, so forward reachability implies strong connectivity.
  std::vector<char> seen(static_cast<std::size_t>(nodes_), 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int count = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int id : out_links_[static_cast<std::size_t>(u)]) {
      const int v = links_[static_cast<std::size_t>(id)].to;
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        ++count;
        q.push(v);
      }
    }
  }
  if (count != nodes_) {
    int missing = 0;
    while (seen[static_cast<std::size_t>(missing)]) ++missing;
    throw ValidationError("topology: not strongly connected (node " + std::to_string(missing) +
                          " unreachable from node 0)");
  }
}

int Topology::link_index(int from, int to) const {
  if (from < 0 || from >= nodes_ || to < 0 || to >= nodes_) return -1;
  return link_lookup_[static_cast<std::size_t>(from) * nodes_ + to];
}

Vector Topology::capacities() const {
  Vector caps(num_links());
  for (int i = 0; i < num_links(); ++i) caps(i) = links_[static_cast<std::size_t>(i)].capacity;
  return caps;
}

void Topology::set_capacities(const Vector& caps) {
  if (caps.size() != num_links()) throw ValidationError("set_capacities: size mismatch");
  for (int i = 0; i < num_links(); ++i) {
    if (!(caps(i) > 0.0)) throw ValidationError("set_capacities: capacity must be positive");
    links_[static_cast<std::size_t>(i)].capacity = caps(i);
  }
}

double Topology::max_capacity() const {
  double m = 0.0;
  for (const Link& l : links_) m = std::max(m, l.capacity);
  return m;
}

Topology Topology::from_json(const json& j) {
  if (!j.contains("nodes")) throw ValidationError("topology JSON: missing \"nodes\"");
  if (!j.contains("links")) throw ValidationError("topology JSON: missing \"links\"");
  const int n = j.at("nodes").get<int>();
  std::vector<Link> links;
  const auto& jl = j.at("links");
  if (!jl.is_array()) throw ValidationError("topology JSON: \"links\" must be an array");
  links.reserve(jl.size());
  for (std::size_t i = 0; i < jl.size(); ++i) {
    const auto& e = jl[i];
    try {
      links.push_back(Link{e.at("from").get<int>(), e.at("to").get<int>(),
                           e.at("capacity").get<double>()});
    } catch (const json::exception& ex) {
      throw ValidationError("topology JSON: bad link entry at index " + std::to_string(i) + ": " +
                            ex.what());
    }
  }
  return Topology(n, std::move(links));
}

Topology Topology::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open topology file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // Convert the parser's byte offset into a line number.
    std::size_t line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i)
      if (text[i] == '\n') ++line;
    throw ValidationError(path + ":" + std::to_string(line) + ": " + e.what());
  }
  try {
    return from_json(j);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

json Topology::to_json() const {
  json j;
  j["nodes"] = nodes_;
  json links = json::array();
  for (const Link& l : links_)
    links.push_back({{"from", l.from}, {"to", l.to}, {"capacity", l.capacity}});
  j["links"] = std::move(links);
  return j;
}

void Topology::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << to_json().dump(1) << '\n';
}

PathTable PathTable::compute(const Topology& topo, const std::vector<int>& tie_rank) {
  const int n = topo.nodes();
  std::vector<int> rank(static_cast<std::size_t>(n));
  if (tie_rank.empty()) {
    for (int i = 0; i < n; ++i) rank[static_cast<std::size_t>(i)] = i;
  } else {
    if (static_cast<int>(tie_rank.size()) != n)
      throw ValidationError("path table: tie_rank size mismatch");
    rank = tie_rank;
  }

  PathTable table;
  table.n_ = n;
  table.paths_.assign(static_cast<std::size_t>(n) * n, {});
  table.dist_.assign(static_cast<std::size_t>(n) * n, -1);

  // Hop distances toward each destination (BFS over reverse links), then a
  // greedy forward walk that always takes the lowest-ranked next node. That
  // walk produces the lexicographically smallest shortest node sequence.
  std::vector<int> dist_to(static_cast<std::size_t>(n));
  for (int dst = 0; dst < n; ++dst) {
    std::fill(dist_to.begin(), dist_to.end(), -1);
    std::queue<int> q;
    dist_to[static_cast<std::size_t>(dst)] = 0;
    q.push(dst);
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      for (int id : topo.in_links(v)) {
        const int u = topo.link(id).from;
        if (dist_to[static_cast<std::size_t>(u)] == -1) {
          dist_to[static_cast<std::size_t>(u)] = dist_to[static_cast<std::size_t>(v)] + 1;
          q.push(u);
        }
      }
    }
    for (int src = 0; src < n; ++src) {
      const int d = dist_to[static_cast<std::size_t>(src)];
      if (d == -1)
        throw ValidationError("path table: no path from " + std::to_string(src) + " to " +
                              std::to_string(dst));
      table.dist_[static_cast<std::size_t>(src * n + dst)] = d;
      auto& seq = table.paths_[static_cast<std::size_t>(src * n + dst)];
      int u = src;
      while (u != dst) {
        int best_node = -1, best_link = -1;
        for (int id : topo.out_links(u)) {
          const int v = topo.link(id).to;
          if (dist_to[static_cast<std::size_t>(v)] != dist_to[static_cast<std::size_t>(u)] - 1)
            continue;
          if (best_node == -1 ||
              rank[static_cast<std::size_t>(v)] < rank[static_cast<std::size_t>(best_node)]) {
            best_node = v;
            best_link = id;
          }
        }
        seq.push_back(best_link);
        u = best_node;
      }
    }
  }
  return table;
}

std::vector<std::pair<int, int>> MiddlepointPath::multiplicities() const {
  std::map<int, int> counts;
  for (int id : links) ++counts[id];
  return {counts.begin(), counts.end()};
}

MiddlepointPath middlepoint_path(const PathTable& table, int src, int dst, int m) {
  require(src != dst, "middlepoint_path: src == dst");
  require(m != src, "middlepoint_path: middlepoint equals source");
  MiddlepointPath p;
  p.src = src;
  p.dst = dst;
  p.middlepoint = m;
  const auto& first = table.path(src, m);
  p.links.insert(p.links.end(), first.begin(), first.end());
  if (m != dst) {
    const auto& second = table.path(m, dst);
    p.links.insert(p.links.end(), second.begin(), second.end());
  }
  return p;
}

std::vector<int> action_set(const Topology& topo, int src) {
  require(src >= 0 && src < topo.nodes(), "action_set: invalid source node");
  std::vector<int> actions;
  actions.reserve(static_cast<std::size_t>(topo.nodes() - 1));
  for (int v = 0; v < topo.nodes(); ++v)
    if (v != src) actions.push_back(v);
  return actions;
}

}  // namespace mrte

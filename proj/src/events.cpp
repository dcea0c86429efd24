#include "perco/events.hpp"

namespace perco {

SiteId ClusterPartition::cluster_count() const {
  SiteId n = 0;
  for (std::size_t s = 0; s < labels_.size(); ++s) {
    if (labels_[s] == static_cast<SiteId>(s)) ++n;
  }
  return n;
}

std::optional<std::array<std::vector<int>, 3>> OpenCluster::disjoint_paths(int junction,
                                                                          const std::array<int, 3>& targets) const {
  const int n = static_cast<int>(sites_.size());
  auto in = [](int v) { return 2 * v; };
  auto out = [](int v) { return 2 * v + 1; };
  const int sink = 2 * n;
  auto is_target = [&](int v) { return v == targets[0] || v == targets[1] || v == targets[2]; };

  FlowNetwork net(2 * n + 1);
  for (int v = 0; v < n; ++v) {
    if (v == junction) continue;
    if (is_target(v)) {
      // Paths end at their target; no path may pass through one.
      net.add_arc(in(v), sink, 1);
    } else {
      net.add_arc(in(v), out(v), 1);
    }
  }
  for (int u = 0; u < n; ++u) {
    if (is_target(u)) continue;
    for (int v : adjacency_[static_cast<std::size_t>(u)]) {
      if (v == junction) continue;
      net.add_arc(out(u), in(v), 1);
    }
  }
  if (net.max_flow(out(junction), sink, 3) < 3) return std::nullopt;

  std::array<std::vector<int>, 3> paths;
  std::vector<int> first_hops;
  net.for_each_arc_from(out(junction), [&](int arc, int to) {
    if (net.flow_on(arc) > 0) first_hops.push_back(to);
  });
  for (int node : first_hops) {
    std::vector<int> path{junction};
    while (true) {
      const int v = node / 2;
      path.push_back(v);
      if (is_target(v)) break;
      int next = -1;
      net.for_each_arc_from(out(v), [&](int arc, int to) {
        if (next == -1 && to != in(v) && net.flow_on(arc) > 0) next = to;
      });
      node = next;
    }
    const int target = path.back();
    for (int i = 0; i < 3; ++i) {
      if (targets[i] == target) paths[i] = std::move(path);
    }
  }
  return paths;
}

}  // namespace perco

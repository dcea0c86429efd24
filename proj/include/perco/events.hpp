#ifndef PERCO_EVENTS_HPP
#define PERCO_EVENTS_HPP

#include "perco/clusters.hpp"
#include "perco/flow.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <stdexcept>
#include <vector>

namespace perco {

using Triple = std::array<Site, 3>;

/// Three open self-avoiding paths from a junction to three targets that meet
/// only at the junction. paths[i] runs from the junction to targets[i].
struct PathSet {
  Site junction;
  Triple targets;
  std::array<std::vector<Site>, 3> paths;
};

/// Open cluster of one site with a compact local numbering.
class OpenCluster {
 public:
  template <BondState C>
  OpenCluster(const C& config, SiteId root, SiteMarks& marks) : box_(&config.box()) {
    sites_ = explore_cluster(config, root, marks);
    local_.assign(static_cast<std::size_t>(box_->site_count()), -1);
    for (std::size_t i = 0; i < sites_.size(); ++i) local_[static_cast<std::size_t>(sites_[i])] = static_cast<int>(i);
    adjacency_.resize(sites_.size());
    for (std::size_t i = 0; i < sites_.size(); ++i) {
      box_->for_each_neighbour(sites_[i], [&](SiteId nb, EdgeId e) {
        if (config.is_open(e)) adjacency_[i].push_back(local_[static_cast<std::size_t>(nb)]);
      });
    }
  }

  const LatticeBox& box() const { return *box_; }
  const std::vector<SiteId>& sites() const { return sites_; }
  std::size_t size() const { return sites_.size(); }
  bool contains(SiteId s) const { return local_[static_cast<std::size_t>(s)] >= 0; }
  int local(SiteId s) const { return local_[static_cast<std::size_t>(s)]; }
  const std::vector<int>& neighbours(int v) const { return adjacency_[static_cast<std::size_t>(v)]; }

  /// Vertex-disjoint (except at `junction`) paths to the three targets, as
  /// local indices, or nothing when fewer than three such paths exist.
  std::optional<std::array<std::vector<int>, 3>> disjoint_paths(int junction, const std::array<int, 3>& targets) const;

 private:
  const LatticeBox* box_;
  std::vector<SiteId> sites_;
  std::vector<int> local_;
  std::vector<std::vector<int>> adjacency_;
};

namespace detail {

inline void require_distinct(const Triple& n) {
  if (n[0] == n[1] || n[0] == n[2] || n[1] == n[2]) throw std::invalid_argument("target sites must be pairwise distinct");
}

}  // namespace detail

/// E(n): the three sites lie in one open cluster.
template <BondState C>
bool event_E(const C& config, const Triple& n) {
  detail::require_distinct(n);
  const LatticeBox& box = config.box();
  const SiteId a = box.index(n[0]);
  const SiteId b = box.index(n[1]);
  const SiteId c = box.index(n[2]);
  thread_local SiteMarks marks;
  explore_cluster(config, a, marks);
  return marks.marked(b) && marks.marked(c);
}

inline bool event_E(const ClusterPartition& clusters, const LatticeBox& box, const Triple& n) {
  detail::require_distinct(n);
  const SiteId a = box.index(n[0]);
  return clusters.connected(a, box.index(n[1])) && clusters.connected(a, box.index(n[2]));
}

/// F(k; n): three open self-avoiding paths from k to n_1, n_2, n_3 that are
/// vertex-disjoint away from k. Decided by unit vertex-capacity max-flow.
template <BondState C>
std::optional<PathSet> event_F(const C& config, const Site& k, const Triple& n) {
  detail::require_distinct(n);
  for (const Site& t : n) {
    if (t == k) throw std::invalid_argument("junction must differ from the targets");
  }
  const LatticeBox& box = config.box();
  const SiteId kid = box.index(k);
  std::array<SiteId, 3> tid{box.index(n[0]), box.index(n[1]), box.index(n[2])};
  thread_local SiteMarks marks;
  const OpenCluster cluster(config, kid, marks);
  std::array<int, 3> targets{};
  for (int i = 0; i < 3; ++i) {
    if (!cluster.contains(tid[i])) return std::nullopt;
    targets[i] = cluster.local(tid[i]);
  }
  auto paths = cluster.disjoint_paths(0, targets);
  if (!paths) return std::nullopt;
  PathSet out{k, n, {}};
  for (int i = 0; i < 3; ++i) {
    for (int v : (*paths)[i]) out.paths[i].push_back(box.site(cluster.sites()[static_cast<std::size_t>(v)]));
  }
  return out;
}

/// Site ids k (in increasing order) for which F(k; n) holds.
template <BondState C>
std::vector<SiteId> find_junction_ids(const C& config, const Triple& n) {
  detail::require_distinct(n);
  const LatticeBox& box = config.box();
  std::array<SiteId, 3> tid{box.index(n[0]), box.index(n[1]), box.index(n[2])};
  thread_local SiteMarks marks;
  const OpenCluster cluster(config, tid[0], marks);
  if (!cluster.contains(tid[1]) || !cluster.contains(tid[2])) return {};
  std::array<int, 3> targets{cluster.local(tid[0]), cluster.local(tid[1]), cluster.local(tid[2])};
  std::vector<SiteId> out;
  for (int v = 0; v < static_cast<int>(cluster.size()); ++v) {
    if (v == targets[0] || v == targets[1] || v == targets[2]) continue;
    if (cluster.neighbours(v).size() < 3) continue;
    if (cluster.disjoint_paths(v, targets)) out.push_back(cluster.sites()[static_cast<std::size_t>(v)]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// The exact set {k : F(k; n)}, lexicographically ordered.
template <BondState C>
std::vector<Site> find_junctions(const C& config, const Triple& n) {
  std::vector<Site> out;
  for (SiteId id : find_junction_ids(config, n)) out.push_back(config.box().site(id));
  return out;
}

}  // namespace perco

#endif

#ifndef PERCO_CLUSTERS_HPP
#define PERCO_CLUSTERS_HPP

#include "perco/configuration.hpp"

#include <numeric>
#include <vector>

namespace perco {

/// Epoch-stamped visit marks; reset() is O(1) amortized.
class SiteMarks {
 public:
  void reset(SiteId n) {
    if (static_cast<std::size_t>(n) > stamp_.size()) stamp_.resize(static_cast<std::size_t>(n), 0);
    if (++epoch_ == 0) {
      std::fill(stamp_.begin(), stamp_.end(), 0);
      epoch_ = 1;
    }
  }
  bool marked(SiteId s) const { return stamp_[static_cast<std::size_t>(s)] == epoch_; }
  void mark(SiteId s) { stamp_[static_cast<std::size_t>(s)] = epoch_; }

 private:
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
};

/// Site -> cluster-id map. The id of a cluster is its smallest site index, so
/// ids are stable under re-running on the same configuration.
class ClusterPartition {
 public:
  ClusterPartition() = default;
  ClusterPartition(std::vector<SiteId> labels, std::vector<SiteId> sizes)
      : labels_(std::move(labels)), sizes_(std::move(sizes)) {}

  SiteId cluster_of(SiteId s) const { return labels_[static_cast<std::size_t>(s)]; }
  SiteId size_of(SiteId s) const { return sizes_[static_cast<std::size_t>(cluster_of(s))]; }
  bool connected(SiteId a, SiteId b) const { return cluster_of(a) == cluster_of(b); }
  const std::vector<SiteId>& labels() const { return labels_; }
  SiteId cluster_count() const;

 private:
  std::vector<SiteId> labels_;
  std::vector<SiteId> sizes_;  // indexed by cluster id
};

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(SiteId n) : parent_(static_cast<std::size_t>(n)), size_(static_cast<std::size_t>(n), 1) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  SiteId find(SiteId x) {
    SiteId root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      const SiteId next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }
  void unite(SiteId a, SiteId b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

 private:
  std::vector<SiteId> parent_;
  std::vector<SiteId> size_;
};

}  // namespace detail

template <BondState C>
ClusterPartition build_clusters(const C& config) {
  const LatticeBox& box = config.box();
  const SiteId n = box.site_count();
  detail::UnionFind uf(n);
  for (EdgeId e = 0; e < box.edge_count(); ++e) {
    if (config.is_open(e)) {
      const auto& ends = box.endpoints(e);
      uf.unite(ends.lo, ends.hi);
    }
  }
  // Sites are visited in increasing order, so the first site seen in a
  // component is its smallest member.
  std::vector<SiteId> root_label(static_cast<std::size_t>(n), kNoSite);
  std::vector<SiteId> labels(static_cast<std::size_t>(n));
  std::vector<SiteId> sizes(static_cast<std::size_t>(n), 0);
  for (SiteId s = 0; s < n; ++s) {
    const SiteId r = uf.find(s);
    if (root_label[r] == kNoSite) root_label[r] = s;
    labels[s] = root_label[r];
    ++sizes[labels[s]];
  }
  return ClusterPartition(std::move(labels), std::move(sizes));
}

/// Breadth-first exploration of the open cluster of `start`, visiting only
/// sites accepted by `keep_site` (start is always kept) through edges
/// accepted by `keep_edge`. Returns sites in visit order.
template <BondState C, typename SiteFilter, typename EdgeFilter>
std::vector<SiteId> explore_cluster(const C& config, SiteId start, SiteMarks& marks, SiteFilter keep_site,
                                    EdgeFilter keep_edge) {
  const LatticeBox& box = config.box();
  marks.reset(box.site_count());
  std::vector<SiteId> order{start};
  marks.mark(start);
  for (std::size_t head = 0; head < order.size(); ++head) {
    box.for_each_neighbour(order[head], [&](SiteId nb, EdgeId e) {
      if (marks.marked(nb) || !keep_site(nb) || !keep_edge(e) || !config.is_open(e)) return;
      marks.mark(nb);
      order.push_back(nb);
    });
  }
  return order;
}

template <BondState C>
std::vector<SiteId> explore_cluster(const C& config, SiteId start, SiteMarks& marks) {
  return explore_cluster(config, start, marks, [](SiteId) { return true; }, [](EdgeId) { return true; });
}

}  // namespace perco

#endif

#ifndef PERCO_FLOW_HPP
#define PERCO_FLOW_HPP

#include <cstdint>
#include <vector>

namespace perco {

/// Small integral max-flow network solved by shortest augmenting paths.
/// Intended for the tiny flow values (<= 3) of vertex-disjoint path queries.
class FlowNetwork {
 public:
  explicit FlowNetwork(int nodes) : head_(static_cast<std::size_t>(nodes), -1) {}

  /// Adds u -> v with the given capacity; returns the arc index.
  int add_arc(int u, int v, int capacity);

  /// Augments from source to sink until no path remains or `limit` is reached.
  int max_flow(int source, int sink, int limit);

  int node_count() const { return static_cast<int>(head_.size()); }
  int flow_on(int arc) const { return arcs_[static_cast<std::size_t>(arc ^ 1)].residual; }

  template <typename F>
  void for_each_arc_from(int u, F&& f) const {
    for (int a = head_[static_cast<std::size_t>(u)]; a != -1; a = arcs_[static_cast<std::size_t>(a)].next) {
      if ((a & 1) == 0) f(a, arcs_[static_cast<std::size_t>(a)].to);
    }
  }

 private:
  struct Arc {
    int to;
    int residual;
    int next;
  };
  std::vector<int> head_;
  std::vector<Arc> arcs_;
};

}  // namespace perco

#endif

#include "perco/flow.hpp"

#include <algorithm>

namespace perco {

int FlowNetwork::add_arc(int u, int v, int capacity) {
  const int index = static_cast<int>(arcs_.size());
  arcs_.push_back({v, capacity, head_[static_cast<std::size_t>(u)]});
  head_[static_cast<std::size_t>(u)] = index;
  arcs_.push_back({u, 0, head_[static_cast<std::size_t>(v)]});
  head_[static_cast<std::size_t>(v)] = index + 1;
  return index;
}

int FlowNetwork::max_flow(int source, int sink, int limit) {
  int total = 0;
  std::vector<int> via(head_.size());
  std::vector<int> queue;
  queue.reserve(head_.size());
  while (total < limit) {
    std::fill(via.begin(), via.end(), -1);
    queue.clear();
    queue.push_back(source);
    via[static_cast<std::size_t>(source)] = -2;
    for (std::size_t qi = 0; qi < queue.size() && via[static_cast<std::size_t>(sink)] == -1; ++qi) {
      const int u = queue[qi];
      for (int a = head_[static_cast<std::size_t>(u)]; a != -1; a = arcs_[static_cast<std::size_t>(a)].next) {
        const Arc& arc = arcs_[static_cast<std::size_t>(a)];
        if (arc.residual > 0 && via[static_cast<std::size_t>(arc.to)] == -1) {
          via[static_cast<std::size_t>(arc.to)] = a;
          queue.push_back(arc.to);
        }
      }
    }
    if (via[static_cast<std::size_t>(sink)] == -1) break;
    int push = limit - total;
    for (int v = sink; v != source; v = arcs_[static_cast<std::size_t>(via[static_cast<std::size_t>(v)] ^ 1)].to) {
      push = std::min(push, arcs_[static_cast<std::size_t>(via[static_cast<std::size_t>(v)])].residual);
    }
    for (int v = sink; v != source; v = arcs_[static_cast<std::size_t>(via[static_cast<std::size_t>(v)] ^ 1)].to) {
      const int a = via[static_cast<std::size_t>(v)];
      arcs_[static_cast<std::size_t>(a)].residual -= push;
      arcs_[static_cast<std::size_t>(a ^ 1)].residual += push;
    }
    total += push;
  }
  return total;
}

}  // namespace perco

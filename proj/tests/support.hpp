#pragma once

// Hand-rolled generators shared by the unit, property and acceptance tests.

#include "dualloop/graph.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace testgen {

inline std::string node_name(std::size_t i) {
  return "n" + std::string(i < 10 ? "0" : "") + std::to_string(i);
}

struct RandomDag {
  dualloop::WeightedGraph graph;
  std::vector<std::string> order;  // a topological order used to build it
};

// DAG over n nodes: edges only go forward in a shuffled order. Nodes without
// predecessors become Input nodes. With `dyadic`, weights are multiples of
// 1/8 in [-1, 1] so path sums are exact in binary floating point.
inline RandomDag random_dag(std::mt19937_64& rng, std::size_t n, double density, bool dyadic) {
  RandomDag out;
  for (std::size_t i = 0; i < n; ++i) out.order.push_back(node_name(i));
  std::shuffle(out.order.begin(), out.order.end(), rng);
  std::bernoulli_distribution edge(density);
  std::uniform_int_distribution<int> eighths(-8, 8);
  std::uniform_real_distribution<double> real(-1.0, 1.0);
  std::vector<bool> has_parent(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!edge(rng)) continue;
      double w = dyadic ? eighths(rng) / 8.0 : real(rng);
      if (w == 0.0) w = 0.5;
      out.graph.edges.push_back({out.order[i], out.order[j], w});
      has_parent[j] = true;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto kind = has_parent[i] ? dualloop::NodeKind::Activity : dualloop::NodeKind::Input;
    out.graph.nodes[out.order[i]] = {out.order[i], kind};
  }
  return out;
}

// Slider positions in [0, 1], with the endpoints drawn often.
inline double random_position(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, 9);
  const int p = pick(rng);
  if (p == 0) return 0.0;
  if (p == 1) return 1.0;
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace testgen

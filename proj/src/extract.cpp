#include "isext/extract.hpp"

#include "isext/cluster.hpp"

#include <algorithm>
#include <cassert>

namespace isext {

std::vector<std::string> cluster_inputs(const DDG& g, const std::set<std::string>& s) {
  std::vector<std::string> members(s.begin(), s.end());
  std::sort(members.begin(), members.end(),
            [&](const std::string& a, const std::string& b) {
              return g.topo_pos(a) < g.topo_pos(b);
            });
  std::vector<std::string> inputs;
  std::set<std::string> seen;
  for (const auto& id : members) {
    for (const auto& o : g.node(id).operands) {
      if (s.count(o)) continue;
      if (g.node(o).kind == NodeKind::Const) continue; // immediates
      if (seen.insert(o).second) inputs.push_back(o);
    }
  }
  return inputs;
}

namespace {

bool passes_arch(const DDG& g, const std::set<std::string>& s,
                 const ArchConstraints& ac) {
  if (ac.max_nodes && (int)s.size() > *ac.max_nodes) return false;
  for (const auto& id : s) {
    const Node& n = g.node(id);
    if (n.kind != NodeKind::Op) return false; // inputs/consts are never members
    if (ac.forbidden_kinds.count(n.op)) return false;
  }
  if ((int)cluster_inputs(g, s).size() > ac.max_inputs) return false;
  return true;
}

} // namespace

std::optional<std::string> miso_root(const DDG& g, const std::set<std::string>& s) {
  std::optional<std::string> root;
  for (const auto& id : s) {
    bool escapes = false;
    for (const auto& u : g.uses(id))
      if (!s.count(u)) escapes = true;
    // A declared output escapes architecturally no matter where its uses
    // sit; a dead node's value has nowhere to go but out.
    for (const auto& o : g.outputs())
      if (o == id) escapes = true;
    if (g.uses(id).empty()) escapes = true;
    if (escapes) {
      if (root) return std::nullopt; // more than one exposed value
      root = id;
    }
  }
  return root;
}

bool is_legal_miso(const DDG& g, const std::set<std::string>& s,
                   const ArchConstraints& ac) {
  if (s.empty()) return false;
  auto root = miso_root(g, s);
  if (!root) return false;
  // Every use of every non-root member stays inside.
  for (const auto& id : s) {
    if (id == *root) continue;
    for (const auto& u : g.uses(id))
      if (!s.count(u)) return false;
  }
  if (!is_convex(g, s)) return false;
  return passes_arch(g, s, ac);
}

bool is_legal_miso_body(const DDG& g, const std::set<std::string>& s,
                        const std::string& root, const ArchConstraints& ac) {
  if (s.empty() || !s.count(root)) return false;
  // Every member must feed the root through members only; stray members
  // would be dead weight inside the instruction body.
  std::set<std::string> reaches = {root};
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& id : s) {
      if (reaches.count(id)) continue;
      for (const auto& u : g.uses(id))
        if (s.count(u) && reaches.count(u)) {
          reaches.insert(id);
          grew = true;
          break;
        }
    }
  }
  if (reaches.size() != s.size()) return false;
  if (!is_convex(g, s)) return false;
  return passes_arch(g, s, ac);
}

ClusterGraph max_miso(const DDG& g, const ArchConstraints& ac) {
  ClusterGraph cg;
  cg.ddg = &g;
  std::set<std::string> assigned;

  // Roots are taken in reverse topological order.
  std::vector<std::string> order = g.toposort();
  std::reverse(order.begin(), order.end());

  for (const auto& seed : order) {
    if (assigned.count(seed)) continue;
    const Node& n = g.node(seed);
    if (n.kind != NodeKind::Op) continue;
    std::set<std::string> s = {seed};
    if (!passes_arch(g, s, ac)) continue; // stays uncovered

    // Absorb predecessors whose uses all lie inside, while legality holds.
    bool grew = true;
    while (grew) {
      grew = false;
      std::vector<std::string> candidates;
      for (const auto& id : s)
        for (const auto& o : g.node(id).operands) {
          if (s.count(o)) continue;
          const Node& on = g.node(o);
          if (on.kind != NodeKind::Op) continue;
          if (assigned.count(o)) continue;
          bool all_inside = true;
          for (const auto& u : g.uses(o))
            if (!s.count(u)) all_inside = false;
          if (all_inside) candidates.push_back(o);
        }
      std::sort(candidates.begin(), candidates.end());
      candidates.erase(std::unique(candidates.begin(), candidates.end()),
                       candidates.end());
      for (const auto& o : candidates) {
        std::set<std::string> grown = s;
        grown.insert(o);
        if (is_legal_miso(g, grown, ac)) {
          s = std::move(grown);
          grew = true;
          break;
        }
      }
    }

    assert(is_legal_miso(g, s, ac));
    Cluster c;
    c.root = seed;
    c.members = s;
    c.inputs = cluster_inputs(g, s);
    for (const auto& id : s) assigned.insert(id);
    cg.clusters.emplace(seed, std::move(c));
  }
  return cg;
}

} // namespace isext

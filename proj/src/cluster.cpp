#include "isext/cluster.hpp"

#include <algorithm>
#include <cassert>
#include <queue>
#include <stdexcept>

namespace isext {

std::vector<std::string> ClusterGraph::uncovered() const {
  std::set<std::string> covered;
  for (const auto& [root, c] : clusters)
    covered.insert(c.members.begin(), c.members.end());
  std::vector<std::string> out;
  for (const auto& id : ddg->toposort())
    if (ddg->is_op(id) && !covered.count(id)) out.push_back(id);
  return out;
}

std::vector<std::string> ClusterGraph::users_of(const std::string& root) const {
  std::vector<std::string> out;
  for (const auto& [r, c] : clusters) {
    if (r == root) continue;
    if (c.members.count(root)) continue; // recomputed locally, no edge
    for (const auto& id : c.members) {
      bool found = false;
      for (const auto& o : ddg->node(id).operands)
        if (o == root) found = true;
      if (found) {
        out.push_back(r);
        break;
      }
    }
  }
  return out;
}

bool ClusterGraph::has_external_user(const std::string& root) const {
  for (const auto& o : ddg->outputs())
    if (o == root) return true;
  std::set<std::string> covered;
  for (const auto& [r, c] : clusters)
    covered.insert(c.members.begin(), c.members.end());
  for (const auto& u : ddg->uses(root))
    if (ddg->is_op(u) && !covered.count(u)) return true;
  return false;
}

std::vector<std::string> ClusterGraph::toposort() const {
  // Kahn over the induced cluster DAG, lexicographic tie-break.
  std::map<std::string, int> pending;
  std::map<std::string, std::vector<std::string>> succ;
  for (const auto& [r, c] : clusters) pending[r] = 0;
  for (const auto& [r, c] : clusters)
    for (const auto& u : users_of(r)) {
      succ[r].push_back(u);
      pending[u] += 1;
    }
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& [r, deg] : pending)
    if (deg == 0) ready.push(r);
  std::vector<std::string> order;
  while (!ready.empty()) {
    std::string r = ready.top();
    ready.pop();
    order.push_back(r);
    for (const auto& u : succ[r])
      if (--pending[u] == 0) ready.push(u);
  }
  if (order.size() != clusters.size())
    throw std::logic_error("cluster graph has a cycle");
  return order;
}

bool ClusterGraph::same_covering(const ClusterGraph& other) const {
  if (clusters.size() != other.clusters.size()) return false;
  for (const auto& [r, c] : clusters) {
    auto it = other.clusters.find(r);
    if (it == other.clusters.end()) return false;
    if (it->second.members != c.members) return false;
  }
  return true;
}

ClusterGraph singleton_clusters(const DDG& g, const ArchConstraints& ac) {
  ClusterGraph cg;
  cg.ddg = &g;
  for (const auto& id : g.toposort()) {
    if (!g.is_op(id)) continue;
    std::set<std::string> s = {id};
    if (!is_legal_miso(g, s, ac)) continue; // loads etc. stay uncovered
    Cluster c;
    c.root = id;
    c.members = std::move(s);
    c.inputs = cluster_inputs(g, c.members);
    cg.clusters.emplace(id, std::move(c));
  }
  return cg;
}

Cluster combine_subgraphs(const ClusterGraph& cg, const std::string& u,
                          const std::string& i) {
  const auto& cu = cg.clusters.at(u);
  const auto& ci = cg.clusters.at(i);
  bool uses_i = false;
  for (const auto& id : cu.members)
    for (const auto& o : cg.ddg->node(id).operands)
      if (o == i && !cu.members.count(i)) uses_i = true;
  if (!uses_i) throw std::invalid_argument("cluster " + u + " does not use " + i);

  Cluster merged;
  merged.root = u;
  merged.members = cu.members;
  merged.members.insert(ci.members.begin(), ci.members.end());
  merged.inputs = cluster_inputs(*cg.ddg, merged.members);
  return merged;
}

bool can_combine(const ClusterGraph& cg, const std::string& u, const std::string& i,
                 const ArchConstraints& ac) {
  Cluster merged = combine_subgraphs(cg, u, i);
  return is_legal_miso_body(*cg.ddg, merged.members, merged.root, ac);
}

ClusterGraph combine_pass(const ClusterGraph& cg, const ArchConstraints& ac) {
  ClusterGraph out;
  out.ddg = cg.ddg;
  std::set<std::string> marked; // rewritten this pass; inert until the next

  for (const auto& i : cg.toposort()) {
    if (marked.count(i)) continue; // already placed in `out` by a merge
    auto users = cg.users_of(i);
    bool mergeable = !users.empty() && !cg.has_external_user(i);
    for (const auto& u : users)
      if (marked.count(u) || !can_combine(cg, u, i, ac)) mergeable = false;
    if (mergeable) {
      // Users sit strictly after i in the traversal, so none of them has
      // been placed yet.
      for (const auto& u : users) {
        Cluster merged = combine_subgraphs(cg, u, i);
        out.clusters[u] = std::move(merged);
        marked.insert(u);
      }
      // i itself is dropped: every consumer now recomputes it.
    } else {
      out.clusters[i] = cg.clusters.at(i);
    }
  }
  return out;
}

ClusterGraph clone_and_combine(const ClusterGraph& cg, const ArchConstraints& ac,
                               CloneStats* stats) {
  CloneStats st;
  st.initial_clusters = (int)cg.clusters.size();
  ClusterGraph cur = cg;
  const int limit = (int)cg.clusters.size() + 1;
  for (int pass = 0; pass <= limit; ++pass) {
    ClusterGraph next = combine_pass(cur, ac);
    if (next.same_covering(cur)) {
      st.final_clusters = (int)cur.clusters.size();
      if (stats) *stats = st;
      return cur;
    }
    assert(next.clusters.size() < cur.clusters.size());
    st.passes += 1;
    cur = std::move(next);
  }
  throw std::logic_error("clone_and_combine failed to reach a fixpoint");
}

std::map<std::string, std::uint64_t>
eval_covering(const ClusterGraph& cg, const std::map<std::string, std::uint64_t>& env,
              const MemOracle* mem) {
  const DDG& g = *cg.ddg;
  // Value-carrying ids: inputs, consts, cluster roots, uncovered ops.
  // Cluster interiors are recomputed from the cluster's own inputs only.
  std::set<std::string> carriers;
  for (const auto& n : g.nodes())
    if (n.kind != NodeKind::Op) carriers.insert(n.id);
  for (const auto& [r, c] : cg.clusters) carriers.insert(r);
  for (const auto& id : cg.uncovered()) carriers.insert(id);

  std::map<std::string, std::uint64_t> val;
  for (const auto& id : g.toposort()) {
    if (!carriers.count(id)) continue;
    const Node& n = g.node(id);
    if (n.kind == NodeKind::Input) {
      auto it = env.find(id);
      if (it == env.end()) throw EvalError("unbound input: " + id);
      val[id] = it->second & g.mask();
      continue;
    }
    if (n.kind == NodeKind::Const) {
      val[id] = n.value;
      continue;
    }
    auto cit = cg.clusters.find(id);
    if (cit == cg.clusters.end()) {
      // Uncovered op: operands are carriers (or consts) by construction.
      std::uint64_t a = val.at(n.operands[0]);
      std::uint64_t b = n.operands.size() > 1 ? val.at(n.operands[1]) : 0;
      val[id] = eval_op(n.op, g.width(), a, b, mem);
      continue;
    }
    // Evaluate the cluster body as one unit from its declared inputs.
    const Cluster& c = cit->second;
    std::map<std::string, std::uint64_t> local;
    for (const auto& in : c.inputs) local[in] = val.at(in);
    for (const auto& mid : g.toposort()) {
      if (!c.members.count(mid)) continue;
      const Node& m = g.node(mid);
      auto arg = [&](const std::string& o) -> std::uint64_t {
        if (auto it = local.find(o); it != local.end()) return it->second;
        const Node& on = g.node(o);
        if (on.kind == NodeKind::Const) return on.value;
        throw EvalError("cluster " + c.root + " misses value for " + o);
      };
      std::uint64_t a = arg(m.operands[0]);
      std::uint64_t b = m.operands.size() > 1 ? arg(m.operands[1]) : 0;
      local[mid] = eval_op(m.op, g.width(), a, b, mem);
    }
    val[id] = local.at(c.root);
  }

  std::map<std::string, std::uint64_t> out;
  for (const auto& o : g.outputs()) {
    auto it = val.find(o);
    if (it == val.end()) throw EvalError("covering does not span output " + o);
    out[o] = it->second;
  }
  return out;
}

} // namespace isext

#pragma once

#include "isext/extract.hpp"
#include "isext/graph.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace isext {

/// A covering of a DDG by MISO clusters, keyed by root id. After
/// recomputation passes a node may be a member of several clusters;
/// only cluster roots carry values between clusters.
struct ClusterGraph {
  const DDG* ddg = nullptr;
  std::map<std::string, Cluster> clusters; // root id -> cluster

  bool has(const std::string& root) const { return clusters.count(root) != 0; }

  /// Op nodes of the underlying DDG that belong to no cluster (loads,
  /// and nodes that cannot form a legal cluster under the constraints).
  std::vector<std::string> uncovered() const;

  /// Roots of clusters that consume `root`'s value (some member has it
  /// as an operand and it is not recomputed inside that cluster).
  std::vector<std::string> users_of(const std::string& root) const;

  /// True when `root`'s value is needed outside the cluster layer: it is
  /// a declared DDG output or an operand of an uncovered op node. Such a
  /// cluster may never be merged away.
  bool has_external_user(const std::string& root) const;

  /// Deterministic topological order of the cluster DAG (producers
  /// first, ties by lexicographic root id).
  std::vector<std::string> toposort() const;

  bool same_covering(const ClusterGraph& other) const;
};

/// One cluster per eligible op node (Fig-3-style single-node seeding).
ClusterGraph singleton_clusters(const DDG& g, const ArchConstraints& ac = {});

/// Merge of cluster `i` into its user `u`: members united, `i`'s root
/// removed from the input list, inputs recomputed in first-use order.
Cluster combine_subgraphs(const ClusterGraph& cg, const std::string& u,
                          const std::string& i);

/// Whether the merged body would be a legal MISO under `ac`. Uses of
/// `i`'s root by clusters other than `u` do not block the merge; that is
/// exactly what recomputation is for.
bool can_combine(const ClusterGraph& cg, const std::string& u, const std::string& i,
                 const ArchConstraints& ac);

/// One rewriting pass: visits clusters topologically; a cluster whose
/// users can all absorb it is cloned into every user and dropped,
/// otherwise it is copied through. A cluster already rewritten in this
/// pass takes no further part in it.
ClusterGraph combine_pass(const ClusterGraph& cg, const ArchConstraints& ac);

struct CloneStats {
  int passes = 0;         // passes that changed the covering
  int initial_clusters = 0;
  int final_clusters = 0;
};

/// Iterates combine_pass to its fixpoint (equality on member sets).
ClusterGraph clone_and_combine(const ClusterGraph& cg, const ArchConstraints& ac,
                               CloneStats* stats = nullptr);

/// Evaluates the DDG through the covering: each cluster is computed as a
/// unit from its inputs, uncovered nodes directly. Used to show that
/// recomputation preserves semantics.
std::map<std::string, std::uint64_t>
eval_covering(const ClusterGraph& cg, const std::map<std::string, std::uint64_t>& env,
              const MemOracle* mem = nullptr);

} // namespace isext

#pragma once

#include "isext/graph.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace isext {

/// Architectural constraints on a candidate instruction subgraph.
struct ArchConstraints {
  int max_inputs = 6;
  std::optional<int> max_nodes;
  std::set<OpKind> forbidden_kinds = {OpKind::Load};
};

/// A MISO subgraph: one root (output) node, a member set, and the
/// ordered list of external value inputs. Constant operands are folded
/// into the body as immediates and never appear among the inputs.
struct Cluster {
  std::string root;
  std::set<std::string> members;
  std::vector<std::string> inputs;
};

/// External non-constant operands of `s`, deduplicated, in first-use
/// order with members visited topologically.
std::vector<std::string> cluster_inputs(const DDG& g, const std::set<std::string>& s);

/// Raw-DDG MISO legality: exactly one member value escapes (the root),
/// the set is convex, constraints hold. Used by extraction, before any
/// recomputation happens.
bool is_legal_miso(const DDG& g, const std::set<std::string>& s,
                   const ArchConstraints& ac);

/// Same check but with the escape rule relaxed for recomputed bodies:
/// instead of demanding that non-root values never escape in the raw
/// graph, demands that every member reaches the root inside the set
/// (escaping values are served by clones held in other clusters).
bool is_legal_miso_body(const DDG& g, const std::set<std::string>& s,
                        const std::string& root, const ArchConstraints& ac);

/// Root of a legal MISO member set (the unique member whose value is
/// used outside the set or is a declared output).
std::optional<std::string> miso_root(const DDG& g, const std::set<std::string>& s);

struct ClusterGraph; // defined in cluster.hpp

/// Greedy MaxMISO partitioning: clusters grown in reverse topological
/// order, each cluster absorbing any predecessor whose uses all lie
/// inside, skipping absorptions that break legality. Nodes that cannot
/// form a legal cluster at all (forbidden kinds, or arity above
/// max_inputs) are left uncovered.
ClusterGraph max_miso(const DDG& g, const ArchConstraints& ac);

} // namespace isext

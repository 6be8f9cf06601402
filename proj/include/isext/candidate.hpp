#pragma once

#include "isext/extract.hpp"
#include "isext/graph.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace isext {

/// Expression DAG node of a candidate instruction body. Nodes live in a
/// pool ordered so that children precede their users.
struct ExprNode {
  enum class Tag { Param, Const, Op };
  Tag tag = Tag::Op;
  int param = 0;            // 1-based parameter index (Tag::Param)
  std::uint64_t value = 0;  // Tag::Const
  OpKind op = OpKind::Add;  // Tag::Op
  int lhs = -1;
  int rhs = -1; // -1 for unary ops
};

/// A candidate instruction: a pure function of `arity` W-bit arguments
/// with a single result, named ci<N> by the pipeline or by its source
/// file.
struct CandidateInstruction {
  std::string name;
  int arity = 0;
  unsigned width = 32;
  std::vector<ExprNode> body;
  int root = -1;

  int op_count() const;
};

/// Lifts a legal MISO cluster into a function: parameters are the
/// cluster inputs in order, constants become immediates in the body.
CandidateInstruction cluster_to_function(const DDG& g, const Cluster& c,
                                         const std::string& name);

/// Concrete evaluation under the graph-core bitvector semantics.
std::uint64_t eval_fn(const CandidateInstruction& f,
                      std::span<const std::uint64_t> args);

/// Same, reusing a caller-owned scratch buffer (hot enumeration loops).
std::uint64_t eval_fn(const CandidateInstruction& f,
                      std::span<const std::uint64_t> args,
                      std::vector<std::uint64_t>& scratch);

/// One representative per structural-equality class. Commutative
/// operands are ordered by a canonical subterm key first, so a+b and b+a
/// collapse; a-b and b-a do not. Representatives keep the
/// lexicographically smallest name.
std::vector<CandidateInstruction>
dedupe_structural(const std::vector<CandidateInstruction>& cands);

/// Canonical structural key (exposed for tests).
std::string structural_key(const CandidateInstruction& f);

/// SMT-LIB2 QF_BV term for f applied to the given argument terms.
/// Subterms used more than once are bound with `let`; binder names use
/// the reserved "_t" prefix.
std::string emit_term(const CandidateInstruction& f,
                      std::span<const std::string> arg_terms);

/// Width-aware bitvector literal (#x… when the width is a nibble
/// multiple, #b… otherwise).
std::string bv_literal(std::uint64_t value, unsigned width);

/// Serializes a candidate to the graph-core IR; `input` order is the
/// parameter order and the root node carries the function name.
std::string function_to_ir(const CandidateInstruction& f);

/// Each declared output of `g` yields one function named after its root
/// node; its parameters are the inputs reachable from that root, in
/// declaration order.
std::vector<CandidateInstruction> functions_from_ddg(const DDG& g);

/// Copy of f evaluated at a different width (constants truncated).
CandidateInstruction rewidth(const CandidateInstruction& f, unsigned width);

} // namespace isext

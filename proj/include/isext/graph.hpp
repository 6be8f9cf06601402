#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace isext {

/// Operation vocabulary of a data-dependency graph. All arithmetic is
/// modular over the graph width W; `load` marks a memory read and is
/// excluded from instruction clusters.
enum class OpKind {
  Add,
  Sub,
  Mul,
  And,
  Or,
  Xor,
  Not,
  Shl,
  Shrl,
  Shra,
  Rotl,
  Rotr,
  Load,
};

int op_arity(OpKind k);
const char* op_name(OpKind k);
std::optional<OpKind> op_from_name(const std::string& s);

enum class NodeKind { Input, Const, Op };

struct Node {
  std::string id;
  NodeKind kind = NodeKind::Op;
  OpKind op = OpKind::Add;           // valid when kind == Op
  std::uint64_t value = 0;           // valid when kind == Const
  std::vector<std::string> operands; // empty for Input/Const
};

class ParseError : public std::runtime_error {
public:
  ParseError(int line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg),
        line(line) {}
  int line;
};

class EvalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Memory oracle used to resolve `load` nodes during concrete evaluation.
using MemOracle = std::function<std::uint64_t(std::uint64_t)>;

/// Data-dependency graph of one basic block. Immutable once built; all
/// queries are const.
class DDG {
public:
  DDG() = default;
  DDG(unsigned width, std::vector<Node> nodes, std::vector<std::string> outputs);

  unsigned width() const { return width_; }
  std::uint64_t mask() const;

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::string>& outputs() const { return outputs_; }

  bool contains(const std::string& id) const;
  const Node& node(const std::string& id) const;

  /// Nodes that list `id` among their operands. A node with two or more
  /// uses is a common operation.
  const std::set<std::string>& uses(const std::string& id) const;

  /// Deterministic topological order: every node after its operands,
  /// ties broken by lexicographic id.
  const std::vector<std::string>& toposort() const { return topo_; }

  /// Position of a node in the topological order.
  std::size_t topo_pos(const std::string& id) const;

  bool is_input(const std::string& id) const { return node(id).kind == NodeKind::Input; }
  bool is_const(const std::string& id) const { return node(id).kind == NodeKind::Const; }
  bool is_op(const std::string& id) const { return node(id).kind == NodeKind::Op; }

  std::vector<std::string> input_ids() const;

private:
  unsigned width_ = 32;
  std::vector<Node> nodes_;
  std::vector<std::string> outputs_;
  std::unordered_map<std::string, std::size_t> index_;
  std::map<std::string, std::set<std::string>> uses_;
  std::vector<std::string> topo_;
  std::unordered_map<std::string, std::size_t> topo_pos_;

  void validate_and_index();
};

/// Parses the line-oriented IR format:
///
///   width <W>                       (optional, once, default 32)
///   input <id>
///   <id> = const <unsigned-int>     (decimal or 0x-hex)
///   <id> = <opkind> <id> [<id>]
///   output <id>                     (may repeat; order significant)
///
/// '#' starts a comment. Throws ParseError with a line number.
DDG parse_ddg(const std::string& text);

/// Serializes back to the IR format (round-trips through parse_ddg).
std::string ddg_to_ir(const DDG& g);

/// True iff no directed value-flow path leaves `s` and re-enters it.
bool is_convex(const DDG& g, const std::set<std::string>& s);

/// Single-op semantics over width-W bitvectors (a second operand of 0 is
/// passed for unary kinds).
std::uint64_t eval_op(OpKind k, unsigned width, std::uint64_t a, std::uint64_t b,
                      const MemOracle* mem = nullptr);

/// Evaluates the whole graph; `env` must bind every input node, `mem` is
/// required only when load nodes are present. Returns output-id -> value.
std::map<std::string, std::uint64_t>
eval_ddg(const DDG& g, const std::map<std::string, std::uint64_t>& env,
         const MemOracle* mem = nullptr);

/// Copy of `g` at a different width with constant values truncated; used
/// by tests that re-run 32-bit corpus graphs at tiny widths.
DDG rewidth(const DDG& g, unsigned width);

} // namespace isext

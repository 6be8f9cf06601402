#include "isext/graph.hpp"

#include <algorithm>
#include <cassert>
#include <charconv>
#include <deque>
#include <queue>
#include <sstream>

namespace isext {

int op_arity(OpKind k) {
  switch (k) {
  case OpKind::Not:
  case OpKind::Load:
    return 1;
  default:
    return 2;
  }
}

const char* op_name(OpKind k) {
  switch (k) {
  case OpKind::Add: return "add";
  case OpKind::Sub: return "sub";
  case OpKind::Mul: return "mul";
  case OpKind::And: return "and";
  case OpKind::Or: return "or";
  case OpKind::Xor: return "xor";
  case OpKind::Not: return "not";
  case OpKind::Shl: return "shl";
  case OpKind::Shrl: return "shrl";
  case OpKind::Shra: return "shra";
  case OpKind::Rotl: return "rotl";
  case OpKind::Rotr: return "rotr";
  case OpKind::Load: return "load";
  }
  return "?";
}

std::optional<OpKind> op_from_name(const std::string& s) {
  static const std::map<std::string, OpKind> table = {
      {"add", OpKind::Add},   {"sub", OpKind::Sub},   {"mul", OpKind::Mul},
      {"and", OpKind::And},   {"or", OpKind::Or},     {"xor", OpKind::Xor},
      {"not", OpKind::Not},   {"shl", OpKind::Shl},   {"shrl", OpKind::Shrl},
      {"shra", OpKind::Shra}, {"rotl", OpKind::Rotl}, {"rotr", OpKind::Rotr},
      {"load", OpKind::Load}};
  auto it = table.find(s);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

DDG::DDG(unsigned width, std::vector<Node> nodes, std::vector<std::string> outputs)
    : width_(width), nodes_(std::move(nodes)), outputs_(std::move(outputs)) {
  validate_and_index();
}

std::uint64_t DDG::mask() const {
  return width_ == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << width_) - 1);
}

bool DDG::contains(const std::string& id) const { return index_.count(id) != 0; }

const Node& DDG::node(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw EvalError("unknown node id: " + id);
  return nodes_[it->second];
}

const std::set<std::string>& DDG::uses(const std::string& id) const {
  auto it = uses_.find(id);
  if (it == uses_.end()) throw EvalError("unknown node id: " + id);
  return it->second;
}

std::size_t DDG::topo_pos(const std::string& id) const {
  auto it = topo_pos_.find(id);
  if (it == topo_pos_.end()) throw EvalError("unknown node id: " + id);
  return it->second;
}

std::vector<std::string> DDG::input_ids() const {
  std::vector<std::string> out;
  for (const auto& n : nodes_)
    if (n.kind == NodeKind::Input) out.push_back(n.id);
  return out;
}

void DDG::validate_and_index() {
  if (width_ < 1 || width_ > 64)
    throw ParseError(0, "width must be in [1, 64]");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!index_.emplace(nodes_[i].id, i).second)
      throw ParseError(0, "duplicate id: " + nodes_[i].id);
  }
  for (const auto& n : nodes_) {
    uses_.emplace(n.id, std::set<std::string>{});
    switch (n.kind) {
    case NodeKind::Input:
    case NodeKind::Const:
      if (!n.operands.empty())
        throw ParseError(0, n.id + ": input/const nodes take no operands");
      break;
    case NodeKind::Op:
      if ((int)n.operands.size() != op_arity(n.op))
        throw ParseError(0, n.id + ": " + op_name(n.op) + " expects " +
                                std::to_string(op_arity(n.op)) + " operand(s)");
      break;
    }
    if (n.kind == NodeKind::Const && width_ < 64 &&
        n.value >= (std::uint64_t{1} << width_))
      throw ParseError(0, n.id + ": constant does not fit in " +
                              std::to_string(width_) + " bits");
  }
  for (const auto& n : nodes_)
    for (const auto& o : n.operands) {
      if (!index_.count(o))
        throw ParseError(0, n.id + ": undefined operand " + o);
      uses_[o].insert(n.id);
    }
  for (const auto& o : outputs_)
    if (!index_.count(o)) throw ParseError(0, "output references unknown id " + o);

  // Kahn with a lexicographic min-heap; a leftover node means a cycle.
  // Pending counts distinct operands, matching the deduplicated uses sets
  // (a node may name the same operand twice).
  std::map<std::string, int> pending;
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& n : nodes_) {
    std::set<std::string> distinct(n.operands.begin(), n.operands.end());
    pending[n.id] = (int)distinct.size();
  }
  for (const auto& [id, deg] : pending)
    if (deg == 0) ready.push(id);
  while (!ready.empty()) {
    std::string id = ready.top();
    ready.pop();
    topo_pos_[id] = topo_.size();
    topo_.push_back(id);
    for (const auto& u : uses_[id])
      if (--pending[u] == 0) ready.push(u);
  }
  if (topo_.size() != nodes_.size()) throw ParseError(0, "cyclic definition");
}

namespace {

bool valid_identifier(const std::string& s) {
  if (s.empty()) return false;
  if (!(std::isalpha((unsigned char)s[0]) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum((unsigned char)c) || c == '_')) return false;
  return true;
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> toks;
  std::istringstream in(line);
  std::string t;
  while (in >> t) toks.push_back(t);
  return toks;
}

std::uint64_t parse_uint(const std::string& s, int lineno) {
  std::uint64_t v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  std::from_chars_result r{};
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X'))
    r = std::from_chars(first + 2, last, v, 16);
  else
    r = std::from_chars(first, last, v, 10);
  if (r.ec != std::errc{} || r.ptr != last)
    throw ParseError(lineno, "malformed unsigned integer: " + s);
  return v;
}

} // namespace

DDG parse_ddg(const std::string& text) {
  std::vector<Node> nodes;
  std::vector<std::string> outputs;
  std::set<std::string> seen_ids;
  unsigned width = 32;
  bool width_seen = false;

  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (auto pos = raw.find('#'); pos != std::string::npos) raw.erase(pos);
    auto toks = tokenize(raw);
    if (toks.empty()) continue;

    if (toks[0] == "width") {
      if (width_seen) throw ParseError(lineno, "width declared twice");
      if (toks.size() != 2) throw ParseError(lineno, "expected: width <W>");
      std::uint64_t w = parse_uint(toks[1], lineno);
      if (w < 1 || w > 64) throw ParseError(lineno, "width must be in [1, 64]");
      width = (unsigned)w;
      width_seen = true;
      continue;
    }
    if (toks[0] == "input") {
      if (toks.size() != 2 || !valid_identifier(toks[1]))
        throw ParseError(lineno, "expected: input <id>");
      if (!seen_ids.insert(toks[1]).second)
        throw ParseError(lineno, "duplicate id: " + toks[1]);
      nodes.push_back({toks[1], NodeKind::Input, OpKind::Add, 0, {}});
      continue;
    }
    if (toks[0] == "output") {
      if (toks.size() != 2) throw ParseError(lineno, "expected: output <id>");
      outputs.push_back(toks[1]);
      continue;
    }
    // <id> = const <n>  |  <id> = <opkind> <id> [<id>]
    if (toks.size() < 3 || toks[1] != "=")
      throw ParseError(lineno, "syntax error");
    if (!valid_identifier(toks[0]))
      throw ParseError(lineno, "bad identifier: " + toks[0]);
    if (!seen_ids.insert(toks[0]).second)
      throw ParseError(lineno, "duplicate id: " + toks[0]);
    if (toks[2] == "const") {
      if (toks.size() != 4) throw ParseError(lineno, "expected: <id> = const <n>");
      nodes.push_back({toks[0], NodeKind::Const, OpKind::Add,
                       parse_uint(toks[3], lineno), {}});
      continue;
    }
    auto kind = op_from_name(toks[2]);
    if (!kind) throw ParseError(lineno, "unknown operation: " + toks[2]);
    std::vector<std::string> ops(toks.begin() + 3, toks.end());
    if ((int)ops.size() != op_arity(*kind))
      throw ParseError(lineno, toks[2] + " expects " +
                                   std::to_string(op_arity(*kind)) + " operand(s)");
    nodes.push_back({toks[0], NodeKind::Op, *kind, 0, std::move(ops)});
  }

  try {
    return DDG(width, std::move(nodes), std::move(outputs));
  } catch (ParseError& e) {
    if (e.line == 0) throw ParseError(lineno, std::string(e.what()).substr(8));
    throw;
  }
}

std::string ddg_to_ir(const DDG& g) {
  std::ostringstream out;
  out << "width " << g.width() << "\n";
  for (const auto& n : g.nodes()) {
    switch (n.kind) {
    case NodeKind::Input:
      out << "input " << n.id << "\n";
      break;
    case NodeKind::Const:
      out << n.id << " = const " << n.value << "\n";
      break;
    case NodeKind::Op:
      out << n.id << " = " << op_name(n.op);
      for (const auto& o : n.operands) out << " " << o;
      out << "\n";
      break;
    }
  }
  for (const auto& o : g.outputs()) out << "output " << o << "\n";
  return out.str();
}

bool is_convex(const DDG& g, const std::set<std::string>& s) {
  for (const auto& id : s)
    (void)g.node(id); // existence check
  // A violation is a value-flow path member -> (outside)+ -> member.
  // Walk forward from members through outside nodes only; re-entering a
  // member through an outside node breaks convexity.
  std::deque<std::string> work;
  std::set<std::string> visited_outside;
  for (const auto& id : s)
    for (const auto& u : g.uses(id))
      if (!s.count(u) && visited_outside.insert(u).second) work.push_back(u);
  while (!work.empty()) {
    std::string id = work.front();
    work.pop_front();
    for (const auto& u : g.uses(id)) {
      if (s.count(u)) return false;
      if (visited_outside.insert(u).second) work.push_back(u);
    }
  }
  return true;
}

std::uint64_t eval_op(OpKind k, unsigned width, std::uint64_t a, std::uint64_t b,
                      const MemOracle* mem) {
  const std::uint64_t mask =
      width == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << width) - 1);
  switch (k) {
  case OpKind::Add: return (a + b) & mask;
  case OpKind::Sub: return (a - b) & mask;
  case OpKind::Mul: return (a * b) & mask;
  case OpKind::And: return a & b;
  case OpKind::Or: return a | b;
  case OpKind::Xor: return a ^ b;
  case OpKind::Not: return ~a & mask;
  case OpKind::Shl: return b >= width ? 0 : (a << b) & mask;
  case OpKind::Shrl: return b >= width ? 0 : a >> b;
  case OpKind::Shra: {
    const bool neg = (a >> (width - 1)) & 1;
    if (b >= width) return neg ? mask : 0;
    if (b == 0) return a;
    std::uint64_t v = a >> b;
    if (neg) v |= (mask >> b) ^ mask; // fill the vacated high bits
    return v & mask;
  }
  case OpKind::Rotl: {
    const std::uint64_t r = b % width;
    if (r == 0) return a;
    return ((a << r) | (a >> (width - r))) & mask;
  }
  case OpKind::Rotr: {
    const std::uint64_t r = b % width;
    if (r == 0) return a;
    return ((a >> r) | (a << (width - r))) & mask;
  }
  case OpKind::Load:
    if (!mem) throw EvalError("load evaluated with no memory oracle");
    return (*mem)(a)&mask;
  }
  throw EvalError("unhandled op kind");
}

std::map<std::string, std::uint64_t>
eval_ddg(const DDG& g, const std::map<std::string, std::uint64_t>& env,
         const MemOracle* mem) {
  std::unordered_map<std::string, std::uint64_t> val;
  val.reserve(g.nodes().size());
  for (const auto& id : g.toposort()) {
    const Node& n = g.node(id);
    switch (n.kind) {
    case NodeKind::Input: {
      auto it = env.find(id);
      if (it == env.end()) throw EvalError("unbound input: " + id);
      val[id] = it->second & g.mask();
      break;
    }
    case NodeKind::Const:
      val[id] = n.value;
      break;
    case NodeKind::Op: {
      std::uint64_t a = val.at(n.operands[0]);
      std::uint64_t b = n.operands.size() > 1 ? val.at(n.operands[1]) : 0;
      val[id] = eval_op(n.op, g.width(), a, b, mem);
      break;
    }
    }
  }
  std::map<std::string, std::uint64_t> out;
  for (const auto& o : g.outputs()) out[o] = val.at(o);
  return out;
}

DDG rewidth(const DDG& g, unsigned width) {
  const std::uint64_t mask =
      width == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << width) - 1);
  std::vector<Node> nodes = g.nodes();
  for (auto& n : nodes)
    if (n.kind == NodeKind::Const) n.value &= mask;
  return DDG(width, std::move(nodes), g.outputs());
}

} // namespace isext

#include "isext/candidate.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace isext {

int CandidateInstruction::op_count() const {
  int n = 0;
  for (const auto& e : body)
    if (e.tag == ExprNode::Tag::Op) ++n;
  return n;
}

CandidateInstruction cluster_to_function(const DDG& g, const Cluster& c,
                                         const std::string& name) {
  CandidateInstruction f;
  f.name = name;
  f.width = g.width();
  f.arity = (int)c.inputs.size();

  std::map<std::string, int> slot; // DDG id -> body index
  for (int i = 0; i < (int)c.inputs.size(); ++i) {
    f.body.push_back({ExprNode::Tag::Param, i + 1, 0, OpKind::Add, -1, -1});
    slot[c.inputs[i]] = (int)f.body.size() - 1;
  }
  auto ref = [&](const std::string& id) -> int {
    if (auto it = slot.find(id); it != slot.end()) return it->second;
    const Node& n = g.node(id);
    if (n.kind != NodeKind::Const)
      throw std::invalid_argument("cluster member references unmapped value " + id);
    f.body.push_back({ExprNode::Tag::Const, 0, n.value, OpKind::Add, -1, -1});
    slot[id] = (int)f.body.size() - 1;
    return slot[id];
  };
  for (const auto& id : g.toposort()) {
    if (!c.members.count(id)) continue;
    const Node& n = g.node(id);
    if (n.kind != NodeKind::Op)
      throw std::invalid_argument("cluster member " + id + " is not an operation");
    if (n.op == OpKind::Load)
      throw std::invalid_argument("cluster contains a load node: " + id);
    int lhs = ref(n.operands[0]);
    int rhs = n.operands.size() > 1 ? ref(n.operands[1]) : -1;
    f.body.push_back({ExprNode::Tag::Op, 0, 0, n.op, lhs, rhs});
    slot[id] = (int)f.body.size() - 1;
  }
  f.root = slot.at(c.root);
  return f;
}

std::uint64_t eval_fn(const CandidateInstruction& f,
                      std::span<const std::uint64_t> args,
                      std::vector<std::uint64_t>& scratch) {
  if ((int)args.size() != f.arity)
    throw std::invalid_argument(f.name + ": expected " + std::to_string(f.arity) +
                                " arguments, got " + std::to_string(args.size()));
  scratch.resize(f.body.size());
  const std::uint64_t mask =
      f.width == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << f.width) - 1);
  for (std::size_t i = 0; i < f.body.size(); ++i) {
    const ExprNode& e = f.body[i];
    switch (e.tag) {
    case ExprNode::Tag::Param: scratch[i] = args[e.param - 1] & mask; break;
    case ExprNode::Tag::Const: scratch[i] = e.value & mask; break;
    case ExprNode::Tag::Op:
      scratch[i] =
          eval_op(e.op, f.width, scratch[e.lhs], e.rhs >= 0 ? scratch[e.rhs] : 0);
      break;
    }
  }
  return scratch[f.root];
}

std::uint64_t eval_fn(const CandidateInstruction& f,
                      std::span<const std::uint64_t> args) {
  std::vector<std::uint64_t> scratch;
  return eval_fn(f, args, scratch);
}

namespace {

bool is_commutative(OpKind k) {
  switch (k) {
  case OpKind::Add:
  case OpKind::Mul:
  case OpKind::And:
  case OpKind::Or:
  case OpKind::Xor:
    return true;
  default:
    return false;
  }
}

std::string key_of(const CandidateInstruction& f, int idx,
                   std::vector<std::string>& memo) {
  if (!memo[idx].empty()) return memo[idx];
  const ExprNode& e = f.body[idx];
  std::string k;
  switch (e.tag) {
  case ExprNode::Tag::Param:
    k = "x" + std::to_string(e.param);
    break;
  case ExprNode::Tag::Const:
    k = "#" + std::to_string(e.value);
    break;
  case ExprNode::Tag::Op: {
    std::string a = key_of(f, e.lhs, memo);
    std::string b = e.rhs >= 0 ? key_of(f, e.rhs, memo) : "";
    if (e.rhs >= 0 && is_commutative(e.op) && b < a) std::swap(a, b);
    k = "(" + std::string(op_name(e.op)) + " " + a;
    if (e.rhs >= 0) k += " " + b;
    k += ")";
    break;
  }
  }
  memo[idx] = k;
  return k;
}

} // namespace

std::string structural_key(const CandidateInstruction& f) {
  std::vector<std::string> memo(f.body.size());
  return "w" + std::to_string(f.width) + "/" + std::to_string(f.arity) + ":" +
         key_of(f, f.root, memo);
}

std::vector<CandidateInstruction>
dedupe_structural(const std::vector<CandidateInstruction>& cands) {
  std::map<std::string, CandidateInstruction> byKey;
  std::vector<std::string> order;
  for (const auto& f : cands) {
    std::string k = structural_key(f);
    auto it = byKey.find(k);
    if (it == byKey.end()) {
      byKey.emplace(k, f);
      order.push_back(k);
    } else if (f.name < it->second.name) {
      it->second = f;
    }
  }
  std::vector<CandidateInstruction> out;
  out.reserve(order.size());
  for (const auto& k : order) out.push_back(byKey.at(k));
  return out;
}

std::string bv_literal(std::uint64_t value, unsigned width) {
  const std::uint64_t mask =
      width == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << width) - 1);
  value &= mask;
  std::ostringstream out;
  if (width % 4 == 0) {
    out << "#x";
    for (int nib = (int)width / 4 - 1; nib >= 0; --nib)
      out << "0123456789abcdef"[(value >> (4 * nib)) & 0xF];
  } else {
    out << "#b";
    for (int bit = (int)width - 1; bit >= 0; --bit)
      out << (((value >> bit) & 1) ? '1' : '0');
  }
  return out.str();
}

namespace {

const char* bv_op(OpKind k) {
  switch (k) {
  case OpKind::Add: return "bvadd";
  case OpKind::Sub: return "bvsub";
  case OpKind::Mul: return "bvmul";
  case OpKind::And: return "bvand";
  case OpKind::Or: return "bvor";
  case OpKind::Xor: return "bvxor";
  case OpKind::Not: return "bvnot";
  case OpKind::Shl: return "bvshl";
  case OpKind::Shrl: return "bvlshr";
  case OpKind::Shra: return "bvashr";
  default: return nullptr;
  }
}

} // namespace

std::string emit_term(const CandidateInstruction& f,
                      std::span<const std::string> arg_terms) {
  if ((int)arg_terms.size() != f.arity)
    throw std::invalid_argument(f.name + ": arity mismatch in emit_term");

  std::vector<int> refs(f.body.size(), 0);
  refs[f.root] += 1;
  for (const auto& e : f.body)
    if (e.tag == ExprNode::Tag::Op) {
      refs[e.lhs] += 1;
      if (e.rhs >= 0) refs[e.rhs] += 1;
    }

  // Shared op nodes get a let binding; everything else is inlined.
  std::vector<std::string> repr(f.body.size());
  std::vector<std::pair<std::string, std::string>> lets;
  int next_let = 0;
  const std::string w_lit = bv_literal(f.width, f.width);
  for (std::size_t i = 0; i < f.body.size(); ++i) {
    const ExprNode& e = f.body[i];
    std::string term;
    switch (e.tag) {
    case ExprNode::Tag::Param:
      term = arg_terms[e.param - 1];
      break;
    case ExprNode::Tag::Const:
      term = bv_literal(e.value, f.width);
      break;
    case ExprNode::Tag::Op: {
      const std::string& a = repr[e.lhs];
      const std::string b = e.rhs >= 0 ? repr[e.rhs] : "";
      if (const char* op = bv_op(e.op)) {
        term = "(" + std::string(op) + " " + a;
        if (e.rhs >= 0) term += " " + b;
        term += ")";
      } else if (e.op != OpKind::Rotl && e.op != OpKind::Rotr) {
        throw std::invalid_argument(f.name + ": " + op_name(e.op) +
                                    " has no solver translation");
      } else {
        // Rotates by a possibly non-constant amount: reduce the amount
        // mod W and combine both shift directions; shifting by >= W
        // yields zero in SMT-LIB, which makes the zero-amount case work.
        const std::string amt = "(bvurem " + b + " " + w_lit + ")";
        if (e.op == OpKind::Rotl)
          term = "(bvor (bvshl " + a + " " + amt + ") (bvlshr " + a + " (bvsub " +
                 w_lit + " " + amt + ")))";
        else
          term = "(bvor (bvlshr " + a + " " + amt + ") (bvshl " + a + " (bvsub " +
                 w_lit + " " + amt + ")))";
      }
      if (refs[i] > 1) {
        std::string name = "_t" + std::to_string(next_let++);
        lets.emplace_back(name, term);
        term = name;
      }
      break;
    }
    }
    repr[i] = term;
  }

  std::string result = repr[f.root];
  for (auto it = lets.rbegin(); it != lets.rend(); ++it)
    result = "(let ((" + it->first + " " + it->second + ")) " + result + ")";
  return result;
}

std::string function_to_ir(const CandidateInstruction& f) {
  std::ostringstream out;
  out << "width " << f.width << "\n";
  std::vector<std::string> names(f.body.size());
  int next = 0;
  for (std::size_t i = 0; i < f.body.size(); ++i)
    if (f.body[i].tag == ExprNode::Tag::Param) {
      names[i] = "x" + std::to_string(f.body[i].param);
    }
  for (int p = 1; p <= f.arity; ++p) out << "input x" << p << "\n";
  for (std::size_t i = 0; i < f.body.size(); ++i) {
    const ExprNode& e = f.body[i];
    if (e.tag == ExprNode::Tag::Const) {
      names[i] = "k" + std::to_string(next++);
      out << names[i] << " = const " << e.value << "\n";
    } else if (e.tag == ExprNode::Tag::Op) {
      names[i] = (int)i == f.root ? f.name : "n" + std::to_string(next++);
      out << names[i] << " = " << op_name(e.op) << " " << names[e.lhs];
      if (e.rhs >= 0) out << " " << names[e.rhs];
      out << "\n";
    }
  }
  if (f.body[f.root].tag != ExprNode::Tag::Op)
    throw std::invalid_argument(f.name + ": root must be an operation node");
  out << "output " << f.name << "\n";
  return out.str();
}

std::vector<CandidateInstruction> functions_from_ddg(const DDG& g) {
  std::vector<CandidateInstruction> out;
  for (const auto& root : g.outputs()) {
    // Cone of the root: members are the op nodes it depends on.
    std::set<std::string> cone;
    std::vector<std::string> work = {root};
    while (!work.empty()) {
      std::string id = work.back();
      work.pop_back();
      if (!cone.insert(id).second) continue;
      for (const auto& o : g.node(id).operands) work.push_back(o);
    }
    std::set<std::string> members;
    for (const auto& id : cone)
      if (g.is_op(id)) {
        if (g.node(id).op == OpKind::Load)
          throw std::invalid_argument("function " + root + " contains a load");
        members.insert(id);
      }
    if (members.empty())
      throw std::invalid_argument("output " + root + " has no operation body");
    Cluster c;
    c.root = root;
    c.members = members;
    std::vector<std::string> params;
    for (const auto& in : g.input_ids())
      if (cone.count(in)) params.push_back(in); // declaration order
    c.inputs = params;
    out.push_back(cluster_to_function(g, c, root));
  }
  return out;
}

CandidateInstruction rewidth(const CandidateInstruction& f, unsigned width) {
  CandidateInstruction out = f;
  out.width = width;
  const std::uint64_t mask =
      width == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << width) - 1);
  for (auto& e : out.body)
    if (e.tag == ExprNode::Tag::Const) e.value &= mask;
  return out;
}

} // namespace isext

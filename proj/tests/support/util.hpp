#pragma once

// Shared helpers for the test suites: corpus access, deterministic
// randomness, and the exhaustive subsumption oracle used to
// cross-check the CEGIS implementation. The oracle here deliberately
// shares nothing with the CEGIS code path: it enumerates every (p, c)
// assignment and checks all inputs directly.

#include "isext/candidate.hpp"
#include "isext/graph.hpp"
#include "isext/subsume.hpp"

#include <cstdlib>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace testutil {

inline std::string corpus_path(const std::string& rel) {
  return std::string(ISEXT_CORPUS_DIR) + "/" + rel;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline isext::DDG load_corpus_ddg(const std::string& rel) {
  return isext::parse_ddg(read_file(corpus_path(rel)));
}

/// Solver command for solver-gated tests: the environment wins, the
/// build-time default (bundled z3 wrapper) is the fallback. Empty means
/// no solver is available and such tests skip.
inline std::string solver_cmd() {
  if (const char* env = std::getenv("ISEXT_SMT_CMD"); env && *env) return env;
  std::string def = ISEXT_DEFAULT_SMT_CMD;
  return def;
}

/// Deterministic memory oracle for graphs with load nodes (splitmix64).
inline isext::MemOracle make_mem(std::uint64_t salt = 0x9e3779b97f4a7c15ull) {
  return [salt](std::uint64_t addr) {
    std::uint64_t z = addr + salt + 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
}

inline std::map<std::string, std::uint64_t>
random_env(const isext::DDG& g, std::mt19937_64& rng) {
  std::map<std::string, std::uint64_t> env;
  for (const auto& id : g.input_ids()) env[id] = rng() & g.mask();
  return env;
}

/// Exhaustive subsumption decision: enumerates all selector vectors p in
/// [1..n]^n that cover g's argument indices, all values of the constants
/// referenced, and every g input. Independent of the CEGIS path.
struct ExhaustiveOutcome {
  bool subsumes = false;
  std::optional<isext::SubsumptionWitness> witness;
};

inline ExhaustiveOutcome exhaustive_subsume(const isext::CandidateInstruction& f,
                                            const isext::CandidateInstruction& g) {
  ExhaustiveOutcome out;
  const int n = f.arity;
  const int m = g.arity;
  if (n < m || f.width != g.width) return out;
  const unsigned W = f.width;
  REQUIRE((unsigned)m * W <= 20); // full input sweep must be enumerable
  const std::uint64_t wmask =
      W == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << W) - 1);
  const std::uint64_t inputs_total = std::uint64_t{1} << ((unsigned)m * W);

  std::vector<int> p(n, 1);
  std::vector<std::uint64_t> x(m), v(n), sf, sg;
  while (true) {
    bool covers = true;
    for (int j = 1; j <= m; ++j) {
      bool found = false;
      for (int i = 0; i < n; ++i)
        if (p[i] == j) found = true;
      if (!found) covers = false;
    }
    if (covers) {
      std::vector<int> ref_slots;
      for (int i = 0; i < n; ++i)
        if (p[i] > m) ref_slots.push_back(p[i] - m);
      std::sort(ref_slots.begin(), ref_slots.end());
      ref_slots.erase(std::unique(ref_slots.begin(), ref_slots.end()),
                      ref_slots.end());
      REQUIRE((unsigned)ref_slots.size() * W <= 24);

      std::vector<std::uint64_t> cvals(ref_slots.size(), 0);
      while (true) {
        bool valid = true;
        for (std::uint64_t word = 0; word < inputs_total && valid; ++word) {
          std::uint64_t rest = word;
          for (int j = 0; j < m; ++j) {
            x[j] = rest & wmask;
            rest >>= W;
          }
          for (int i = 0; i < n; ++i) {
            if (p[i] <= m) {
              v[i] = x[p[i] - 1];
            } else {
              auto it = std::lower_bound(ref_slots.begin(), ref_slots.end(),
                                         p[i] - m);
              v[i] = cvals[(std::size_t)(it - ref_slots.begin())];
            }
          }
          if (isext::eval_fn(f, v, sf) != isext::eval_fn(g, x, sg)) valid = false;
        }
        if (valid) {
          out.subsumes = true;
          isext::SubsumptionWitness w;
          for (int i = 0; i < n; ++i) {
            if (p[i] <= m) {
              w.slots.push_back(isext::WitnessSlot::argument(p[i]));
            } else {
              auto it = std::lower_bound(ref_slots.begin(), ref_slots.end(),
                                         p[i] - m);
              w.slots.push_back(isext::WitnessSlot::constant(
                  cvals[(std::size_t)(it - ref_slots.begin())]));
            }
          }
          out.witness = std::move(w);
          return out;
        }
        bool more = false;
        for (int i = (int)cvals.size() - 1; i >= 0; --i) {
          if (cvals[i] < wmask) {
            cvals[i] += 1;
            more = true;
            break;
          }
          cvals[i] = 0;
        }
        if (!more) break;
      }
    }
    bool more = false;
    for (int i = n - 1; i >= 0; --i) {
      if (p[i] < n) {
        p[i] += 1;
        more = true;
        break;
      }
      p[i] = 1;
    }
    if (!more) break;
  }
  return out;
}

/// Random DAG generator for property tests (seeded, reproducible).
/// Produces load-free graphs by default so every node can be clustered.
inline isext::DDG random_ddg(std::mt19937_64& rng, int max_ops = 30,
                             unsigned width = 32, bool with_loads = false) {
  using namespace isext;
  std::vector<Node> nodes;
  std::vector<std::string> pool; // ids usable as operands
  int n_inputs = 2 + (int)(rng() % 4);
  for (int i = 0; i < n_inputs; ++i) {
    std::string id = "in" + std::to_string(i);
    nodes.push_back({id, NodeKind::Input, OpKind::Add, 0, {}});
    pool.push_back(id);
  }
  int n_consts = (int)(rng() % 3);
  const std::uint64_t mask =
      width == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << width) - 1);
  for (int i = 0; i < n_consts; ++i) {
    std::string id = "k" + std::to_string(i);
    nodes.push_back({id, NodeKind::Const, OpKind::Add, rng() & mask, {}});
    pool.push_back(id);
  }
  static const OpKind ops[] = {OpKind::Add,  OpKind::Sub,  OpKind::Mul,
                               OpKind::And,  OpKind::Or,   OpKind::Xor,
                               OpKind::Not,  OpKind::Shl,  OpKind::Shrl,
                               OpKind::Shra, OpKind::Rotl, OpKind::Rotr};
  int n_ops = 1 + (int)(rng() % (unsigned)max_ops);
  for (int i = 0; i < n_ops; ++i) {
    std::string id = "n" + std::to_string(i);
    OpKind k = with_loads && rng() % 8 == 0 ? OpKind::Load
                                            : ops[rng() % std::size(ops)];
    std::vector<std::string> operands;
    operands.push_back(pool[rng() % pool.size()]);
    if (op_arity(k) == 2) operands.push_back(pool[rng() % pool.size()]);
    nodes.push_back({id, NodeKind::Op, k, 0, std::move(operands)});
    pool.push_back(id);
  }
  // Outputs: every op with no user (sinks), to keep coverings honest.
  std::set<std::string> used;
  for (const auto& n : nodes)
    for (const auto& o : n.operands) used.insert(o);
  std::vector<std::string> outputs;
  for (const auto& n : nodes)
    if (n.kind == NodeKind::Op && !used.count(n.id)) outputs.push_back(n.id);
  return DDG(width, std::move(nodes), std::move(outputs));
}

} // namespace testutil

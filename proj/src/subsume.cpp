#include "isext/subsume.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <chrono>
#include <future>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace isext {

std::vector<std::uint64_t>
SubsumptionWitness::apply(std::span<const std::uint64_t> x) const {
  std::vector<std::uint64_t> v;
  v.reserve(slots.size());
  for (const auto& s : slots) v.push_back(s.is_arg ? x[s.arg - 1] : s.value);
  return v;
}

bool SubsumptionWitness::covers(int m) const {
  for (int j = 1; j <= m; ++j) {
    bool found = false;
    for (const auto& s : slots)
      if (s.is_arg && s.arg == j) found = true;
    if (!found) return false;
  }
  return true;
}

std::string SubsumptionWitness::to_string() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (i) out << " ";
    if (slots[i].is_arg)
      out << "x" << slots[i].arg;
    else
      out << "0x" << std::hex << slots[i].value << std::dec;
  }
  return out.str();
}

bool TestSet::contains(const std::vector<std::uint64_t>& x) const {
  return std::find(tests.begin(), tests.end(), x) != tests.end();
}

void TestSet::add(std::vector<std::uint64_t> x, std::uint64_t y) {
  tests.push_back(std::move(x));
  recorded_y.push_back(y);
}

namespace {

void require_pair(const CandidateInstruction& f, const CandidateInstruction& g) {
  if (f.width != g.width)
    throw std::invalid_argument("subsume: width mismatch between " + f.name +
                                " and " + g.name);
  if (f.arity < g.arity)
    throw std::invalid_argument("synth: arity precondition n >= m violated");
}

std::string sel_literal(int value) { return bv_literal((std::uint64_t)value, 8); }

} // namespace

// ---------------------------------------------------------------------------
// SMT oracle
// ---------------------------------------------------------------------------

SubsumeOracle::SynthResult SmtOracle::synth(const CandidateInstruction& f,
                                            const CandidateInstruction& g,
                                            const TestSet& T) {
  require_pair(f, g);
  const int n = f.arity;
  const int m = g.arity;
  const unsigned W = f.width;

  std::vector<SmtDecl> decls;
  std::vector<std::string> assertions;
  std::vector<std::string> wanted;

  for (int i = 1; i <= n; ++i) {
    decls.push_back({"p" + std::to_string(i), 8});
    wanted.push_back("p" + std::to_string(i));
  }
  for (int q = 1; q <= n - m; ++q) {
    decls.push_back({"c" + std::to_string(q), W});
    wanted.push_back("c" + std::to_string(q));
  }

  // Selector range p_i in [1..n].
  for (int i = 1; i <= n; ++i) {
    const std::string p = "p" + std::to_string(i);
    assertions.push_back("(and (bvule " + sel_literal(1) + " " + p + ") (bvule " +
                         p + " " + sel_literal(n) + "))");
  }
  // Argument coverage: every g argument index is selected somewhere.
  for (int j = 1; j <= m; ++j) {
    std::string disj = "(or";
    for (int i = 1; i <= n; ++i)
      disj += " (= p" + std::to_string(i) + " " + sel_literal(j) + ")";
    disj += ")";
    assertions.push_back(disj);
  }

  for (std::size_t t = 0; t < T.tests.size(); ++t) {
    const auto& x = T.tests[t];
    std::vector<std::string> v_names;
    for (int i = 1; i <= n; ++i) {
      std::string v = "v" + std::to_string(t) + "_" + std::to_string(i);
      decls.push_back({v, W});
      v_names.push_back(v);
    }
    // Slot semantics: p_i <= m selects x_{p_i}, p_i > m selects c_{p_i-m}.
    for (int i = 1; i <= n; ++i) {
      std::string disj = "(or";
      for (int j = 1; j <= m; ++j)
        disj += " (and (= p" + std::to_string(i) + " " + sel_literal(j) + ") (= " +
                v_names[i - 1] + " " + bv_literal(x[j - 1], W) + "))";
      for (int q = 1; q <= n - m; ++q)
        disj += " (and (= p" + std::to_string(i) + " " + sel_literal(m + q) +
                ") (= " + v_names[i - 1] + " c" + std::to_string(q) + "))";
      disj += ")";
      assertions.push_back(disj);
    }
    // Value coverage on this test: every x_i appears among the v_j.
    for (int j = 1; j <= m; ++j) {
      std::string disj = "(or";
      for (int i = 1; i <= n; ++i)
        disj += " (= " + bv_literal(x[j - 1], W) + " " + v_names[i - 1] + ")";
      disj += ")";
      assertions.push_back(disj);
    }
    // Functional constraint with g evaluated concretely.
    const std::uint64_t gx = eval_fn(g, x);
    assertions.push_back("(= " + emit_term(f, v_names) + " " + bv_literal(gx, W) +
                         ")");
  }

  auto t0 = std::chrono::steady_clock::now();
  SolverVerdict v = check(sess_, decls, assertions, wanted);
  ms_ += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                   t0)
             .count();

  SynthResult r;
  if (v.unknown()) {
    r.kind = SynthResult::Kind::Inconclusive;
    r.reason = v.reason == SolverVerdict::Reason::Timeout
                   ? SubsumeVerdict::Reason::Timeout
                   : SubsumeVerdict::Reason::SearchTooLarge;
    return r;
  }
  if (v.unsat()) {
    r.kind = SynthResult::Kind::None;
    return r;
  }
  r.kind = SynthResult::Kind::Witness;
  for (int i = 1; i <= n; ++i) {
    const std::uint64_t pi = v.model.at("p" + std::to_string(i));
    if (pi < 1 || pi > (std::uint64_t)n)
      throw SolverError("selector out of range in model");
    if (pi <= (std::uint64_t)m)
      r.witness.slots.push_back(WitnessSlot::argument((int)pi));
    else
      r.witness.slots.push_back(WitnessSlot::constant(
          v.model.at("c" + std::to_string(pi - (std::uint64_t)m))));
  }
  if (!r.witness.covers(m))
    throw SolverError("model violates the coverage constraint");
  return r;
}

SubsumeOracle::VerifyResult SmtOracle::verify(const CandidateInstruction& f,
                                              const CandidateInstruction& g,
                                              const SubsumptionWitness& w) {
  require_pair(f, g);
  const int m = g.arity;
  const unsigned W = f.width;

  std::vector<SmtDecl> decls;
  std::vector<std::string> wanted;
  for (int j = 1; j <= m; ++j) {
    decls.push_back({"x" + std::to_string(j), W});
    wanted.push_back("x" + std::to_string(j));
  }
  decls.push_back({"y", W});
  wanted.push_back("y");

  std::vector<std::string> x_terms;
  for (int j = 1; j <= m; ++j) x_terms.push_back("x" + std::to_string(j));
  std::vector<std::string> v_terms;
  for (const auto& s : w.slots)
    v_terms.push_back(s.is_arg ? x_terms[s.arg - 1] : bv_literal(s.value, W));

  std::vector<std::string> assertions;
  assertions.push_back("(= y " + emit_term(f, v_terms) + ")");
  assertions.push_back("(distinct y " + emit_term(g, x_terms) + ")");

  auto t0 = std::chrono::steady_clock::now();
  SolverVerdict v = check(sess_, decls, assertions, wanted);
  ms_ += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                   t0)
             .count();

  VerifyResult r;
  if (v.unknown()) {
    r.kind = VerifyResult::Kind::Inconclusive;
    r.reason = v.reason == SolverVerdict::Reason::Timeout
                   ? SubsumeVerdict::Reason::Timeout
                   : SubsumeVerdict::Reason::SearchTooLarge;
    return r;
  }
  if (v.unsat()) {
    r.kind = VerifyResult::Kind::Ok;
    return r;
  }
  r.kind = VerifyResult::Kind::Counterexample;
  for (int j = 1; j <= m; ++j)
    r.cex.push_back(v.model.at("x" + std::to_string(j)));
  r.y = v.model.at("y");
  return r;
}

// ---------------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------------

namespace {

/// Odometer over selector vectors p in [1..n]^n; returns false once
/// exhausted. The last position advances fastest.
bool next_selector(std::vector<int>& p, int n) {
  for (int i = (int)p.size() - 1; i >= 0; --i) {
    if (p[i] < n) {
      p[i] += 1;
      return true;
    }
    p[i] = 1;
  }
  return false;
}

bool covers_all(const std::vector<int>& p, int m) {
  for (int j = 1; j <= m; ++j)
    if (std::find(p.begin(), p.end(), j) == p.end()) return false;
  return true;
}

} // namespace

SubsumeOracle::SynthResult BruteOracle::synth(const CandidateInstruction& f,
                                              const CandidateInstruction& g,
                                              const TestSet& T) {
  require_pair(f, g);
  const int n = f.arity;
  const int m = g.arity;
  const unsigned W = f.width;
  const std::uint64_t wmask =
      W == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << W) - 1);

  std::vector<std::uint64_t> g_vals;
  for (const auto& x : T.tests) g_vals.push_back(eval_fn(g, x));

  bool skipped_large = false;
  std::vector<int> p(n, 1);
  std::vector<std::uint64_t> v(n);
  std::vector<std::uint64_t> scratch;
  do {
    if (!covers_all(p, m)) continue;
    // Constant slots actually referenced by this selector vector.
    std::vector<int> ref; // positions in p that point past m
    for (int i = 0; i < n; ++i)
      if (p[i] > m) ref.push_back(i);
    std::vector<int> ref_slots;
    for (int i : ref) ref_slots.push_back(p[i] - m);
    std::sort(ref_slots.begin(), ref_slots.end());
    ref_slots.erase(std::unique(ref_slots.begin(), ref_slots.end()),
                    ref_slots.end());
    if ((unsigned)ref_slots.size() * W > max_bits_) {
      skipped_large = true;
      continue;
    }

    std::vector<std::uint64_t> cvals(ref_slots.size(), 0);
    bool more_c = true;
    while (more_c) {
      bool all_tests_pass = true;
      for (std::size_t t = 0; t < T.tests.size() && all_tests_pass; ++t) {
        const auto& x = T.tests[t];
        for (int i = 0; i < n; ++i) {
          if (p[i] <= m) {
            v[i] = x[p[i] - 1];
          } else {
            auto it = std::lower_bound(ref_slots.begin(), ref_slots.end(),
                                       p[i] - m);
            v[i] = cvals[(std::size_t)(it - ref_slots.begin())];
          }
        }
        if (eval_fn(f, v, scratch) != g_vals[t]) all_tests_pass = false;
      }
      if (all_tests_pass) {
        SynthResult r;
        r.kind = SynthResult::Kind::Witness;
        for (int i = 0; i < n; ++i) {
          if (p[i] <= m) {
            r.witness.slots.push_back(WitnessSlot::argument(p[i]));
          } else {
            auto it =
                std::lower_bound(ref_slots.begin(), ref_slots.end(), p[i] - m);
            r.witness.slots.push_back(
                WitnessSlot::constant(cvals[(std::size_t)(it - ref_slots.begin())]));
          }
        }
        return r;
      }
      // Advance the constant odometer (last slot fastest).
      more_c = false;
      for (int i = (int)cvals.size() - 1; i >= 0; --i) {
        if (cvals[i] < wmask) {
          cvals[i] += 1;
          more_c = true;
          break;
        }
        cvals[i] = 0;
      }
    }
  } while (next_selector(p, n));

  SynthResult r;
  if (skipped_large) {
    r.kind = SynthResult::Kind::Inconclusive;
    r.reason = SubsumeVerdict::Reason::SearchTooLarge;
  } else {
    r.kind = SynthResult::Kind::None;
  }
  return r;
}

SubsumeOracle::VerifyResult BruteOracle::verify(const CandidateInstruction& f,
                                                const CandidateInstruction& g,
                                                const SubsumptionWitness& w) {
  require_pair(f, g);
  const int m = g.arity;
  const unsigned W = f.width;

  VerifyResult r;
  if ((unsigned)m * W > max_bits_) {
    r.kind = VerifyResult::Kind::Inconclusive;
    r.reason = SubsumeVerdict::Reason::SearchTooLarge;
    return r;
  }
  const std::uint64_t wmask =
      W == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << W) - 1);
  std::vector<std::uint64_t> x(m, 0);
  std::vector<std::uint64_t> sf, sg;
  while (true) {
    std::uint64_t fy = eval_fn(f, w.apply(x), sf);
    if (fy != eval_fn(g, x, sg)) {
      r.kind = VerifyResult::Kind::Counterexample;
      r.cex = x;
      r.y = fy;
      return r;
    }
    bool more = false;
    for (int i = m - 1; i >= 0; --i) {
      if (x[i] < wmask) {
        x[i] += 1;
        more = true;
        break;
      }
      x[i] = 0;
    }
    if (!more) break;
  }
  r.kind = VerifyResult::Kind::Ok;
  return r;
}

// ---------------------------------------------------------------------------
// CEGIS loop and set minimization
// ---------------------------------------------------------------------------

SubsumeOracle::SynthResult synth(const CandidateInstruction& f,
                                 const CandidateInstruction& g, const TestSet& T,
                                 const SolverSession& sess) {
  SmtOracle o(sess);
  return o.synth(f, g, T);
}

SubsumeOracle::VerifyResult verify(const CandidateInstruction& f,
                                   const CandidateInstruction& g,
                                   const SubsumptionWitness& w,
                                   const SolverSession& sess) {
  SmtOracle o(sess);
  return o.verify(f, g, w);
}

namespace {

/// 100000 random concrete checks of an accepted witness; a failure here
/// is a soundness bug, not a data condition.
void spot_check_witness(const CandidateInstruction& f, const CandidateInstruction& g,
                        const SubsumptionWitness& w) {
  std::seed_seq seed{(unsigned)std::hash<std::string>{}(f.name),
                     (unsigned)std::hash<std::string>{}(g.name), 0x5eedu};
  std::mt19937_64 rng(seed);
  const std::uint64_t mask =
      f.width == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << f.width) - 1);
  std::vector<std::uint64_t> x(g.arity);
  for (int t = 0; t < 100000; ++t) {
    for (auto& xi : x) xi = rng() & mask;
    if (eval_fn(f, w.apply(x)) != eval_fn(g, x))
      throw std::logic_error("witness for " + f.name + " over " + g.name +
                             " failed a random spot check");
  }
}

} // namespace

SubsumeVerdict subsume(const CandidateInstruction& f, const CandidateInstruction& g,
                       SubsumeOracle& oracle, int max_iters) {
  if (f.width != g.width)
    throw std::invalid_argument("subsume: width mismatch between " + f.name +
                                " and " + g.name);
  SubsumeVerdict verdict;
  if (f.arity < g.arity) {
    verdict.kind = SubsumeVerdict::Kind::NotSubsumed; // arity gate, no solver call
    return verdict;
  }

  TestSet T;
  // Two deterministic random tests up front. Test constraints are
  // necessary conditions whatever x is, so this changes neither verdict;
  // it spares the solver the witness-guessing rounds an empty test set
  // invites.
  {
    std::seed_seq seed{(unsigned)std::hash<std::string>{}(f.name),
                       (unsigned)std::hash<std::string>{}(g.name), 0xc0ffeeu};
    std::mt19937_64 rng(seed);
    const std::uint64_t mask =
        f.width == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << f.width) - 1);
    for (int s = 0; s < 2; ++s) {
      std::vector<std::uint64_t> x(g.arity);
      for (auto& xi : x) xi = rng() & mask;
      if (!T.contains(x)) T.add(x, 0);
    }
  }
  for (int iter = 1; iter <= max_iters; ++iter) {
    verdict.iterations = iter;
    auto sr = oracle.synth(f, g, T);
    if (sr.kind == SubsumeOracle::SynthResult::Kind::None) {
      verdict.kind = SubsumeVerdict::Kind::NotSubsumed;
      verdict.solver_ms = oracle.solver_ms();
      return verdict;
    }
    if (sr.kind == SubsumeOracle::SynthResult::Kind::Inconclusive) {
      verdict.kind = SubsumeVerdict::Kind::Inconclusive;
      verdict.reason = sr.reason;
      verdict.solver_ms = oracle.solver_ms();
      return verdict;
    }
    auto vr = oracle.verify(f, g, sr.witness);
    if (vr.kind == SubsumeOracle::VerifyResult::Kind::Ok) {
      spot_check_witness(f, g, sr.witness);
      verdict.kind = SubsumeVerdict::Kind::Subsumes;
      verdict.witness = sr.witness;
      verdict.solver_ms = oracle.solver_ms();
      return verdict;
    }
    if (vr.kind == SubsumeOracle::VerifyResult::Kind::Inconclusive) {
      verdict.kind = SubsumeVerdict::Kind::Inconclusive;
      verdict.reason = vr.reason;
      verdict.solver_ms = oracle.solver_ms();
      return verdict;
    }
    // CEGIS progress: the counterexample must falsify the witness that
    // produced it, and must be new. (Every vector in T satisfies the
    // witness synth just produced, so a falsifying vector is new.)
    if (eval_fn(f, sr.witness.apply(vr.cex)) == eval_fn(g, vr.cex))
      throw std::logic_error("counterexample does not falsify the witness");

    // Shrink the counterexample coordinate-wise while it still falsifies
    // the witness. Small odd values keep later synthesis queries cheap
    // without going degenerate: 0 and 1 collapse the multiplicative
    // structure and admit junk witnesses for many further rounds.
    std::vector<std::uint64_t> x = vr.cex;
    static const std::vector<std::uint64_t> ladder = {3, 5, 7, 9, 11, 13, 15};
    std::vector<std::uint64_t> scratch_f, scratch_g;
    for (std::size_t j = 0; j < x.size(); ++j) {
      for (std::uint64_t v : ladder) {
        if (v >= x[j]) break;
        const std::uint64_t saved = x[j];
        x[j] = v;
        if (eval_fn(f, sr.witness.apply(x), scratch_f) !=
            eval_fn(g, x, scratch_g))
          break; // still a counterexample, keep the smaller value
        x[j] = saved;
      }
    }
    if (T.contains(x))
      throw std::logic_error("verify produced a duplicate counterexample");
    T.add(x, eval_fn(f, sr.witness.apply(x)));
  }
  verdict.kind = SubsumeVerdict::Kind::Inconclusive;
  verdict.reason = SubsumeVerdict::Reason::IterationLimit;
  verdict.solver_ms = oracle.solver_ms();
  return verdict;
}

SubsumeVerdict subsume(const CandidateInstruction& f, const CandidateInstruction& g,
                       const SolverSession& sess, int max_iters) {
  SmtOracle oracle(sess);
  return subsume(f, g, oracle, max_iters);
}

namespace {

/// Keep-priority: larger arity, then fewer body operations, then name.
bool keep_before(const CandidateInstruction& a, const CandidateInstruction& b) {
  if (a.arity != b.arity) return a.arity > b.arity;
  if (a.op_count() != b.op_count()) return a.op_count() < b.op_count();
  return a.name < b.name;
}

} // namespace

MinimizeResult minimize_set(const std::vector<CandidateInstruction>& cands,
                            const OracleFactory& factory, int max_iters, int jobs) {
  MinimizeResult res;
  std::vector<CandidateInstruction> order = cands;
  std::stable_sort(order.begin(), order.end(), keep_before);

  // Schedule: descending arity of f; only n >= m pairs can subsume.
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t fi = 0; fi < order.size(); ++fi)
    for (std::size_t gi = 0; gi < order.size(); ++gi) {
      if (fi == gi) continue;
      if (order[fi].arity < order[gi].arity) continue;
      pairs.emplace_back((int)fi, (int)gi);
    }

  std::vector<SubsumeVerdict> verdicts(pairs.size());
  if (jobs <= 1) {
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      auto oracle = factory();
      verdicts[k] =
          subsume(order[pairs[k].first], order[pairs[k].second], *oracle, max_iters);
    }
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      while (true) {
        std::size_t k = next.fetch_add(1);
        if (k >= pairs.size()) break;
        auto oracle = factory();
        verdicts[k] = subsume(order[pairs[k].first], order[pairs[k].second],
                              *oracle, max_iters);
      }
    };
    std::vector<std::future<void>> workers;
    for (int j = 0; j < jobs; ++j)
      workers.push_back(std::async(std::launch::async, worker));
    for (auto& w : workers) w.get();
  }

  std::map<std::pair<int, int>, const SubsumeVerdict*> rel;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& v = verdicts[k];
    res.pairs.push_back({order[pairs[k].first].name, order[pairs[k].second].name, v});
    res.max_iterations = std::max(res.max_iterations, v.iterations);
    if (v.kind == SubsumeVerdict::Kind::Inconclusive) res.inconclusive_present = true;
    rel[pairs[k]] = &verdicts[k];
  }

  // Greedy keep in priority order; the representative of each mutual
  // class sorts first and absorbs the rest.
  std::vector<int> kept_idx;
  for (std::size_t gi = 0; gi < order.size(); ++gi) {
    bool removed = false;
    for (int fi : kept_idx) {
      auto it = rel.find({fi, (int)gi});
      if (it != rel.end() && it->second->subsumes()) {
        res.removed.push_back(
            {order[gi].name, order[fi].name, *it->second->witness});
        removed = true;
        break;
      }
    }
    if (!removed) kept_idx.push_back((int)gi);
  }
  for (int fi : kept_idx) res.kept.push_back(order[fi]);
  return res;
}

} // namespace isext

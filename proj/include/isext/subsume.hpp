#pragma once

#include "isext/candidate.hpp"
#include "isext/smt.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace isext {

/// One slot of a subsumption witness: either an index into g's argument
/// list (1-based) or a constant fed to f.
struct WitnessSlot {
  bool is_arg = true;
  int arg = 0;
  std::uint64_t value = 0;

  static WitnessSlot argument(int j) { return {true, j, 0}; }
  static WitnessSlot constant(std::uint64_t v) { return {false, 0, v}; }
  bool operator==(const WitnessSlot&) const = default;
};

/// The synthesized assignment (p, c): one slot per parameter of f. Every
/// argument index of g must appear in at least one slot.
struct SubsumptionWitness {
  std::vector<WitnessSlot> slots;

  /// f's argument vector for a concrete g input.
  std::vector<std::uint64_t> apply(std::span<const std::uint64_t> x) const;

  /// Coverage invariant: every j in [1..m] appears as an argument slot.
  bool covers(int m) const;

  std::string to_string() const; // "x1 x2 0x0 x3"
  bool operator==(const SubsumptionWitness&) const = default;
};

/// Counterexample inputs accumulated by the CEGIS loop; y values are
/// informational only.
struct TestSet {
  std::vector<std::vector<std::uint64_t>> tests;
  std::vector<std::uint64_t> recorded_y;

  bool contains(const std::vector<std::uint64_t>& x) const;
  void add(std::vector<std::uint64_t> x, std::uint64_t y);
};

struct SubsumeVerdict {
  enum class Kind { Subsumes, NotSubsumed, Inconclusive };
  enum class Reason { None, Timeout, IterationLimit, SearchTooLarge };

  Kind kind = Kind::NotSubsumed;
  Reason reason = Reason::None;
  std::optional<SubsumptionWitness> witness;
  int iterations = 0;
  double solver_ms = 0.0;

  bool subsumes() const { return kind == Kind::Subsumes; }
};

/// Answers the two CEGIS queries. One implementation talks SMT-LIB2 to
/// an external process, the other enumerates assignments exhaustively at
/// tiny widths.
class SubsumeOracle {
public:
  virtual ~SubsumeOracle() = default;

  struct SynthResult {
    enum class Kind { Witness, None, Inconclusive };
    Kind kind = Kind::None;
    SubsumptionWitness witness;
    SubsumeVerdict::Reason reason = SubsumeVerdict::Reason::None;
  };
  struct VerifyResult {
    enum class Kind { Ok, Counterexample, Inconclusive };
    Kind kind = Kind::Ok;
    std::vector<std::uint64_t> cex;
    std::uint64_t y = 0; // f's value under the refuted witness
    SubsumeVerdict::Reason reason = SubsumeVerdict::Reason::None;
  };

  /// A witness consistent with every test in T, or None when no witness
  /// exists at all (the constraints are necessary conditions).
  virtual SynthResult synth(const CandidateInstruction& f,
                            const CandidateInstruction& g, const TestSet& T) = 0;

  /// Full verification of a witness: Ok means valid for all inputs.
  virtual VerifyResult verify(const CandidateInstruction& f,
                              const CandidateInstruction& g,
                              const SubsumptionWitness& w) = 0;

  virtual double solver_ms() const { return 0.0; }
};

/// QF_BV queries against a fresh external solver process per call.
class SmtOracle final : public SubsumeOracle {
public:
  explicit SmtOracle(SolverSession sess) : sess_(std::move(sess)) {}
  SynthResult synth(const CandidateInstruction& f, const CandidateInstruction& g,
                    const TestSet& T) override;
  VerifyResult verify(const CandidateInstruction& f, const CandidateInstruction& g,
                      const SubsumptionWitness& w) override;
  double solver_ms() const override { return ms_; }

private:
  SolverSession sess_;
  double ms_ = 0.0;
};

/// Deterministic enumeration oracle for tiny widths (solver-free runs).
/// synth walks all (p, c) assignments consistent with the tests; verify
/// walks all g inputs. Queries beyond `max_bits` of enumeration come
/// back Inconclusive(SearchTooLarge).
class BruteOracle final : public SubsumeOracle {
public:
  explicit BruteOracle(unsigned max_bits = 20) : max_bits_(max_bits) {}
  SynthResult synth(const CandidateInstruction& f, const CandidateInstruction& g,
                    const TestSet& T) override;
  VerifyResult verify(const CandidateInstruction& f, const CandidateInstruction& g,
                      const SubsumptionWitness& w) override;

private:
  unsigned max_bits_;
};

/// Spec-shaped conveniences bound to an external solver session.
SubsumeOracle::SynthResult synth(const CandidateInstruction& f,
                                 const CandidateInstruction& g, const TestSet& T,
                                 const SolverSession& sess);
SubsumeOracle::VerifyResult verify(const CandidateInstruction& f,
                                   const CandidateInstruction& g,
                                   const SubsumptionWitness& w,
                                   const SolverSession& sess);

/// The CEGIS loop: alternates synth and verify, growing the test set
/// with each counterexample. Every accepted witness is re-checked on
/// 100000 random inputs before being reported. Each counterexample is
/// asserted to falsify the witness that produced it.
SubsumeVerdict subsume(const CandidateInstruction& f, const CandidateInstruction& g,
                       SubsumeOracle& oracle, int max_iters = 64);
SubsumeVerdict subsume(const CandidateInstruction& f, const CandidateInstruction& g,
                       const SolverSession& sess, int max_iters = 64);

using OracleFactory = std::function<std::unique_ptr<SubsumeOracle>()>;

struct PairOutcome {
  std::string f;
  std::string g;
  SubsumeVerdict verdict;
};

struct MinimizeResult {
  struct Removed {
    std::string g;
    std::string f; // the kept subsumer
    SubsumptionWitness witness;
  };
  std::vector<CandidateInstruction> kept;
  std::vector<Removed> removed;
  std::vector<PairOutcome> pairs; // full relation, scheduled order
  bool inconclusive_present = false;
  int max_iterations = 0;
};

/// Pairwise subsumption over a structurally deduplicated set, then
/// removal of every candidate subsumed by a kept one. Mutual classes
/// collapse to the representative preferred by (arity desc, fewer body
/// ops, lexicographic name); Inconclusive pairs never justify removal.
/// Pairs run concurrently on up to `jobs` oracle instances.
MinimizeResult minimize_set(const std::vector<CandidateInstruction>& cands,
                            const OracleFactory& factory, int max_iters = 64,
                            int jobs = 1);

} // namespace isext

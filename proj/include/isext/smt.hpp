#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace isext {

/// External SMT solver invocation: `cmd` is run through the shell, gets
/// one SMT-LIB2 script on stdin and must answer on stdout. A fresh
/// process is spawned per query.
struct SolverSession {
  std::string cmd;
  int timeout_ms = 10000;
  std::optional<std::string> transcript_path;
};

struct SolverVerdict {
  enum class Kind { Sat, Unsat, Unknown };
  enum class Reason { None, Timeout, SolverError };

  Kind kind = Kind::Unknown;
  Reason reason = Reason::None;
  std::map<std::string, std::uint64_t> model; // bindings for `wanted`, on sat

  bool sat() const { return kind == Kind::Sat; }
  bool unsat() const { return kind == Kind::Unsat; }
  bool unknown() const { return kind == Kind::Unknown; }
};

class SolverError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct SmtDecl {
  std::string name;
  unsigned width;
};

/// Builds the QF_BV script exactly as emitted on the wire:
///   (set-option :produce-models true)
///   (set-logic QF_BV)
///   (declare-const <name> (_ BitVec <W>)) ...
///   (assert <term>) ...
///   (check-sat)
///   (get-value (<name> ...))      when `wanted` is non-empty
std::string build_script(std::span<const SmtDecl> decls,
                         std::span<const std::string> assertions,
                         std::span<const std::string> wanted);

/// Runs one query against the external solver. Accepts "sat" / "unsat" /
/// "unknown" and the three bitvector numeral forms (#x…, #b…, (_ bvN W))
/// in get-value answers. A timeout kills the process and yields
/// Unknown(Timeout); a missing executable raises SolverError.
SolverVerdict check(const SolverSession& sess, std::span<const SmtDecl> decls,
                    std::span<const std::string> assertions,
                    std::span<const std::string> wanted);

/// Assignment under test during brute-force enumeration.
using BruteEnv = std::map<std::string, std::uint64_t>;
using BrutePredicate = std::function<bool(const BruteEnv&)>;

/// Exhaustive oracle over tiny widths: enumerates all assignments to the
/// declared unknowns (at most 2^20 combinations) and reports the first
/// satisfying one. Agrees with a sound solver on the same query.
SolverVerdict brute_check(std::span<const SmtDecl> decls,
                          std::span<const BrutePredicate> assertions);

/// Runs the raw script against the solver and returns raw stdout plus the
/// exit status; building block for check() and for protocol tests.
struct RawResult {
  std::string output;
  int exit_code = -1;
  bool timed_out = false;
};
RawResult run_solver_process(const SolverSession& sess, const std::string& script);

} // namespace isext

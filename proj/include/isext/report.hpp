#pragma once

#include "isext/cluster.hpp"
#include "isext/graph.hpp"
#include "isext/subsume.hpp"

#include <string>
#include <vector>

namespace isext {

/// Covering code size for one DDG at one input bound. Each cluster costs
/// one instruction; uncovered operations cost one base instruction each;
/// constants ride along as immediates.
struct CoverReport {
  std::string ddg;
  int max_inputs = 0;
  int base_size = 0;
  int maxmiso_size = 0;
  int clustered_size = 0;
  double reduction_pct = 0.0; // (maxmiso - clustered) / maxmiso * 100
};

struct SetReport {
  std::string set;
  int before = 0;
  int after = 0;
  double factor = 0.0; // before / after
};

/// Instruction count of the covering: clusters plus uncovered non-const
/// operations. Throws when the covering does not belong to `g` or fails
/// to span its outputs.
int code_size(const DDG& g, const ClusterGraph& cg);

/// Number of operations with no extension at all (every op node is one
/// base instruction).
int base_code_size(const DDG& g);

/// Runs max_miso and clone_and_combine for each max_inputs in [lo, hi].
std::vector<CoverReport> sweep(const DDG& g, const std::string& name, int lo,
                               int hi, const ArchConstraints& base = {});

CoverReport make_cover_report(const DDG& g, const std::string& name,
                              const ArchConstraints& ac);

std::string cover_reports_to_csv(const std::vector<CoverReport>& reports);
std::vector<CoverReport> cover_reports_from_csv(const std::string& csv);

std::string set_reports_to_csv(const std::vector<SetReport>& reports);
std::vector<SetReport> set_reports_from_csv(const std::string& csv);

/// Pair-by-pair subsumption outcomes; `with_timing` adds solver_time_ms.
std::string pair_outcomes_to_csv(const std::vector<PairOutcome>& pairs,
                                 bool with_timing);

/// Writes the CSVs plus a small human-readable summary next to them.
void emit_reports(const std::vector<CoverReport>& covers,
                  const std::vector<SetReport>& sets, const std::string& dir);

std::string format_fixed2(double v);

} // namespace isext

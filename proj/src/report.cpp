#include "isext/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace isext {

int base_code_size(const DDG& g) {
  int n = 0;
  for (const auto& node : g.nodes())
    if (node.kind == NodeKind::Op) ++n;
  return n;
}

int code_size(const DDG& g, const ClusterGraph& cg) {
  if (cg.ddg != &g)
    throw std::invalid_argument("code_size: covering built from a different DDG");
  // Spanning check: every output value must be producible by the
  // covering (eval_covering throws otherwise); here a structural check
  // is enough.
  std::set<std::string> covered;
  for (const auto& [r, c] : cg.clusters)
    covered.insert(c.members.begin(), c.members.end());
  for (const auto& o : g.outputs()) {
    const Node& n = g.node(o);
    if (n.kind != NodeKind::Op) continue;
    if (!cg.has(o) && covered.count(o))
      throw std::invalid_argument("covering hides output " + o +
                                  " inside a cluster");
  }
  return (int)cg.clusters.size() + (int)cg.uncovered().size();
}

std::string format_fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

CoverReport make_cover_report(const DDG& g, const std::string& name,
                              const ArchConstraints& ac) {
  CoverReport r;
  r.ddg = name;
  r.max_inputs = ac.max_inputs;
  r.base_size = base_code_size(g);
  ClusterGraph mm = max_miso(g, ac);
  r.maxmiso_size = code_size(g, mm);
  ClusterGraph cl = clone_and_combine(mm, ac);
  r.clustered_size = code_size(g, cl);
  r.reduction_pct = r.maxmiso_size == 0
                        ? 0.0
                        : 100.0 * (r.maxmiso_size - r.clustered_size) /
                              (double)r.maxmiso_size;
  return r;
}

std::vector<CoverReport> sweep(const DDG& g, const std::string& name, int lo,
                               int hi, const ArchConstraints& base) {
  if (lo < 1) throw std::invalid_argument("sweep: max_inputs lower bound must be >= 1");
  std::vector<CoverReport> out;
  for (int k = lo; k <= hi; ++k) {
    ArchConstraints ac = base;
    ac.max_inputs = k;
    out.push_back(make_cover_report(g, name, ac));
  }
  return out;
}

std::string cover_reports_to_csv(const std::vector<CoverReport>& reports) {
  std::ostringstream out;
  out << "ddg,max_inputs,base_size,maxmiso_size,clustered_size,reduction_pct\n";
  for (const auto& r : reports)
    out << r.ddg << "," << r.max_inputs << "," << r.base_size << ","
        << r.maxmiso_size << "," << r.clustered_size << ","
        << format_fixed2(r.reduction_pct) << "\n";
  return out.str();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

} // namespace

std::vector<CoverReport> cover_reports_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) ||
      line != "ddg,max_inputs,base_size,maxmiso_size,clustered_size,reduction_pct")
    throw std::invalid_argument("bad cover report header");
  std::vector<CoverReport> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto c = split_csv_line(line);
    if (c.size() != 6) throw std::invalid_argument("bad cover report row: " + line);
    CoverReport r;
    r.ddg = c[0];
    r.max_inputs = std::stoi(c[1]);
    r.base_size = std::stoi(c[2]);
    r.maxmiso_size = std::stoi(c[3]);
    r.clustered_size = std::stoi(c[4]);
    r.reduction_pct = std::stod(c[5]);
    out.push_back(r);
  }
  return out;
}

std::string set_reports_to_csv(const std::vector<SetReport>& reports) {
  std::ostringstream out;
  out << "set,before,after,factor\n";
  for (const auto& r : reports)
    out << r.set << "," << r.before << "," << r.after << ","
        << format_fixed2(r.factor) << "\n";
  return out.str();
}

std::vector<SetReport> set_reports_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "set,before,after,factor")
    throw std::invalid_argument("bad set report header");
  std::vector<SetReport> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto c = split_csv_line(line);
    if (c.size() != 4) throw std::invalid_argument("bad set report row: " + line);
    SetReport r;
    r.set = c[0];
    r.before = std::stoi(c[1]);
    r.after = std::stoi(c[2]);
    r.factor = std::stod(c[3]);
    out.push_back(r);
  }
  return out;
}

std::string pair_outcomes_to_csv(const std::vector<PairOutcome>& pairs,
                                 bool with_timing) {
  std::ostringstream out;
  out << "f_name,g_name,verdict,witness,iterations";
  if (with_timing) out << ",solver_time_ms";
  out << "\n";
  for (const auto& p : pairs) {
    std::string verdict;
    switch (p.verdict.kind) {
    case SubsumeVerdict::Kind::Subsumes: verdict = "subsumes"; break;
    case SubsumeVerdict::Kind::NotSubsumed: verdict = "not_subsumed"; break;
    case SubsumeVerdict::Kind::Inconclusive:
      verdict = p.verdict.reason == SubsumeVerdict::Reason::Timeout
                    ? "inconclusive_timeout"
                    : "inconclusive";
      break;
    }
    out << p.f << "," << p.g << "," << verdict << ","
        << (p.verdict.witness ? p.verdict.witness->to_string() : "") << ","
        << p.verdict.iterations;
    if (with_timing) out << "," << format_fixed2(p.verdict.solver_ms);
    out << "\n";
  }
  return out.str();
}

void emit_reports(const std::vector<CoverReport>& covers,
                  const std::vector<SetReport>& sets, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream f(fs::path(dir) / "cover_report.csv", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write cover_report.csv in " + dir);
    f << cover_reports_to_csv(covers);
  }
  {
    std::ofstream f(fs::path(dir) / "set_report.csv", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write set_report.csv in " + dir);
    f << set_reports_to_csv(sets);
  }
  std::ofstream s(fs::path(dir) / "summary.txt", std::ios::binary);
  s << "covering reports\n";
  for (const auto& r : covers)
    s << "  " << r.ddg << " k=" << r.max_inputs << ": base " << r.base_size
      << ", maxmiso " << r.maxmiso_size << ", clustered " << r.clustered_size
      << " (" << format_fixed2(r.reduction_pct) << "% vs maxmiso)\n";
  s << "set reports\n";
  for (const auto& r : sets)
    s << "  " << r.set << ": " << r.before << " -> " << r.after << " ("
      << format_fixed2(r.factor) << "x)\n";
}

} // namespace isext

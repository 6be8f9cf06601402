// isext: instruction-set extension synthesis toolkit.
//
// Subcommands cover the two pipeline stages (extraction with optional
// common-operation clustering, then candidate filtering by subsumption)
// plus file-level utilities. All stage outputs are plain files so stages
// can be rerun independently.

#include "isext/candidate.hpp"
#include "isext/cluster.hpp"
#include "isext/extract.hpp"
#include "isext/graph.hpp"
#include "isext/report.hpp"
#include "isext/smt.hpp"
#include "isext/subsume.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "isext 0.1.0";

enum ExitCode : int {
  kOk = 0,
  kInputError = 1,
  kSolverUnavailable = 2,
  kInconclusive = 3,
};

struct Options {
  unsigned width = 0; // 0: take the width of each file
  int max_inputs_lo = 6;
  int max_inputs_hi = 6;
  bool cluster = false;
  std::string seed = "maxmiso"; // or "singleton"
  std::string solver_cmd;
  int timeout_ms = 10000;
  int max_iters = 64;
  std::string oracle = "smt"; // or "brute"
  std::string out_dir = "out";
  bool no_timing = false;
  int jobs = 0;
  std::vector<std::string> files;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& data) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << data;
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)v);
  return buf;
}

isext::DDG load_ddg(const std::string& path, unsigned width_override) {
  try {
    isext::DDG g = isext::parse_ddg(read_file(path));
    if (width_override && width_override != g.width())
      g = isext::rewidth(g, width_override);
    return g;
  } catch (const isext::ParseError& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

std::string resolve_solver_cmd(const Options& opt) {
  if (!opt.solver_cmd.empty()) return opt.solver_cmd;
  if (const char* env = std::getenv("ISEXT_SMT_CMD"); env && *env) return env;
  return {};
}

int effective_jobs(const Options& opt) {
  if (opt.jobs > 0) return opt.jobs;
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? (int)hw : 2;
}

isext::OracleFactory make_oracle_factory(const Options& opt, int* exit_code) {
  if (opt.oracle == "brute")
    return [] { return std::make_unique<isext::BruteOracle>(); };
  std::string cmd = resolve_solver_cmd(opt);
  if (cmd.empty()) {
    std::cerr << "error: no SMT solver configured; set ISEXT_SMT_CMD or pass "
                 "--solver-cmd (or use --oracle brute for tiny widths)\n";
    *exit_code = kSolverUnavailable;
    return nullptr;
  }
  isext::SolverSession sess{cmd, opt.timeout_ms, std::nullopt};
  return [sess] { return std::make_unique<isext::SmtOracle>(sess); };
}

std::string cluster_listing(const std::string& name, const isext::DDG& g,
                            const isext::ClusterGraph& cg, int max_inputs) {
  std::ostringstream out;
  out << "# ddg: " << name << " width: " << g.width()
      << " max_inputs: " << max_inputs << "\n";
  for (const auto& root : cg.toposort()) {
    const auto& c = cg.clusters.at(root);
    out << "cluster root=" << root << " inputs=[";
    for (std::size_t i = 0; i < c.inputs.size(); ++i)
      out << (i ? "," : "") << c.inputs[i];
    out << "] members=[";
    std::size_t i = 0;
    for (const auto& m : c.members) out << (i++ ? "," : "") << m;
    out << "]\n";
  }
  for (const auto& id : cg.uncovered()) out << "uncovered " << id << "\n";
  return out.str();
}

struct NamedClusters {
  std::vector<isext::CandidateInstruction> functions; // pre-dedupe, ci-numbered
};

NamedClusters clusters_to_functions(const isext::DDG& g,
                                    const isext::ClusterGraph& cg, int* counter) {
  NamedClusters out;
  for (const auto& root : cg.toposort()) {
    const auto& c = cg.clusters.at(root);
    std::string name = "ci" + std::to_string((*counter)++);
    out.functions.push_back(isext::cluster_to_function(g, c, name));
  }
  return out;
}

std::vector<isext::CandidateInstruction>
load_functions(const std::vector<std::string>& files, unsigned width_override) {
  std::vector<isext::CandidateInstruction> fns;
  for (const auto& path : files) {
    isext::DDG g = load_ddg(path, width_override);
    for (auto& f : isext::functions_from_ddg(g)) fns.push_back(std::move(f));
  }
  return fns;
}

// ---------------------------------------------------------------------------

int cmd_extract(const Options& opt, bool force_cluster) {
  std::vector<isext::CoverReport> covers;
  for (const auto& path : opt.files) {
    isext::DDG g = load_ddg(path, opt.width);
    const std::string name = stem_of(path);
    for (int k = opt.max_inputs_lo; k <= opt.max_inputs_hi; ++k) {
      isext::ArchConstraints ac;
      ac.max_inputs = k;
      isext::CoverReport r;
      r.ddg = name;
      r.max_inputs = k;
      r.base_size = isext::base_code_size(g);
      isext::ClusterGraph cg;
      if (opt.seed == "singleton" && (force_cluster || opt.cluster))
        cg = isext::singleton_clusters(g, ac);
      else
        cg = isext::max_miso(g, ac);
      r.maxmiso_size = isext::code_size(g, cg);
      if (force_cluster || opt.cluster) cg = isext::clone_and_combine(cg, ac);
      r.clustered_size = isext::code_size(g, cg);
      r.reduction_pct = r.maxmiso_size == 0
                            ? 0.0
                            : 100.0 * (r.maxmiso_size - r.clustered_size) /
                                  (double)r.maxmiso_size;
      covers.push_back(r);

      std::string suffix = opt.max_inputs_lo == opt.max_inputs_hi
                               ? std::string{}
                               : "." + std::to_string(k);
      write_file(fs::path(opt.out_dir) / (name + suffix + ".clusters.txt"),
                 cluster_listing(name, g, cg, k));
    }
  }
  write_file(fs::path(opt.out_dir) / "cover_report.csv",
             isext::cover_reports_to_csv(covers));
  for (const auto& r : covers)
    std::cout << r.ddg << " k=" << r.max_inputs << ": base " << r.base_size
              << " maxmiso " << r.maxmiso_size << " clustered " << r.clustered_size
              << " (" << isext::format_fixed2(r.reduction_pct) << "%)\n";
  return kOk;
}

int cmd_functions(const Options& opt) {
  int counter = 1;
  std::vector<isext::CandidateInstruction> all;
  for (const auto& path : opt.files) {
    isext::DDG g = load_ddg(path, opt.width);
    isext::ArchConstraints ac;
    ac.max_inputs = opt.max_inputs_hi;
    isext::ClusterGraph cg = isext::max_miso(g, ac);
    cg = isext::clone_and_combine(cg, ac);
    auto named = clusters_to_functions(g, cg, &counter);
    all.insert(all.end(), named.functions.begin(), named.functions.end());
  }
  auto unique = isext::dedupe_structural(all);
  for (const auto& f : unique) {
    write_file(fs::path(opt.out_dir) / "functions" / (f.name + ".fn"),
               isext::function_to_ir(f));
    std::cout << f.name << " arity " << f.arity << "\n";
  }
  std::cout << all.size() << " extracted, " << unique.size()
            << " after structural dedupe\n";
  return kOk;
}

int run_minimize(const Options& opt, std::vector<isext::CandidateInstruction> fns,
                 const std::string& set_name, int* exit_code,
                 isext::MinimizeResult* out_result) {
  auto unique = isext::dedupe_structural(fns);
  int rc = kOk;
  auto factory = make_oracle_factory(opt, &rc);
  if (!factory) return rc;

  isext::MinimizeResult mr =
      isext::minimize_set(unique, factory, opt.max_iters, effective_jobs(opt));

  isext::SetReport sr;
  sr.set = set_name;
  sr.before = (int)unique.size();
  sr.after = (int)mr.kept.size();
  sr.factor = sr.after ? (double)sr.before / sr.after : 0.0;
  write_file(fs::path(opt.out_dir) / "set_report.csv",
             isext::set_reports_to_csv({sr}));
  write_file(fs::path(opt.out_dir) / "witnesses.csv",
             isext::pair_outcomes_to_csv(mr.pairs, !opt.no_timing));

  std::cout << "kept:";
  for (const auto& f : mr.kept) std::cout << " " << f.name;
  std::cout << "\nremoved:";
  for (const auto& r : mr.removed)
    std::cout << " " << r.g << "(by " << r.f << ")";
  std::cout << "\nreduction factor " << isext::format_fixed2(sr.factor) << "\n";
  if (mr.inconclusive_present) {
    std::cerr << "warning: inconclusive subsumption pairs present\n";
    *exit_code = kInconclusive;
  }
  if (out_result) *out_result = std::move(mr);
  return kOk;
}

int cmd_subsume(const Options& opt) {
  auto fns = load_functions(opt.files, opt.width);
  int exit_code = kOk;
  int rc = run_minimize(opt, std::move(fns), "candidates", &exit_code, nullptr);
  return rc != kOk ? rc : exit_code;
}

int cmd_pipeline(const Options& opt) {
  json manifest;
  manifest["tool"] = kVersion;
  manifest["config"] = {{"width", opt.width},
                        {"max_inputs", {opt.max_inputs_lo, opt.max_inputs_hi}},
                        {"timeout_ms", opt.timeout_ms},
                        {"max_iters", opt.max_iters},
                        {"oracle", opt.oracle},
                        {"no_timing", opt.no_timing}};
  for (const auto& path : opt.files)
    manifest["inputs"].push_back(
        {{"path", path}, {"fnv1a64", hex64(fnv1a64(read_file(path)))}});

  // Stage 1: extraction and clustering, sweeping the requested range.
  std::vector<isext::CoverReport> covers;
  int counter = 1;
  std::vector<isext::CandidateInstruction> extracted;
  for (const auto& path : opt.files) {
    isext::DDG g = load_ddg(path, opt.width);
    const std::string name = stem_of(path);
    for (int k = opt.max_inputs_lo; k <= opt.max_inputs_hi; ++k) {
      isext::ArchConstraints ac;
      ac.max_inputs = k;
      covers.push_back(isext::make_cover_report(g, name, ac));
    }
    // Candidates are taken at the top of the range.
    isext::ArchConstraints ac;
    ac.max_inputs = opt.max_inputs_hi;
    isext::ClusterGraph cg = isext::clone_and_combine(isext::max_miso(g, ac), ac);
    write_file(fs::path(opt.out_dir) / (name + ".clusters.txt"),
               cluster_listing(name, g, cg, ac.max_inputs));
    auto named = clusters_to_functions(g, cg, &counter);
    extracted.insert(extracted.end(), named.functions.begin(),
                     named.functions.end());
  }
  write_file(fs::path(opt.out_dir) / "cover_report.csv",
             isext::cover_reports_to_csv(covers));

  // Stage 2: dedupe, serialize, minimize.
  auto unique = isext::dedupe_structural(extracted);
  for (const auto& f : unique)
    write_file(fs::path(opt.out_dir) / "functions" / (f.name + ".fn"),
               isext::function_to_ir(f));

  int exit_code = kOk;
  isext::MinimizeResult mr;
  int rc = run_minimize(opt, unique, "pipeline", &exit_code, &mr);
  if (rc != kOk) return rc;

  for (const auto& name :
       {std::string("cover_report.csv"), std::string("set_report.csv"),
        std::string("witnesses.csv")}) {
    std::string data = read_file((fs::path(opt.out_dir) / name).string());
    manifest["outputs"].push_back(
        {{"path", name}, {"fnv1a64", hex64(fnv1a64(data))}});
  }
  for (const auto& f : unique) {
    std::string rel = "functions/" + f.name + ".fn";
    std::string data = read_file((fs::path(opt.out_dir) / rel).string());
    manifest["outputs"].push_back(
        {{"path", rel}, {"fnv1a64", hex64(fnv1a64(data))}});
  }
  for (const auto& path : opt.files) {
    std::string rel = stem_of(path) + ".clusters.txt";
    std::string data = read_file((fs::path(opt.out_dir) / rel).string());
    manifest["outputs"].push_back(
        {{"path", rel}, {"fnv1a64", hex64(fnv1a64(data))}});
  }
  write_file(fs::path(opt.out_dir) / "manifest.json", manifest.dump(2) + "\n");
  return exit_code;
}

int cmd_report(const Options& opt) {
  for (const auto& path : opt.files) {
    std::string data = read_file(path);
    std::istringstream probe(data);
    std::string header;
    std::getline(probe, header);
    if (header.rfind("ddg,", 0) == 0) {
      for (const auto& r : isext::cover_reports_from_csv(data))
        std::cout << r.ddg << " k=" << r.max_inputs << ": base " << r.base_size
                  << " maxmiso " << r.maxmiso_size << " clustered "
                  << r.clustered_size << " ("
                  << isext::format_fixed2(r.reduction_pct) << "%)\n";
    } else if (header.rfind("set,", 0) == 0) {
      for (const auto& r : isext::set_reports_from_csv(data))
        std::cout << r.set << ": " << r.before << " -> " << r.after << " ("
                  << isext::format_fixed2(r.factor) << "x)\n";
    } else {
      throw std::runtime_error(path + ": unrecognized report header");
    }
  }
  return kOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"instruction-set extension synthesis toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Options opt;
  std::string max_inputs_spec = "6";

  auto add_common = [&](CLI::App* sub, bool wants_files = true) {
    sub->add_option("--width", opt.width, "override the width of every input file");
    sub->add_option("--max-inputs", max_inputs_spec,
                    "input bound k, or a sweep range lo:hi");
    sub->add_option("--out", opt.out_dir, "output directory")
        ->capture_default_str();
    if (wants_files)
      sub->add_option("files", opt.files, "input files")->required();
  };
  auto add_solver = [&](CLI::App* sub) {
    sub->add_option("--solver-cmd", opt.solver_cmd,
                    "external SMT solver command (overrides ISEXT_SMT_CMD)");
    sub->add_option("--timeout-ms", opt.timeout_ms, "per-query solver timeout")
        ->capture_default_str();
    sub->add_option("--max-iters", opt.max_iters, "CEGIS iteration cap")
        ->capture_default_str();
    sub->add_option("--oracle", opt.oracle, "smt | brute")
        ->check(CLI::IsMember({"smt", "brute"}))
        ->capture_default_str();
    sub->add_flag("--no-timing", opt.no_timing,
                  "omit solver time columns from reports");
    sub->add_option("--jobs", opt.jobs, "concurrent subsumption queries");
  };

  CLI::App* extract = app.add_subcommand("extract", "MaxMISO cluster extraction");
  add_common(extract);
  extract->add_flag("--cluster,!--no-cluster", opt.cluster,
                    "also run common-operation clustering");

  CLI::App* cluster =
      app.add_subcommand("cluster", "common-operation clustering to a fixpoint");
  add_common(cluster);
  cluster->add_option("--seed", opt.seed, "maxmiso | singleton")
      ->check(CLI::IsMember({"maxmiso", "singleton"}))
      ->capture_default_str();

  CLI::App* functions =
      app.add_subcommand("functions", "lift clusters to candidate functions");
  add_common(functions);

  CLI::App* subsume =
      app.add_subcommand("subsume", "minimize a candidate set by subsumption");
  add_common(subsume);
  add_solver(subsume);

  CLI::App* pipeline =
      app.add_subcommand("pipeline", "extract, cluster, dedupe, subsume");
  add_common(pipeline);
  add_solver(pipeline);

  CLI::App* report = app.add_subcommand("report", "render report CSVs");
  report->add_option("files", opt.files, "report CSV files")->required();

  CLI11_PARSE(app, argc, argv);

  // --max-inputs accepts "k" or "lo:hi".
  try {
    auto colon = max_inputs_spec.find(':');
    if (colon == std::string::npos) {
      opt.max_inputs_lo = opt.max_inputs_hi = std::stoi(max_inputs_spec);
    } else {
      opt.max_inputs_lo = std::stoi(max_inputs_spec.substr(0, colon));
      opt.max_inputs_hi = std::stoi(max_inputs_spec.substr(colon + 1));
    }
    if (opt.max_inputs_lo < 1 || opt.max_inputs_hi < opt.max_inputs_lo)
      throw std::invalid_argument("bad range");
  } catch (const std::exception&) {
    std::cerr << "error: --max-inputs expects k or lo:hi with 1 <= lo <= hi\n";
    return kInputError;
  }

  try {
    if (extract->parsed()) return cmd_extract(opt, false);
    if (cluster->parsed()) return cmd_extract(opt, true);
    if (functions->parsed()) return cmd_functions(opt);
    if (subsume->parsed()) return cmd_subsume(opt);
    if (pipeline->parsed()) return cmd_pipeline(opt);
    if (report->parsed()) return cmd_report(opt);
  } catch (const isext::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const isext::SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverUnavailable;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

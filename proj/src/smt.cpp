#include "isext/smt.hpp"

#include <cerrno>
#include <cctype>
#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

namespace isext {

std::string build_script(std::span<const SmtDecl> decls,
                         std::span<const std::string> assertions,
                         std::span<const std::string> wanted) {
  std::ostringstream out;
  out << "(set-option :produce-models true)\n";
  out << "(set-logic QF_BV)\n";
  for (const auto& d : decls)
    out << "(declare-const " << d.name << " (_ BitVec " << d.width << "))\n";
  for (const auto& a : assertions) out << "(assert " << a << ")\n";
  out << "(check-sat)\n";
  if (!wanted.empty()) {
    out << "(get-value (";
    for (std::size_t i = 0; i < wanted.size(); ++i) {
      if (i) out << " ";
      out << wanted[i];
    }
    out << "))\n";
  }
  return out.str();
}

RawResult run_solver_process(const SolverSession& sess, const std::string& script) {
  static const int sigpipe_ignored = [] {
    signal(SIGPIPE, SIG_IGN);
    return 0;
  }();
  (void)sigpipe_ignored;

  // O_CLOEXEC keeps pipe ends of concurrently spawned queries from
  // leaking into each other's children; a leaked write end would keep a
  // sibling's stdin open forever.
  int in_pipe[2];  // parent -> child stdin
  int out_pipe[2]; // child stdout -> parent
  if (pipe2(in_pipe, O_CLOEXEC) != 0 || pipe2(out_pipe, O_CLOEXEC) != 0)
    throw SolverError("pipe() failed: " + std::string(strerror(errno)));

  pid_t pid = fork();
  if (pid < 0) throw SolverError("fork() failed: " + std::string(strerror(errno)));
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);  // dup2 clears O_CLOEXEC on the copy
    dup2(out_pipe[1], STDOUT_FILENO);
    execl("/bin/sh", "sh", "-c", sess.cmd.c_str(), (char*)nullptr);
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);

  // Feed the script; the child may start answering before we finish, so
  // interleave non-blocking writes with reads.
  fcntl(in_pipe[1], F_SETFL, O_NONBLOCK);
  fcntl(out_pipe[0], F_SETFL, O_NONBLOCK);

  RawResult res;
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::milliseconds(sess.timeout_ms);
  std::size_t written = 0;
  bool stdin_open = true;
  bool stdout_open = true;
  char buf[4096];

  while (stdout_open) {
    auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      res.timed_out = true;
      kill(pid, SIGKILL);
      break;
    }
    int wait_ms = (int)std::chrono::duration_cast<std::chrono::milliseconds>(
                      deadline - now)
                      .count();
    struct pollfd fds[2];
    nfds_t nfds = 0;
    int out_idx = -1, in_idx = -1;
    fds[nfds] = {out_pipe[0], POLLIN, 0};
    out_idx = (int)nfds++;
    if (stdin_open) {
      fds[nfds] = {in_pipe[1], POLLOUT, 0};
      in_idx = (int)nfds++;
    }
    int rc = poll(fds, nfds, wait_ms > 50 ? 50 : wait_ms);
    if (rc < 0) {
      if (errno == EINTR) continue;
      kill(pid, SIGKILL);
      break;
    }
    if (in_idx >= 0 && (fds[in_idx].revents & (POLLOUT | POLLERR | POLLHUP))) {
      if (fds[in_idx].revents & (POLLERR | POLLHUP)) {
        close(in_pipe[1]);
        stdin_open = false;
      } else {
        ssize_t n = write(in_pipe[1], script.data() + written,
                          script.size() - written);
        if (n > 0) written += (std::size_t)n;
        if (n < 0 && errno != EAGAIN && errno != EINTR) {
          close(in_pipe[1]);
          stdin_open = false;
        }
        if (written == script.size()) {
          close(in_pipe[1]);
          stdin_open = false;
        }
      }
    }
    if (fds[out_idx].revents & (POLLIN | POLLHUP)) {
      ssize_t n = read(out_pipe[0], buf, sizeof buf);
      if (n > 0)
        res.output.append(buf, (std::size_t)n);
      else if (n == 0)
        stdout_open = false;
      else if (errno != EAGAIN && errno != EINTR)
        stdout_open = false;
    }
  }
  if (stdin_open) close(in_pipe[1]);
  close(out_pipe[0]);

  int status = 0;
  waitpid(pid, &status, 0);
  if (WIFEXITED(status))
    res.exit_code = WEXITSTATUS(status);
  else
    res.exit_code = -1;

  if (sess.transcript_path) {
    std::ofstream log(*sess.transcript_path, std::ios::app);
    log << "; ---- query ----\n"
        << script << "; ---- response (exit " << res.exit_code << ") ----\n"
        << res.output << "\n";
  }
  return res;
}

namespace {

// Minimal S-expression reader for get-value answers.
struct Sexp {
  std::string atom;
  std::vector<Sexp> list;
  bool is_atom = true;
};

Sexp parse_sexp(const std::string& s, std::size_t& pos) {
  while (pos < s.size() && std::isspace((unsigned char)s[pos])) ++pos;
  if (pos >= s.size()) throw SolverError("unexpected end of solver response");
  if (s[pos] == '(') {
    ++pos;
    Sexp node;
    node.is_atom = false;
    while (true) {
      while (pos < s.size() && std::isspace((unsigned char)s[pos])) ++pos;
      if (pos >= s.size()) throw SolverError("unbalanced solver response");
      if (s[pos] == ')') {
        ++pos;
        return node;
      }
      node.list.push_back(parse_sexp(s, pos));
    }
  }
  Sexp node;
  std::size_t start = pos;
  while (pos < s.size() && !std::isspace((unsigned char)s[pos]) && s[pos] != '(' &&
         s[pos] != ')')
    ++pos;
  node.atom = s.substr(start, pos - start);
  return node;
}

std::optional<std::uint64_t> parse_bv_numeral(const Sexp& v) {
  if (v.is_atom) {
    const std::string& a = v.atom;
    if (a.size() > 2 && a[0] == '#' && a[1] == 'x')
      return std::stoull(a.substr(2), nullptr, 16);
    if (a.size() > 2 && a[0] == '#' && a[1] == 'b')
      return std::stoull(a.substr(2), nullptr, 2);
    return std::nullopt;
  }
  // (_ bvN W)
  if (v.list.size() == 3 && v.list[0].is_atom && v.list[0].atom == "_" &&
      v.list[1].is_atom && v.list[1].atom.rfind("bv", 0) == 0)
    return std::stoull(v.list[1].atom.substr(2), nullptr, 10);
  return std::nullopt;
}

} // namespace

SolverVerdict check(const SolverSession& sess, std::span<const SmtDecl> decls,
                    std::span<const std::string> assertions,
                    std::span<const std::string> wanted) {
  const std::string script = build_script(decls, assertions, wanted);
  RawResult raw = run_solver_process(sess, script);

  SolverVerdict v;
  if (raw.timed_out) {
    v.kind = SolverVerdict::Kind::Unknown;
    v.reason = SolverVerdict::Reason::Timeout;
    return v;
  }
  if (raw.exit_code == 127)
    throw SolverError("solver command not found: " + sess.cmd +
                      " (set ISEXT_SMT_CMD or --solver-cmd)");

  // Scan for the verdict line; solvers may interleave warnings.
  std::istringstream lines(raw.output);
  std::string line;
  std::size_t verdict_end = std::string::npos;
  while (std::getline(lines, line)) {
    std::string t = line;
    t.erase(0, t.find_first_not_of(" \t\r"));
    t.erase(t.find_last_not_of(" \t\r") + 1);
    if (t == "sat" || t == "unsat" || t == "unknown") {
      v.kind = t == "sat"     ? SolverVerdict::Kind::Sat
               : t == "unsat" ? SolverVerdict::Kind::Unsat
                              : SolverVerdict::Kind::Unknown;
      if (t == "unknown") v.reason = SolverVerdict::Reason::SolverError;
      auto g = lines.tellg();
      verdict_end = g < 0 ? raw.output.size() : (std::size_t)g;
      break;
    }
  }
  if (verdict_end == std::string::npos)
    throw SolverError("no sat/unsat/unknown in solver response: " +
                      raw.output.substr(0, 200));

  if (v.sat() && !wanted.empty()) {
    std::string rest = raw.output.substr(verdict_end);
    std::size_t pos = 0;
    Sexp values = parse_sexp(rest, pos);
    if (values.is_atom) throw SolverError("malformed get-value answer");
    for (const auto& pair : values.list) {
      if (pair.is_atom || pair.list.size() != 2 || !pair.list[0].is_atom)
        throw SolverError("malformed get-value binding");
      auto num = parse_bv_numeral(pair.list[1]);
      if (!num) throw SolverError("unparsable model value for " + pair.list[0].atom);
      v.model[pair.list[0].atom] = *num;
    }
    for (const auto& w : wanted)
      if (!v.model.count(w)) throw SolverError("model misses binding for " + w);
  }
  return v;
}

SolverVerdict brute_check(std::span<const SmtDecl> decls,
                          std::span<const BrutePredicate> assertions) {
  unsigned total_bits = 0;
  for (const auto& d : decls) total_bits += d.width;
  if (total_bits > 20)
    throw std::invalid_argument("brute_check: search space too large (" +
                                std::to_string(total_bits) + " unknown bits)");

  SolverVerdict v;
  std::vector<std::uint64_t> cur(decls.size(), 0);
  BruteEnv env;
  const std::uint64_t combos = std::uint64_t{1} << total_bits;
  for (std::uint64_t word = 0; word < combos; ++word) {
    std::uint64_t rest = word;
    for (std::size_t i = 0; i < decls.size(); ++i) {
      const std::uint64_t m = (std::uint64_t{1} << decls[i].width) - 1;
      cur[i] = rest & m;
      rest >>= decls[i].width;
    }
    env.clear();
    for (std::size_t i = 0; i < decls.size(); ++i) env[decls[i].name] = cur[i];
    bool ok = true;
    for (const auto& a : assertions)
      if (!a(env)) {
        ok = false;
        break;
      }
    if (ok) {
      v.kind = SolverVerdict::Kind::Sat;
      v.model = env;
      return v;
    }
  }
  v.kind = SolverVerdict::Kind::Unsat;
  return v;
}

} // namespace isext

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "isext/cluster.hpp"
#include "isext/extract.hpp"
#include "isext/report.hpp"

#include "support/util.hpp"

#include <random>

using namespace isext;

namespace {

DDG ci19_ddg() { return testutil::load_corpus_ddg("ci19.ddg"); }

std::set<std::string> keys(const ClusterGraph& cg) {
  std::set<std::string> out;
  for (const auto& [r, c] : cg.clusters) out.insert(r);
  return out;
}

} // namespace

TEST_CASE("cluster_inputs: ci19 pieces") {
  DDG g = ci19_ddg();
  CHECK(cluster_inputs(g, {"t1"}) == std::vector<std::string>{"a", "b"});
  // Full body: k255 folds away, first-use order a,b,c,d.
  CHECK(cluster_inputs(g, {"t1", "t2", "t3", "t4"}) ==
        std::vector<std::string>{"a", "b", "c", "d"});
}

TEST_CASE("cluster_inputs: unary node") {
  DDG g = parse_ddg("input x\nn = not x\noutput n");
  CHECK(cluster_inputs(g, {"n"}) == std::vector<std::string>{"x"});
}

TEST_CASE("is_legal_miso: singletons") {
  DDG g = ci19_ddg();
  ArchConstraints ac;
  for (const char* id : {"t1", "t2", "t3", "t4"})
    CHECK(is_legal_miso(g, {id}, ac));
}

TEST_CASE("is_legal_miso: non-root member used outside") {
  DDG g = testutil::load_corpus_ddg("d1.ddg");
  ArchConstraints ac;
  // t1 also feeds t3, outside {t1, t2}.
  CHECK_FALSE(is_legal_miso(g, {"t1", "t2"}, ac));
  CHECK(is_legal_miso(g, {"t1", "t2", "t3"}, ac) == false); // two roots
}

TEST_CASE("is_legal_miso: input bound on the ci19 body") {
  DDG g = ci19_ddg();
  std::set<std::string> body = {"t1", "t2", "t3", "t4"};
  ArchConstraints ac4;
  ac4.max_inputs = 4;
  CHECK(is_legal_miso(g, body, ac4));
  ArchConstraints ac3;
  ac3.max_inputs = 3;
  CHECK_FALSE(is_legal_miso(g, body, ac3));
}

TEST_CASE("is_legal_miso: forbidden kinds and node cap") {
  DDG g = parse_ddg("input x\nn = load x\noutput n");
  ArchConstraints ac;
  CHECK_FALSE(is_legal_miso(g, {"n"}, ac));
  ac.forbidden_kinds.clear();
  CHECK(is_legal_miso(g, {"n"}, ac));

  DDG h = ci19_ddg();
  ArchConstraints cap;
  cap.max_nodes = 2;
  CHECK(is_legal_miso(h, {"t1", "t2"}, cap));
  CHECK_FALSE(is_legal_miso(h, {"t1", "t2", "t3"}, cap));
}

TEST_CASE("max_miso: straight chain becomes one cluster") {
  DDG g = parse_ddg("input x\nn1 = not x\nn2 = not n1\nn3 = not n2\noutput n3");
  ArchConstraints ac;
  ClusterGraph cg = max_miso(g, ac);
  REQUIRE(cg.clusters.size() == 1);
  CHECK(cg.clusters.at("n3").members ==
        std::set<std::string>{"n1", "n2", "n3"});
}

TEST_CASE("max_miso: D1 common operation is excluded from both users") {
  DDG g = testutil::load_corpus_ddg("d1.ddg");
  ArchConstraints ac;
  ClusterGraph cg = max_miso(g, ac);
  CHECK(keys(cg) == std::set<std::string>{"t1", "t2", "t3"});
  for (const auto& [r, c] : cg.clusters) CHECK(c.members.size() == 1);
}

TEST_CASE("max_miso: ci19 body shrinks as the input bound tightens") {
  DDG g = ci19_ddg();
  ArchConstraints ac2;
  ac2.max_inputs = 2;
  ClusterGraph at2 = max_miso(g, ac2);
  CHECK(at2.clusters.size() == 3);
  CHECK(at2.clusters.count("t4"));
  CHECK(at2.clusters.at("t4").members == std::set<std::string>{"t3", "t4"});

  ArchConstraints ac4;
  ac4.max_inputs = 4;
  ClusterGraph at4 = max_miso(g, ac4);
  REQUIRE(at4.clusters.size() == 1);
  CHECK(at4.clusters.at("t4").members ==
        std::set<std::string>{"t1", "t2", "t3", "t4"});
}

TEST_CASE("max_miso: partition, maximality, legality on random DAGs") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 60; ++trial) {
    DDG g = testutil::random_ddg(rng, 24, 8, trial % 3 == 0);
    ArchConstraints ac;
    ac.max_inputs = 2 + (int)(rng() % 5);
    ClusterGraph cg = max_miso(g, ac);

    // Partition: every clusterable op node in exactly one cluster.
    std::map<std::string, int> owner_count;
    for (const auto& [r, c] : cg.clusters) {
      CHECK(is_legal_miso(g, c.members, ac));
      CHECK(c.members.count(r));
      CHECK(c.inputs == cluster_inputs(g, c.members));
      for (const auto& m : c.members) owner_count[m] += 1;
    }
    for (const auto& [id, n] : owner_count) CHECK(n == 1);
    for (const auto& id : cg.uncovered()) {
      // Uncovered nodes must be genuinely unclusterable as singletons.
      CHECK_FALSE(is_legal_miso(g, {id}, ac));
    }

    // Maximality: absorbing any fully-consumed predecessor would break
    // legality (it is free otherwise, so the greedy rule takes it).
    for (const auto& [r, c] : cg.clusters) {
      for (const auto& m : c.members)
        for (const auto& o : g.node(m).operands) {
          if (c.members.count(o) || !g.is_op(o)) continue;
          bool all_inside = true;
          for (const auto& u : g.uses(o))
            if (!c.members.count(u)) all_inside = false;
          if (!all_inside) continue;
          if (cg.clusters.count(o)) continue; // owned as another root
          std::set<std::string> grown = c.members;
          grown.insert(o);
          CHECK_FALSE(is_legal_miso(g, grown, ac));
        }
    }
  }
}

TEST_CASE("max_miso: covering code size is nonincreasing in the bound") {
  for (const char* f : {"d1.ddg", "ci19.ddg", "magma_round.ddg",
                        "magma_round_hw.ddg", "aes_round.ddg", "chain.ddg"}) {
    DDG g = testutil::load_corpus_ddg(f);
    int prev = -1;
    for (int k = 1; k <= 6; ++k) {
      ArchConstraints ac;
      ac.max_inputs = k;
      int size = code_size(g, max_miso(g, ac));
      if (prev >= 0) CHECK(size <= prev);
      prev = size;
    }
  }
}

TEST_CASE("max_miso: magma round at the paper's settings") {
  DDG g = testutil::load_corpus_ddg("magma_round.ddg");
  ArchConstraints ac;
  ac.max_inputs = 6;
  ClusterGraph cg = max_miso(g, ac);
  CHECK(cg.clusters.size() == 6);    // reassembly, four chains, key addition
  CHECK(cg.uncovered().size() == 4); // the table loads stay outside
  CHECK(cg.clusters.at("out").members.size() == 8);
  CHECK(cg.clusters.at("out").inputs.size() == 5);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "isext/cluster.hpp"
#include "isext/extract.hpp"
#include "isext/report.hpp"

#include "support/util.hpp"

#include <random>

using namespace isext;

namespace {

const std::vector<std::string> kCorpus = {"d1.ddg",
                                          "ci19.ddg",
                                          "magma_round.ddg",
                                          "magma_round_hw.ddg",
                                          "aes_round.ddg",
                                          "chain.ddg"};

std::set<std::string> keys(const ClusterGraph& cg) {
  std::set<std::string> out;
  for (const auto& [r, c] : cg.clusters) out.insert(r);
  return out;
}

std::set<std::string> member_union(const ClusterGraph& cg) {
  std::set<std::string> out;
  for (const auto& [r, c] : cg.clusters)
    out.insert(c.members.begin(), c.members.end());
  return out;
}

void check_preservation(const DDG& g, const ClusterGraph& cg, int n_random,
                        std::mt19937_64& rng) {
  auto mem = testutil::make_mem();
  for (int i = 0; i < n_random; ++i) {
    auto env = testutil::random_env(g, rng);
    CHECK(eval_covering(cg, env, &mem) == eval_ddg(g, env, &mem));
  }
}

} // namespace

TEST_CASE("singleton_clusters: counts") {
  ClusterGraph a = singleton_clusters(testutil::load_corpus_ddg("ci19.ddg"));
  CHECK(a.clusters.size() == 4);

  DDG passthrough = parse_ddg("input x\noutput x");
  CHECK(singleton_clusters(passthrough).clusters.empty());

  ClusterGraph d = singleton_clusters(testutil::load_corpus_ddg("d1.ddg"));
  CHECK(d.clusters.size() == 3);
}

TEST_CASE("combine_subgraphs: D1 merges") {
  DDG g = testutil::load_corpus_ddg("d1.ddg");
  ClusterGraph cg = singleton_clusters(g);

  Cluster m12 = combine_subgraphs(cg, "t2", "t1");
  CHECK(m12.root == "t2");
  CHECK(m12.members == std::set<std::string>{"t1", "t2"});
  CHECK(m12.inputs == std::vector<std::string>{"x", "y"});

  Cluster m13 = combine_subgraphs(cg, "t3", "t1");
  CHECK(m13.members == std::set<std::string>{"t1", "t3"});
  CHECK(m13.inputs == std::vector<std::string>{"x", "y"});

  CHECK_THROWS_AS(combine_subgraphs(cg, "t2", "t3"), std::invalid_argument);
}

TEST_CASE("combine_subgraphs: chain link equals MaxMISO absorption") {
  DDG g = parse_ddg("input x\nn1 = not x\nn2 = not n1\noutput n2");
  ClusterGraph cg = singleton_clusters(g);
  Cluster merged = combine_subgraphs(cg, "n2", "n1");
  ArchConstraints ac;
  ClusterGraph mm = max_miso(g, ac);
  CHECK(merged.members == mm.clusters.at("n2").members);
  CHECK(merged.inputs == mm.clusters.at("n2").inputs);
}

TEST_CASE("can_combine: input bound and forbidden kinds") {
  DDG g = testutil::load_corpus_ddg("d1.ddg");
  ClusterGraph cg = singleton_clusters(g);
  ArchConstraints ac2;
  ac2.max_inputs = 2;
  CHECK(can_combine(cg, "t2", "t1", ac2));
  ArchConstraints ac1;
  ac1.max_inputs = 1;
  CHECK_FALSE(can_combine(cg, "t2", "t1", ac1));

  // A merged body with five external values violates max_inputs = 4.
  DDG wide = parse_ddg("input a\ninput b\ninput c\ninput d\ninput e\n"
                       "s = add a b\nu = add s c\nv = add u d\nw = add v e\n"
                       "z = xor s w\noutput z");
  ClusterGraph wcg = singleton_clusters(wide);
  // Root w over {u, v, w} has inputs {s, d, e}; merging s's chain in
  // would need {a, b, c, d, e}.
  Cluster uvw;
  uvw.root = "w";
  uvw.members = {"u", "v", "w"};
  uvw.inputs = cluster_inputs(wide, uvw.members);
  wcg.clusters["w"] = uvw;
  wcg.clusters.erase("u");
  wcg.clusters.erase("v");
  ArchConstraints ac4;
  ac4.max_inputs = 4;
  CHECK_FALSE(can_combine(wcg, "w", "s", ac4));
  ArchConstraints ac5;
  ac5.max_inputs = 5;
  CHECK(can_combine(wcg, "w", "s", ac5));

  // A load member poisons any merge.
  DDG lg = parse_ddg("input x\nl = load x\nn = not l\noutput n");
  ClusterGraph lcg;
  lcg.ddg = &lg;
  lcg.clusters["l"] = {"l", {"l"}, {"x"}};
  lcg.clusters["n"] = {"n", {"n"}, {"l"}};
  ArchConstraints ac;
  CHECK_FALSE(can_combine(lcg, "n", "l", ac));
}

TEST_CASE("combine_pass: D1 clones the common operation into both users") {
  DDG g = testutil::load_corpus_ddg("d1.ddg");
  ArchConstraints ac;
  ac.max_inputs = 2;
  ClusterGraph out = combine_pass(singleton_clusters(g, ac), ac);
  CHECK(keys(out) == std::set<std::string>{"t2", "t3"});
  CHECK(out.clusters.at("t2").members == std::set<std::string>{"t1", "t2"});
  CHECK(out.clusters.at("t3").members == std::set<std::string>{"t1", "t3"});
}

TEST_CASE("combine_pass: a single blocked user passes both through") {
  DDG g = parse_ddg("input x\ninput y\ninput z\nt1 = add x y\nt2 = not t1\n"
                    "u2 = add t1 z\noutput t2\noutput u2");
  ArchConstraints ac;
  ac.max_inputs = 2; // u2+t1 would need {x, y, z}
  ClusterGraph in = singleton_clusters(g, ac);
  ClusterGraph out = combine_pass(in, ac);
  CHECK(out.same_covering(in));
}

TEST_CASE("combine_pass: the all-users condition is a conjunction") {
  // t1 has a mergeable user t2 and a load consumer; the load is not a
  // cluster, so it blocks eliminating t1 entirely.
  DDG g = parse_ddg("input x\ninput y\nt1 = add x y\nt2 = not t1\n"
                    "l = load t1\nn = not l\noutput t2\noutput n");
  ArchConstraints ac;
  ClusterGraph in = singleton_clusters(g, ac);
  ClusterGraph out = combine_pass(in, ac);
  CHECK(out.same_covering(in));
}

TEST_CASE("combine_pass: declared outputs block elimination") {
  DDG g = parse_ddg("input x\ninput y\nt1 = add x y\nt2 = not t1\n"
                    "output t1\noutput t2");
  ArchConstraints ac;
  ClusterGraph in = singleton_clusters(g, ac);
  ClusterGraph out = combine_pass(in, ac);
  CHECK(out.same_covering(in));
}

TEST_CASE("clone_and_combine: common-op-free seed is already a fixpoint") {
  DDG g = testutil::load_corpus_ddg("chain.ddg");
  ArchConstraints ac;
  ClusterGraph mm = max_miso(g, ac);
  CloneStats st;
  ClusterGraph out = clone_and_combine(mm, ac, &st);
  CHECK(out.same_covering(mm));
  CHECK(st.passes == 0);
}

TEST_CASE("clone_and_combine: magma round drops one instruction") {
  DDG g = testutil::load_corpus_ddg("magma_round.ddg");
  ArchConstraints ac;
  ac.max_inputs = 6;
  ClusterGraph mm = max_miso(g, ac);
  ClusterGraph out = clone_and_combine(mm, ac);
  CHECK(code_size(g, out) == code_size(g, mm) - 1);
}

TEST_CASE("clone_and_combine: chained common operations clone over two passes") {
  DDG g = parse_ddg("input i1\ninput i2\nk1 = const 3\nk2 = const 5\n"
                    "a = add i1 i2\n"
                    "b = shl a k1\n"
                    "c = xor a i2\n"
                    "d = and b i1\n"
                    "e = or b i2\n"
                    "output c\noutput d\noutput e");
  // a feeds {b, c}; b feeds {d, e}.
  ArchConstraints ac;
  CloneStats st;
  ClusterGraph out = clone_and_combine(singleton_clusters(g, ac), ac, &st);
  CHECK(st.passes == 2);
  CHECK(keys(out) == std::set<std::string>{"c", "d", "e"});
  CHECK(out.clusters.at("d").members == std::set<std::string>{"a", "b", "d"});
  CHECK(out.clusters.at("e").members == std::set<std::string>{"a", "b", "e"});
  CHECK(out.clusters.at("c").members == std::set<std::string>{"a", "c"});
  std::mt19937_64 rng(3);
  check_preservation(g, out, 200, rng);
}

TEST_CASE("clone_and_combine: termination bound, idempotence, coverage") {
  std::mt19937_64 rng(2024);
  for (const auto& file : kCorpus) {
    DDG g = testutil::load_corpus_ddg(file);
    for (int k = 2; k <= 6; k += 2) {
      ArchConstraints ac;
      ac.max_inputs = k;
      ClusterGraph seed = max_miso(g, ac);
      CloneStats st;
      ClusterGraph out = clone_and_combine(seed, ac, &st);
      CHECK(st.passes <= (int)seed.clusters.size());

      // Idempotence.
      ClusterGraph again = clone_and_combine(out, ac);
      CHECK(again.same_covering(out));

      // Coverage: nothing covered by the seed becomes uncovered.
      auto before = member_union(seed);
      auto after = member_union(out);
      for (const auto& id : before) CHECK(after.count(id));

      // Legality of every output cluster, at cluster level.
      for (const auto& [r, c] : out.clusters)
        CHECK(is_legal_miso_body(g, c.members, r, ac));

      check_preservation(g, out, 100, rng);
    }
  }
}

TEST_CASE("clone_and_combine: singleton seeding works too") {
  DDG g = testutil::load_corpus_ddg("magma_round_hw.ddg");
  ArchConstraints ac;
  ac.max_inputs = 6;
  ClusterGraph out = clone_and_combine(singleton_clusters(g, ac), ac);
  for (const auto& [r, c] : out.clusters)
    CHECK(is_legal_miso_body(g, c.members, r, ac));
  std::mt19937_64 rng(11);
  check_preservation(g, out, 200, rng);
}

TEST_CASE("eval_covering: exhaustive equality at W=4 for small corpora") {
  for (const char* file : {"d1.ddg", "ci19.ddg", "chain.ddg"}) {
    DDG g32 = testutil::load_corpus_ddg(file);
    DDG g = rewidth(g32, 4);
    auto inputs = g.input_ids();
    REQUIRE(inputs.size() * 4 <= 16);
    ArchConstraints ac;
    ac.max_inputs = 4;
    ClusterGraph out = clone_and_combine(max_miso(g, ac), ac);
    auto mem = testutil::make_mem();
    const std::uint64_t total = std::uint64_t{1} << (4 * inputs.size());
    for (std::uint64_t word = 0; word < total; ++word) {
      std::map<std::string, std::uint64_t> env;
      std::uint64_t rest = word;
      for (const auto& in : inputs) {
        env[in] = rest & 15;
        rest >>= 4;
      }
      CHECK(eval_covering(out, env, &mem) == eval_ddg(g, env, &mem));
    }
  }
}

#include <doctest.h>

#include "support.hpp"

using namespace hmcfs;
using namespace testing;

namespace {

HmcModel<Rational> trivial_model() {
  const Mat<Rational> one = Mat<Rational>::Ones(1, 1);
  return HmcModel<Rational>(one, one, one.col(0));
}

Rational total_weight(const FiniteSpace& s) {
  Rational w = 0;
  for (const auto& a : s.atoms()) w += a.weight;
  return w;
}

/// Random abstract space with `atoms` atoms; when `zero_atoms` > 0 that many
/// atoms get weight zero.
FiniteSpace random_space(Rng& rng, std::size_t atoms, std::size_t zero_atoms = 0) {
  std::vector<int> w(atoms);
  int total = 0;
  for (std::size_t a = 0; a < atoms; ++a) total += (w[a] = a < zero_atoms ? 0 : uniform_int(rng, 1, 9));
  std::vector<Rational> weights;
  for (int x : w) weights.push_back(q(x, total));
  return FiniteSpace::abstract(weights);
}

Partition random_partition(Rng& rng, std::size_t atoms, int cells) {
  std::vector<int> keys(atoms);
  for (auto& k : keys) k = uniform_int(rng, 0, cells - 1);
  return Partition::from_keys(keys);
}

RandVec random_randvec(Rng& rng, std::size_t atoms, Index d) { return random_matrix(rng, static_cast<Index>(atoms), d); }

/// X_0, X_1 uniform and independent, X_{t+1} = X_{t-1} with probability
/// 3/4: a second-order chain. Y_t = X_t.
FiniteSpace order_two_space() {
  std::vector<FiniteSpace::Atom> atoms;
  for (int x0 = 0; x0 < 2; ++x0)
    for (int x1 = 0; x1 < 2; ++x1)
      for (int x2 = 0; x2 < 2; ++x2) {
        const Rational w = q(1, 4) * (x2 == x0 ? q(3, 4) : q(1, 4));
        atoms.push_back({{x0, x1, x2}, {x0, x1, x2}, w});
      }
  return FiniteSpace(atoms, 2, 2);
}

}  // namespace

TEST_CASE("enumerate_hmc") {
  const auto one = enumerate_hmc(trivial_model(), 2);
  REQUIRE(one.size() == 1);
  CHECK(one.weight(0) == 1);
  CHECK(one.atom(0).x == std::vector<int>{0, 0, 0});

  const HmcModel<Rational> ident(identity(2), identity(2), vec_of({q(1, 2), q(1, 2)}));
  const auto two = enumerate_hmc(ident, 1);
  REQUIRE(two.size() == 2);
  CHECK(two.weight(0) == q(1, 2));
  CHECK(two.weight(1) == q(1, 2));

  Rng rng(1);
  for (int rep = 0; rep < 5; ++rep) {
    const auto s = enumerate_hmc(random_hmc(rng, 3, 2), 3);
    CHECK(total_weight(s) == 1);
    CHECK(s.x_length() == 4);
    CHECK(s.y_length() == 4);
    for (const auto& a : s.atoms()) CHECK(a.weight > 0);
  }

  try {
    enumerate_hmc(random_hmc(rng, 3, 3), 6, 1000);
    FAIL("expected BudgetExceeded");
  } catch (const BudgetExceeded& e) {
    CHECK(e.atoms() == 4782969);
    CHECK(e.budget() == 1000);
  }
  CHECK_THROWS_AS(enumerate_hmc(trivial_model(), -1), ValidationError);
}

TEST_CASE("enumerate_sigma_p and enumerate_sigma_s") {
  const Mat<Rational> one = Mat<Rational>::Ones(1, 1);
  CHECK(enumerate_sigma_p(SigmaPModel<Rational>({one}, vec_of({1})), 3).size() == 1);
  CHECK(enumerate_sigma_s(SigmaSModel<Rational>({one}, vec_of({1})), 3).size() == 1);

  const HmcModel<Rational> ident(identity(2), identity(2), vec_of({q(1, 2), q(1, 2)}));
  const auto sp = enumerate_sigma_p(hmc_to_sigma_p(ident), 2);
  CHECK(sp.size() == 2);
  const auto ss = enumerate_sigma_s(hmc_to_sigma_s(ident), 2);
  CHECK(ss.size() == 2);
  CHECK(ss.x_length() == 3);
  CHECK(ss.y_length() == 2);
  for (const auto& a : ss.atoms()) CHECK(a.y == std::vector<int>{a.x[0], a.x[0]});

  Rng rng(2);
  for (int rep = 0; rep < 5; ++rep) {
    const auto model = random_hmc(rng, 2, 3);
    CHECK(total_weight(enumerate_sigma_p(hmc_to_sigma_p(model), 3)) == 1);
    CHECK(total_weight(enumerate_sigma_s(hmc_to_sigma_s(model), 3)) == 1);

    // The Sigma_P and Sigma_S kernels of an HMC give back the HMC law.
    const auto h = enumerate_hmc(model, 2);
    const auto p = enumerate_sigma_p(hmc_to_sigma_p(model), 2);
    const auto s = marginalize(enumerate_sigma_s(hmc_to_sigma_s(model), 3), 3, 3);
    REQUIRE(h.size() == p.size());
    REQUIRE(h.size() == s.size());
    std::map<std::pair<std::vector<int>, std::vector<int>>, Rational> law;
    for (const auto& a : h.atoms()) law[{a.x, a.y}] = a.weight;
    for (const auto& a : p.atoms()) CHECK(law.at({a.x, a.y}) == a.weight);
    for (const auto& a : s.atoms()) CHECK(law.at({a.x, a.y}) == a.weight);
  }
  CHECK_THROWS_AS(enumerate_sigma_s(hmc_to_sigma_s(random_hmc(rng, 4, 4)), 8, 100), BudgetExceeded);
}

TEST_CASE("finite space and partition validation") {
  CHECK_THROWS_AS(FiniteSpace::abstract({q(1, 2), q(1, 3)}), ValidationError);
  CHECK_THROWS_AS(FiniteSpace::abstract({q(3, 2), q(-1, 2)}), ValidationError);
  CHECK_NOTHROW(FiniteSpace::abstract({0, 1}));

  CHECK_THROWS_AS(Partition::from_cells({{0}, {0, 1}}, 2), ValidationError);
  CHECK_THROWS_AS(Partition::from_cells({{0}}, 2), ValidationError);
  CHECK_THROWS_AS(Partition::from_cells({{0, 1}, {}}, 2), ValidationError);
  const auto p = Partition::from_cells({{2, 0}, {1}}, 3);
  CHECK(p.size() == 2);
  CHECK(p.cell_of(0) == p.cell_of(2));

  const auto a = Partition::from_keys(std::vector<int>{0, 0, 1, 1});
  const auto b = Partition::from_keys(std::vector<int>{0, 1, 0, 1});
  CHECK(Partition::join(a, b).size() == 4);
  CHECK(Partition::join(a, Partition::trivial(4)).size() == 2);
  CHECK(Partition::finest(4).size() == 4);
}

TEST_CASE("cond_exp") {
  Rng rng(3);
  const auto space = random_space(rng, 8, 2);
  const auto u = random_randvec(rng, 8, 2);

  const auto c = cond_exp(space, u, Partition::trivial(8));
  const Vec<Rational> eu = expectation(space, u);
  for (Index a = 0; a < 8; ++a) CHECK(Vec<Rational>(c.row(a).transpose()) == eu);

  const auto f = cond_exp(space, u, Partition::finest(8));
  for (Index a = 0; a < 8; ++a) {
    if (space.weight(static_cast<std::size_t>(a)) > 0) CHECK(f.row(a) == u.row(a));
    else CHECK(f.row(a).isZero());
  }

  // Zero-weight cell gets the zero convention.
  const auto zc = cond_exp(space, u, Partition::from_keys(std::vector<int>{0, 0, 1, 1, 1, 1, 1, 1}));
  CHECK(zc.topRows(2).isZero());

  for (int rep = 0; rep < 20; ++rep) {
    const auto s = random_space(rng, 8, static_cast<std::size_t>(uniform_int(rng, 0, 3)));
    const auto p1 = random_partition(rng, 8, 3);
    const auto p2 = random_partition(rng, 8, 3);
    const auto x = random_randvec(rng, 8, 3);
    const auto y = random_randvec(rng, 8, 3);
    const auto fine = Partition::join(p1, p2);
    CHECK(cond_exp(s, cond_exp(s, x, fine), p1) == cond_exp(s, x, p1));
    CHECK(cond_exp(s, cond_exp(s, x, p1), p1) == cond_exp(s, x, p1));
    const Rational alpha = q(uniform_int(rng, -4, 4), 3), beta = q(uniform_int(rng, -4, 4), 5);
    CHECK(cond_exp(s, RandVec(alpha * x + beta * y), p1) ==
          RandVec(alpha * cond_exp(s, x, p1) + beta * cond_exp(s, y, p1)));
  }
}

TEST_CASE("conditioning lemma") {
  Rng rng(4);
  const auto space = random_space(rng, 12);
  const auto u = random_randvec(rng, 12, 2);
  const auto f0 = random_partition(rng, 12, 3);

  // Trivial H: the first identity is plain conditioning on F0.
  CHECK(lemma_a1_check(space, u, f0, Partition::trivial(12)).passed());
  // Trivial F0: conditioning on H alone.
  const auto h = random_partition(rng, 12, 4);
  const auto r = lemma_a1_check(space, u, Partition::trivial(12), h);
  CHECK(r.passed());
  CHECK(r.find("bayes") != nullptr);
  CHECK(r.find("bayes3") != nullptr);
  CHECK(r.find("bayes2[1]") != nullptr);

  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t atoms = static_cast<std::size_t>(uniform_int(rng, 2, 32));
    const auto s = random_space(rng, atoms, rep % 3 == 0 ? atoms / 4 : 0);
    CHECK(lemma_a1_check(s, random_randvec(rng, atoms, 2), random_partition(rng, atoms, uniform_int(rng, 1, 4)),
                         random_partition(rng, atoms, uniform_int(rng, 1, 4)))
              .passed());
  }

  // The identity for state indicators: E[U 1{X_t = e_i} | F0] = E_i[U | F0] P(X_t = e_i | F0).
  const auto hs = enumerate_hmc(random_hmc(rng, 3, 2), 2);
  CHECK(lemma_a1_check(hs, joint_indicator(hs, 2), partition_f(hs, 1), partition_x_at(hs, 2)).passed());
}

TEST_CASE("a wrong conditional expectation is caught") {
  // Sanity check on the checker itself: compare the lemma's right side of
  // the first identity against a deliberately wrong E[U | F0 v H].
  Rng rng(41);
  const auto space = random_space(rng, 6);
  const auto u = random_randvec(rng, 6, 1);
  const auto f0 = Partition::from_keys(std::vector<int>{0, 0, 0, 1, 1, 1});
  const auto h = Partition::from_keys(std::vector<int>{0, 1, 0, 1, 0, 1});
  const auto right = cond_exp(space, u, Partition::join(f0, h));
  const auto wrong = cond_exp(space, u, f0);
  CHECK(right != wrong);
  CHECK(lemma_a1_check(space, u, f0, h).passed());
}

TEST_CASE("oracle posteriors") {
  Rng rng(5);
  const auto a = random_stochastic(rng, 3, 3, 1);
  const auto p0 = random_prob(rng, 3, 1);

  const auto perfect = enumerate_hmc(HmcModel<Rational>(a, identity(3), p0), 2);
  for (const auto& [hist, post] : oracle_posteriors(perfect, 2, PosteriorKind::filter))
    CHECK(post.law == basis<Rational>(3, hist.back()));

  const auto blind = enumerate_hmc(HmcModel<Rational>(a, Mat<Rational>(ones_row<Rational>(3)), p0), 3);
  const auto posts = oracle_posteriors(blind, 2, PosteriorKind::filter);
  REQUIRE(posts.size() == 1);
  CHECK(posts.begin()->second.law == Vec<Rational>(a * a * p0));
  CHECK(oracle_posteriors(blind, 2, PosteriorKind::predictor).begin()->second.law == Vec<Rational>(a * a * a * p0));
  CHECK_THROWS_AS(oracle_posteriors(blind, 3, PosteriorKind::predictor), ValidationError);

  for (int rep = 0; rep < 5; ++rep) {
    const auto model = random_hmc(rng, 3, 2);
    const auto space = enumerate_hmc(model, 4);
    for (int t = 0; t <= 4; ++t) {
      for (const auto& [hist, post] : oracle_posteriors(space, t, PosteriorKind::filter)) {
        const auto direct = direct_posterior(model, hist);
        CHECK(post.law == direct.filter.back());
        CHECK(post.history_prob == direct.evidence.back());
      }
    }
  }
}

TEST_CASE("factorization and splitting") {
  Rng rng(6);
  for (int rep = 0; rep < 4; ++rep) {
    const auto model = random_hmc(rng, 3, 2);
    const auto space = enumerate_hmc(model, 3);
    CHECK(verify_factorization(space).passed());
    CHECK(verify_factorization(space, model.G()).passed());
    CHECK(verify_splitting(space).passed());
  }

  const auto model = random_hmc(rng, 2, 2, true);
  const auto bad_p = enumerate_sigma_p(perturb_sigma_p(hmc_to_sigma_p(model), 0, 1, 0, q(1, 100)), 3);
  const auto fr = verify_factorization(bad_p);
  CHECK_FALSE(fr.passed());
  bool has_witness = false;
  for (const auto& c : fr.checks) has_witness = has_witness || (!c.pass && !c.witness.empty() && !c.lhs.empty());
  CHECK(has_witness);

  const auto bad_s = enumerate_sigma_s(perturb_sigma_s(hmc_to_sigma_s(model), 0, 1, 0, q(1, 100)), 3);
  CHECK_FALSE(verify_splitting(bad_s).passed());

  const Mat<Rational> one = Mat<Rational>::Ones(1, 1);
  Mat<Rational> g(3, 1);
  g << q(1, 2), q(1, 4), q(1, 4);
  const auto single = enumerate_hmc(HmcModel<Rational>(one, g, one.col(0)), 3);
  CHECK(verify_factorization(single).passed());
  CHECK(verify_splitting(single).passed());
}

TEST_CASE("output properties") {
  Rng rng(7);
  const auto model = random_hmc(rng, 3, 2);
  const auto space = enumerate_hmc(model, 3);
  const auto r = verify_output_properties(space, model.G());
  CHECK(r.passed());
  CHECK(r.find("B_equals_Delta_G") != nullptr);
  CHECK(r.find("G_matches_model") != nullptr);

  const auto other = random_hmc(rng, 3, 2, true);
  Mat<Rational> wrong_g = other.G();
  wrong_g(0, 0) += q(1, 10);
  wrong_g(1, 0) -= q(1, 10);
  const auto wrong = verify_output_properties(enumerate_hmc(other, 2), wrong_g);
  CHECK_FALSE(wrong.passed());
  REQUIRE(wrong.find("G_matches_model") != nullptr);
  CHECK_FALSE(wrong.find("G_matches_model")->pass);

  const auto bad = enumerate_sigma_p(perturb_sigma_p(hmc_to_sigma_p(other), 0, 1, 0, q(1, 100)), 3);
  CHECK_FALSE(verify_output_properties(bad).passed());

  const auto blind = enumerate_hmc(HmcModel<Rational>(random_stochastic(rng, 3, 3), Mat<Rational>(ones_row<Rational>(3)),
                                                      random_prob(rng, 3)),
                                   3);
  CHECK(verify_output_properties(blind).passed());
}

TEST_CASE("Markov checks") {
  Rng rng(8);
  const auto model = random_hmc(rng, 2, 3, true);
  const auto space = enumerate_hmc(model, 3);
  const auto z = verify_markov(space, MarkovKind::z_in_f, build_q(model));
  CHECK(z.markov);
  CHECK(z.report.passed());
  CHECK(z.matrix == build_q(model));
  const auto w = verify_markov(space, MarkovKind::w_in_g, build_r(model));
  CHECK(w.markov);
  CHECK(w.report.passed());
  CHECK(w.matrix == build_r(model));
  CHECK(verify_markov(space, MarkovKind::x_in_f, model.A()).report.passed());
  CHECK(verify_markov(space, MarkovKind::x_in_g, model.A()).report.passed());

  const auto wrong = verify_markov(space, MarkovKind::z_in_f, build_r(model));
  CHECK(wrong.markov);
  CHECK_FALSE(wrong.report.passed());

  const auto two = order_two_space();
  const auto x = verify_markov(two, MarkovKind::x_in_f);
  CHECK_FALSE(x.markov);
  const CheckResult* fail = nullptr;
  for (const auto& c : x.report.checks)
    if (!c.pass) fail = &c;
  REQUIRE(fail != nullptr);
  CHECK(fail->t == 1);
  CHECK_FALSE(fail->witness.empty());
}

TEST_CASE("W process relations on HMC spaces") {
  // E[W_t | F_{t-1}] = (I (x) A) Z_{t-1} and E[W_t | G_{t-1}] = (I (x) A) Delta(G) X_{t-1}.
  Rng rng(9);
  const auto model = random_hmc(rng, 2, 2);
  const auto space = enumerate_hmc(model, 3);
  const Mat<Rational> ia = kron(identity(2), model.A());
  for (int t = 1; t <= 3; ++t) {
    const RandVec w = shifted_indicator(space, t);
    const RandVec by_f = cond_exp(space, w, partition_f(space, t - 1));
    const RandVec by_g = cond_exp(space, w, partition_g(space, t - 1));
    const RandVec z = joint_indicator(space, t - 1);
    const RandVec x = state_indicator(space, t - 1);
    CHECK(by_f == RandVec(z * ia.transpose()));
    CHECK(by_g == RandVec(x * (ia * delta(model.G())).transpose()));
  }
}

TEST_CASE("equivalent characterizations") {
  const auto t1 = theorem_3_5_suite(trivial_model(), 3);
  CHECK(t1.all_true());
  CHECK(t1.report.passed());

  Rng rng(10);
  for (int rep = 0; rep < 3; ++rep) {
    const auto model = random_hmc(rng, 2, 2);
    const auto r = theorem_3_5_suite(model, 3);
    CHECK(r.all_true());
    CHECK(r.report.passed());
    CHECK(r.report.find("c.matrix_equals_build_q") != nullptr);
    CHECK(r.report.find("d.matrix_equals_build_r") != nullptr);
  }

  for (int rep = 0; rep < 2; ++rep) {
    const auto model = random_hmc(rng, 2, 2, true);
    const auto chain = output_dependent_chain(model, q(1, 2));
    const auto r = theorem_3_5_suite(enumerate_joint(chain, 3));
    CHECK(r.all_false());
    CHECK(r.agree());
    CHECK_FALSE(r.report.passed());
  }

  CHECK_THROWS_AS(theorem_3_5_suite(FiniteSpace::abstract({1})), ValidationError);
}

TEST_CASE("system memberships agree on both sides") {
  // (Sigma_S membership and splitting) iff (Sigma_P membership and output property).
  Rng rng(11);
  auto sides = [](const FiniteSpace& s) {
    const bool left = verify_sigma_s_membership(s).passed() && verify_splitting(s).passed();
    const bool right = verify_sigma_p_membership(s).passed() && verify_output_properties(s).passed();
    return std::pair{left, right};
  };
  for (int rep = 0; rep < 3; ++rep) {
    const auto model = random_hmc(rng, 2, 2, true);
    const auto good = sides(enumerate_hmc(model, 3));
    CHECK(good.first);
    CHECK(good.second);
    const auto bad = sides(enumerate_sigma_p(perturb_sigma_p(hmc_to_sigma_p(model), 0, 1, 0, q(1, 100)), 3));
    CHECK(bad.first == bad.second);
    CHECK_FALSE(bad.first);
    const auto joint = sides(enumerate_joint(output_dependent_chain(model, q(1, 3)), 3));
    CHECK(joint.first == joint.second);
    CHECK_FALSE(joint.first);
  }
}

TEST_CASE("marginalize") {
  Rng rng(12);
  const auto model = random_hmc(rng, 2, 2);
  const auto s3 = enumerate_hmc(model, 3);
  const auto cut = marginalize(s3, 3, 3);
  const auto s2 = enumerate_hmc(model, 2);
  CHECK(cut.size() == s2.size());
  std::map<std::pair<std::vector<int>, std::vector<int>>, Rational> law;
  for (const auto& a : s2.atoms()) law[{a.x, a.y}] = a.weight;
  for (const auto& a : cut.atoms()) CHECK(law.at({a.x, a.y}) == a.weight);
  CHECK_THROWS_AS(marginalize(s3, 5, 1), ValidationError);
}

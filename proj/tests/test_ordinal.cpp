#include <catch2/catch_amalgamated.hpp>

#include "lexsel/ordinal.hpp"
#include "lexsel/stats.hpp"
#include "helpers.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace lexsel;
using Catch::Approx;

namespace {

// one participant, one item, the given ratings
RatingsTable tiny_table(const std::vector<int>& ratings) {
    RatingsTable t(7);
    for (size_t i = 0; i < ratings.size(); ++i)
        t.add("p0", "l" + std::to_string(i), "v0", "f0", ratings[i]);
    return t;
}

OrdinalModelParams params_for(const RatingsTable& ratings, double a,
                              const std::array<double, 6>& cuts) {
    OrdinalObjective problem(ratings, Eigen::VectorXd(), FitConfig{});
    Eigen::VectorXd x = Eigen::VectorXd::Zero(problem.dim());
    OrdinalModelParams p = problem.unpack(x, ratings);
    p.beta_verb.setZero();
    p.beta_frame.setZero();
    p.beta_interaction.setConstant(a);
    for (Eigen::Index row = 0; row < p.cutpoints.rows(); ++row)
        for (int j = 0; j < 6; ++j) p.cutpoints(row, j) = cuts[size_t(j)];
    return p;
}

}  // namespace

TEST_CASE("response probability: cumulative at the first cutpoint") {
    auto t = tiny_table({4});
    auto p = params_for(t, 0.0, {0.0, 1.0, 2.0, 3.0, 4.0, 5.0});
    // a = 0 and c1 = 0: P(r <= 1) = inverse-logit(0) = 0.5
    REQUIRE(cumulative_response_probability(p, 0, 0, 0, 1) == Approx(0.5).margin(1e-12));
    REQUIRE(response_probability(p, 0, 0, 0, 1) == Approx(0.5).margin(1e-12));
}

TEST_CASE("response probabilities sum to one") {
    auto t = tiny_table({4});
    CounterRng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        double a = 4.0 * rng.next_normal();
        std::array<double, 6> cuts;
        cuts[0] = -3.0 + rng.next_normal();
        for (int j = 1; j < 6; ++j) cuts[size_t(j)] = cuts[size_t(j - 1)] + 0.01 + 2.0 * rng.next_double();
        auto p = params_for(t, a, cuts);
        double total = 0.0;
        for (int r = 1; r <= 7; ++r) total += response_probability(p, 0, 0, 0, r);
        REQUIRE(total == Approx(1.0).margin(1e-10));
    }
}

TEST_CASE("per-category probabilities match direct sigmoid differences") {
    auto t = tiny_table({4});
    auto p = params_for(t, 3.0, {-2.5, -1.5, -0.5, 0.5, 1.5, 2.5});
    auto direct_sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    std::array<double, 6> c{-2.5, -1.5, -0.5, 0.5, 1.5, 2.5};
    for (int r = 1; r <= 7; ++r) {
        double hi = r == 7 ? 1.0 : direct_sigmoid(c[size_t(r - 1)] - 3.0);
        double lo = r == 1 ? 0.0 : direct_sigmoid(c[size_t(r - 2)] - 3.0);
        REQUIRE(response_probability(p, 0, 0, 0, r) == Approx(hi - lo).margin(1e-12));
    }
    REQUIRE_THROWS_AS(response_probability(p, 0, 0, 0, 8), data_error);
    REQUIRE_THROWS_AS(response_probability(p, 0, 0, 0, 0), data_error);
}

TEST_CASE("monotonicity: larger acceptability never lowers P(r >= i)") {
    auto t = tiny_table({4});
    std::array<double, 6> cuts{-2.0, -1.2, -0.4, 0.4, 1.2, 2.0};
    for (double a = -4.0; a <= 4.0; a += 0.25) {
        auto lo = params_for(t, a, cuts);
        auto hi = params_for(t, a + 0.25, cuts);
        for (int r = 2; r <= 7; ++r) {
            double p_lo = 1.0 - cumulative_response_probability(lo, 0, 0, 0, r - 1);
            double p_hi = 1.0 - cumulative_response_probability(hi, 0, 0, 0, r - 1);
            REQUIRE(p_hi >= p_lo - 1e-12);
        }
    }
}

TEST_CASE("analytic gradient matches central finite differences") {
    auto synth = testutil::simulate_ordinal(6, 4, 3, 3, 1234);
    FitConfig cfg;
    cfg.seed = 7;
    OrdinalObjective problem(synth.ratings, Eigen::VectorXd(), cfg);
    auto f = [&](const Eigen::VectorXd& x) { return problem.evaluate(x, nullptr); };

    CounterRng rng(5);
    for (int point = 0; point < 20; ++point) {
        Eigen::VectorXd x(problem.dim());
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.next_normal();
        Eigen::VectorXd analytic(problem.dim());
        problem.evaluate(x, &analytic);
        Eigen::VectorXd numeric = oracles::finite_difference_gradient(f, x, 1e-5);
        double rel = (analytic - numeric).norm() / std::max(numeric.norm(), 1e-12);
        REQUIRE(rel < 1e-4);
    }
}

TEST_CASE("likelihood+prior is invariant under a joint shift; smoothing breaks it") {
    auto synth = testutil::simulate_ordinal(5, 3, 3, 2, 99);
    FitConfig cfg;
    cfg.smoothing = 0.0;  // shift invariance holds for likelihood + gap prior
    OrdinalObjective problem(synth.ratings, Eigen::VectorXd(), cfg);
    CounterRng rng(17);
    Eigen::VectorXd x(problem.dim());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = 0.5 * rng.next_normal();

    // shift every beta_v and every first cutpoint by the same constant
    Eigen::VectorXd shifted = x;
    const double shift = 0.8342;
    int32_t nv = synth.ratings.verbs().size();
    int32_t nf = synth.ratings.frames().size();
    int32_t ni = problem.n_items();
    for (int32_t v = 0; v < nv; ++v) shifted[v] += shift;
    for (int32_t p = 0; p < synth.ratings.participants().size(); ++p)
        shifted[nv + nf + ni + p * 6] += shift;

    REQUIRE(problem.evaluate(shifted, nullptr)
            == Approx(problem.evaluate(x, nullptr)).epsilon(1e-12));
}

TEST_CASE("identifiability: mean third cutpoint is zero after fitting") {
    auto synth = testutil::simulate_ordinal(8, 4, 3, 3, 21);
    FitConfig cfg;
    cfg.max_iters = 400;
    auto fit = fit_ordinal_model(synth.ratings, cfg);
    double mean_c3 = fit.params.cutpoints.col(2).mean();
    REQUIRE(std::abs(mean_c3) < 1e-6);
}

TEST_CASE("ordinal recovery on simulated data (small)") {
    auto synth = testutil::simulate_ordinal(30, 8, 5, 5, 321);
    FitConfig cfg;
    cfg.max_iters = 2500;
    auto fit = fit_ordinal_model(synth.ratings, cfg);

    std::vector<double> truth, recovered;
    for (int v = 0; v < synth.n_verbs; ++v) {
        for (int f = 0; f < synth.n_frames; ++f) {
            auto vi = fit.params.verbs.find("v" + std::to_string(v));
            auto fi = fit.params.frames.find("f" + std::to_string(f));
            REQUIRE(vi);
            REQUIRE(fi);
            truth.push_back(synth.true_acceptability[size_t(v * synth.n_frames + f)]);
            recovered.push_back(fit.params.acceptability(*vi, *fi));
        }
    }
    auto rho = spearman(truth, recovered);
    REQUIRE(rho.defined);
    REQUIRE(rho.value > 0.9);
}

TEST_CASE("one participant rating one item 4 five times lands in the fourth bin") {
    RatingsTable t(7);
    for (int i = 0; i < 5; ++i) t.add("p0", "l" + std::to_string(i), "v0", "f0", 4);
    FitConfig cfg;
    cfg.max_iters = 2000;
    auto fit = fit_ordinal_model(t, cfg);
    double a = fit.params.acceptability(0, 0);
    REQUIRE(a > fit.params.cutpoints(0, 2));  // above c3
    REQUIRE(a <= fit.params.cutpoints(0, 3)); // at or below c4
}

TEST_CASE("uniform and constant weights reproduce the unweighted fit exactly") {
    auto synth = testutil::simulate_ordinal(6, 3, 3, 3, 8);
    FitConfig cfg;
    cfg.max_iters = 300;
    auto plain = fit_ordinal_model(synth.ratings, cfg);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(synth.ratings.participants().size());
    auto uniform = fit_ordinal_model(synth.ratings, ones, cfg);
    auto scaled = fit_ordinal_model(synth.ratings, 2.7 * ones, cfg);

    REQUIRE((plain.params.beta_interaction - uniform.params.beta_interaction).norm() == 0.0);
    REQUIRE((plain.params.cutpoints - uniform.params.cutpoints).norm() == 0.0);
    REQUIRE((plain.params.beta_interaction - scaled.params.beta_interaction).norm() == 0.0);
    REQUIRE((plain.params.cutpoints - scaled.params.cutpoints).norm() == 0.0);
}

TEST_CASE("acceptability matrix and variability") {
    SECTION("identical ratings from well-fit raters give variability near 1") {
        RatingsTable t(7);
        // two items far apart so the cutpoints spread; all raters agree
        for (int p = 0; p < 5; ++p) {
            t.add("p" + std::to_string(p), "l0", "v0", "f0", 7);
            t.add("p" + std::to_string(p), "l0", "v0", "f1", 1);
        }
        FitConfig cfg;
        cfg.max_iters = 3000;
        auto fit = fit_ordinal_model(t, cfg);
        auto m = acceptability_matrix(fit.params, t, Eigen::VectorXd());
        REQUIRE(m.variability(0, 0) > 0.8);
        REQUIRE(m.variability(0, 1) > 0.8);
        REQUIRE(m.acceptability(0, 0) > m.acceptability(0, 1));
    }
    SECTION("maximally dispersed ratings approach the 1/7 floor") {
        RatingsTable t(7);
        for (int r = 1; r <= 7; ++r)
            t.add("p" + std::to_string(r - 1), "l0", "v0", "f0", r);
        FitConfig cfg;
        cfg.max_iters = 3000;
        auto fit = fit_ordinal_model(t, cfg);
        auto m = acceptability_matrix(fit.params, t, Eigen::VectorXd());
        REQUIRE(m.variability(0, 0) >= 1.0 / 7.0 - 0.01);
        REQUIRE(m.variability(0, 0) < 0.30);
    }
}

TEST_CASE("participant quality scores") {
    SECTION("all correlations equal gives exactly 0.5") {
        Vocabulary participants, lists;
        for (int p = 0; p < 4; ++p) participants.intern("p" + std::to_string(p));
        for (int l = 0; l < 2; ++l) lists.intern("l" + std::to_string(l));
        std::vector<PairAgreement> pairs;
        for (int l = 0; l < 2; ++l)
            for (int a = 0; a < 4; ++a)
                for (int b = a + 1; b < 4; ++b) {
                    PairAgreement pa;
                    pa.list = l;
                    pa.p1 = a;
                    pa.p2 = b;
                    pa.rho.defined = true;
                    pa.rho.value = 0.4;
                    pa.n_items = 10;
                    pairs.push_back(pa);
                }
        auto q = participant_quality(pairs, participants, lists);
        for (int p = 0; p < 4; ++p) REQUIRE(q.score[p] == 0.5);
    }

    SECTION("a participant anti-correlated with everyone scores lowest") {
        // p0 disagrees with every partner across several lists; others agree
        Vocabulary participants, lists;
        for (int p = 0; p < 6; ++p) participants.intern("p" + std::to_string(p));
        for (int l = 0; l < 6; ++l) lists.intern("l" + std::to_string(l));
        std::vector<PairAgreement> pairs;
        CounterRng rng(3);
        for (int l = 0; l < 6; ++l) {
            for (int a = 0; a < 6; ++a) {
                for (int b = a + 1; b < 6; ++b) {
                    PairAgreement pa;
                    pa.list = l;
                    pa.p1 = a;
                    pa.p2 = b;
                    pa.rho.defined = true;
                    bool bad = a == 0 || b == 0;
                    pa.rho.value = (bad ? -0.5 : 0.6) + 0.05 * rng.next_normal();
                    pa.n_items = 10;
                    pairs.push_back(pa);
                }
            }
        }
        auto q = participant_quality(pairs, participants, lists);
        for (int p = 1; p < 6; ++p) REQUIRE(q.score[0] < q.score[p]);
        REQUIRE(q.score[0] < 0.5);
        for (int p = 0; p < 6; ++p) {
            REQUIRE(q.score[p] > 0.0);
            REQUIRE(q.score[p] < 1.0);
        }
    }

    SECTION("participant in no pair gets 0.5 with a warning") {
        Vocabulary participants, lists;
        participants.intern("p0");
        participants.intern("p1");
        participants.intern("orphan");
        lists.intern("l0");
        PairAgreement pa;
        pa.list = 0;
        pa.p1 = 0;
        pa.p2 = 1;
        pa.rho.defined = true;
        pa.rho.value = 0.9;
        pa.n_items = 5;
        std::vector<PairAgreement> pairs{pa};
        pa.rho.value = 0.1;  // second observation so the response is not constant
        pairs.push_back(pa);
        auto q = participant_quality(pairs, participants, lists);
        REQUIRE(q.score[2] == 0.5);
        REQUIRE(q.unseen_participants == 1);
        REQUIRE_FALSE(q.warnings.empty());
    }
}

TEST_CASE("compare_normalizers flags degenerate variance") {
    RatingsTable t(7);
    for (int p = 0; p < 3; ++p)
        for (int v = 0; v < 2; ++v)
            t.add("p" + std::to_string(p), "l0", "v" + std::to_string(v), "f0", 4);
    FitConfig cfg;
    cfg.max_iters = 200;
    auto fit = fit_ordinal_model(t, cfg);
    auto cmp = compare_normalizers(fit.params, t);
    REQUIRE_FALSE(cmp.vs_mean_rating.defined);   // all mean ratings identical
    REQUIRE_FALSE(cmp.vs_mean_rating.reason.empty());
}

TEST_CASE("compare_normalizers tracks the simpler normalizers on simulated data") {
    auto synth = testutil::simulate_ordinal(20, 6, 5, 5, 55);
    FitConfig cfg;
    cfg.max_iters = 1500;
    auto fit = fit_ordinal_model(synth.ratings, cfg);
    auto cmp = compare_normalizers(fit.params, synth.ratings);
    REQUIRE(cmp.vs_mean_rating.defined);
    REQUIRE(cmp.vs_zscored_rating.defined);
    REQUIRE(cmp.vs_mean_rating.value > 0.8);
    REQUIRE(cmp.vs_zscored_rating.value > 0.8);
}

// Acceptance suite: one line per criterion. Criteria that require the
// released datasets look for them under $LEXSEL_DATA_DIR (default
// <source>/data/external) and report SKIP when absent; everything else runs
// fully offline.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "lexsel/lexsel.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace lexsel;

namespace {

struct Outcome {
    enum class Status { Pass, Fail, Skip } status;
    std::string note;
};

Outcome pass(std::string note = "") { return {Outcome::Status::Pass, std::move(note)}; }
Outcome fail(std::string note) { return {Outcome::Status::Fail, std::move(note)}; }
Outcome skip(std::string note) { return {Outcome::Status::Skip, std::move(note)}; }

std::string data_dir() {
    if (const char* env = std::getenv("LEXSEL_DATA_DIR")) return env;
    return std::string(LEXSEL_SOURCE_DIR) + "/data/external";
}

bool have(const std::string& name) {
    return std::filesystem::exists(data_dir() + "/" + name);
}

std::string fmt(double x) { return format_real(x); }

// shared state across criteria
struct Shared {
    std::optional<testutil::SyntheticOrdinal> synth;
    std::optional<OrdinalFit> synth_fit;
    std::optional<AcceptabilityMatrix> synth_accept;
    std::optional<RatingsTable> mega_ratings;
    std::optional<OrdinalFit> mega_fit;
    std::optional<Eigen::VectorXd> mega_weights;
    std::optional<CVReport> best_freq_report;
    std::map<std::string, double> freq_scores;  // model tag -> mean R2
};

Shared shared;

RatingsTable load_mega_ratings() {
    if (!shared.mega_ratings)
        shared.mega_ratings = load_ratings(data_dir() + "/mega_acceptability.tsv", {}, true);
    return *shared.mega_ratings;
}

const OrdinalFit& mega_fit() {
    if (!shared.mega_fit) {
        RatingsTable ratings = load_mega_ratings();
        auto pairs = pairwise_list_agreement(ratings);
        auto quality = participant_quality(pairs, ratings.participants(), ratings.lists());
        shared.mega_weights = quality.score;
        FitConfig cfg;
        cfg.seed = 7;
        shared.mega_fit = fit_ordinal_model(ratings, quality.score, cfg);
    }
    return *shared.mega_fit;
}

// ---- criterion bodies --------------------------------------------------------

Outcome golden_templates() {
    TemplateSet templates = load_templates(std::string(LEXSEL_SOURCE_DIR)
                                           + "/data/frames_mega.tsv");
    if (templates.size() != 50)
        return fail("expected 50 frames, loaded " + std::to_string(templates.size()));
    VerbEntry regular{"test", "", ""};
    TsvReader golden(std::string(LEXSEL_SOURCE_DIR) + "/tests/golden/frames_mega_golden.tsv");
    size_t iid = golden.column("frame_id"), isent = golden.column("sentence");
    std::vector<std::string_view> f;
    int matched = 0, total = 0;
    while (golden.next(f)) {
        ++total;
        if (instantiate(regular, templates.at(f[iid])).sentence == std::string(f[isent]))
            ++matched;
    }
    if (matched != 50 || total != 50)
        return fail(std::to_string(matched) + "/" + std::to_string(total) + " exact matches");
    return pass("50/50 byte-exact");
}

Outcome mega_design() {
    VerbLexicon lex = load_verb_lexicon(std::string(LEXSEL_SOURCE_DIR) + "/data/verbs_mega.tsv");
    lex.apply_overrides(
        load_verb_lexicon(std::string(LEXSEL_SOURCE_DIR) + "/data/irregular_verbs.tsv"));
    TemplateSet templates = load_templates(std::string(LEXSEL_SOURCE_DIR)
                                           + "/data/frames_mega.tsv");
    if (lex.size() != 1000)
        return fail("verb lexicon has " + std::to_string(lex.size()) + " lemmas, want 1000");
    ListDesign design = build_mega_lists(lex.entries(), templates, 17);
    if (design.lists.size() != 1000)
        return fail(std::to_string(design.lists.size()) + " lists, want 1000");
    for (const auto& list : design.lists)
        if (list.size() != 50) return fail("list size " + std::to_string(list.size()));
    validate_design(design);  // per-list uniqueness + exact global cover
    return pass("1000 lists x 50, exhaustive single cover");
}

Outcome ordinal_recovery() {
    shared.synth = testutil::simulate_ordinal(100, 20, 10, 5, 20200214);
    FitConfig cfg;
    cfg.seed = 9;
    shared.synth_fit = fit_ordinal_model(shared.synth->ratings, cfg);
    const auto& fit = *shared.synth_fit;

    std::vector<double> truth, recovered;
    for (int v = 0; v < 20; ++v)
        for (int f = 0; f < 10; ++f) {
            auto vi = fit.params.verbs.find("v" + std::to_string(v));
            auto fi = fit.params.frames.find("f" + std::to_string(f));
            truth.push_back(shared.synth->true_acceptability[size_t(v * 10 + f)]);
            recovered.push_back(fit.params.acceptability(*vi, *fi));
        }
    auto rho = spearman(truth, recovered);
    if (!rho.defined || rho.value <= 0.95)
        return fail("Spearman(true, recovered) = " + (rho.defined ? fmt(rho.value) : "NA"));

    // gradient vs central finite differences at a random point
    OrdinalObjective problem(shared.synth->ratings, Eigen::VectorXd(), cfg);
    CounterRng rng(33);
    Eigen::VectorXd x(problem.dim());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = 0.7 * rng.next_normal();
    Eigen::VectorXd analytic(problem.dim());
    problem.evaluate(x, &analytic);
    auto f = [&](const Eigen::VectorXd& p) { return problem.evaluate(p, nullptr); };
    Eigen::VectorXd numeric = oracles::finite_difference_gradient(f, x, 1e-5);
    double rel = (analytic - numeric).norm() / std::max(numeric.norm(), 1e-12);
    if (rel >= 1e-4) return fail("gradient relative error " + fmt(rel));

    shared.synth_accept =
        acceptability_matrix(fit.params, shared.synth->ratings, Eigen::VectorXd());
    return pass("Spearman " + fmt(rho.value) + ", gradient rel err " + fmt(rel));
}

Outcome normalizer_concordance() {
    if (!have("mega_acceptability.tsv"))
        return skip("dataset not available (" + data_dir() + "/mega_acceptability.tsv)");
    const auto& fit = mega_fit();
    auto cmp = compare_normalizers(fit.params, load_mega_ratings());
    if (!cmp.vs_mean_rating.defined || !cmp.vs_zscored_rating.defined)
        return fail("correlation undefined");
    if (cmp.vs_mean_rating.value < 0.90)
        return fail("vs mean rating " + fmt(cmp.vs_mean_rating.value) + " < 0.90");
    if (cmp.vs_zscored_rating.value < 0.92)
        return fail("vs z-scored mean " + fmt(cmp.vs_zscored_rating.value) + " < 0.92");
    return pass("vs mean " + fmt(cmp.vs_mean_rating.value) + ", vs z-scored "
                + fmt(cmp.vs_zscored_rating.value));
}

Outcome variability_floor_band() {
    // floor on the synthetic fit (always available after criterion 3)
    if (!shared.synth_accept) return fail("criterion 3 did not run");
    const auto& m = *shared.synth_accept;
    double lowest = 1.0;
    for (int32_t v = 0; v < m.verbs().size(); ++v)
        for (int32_t f = 0; f < m.frames().size(); ++f)
            if (m.observed(v, f)) lowest = std::min(lowest, m.variability(v, f));
    if (lowest < 1.0 / 7.0 - 1e-6)
        return fail("synthetic variability " + fmt(lowest) + " below the 1/7 floor");

    if (!have("mega_acceptability.tsv"))
        return pass("floor holds on the synthetic fit (min " + fmt(lowest)
                    + "); frame-band check SKIPPED: real dataset unavailable");

    RatingsTable ratings = load_mega_ratings();
    const auto& fit = mega_fit();
    AcceptabilityMatrix real =
        acceptability_matrix(fit.params, ratings, *shared.mega_weights);
    double real_lowest = 1.0;
    std::vector<double> frame_sum(size_t(real.frames().size()), 0.0);
    std::vector<double> frame_n(size_t(real.frames().size()), 0.0);
    for (int32_t v = 0; v < real.verbs().size(); ++v)
        for (int32_t f = 0; f < real.frames().size(); ++f)
            if (real.observed(v, f)) {
                real_lowest = std::min(real_lowest, real.variability(v, f));
                frame_sum[size_t(f)] += real.variability(v, f);
                frame_n[size_t(f)] += 1.0;
            }
    if (real_lowest < 1.0 / 7.0 - 1e-6)
        return fail("real variability " + fmt(real_lowest) + " below the 1/7 floor");
    int in_band = 0;
    for (size_t f = 0; f < frame_sum.size(); ++f) {
        double mean = frame_sum[f] / std::max(frame_n[f], 1.0);
        if (mean >= 0.25 && mean <= 0.55) ++in_band;
    }
    if (in_band < 45)
        return fail("only " + std::to_string(in_band) + "/"
                    + std::to_string(frame_sum.size()) + " frame means in [0.25, 0.55]");
    return pass("floor " + fmt(real_lowest) + ", " + std::to_string(in_band)
                + " frame means in band");
}

Outcome agreement_statistics() {
    if (!have("mega_acceptability.tsv"))
        return skip("dataset not available (" + data_dir() + "/mega_acceptability.tsv)");
    RatingsTable ratings = load_mega_ratings();
    auto pairs = pairwise_list_agreement(ratings);
    std::vector<double> rhos;
    for (const auto& pa : pairs)
        if (pa.rho.defined) rhos.push_back(pa.rho.value);
    double m = mean(rhos);
    double med = median_of(rhos);
    std::ostringstream note;
    note << "mean " << fmt(m) << ", median " << fmt(med);
    if (std::abs(m - 0.416) > 0.01) return fail("mean " + fmt(m) + " not within 0.416 +/- 0.01");
    if (std::abs(med - 0.455) > 0.01)
        return fail("median " + fmt(med) + " not within 0.455 +/- 0.01");
    if (have("pilot_ratings.tsv")) {
        RatingsTable pilot = load_ratings(data_dir() + "/pilot_ratings.tsv", {}, true);
        auto ppairs = pairwise_list_agreement(pilot);
        std::vector<double> prhos;
        for (const auto& pa : ppairs)
            if (pa.rho.defined) prhos.push_back(pa.rho.value);
        double pm = mean(prhos);
        note << ", pilot mean " << fmt(pm);
        if (std::abs(pm - 0.528) > 0.015)
            return fail("pilot mean " + fmt(pm) + " not within 0.528 +/- 0.015");
    } else {
        note << "; pilot release not present";
    }
    return pass(note.str());
}

Outcome agreement_simulation() {
    if (have("contentful_ratings.tsv")) {
        RatingsTable ratings = load_ratings(data_dir() + "/contentful_ratings.tsv", {}, true);
        FitConfig cfg;
        cfg.seed = 3;
        auto fit = fit_ordinal_model(ratings, cfg);
        auto sim = simulate_expected_agreement(fit.params, ratings, 999, 3);
        if (std::abs(sim.point - 0.516) > 0.015)
            return fail("simulated mean " + fmt(sim.point) + " not within 0.516 +/- 0.015");
        return pass("simulated mean " + fmt(sim.point) + " [" + fmt(sim.lo) + ", "
                    + fmt(sim.hi) + "]");
    }
    // stated fallback: synthetic determinism and degeneracy properties
    auto synth = testutil::simulate_ordinal(12, 5, 4, 3, 606);
    FitConfig cfg;
    cfg.max_iters = 800;
    auto fit = fit_ordinal_model(synth.ratings, cfg);
    auto one = simulate_expected_agreement(fit.params, synth.ratings, 1, 42);
    auto many = simulate_expected_agreement(fit.params, synth.ratings, 99, 42);
    if (one.replicate_stats[0] != many.replicate_stats[0])
        return fail("seeded stream not prefix-stable");
    auto again = simulate_expected_agreement(fit.params, synth.ratings, 99, 42);
    if (many.replicate_stats != again.replicate_stats) return fail("simulation not deterministic");
    OrdinalModelParams sharp = fit.params;
    sharp.beta_interaction *= 200.0;
    sharp.beta_verb *= 200.0;
    sharp.beta_frame *= 200.0;
    auto degenerate = simulate_expected_agreement(sharp, synth.ratings, 25, 7);
    if (degenerate.point <= 0.95)
        return fail("degenerate-model agreement " + fmt(degenerate.point) + " <= 0.95");
    return pass("2018a release unavailable; fallback determinism/degeneracy properties hold "
                "(degenerate mean " + fmt(degenerate.point) + ")");
}

Outcome dc_closed_form_vs_gd() {
    CounterRng rng(808);
    const std::vector<double> lambdas{0.1, 0.5, 1.0, 2.0, 5.0};
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        int F = 2 + int(rng.next_below(5));
        Eigen::VectorXd counts(F);
        for (int f = 0; f < F; ++f) counts[f] = double(rng.next_below(25));
        double lambda = lambdas[rng.next_below(lambdas.size())];
        CountsTable c;
        for (int f = 0; f < F; ++f) c.add("v", "f" + std::to_string(f), int64_t(counts[f]));
        auto closed = dc_map(c, lambda);
        Eigen::VectorXd gd = oracles::dirichlet_categorical_map_gd(counts, lambda);
        for (int f = 0; f < F; ++f)
            worst = std::max(worst, std::abs(closed.theta(0, f) - gd[f]));
    }
    if (worst >= 1e-6) return fail("max |closed - gd| = " + fmt(worst));
    return pass("50 tables, max deviation " + fmt(worst));
}

struct RealEval {
    FeatureMatrix targets;
    CountsTable counts;
};

std::optional<RealEval> real_eval_inputs() {
    if (!have("mega_acceptability.tsv") || !have("valex_counts.tsv")) return std::nullopt;
    RealEval out;
    const auto& fit = mega_fit();
    AcceptabilityMatrix accept =
        acceptability_matrix(fit.params, load_mega_ratings(), *shared.mega_weights);
    out.counts = load_counts(data_dir() + "/valex_counts.tsv", true);
    auto aligned = align_vocabularies(out.counts, accept);
    out.counts = aligned.counts;
    out.targets = acceptability_targets(aligned.acceptability);
    return out;
}

double evaluate_rep(const FeatureMatrix& features, const FeatureMatrix& targets,
                    CVReport* keep = nullptr) {
    auto [X, Y] = align_feature_rows(features, targets);
    CVReport r = nested_cv(X, Y, {0.01, 0.1, 0.2, 0.5, 1, 2, 5, 10}, 10, 10, 13);
    if (keep) *keep = r;
    return r.mean_r2;
}

Outcome freq_model_ordering() {
    auto inputs = real_eval_inputs();
    if (!inputs)
        return skip("VALEX counts / MegaAcceptability release not available under "
                    + data_dir());
    FitConfig cfg;
    cfg.seed = 4;
    const auto& counts = inputs->counts;
    CVReport bnb_report;
    double bnb = evaluate_rep(
        features_from_matrix(counts, bnb_map(counts, 0.1, cfg).pi), inputs->targets,
        &bnb_report);
    double pmi5 = evaluate_rep(pmi_features(counts, info_scores(counts, 5.0)), inputs->targets);
    double dc0 = evaluate_rep(features_from_matrix(counts, dc_map(counts, 0.0).theta),
                              inputs->targets);
    double best_g = -1e9;
    for (double lam : {0.0, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0})
        best_g = std::max(best_g,
                          evaluate_rep(features_from_matrix(counts,
                                                            info_scores(counts, lam).g),
                                       inputs->targets));
    shared.best_freq_report = bnb_report;
    shared.freq_scores = {{"bnb", bnb}, {"pmi", pmi5}, {"dc", dc0}, {"g", best_g}};
    std::ostringstream note;
    note << "BNB " << fmt(bnb) << " >= PMI " << fmt(pmi5) << " >= DC " << fmt(dc0) << " > G "
         << fmt(best_g);
    if (!(bnb >= pmi5 && pmi5 >= dc0 && dc0 > best_g)) return fail("ordering broken: " + note.str());
    if (!(bnb < 0.5)) return fail("ceiling broken: best R2 " + fmt(bnb) + " >= 0.5");
    return pass(note.str());
}

Outcome error_correlations() {
    if (!shared.best_freq_report) {
        if (!have("mega_acceptability.tsv") || !have("valex_counts.tsv"))
            return skip("requires the real-data evaluation of criterion 9");
        return fail("criterion 9 did not produce a report");
    }
    const auto& report = *shared.best_freq_report;
    const auto& fit = mega_fit();
    AcceptabilityMatrix accept =
        acceptability_matrix(fit.params, load_mega_ratings(), *shared.mega_weights);
    CountsTable counts = load_counts(data_dir() + "/valex_counts.tsv", true);

    std::vector<double> err_v, var, err_f, freq;
    for (const auto& e : report.item_errors) {
        auto v = accept.verbs().find(e.row_key);
        auto f = accept.frames().find(e.column);
        if (v && f && accept.observed(*v, *f)) {
            err_v.push_back(e.abs_error);
            var.push_back(accept.variability(*v, *f));
        }
        auto cv = counts.verbs().find(e.row_key);
        if (cv) {
            err_f.push_back(e.abs_error);
            freq.push_back(double(counts.row_total(*cv)));
        }
    }
    auto ev = error_correlation(err_v, var, 999, 21);
    auto ef = error_correlation(err_f, freq, 999, 22);
    if (!ev.rho.defined || !ef.rho.defined) return fail("correlation undefined");
    std::ostringstream note;
    note << "variability rho " << fmt(ev.rho.value) << " [" << fmt(ev.ci.lo) << ", "
         << fmt(ev.ci.hi) << "], frequency rho " << fmt(ef.rho.value) << " ["
         << fmt(ef.ci.lo) << ", " << fmt(ef.ci.hi) << "]";
    if (ev.rho.value < -0.25 || ev.rho.value > -0.12)
        return fail("variability correlation outside [-0.25, -0.12]: " + note.str());
    if (ef.rho.value < -0.01 || ef.rho.value > 0.05)
        return fail("frequency correlation outside [-0.01, 0.05]: " + note.str());
    return pass(note.str());
}

Outcome factor_model_margin() {
    auto inputs = real_eval_inputs();
    if (!inputs)
        return skip("VALEX counts / MegaAcceptability release not available under "
                    + data_dir());
    FitConfig cfg;
    cfg.seed = 6;
    cfg.max_iters = 3000;
    const auto& counts = inputs->counts;
    double bnb = shared.freq_scores.count("bnb")
                     ? shared.freq_scores["bnb"]
                     : evaluate_rep(features_from_matrix(counts, bnb_map(counts, 0.1, cfg).pi),
                                    inputs->targets);

    auto bnb_base = features_from_matrix(counts, bnb_map(counts, 0.1, cfg).pi, "bnb_");
    auto dc_base = features_from_matrix(counts, dc_map(counts, 0.0).theta, "dc_");
    auto lfa5 = lfa_fit(counts, 5, cfg);
    double lfa = evaluate_rep(
        assemble_features(lfa_features(lfa5, counts, FeatureMode::Reconstruction), bnb_base),
        inputs->targets);

    const std::vector<int> k_grid{2, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
    double best_lda = -1e9, best_glove = -1e9;
    for (int k : k_grid) {
        best_lda = std::max(
            best_lda,
            evaluate_rep(assemble_features(
                             lda_features(lda_fit(counts, k, cfg), counts,
                                          FeatureMode::Reconstruction),
                             dc_base),
                         inputs->targets));
        best_glove = std::max(
            best_glove,
            evaluate_rep(glove_features(glove_fit(counts, k, cfg), counts), inputs->targets));
    }
    std::ostringstream note;
    note << "LFA(5) " << fmt(lfa) << ", BNB " << fmt(bnb) << ", best LDA " << fmt(best_lda)
         << ", best GloVe " << fmt(best_glove);
    double margin = lfa - bnb;
    if (margin < 0.0 || margin > 0.03)
        return fail("LFA-BNB margin " + fmt(margin) + " outside [0, 0.03]; " + note.str());
    if (lfa - best_lda < 0.03 || lfa - best_glove < 0.03)
        return fail("LFA lead under 0.03; " + note.str());
    return pass(note.str());
}

Outcome property_suite() {
    std::vector<std::string> checks;

    {  // simplex + ELBO monotonicity
        CountsTable counts;
        CounterRng rng(41);
        for (int v = 0; v < 8; ++v)
            for (int f = 0; f < 6; ++f)
                counts.add("v" + std::to_string(v), "f" + std::to_string(f),
                           int64_t(rng.next_below(30)));
        auto lda = lda_fit(counts, 3, FitConfig{.seed = 2});
        for (Eigen::Index d = 0; d < lda.theta.rows(); ++d)
            if (std::abs(lda.theta.row(d).sum() - 1.0) > 1e-8)
                return fail("lda theta row off the simplex");
        for (int k = 0; k < 3; ++k)
            if (std::abs(lda.phi.row(k).sum() - 1.0) > 1e-8)
                return fail("lda phi row off the simplex");
        const auto& trace = lda.diagnostics.objective_trace;
        for (size_t i = 1; i < trace.size(); ++i)
            if (trace[i] < trace[i - 1] - 1e-6 * std::abs(trace[i - 1]))
                return fail("lda bound decreased");
        checks.push_back("lda simplex+monotone");
    }
    {  // gauge invariance
        CountsTable counts;
        CounterRng rng(43);
        for (int v = 0; v < 6; ++v)
            for (int f = 0; f < 4; ++f)
                counts.add("v" + std::to_string(v), "f" + std::to_string(f),
                           int64_t(rng.next_below(25)));
        FitConfig cfg;
        cfg.max_iters = 300;
        cfg.seed = 3;
        auto lfa = lfa_fit(counts, 2, cfg);
        Eigen::MatrixXd Q(2, 2);
        Q << 0.6, -0.8, 0.8, 0.6;
        Eigen::MatrixXd P1 = (lfa.U * lfa.A).unaryExpr([](double x) { return sigmoid(x); });
        Eigen::MatrixXd P2 =
            ((lfa.U * Q) * (Q.inverse() * lfa.A)).unaryExpr([](double x) { return sigmoid(x); });
        if ((P1 - P2).cwiseAbs().maxCoeff() >= 1e-8) return fail("lfa gauge invariance broken");
        checks.push_back("lfa gauge");
    }
    {  // ridge shrinkage monotonicity
        CounterRng rng(44);
        Eigen::MatrixXd X(30, 5), Y(30, 2);
        for (Eigen::Index i = 0; i < 30; ++i) {
            for (Eigen::Index j = 0; j < 5; ++j) X(i, j) = rng.next_normal();
            for (Eigen::Index j = 0; j < 2; ++j) Y(i, j) = rng.next_normal();
        }
        double prev = std::numeric_limits<double>::infinity();
        for (double alpha : {0.01, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0}) {
            double norm = ridge_fit(X, Y, alpha).weights.norm();
            if (norm > prev + 1e-12) return fail("ridge shrinkage not monotone");
            prev = norm;
        }
        checks.push_back("ridge shrinkage");
    }
    {  // R2 decomposition identity
        CounterRng rng(45);
        Eigen::MatrixXd truth(25, 4), pred(25, 4);
        for (Eigen::Index i = 0; i < 25; ++i)
            for (Eigen::Index j = 0; j < 4; ++j) {
                truth(i, j) = rng.next_normal();
                pred(i, j) = truth(i, j) + 0.3 * rng.next_normal();
            }
        Eigen::RowVectorXd means = truth.colwise().mean();
        auto per = per_frame_r2(pred, truth, means);
        double pooled = r2_score(pred, truth, means).value;
        double weighted = 0.0, total = 0.0;
        for (Eigen::Index j = 0; j < 4; ++j) {
            double ss = (truth.col(j).array() - means[j]).matrix().squaredNorm();
            weighted += ss * per[size_t(j)].value;
            total += ss;
        }
        if (std::abs(pooled - weighted / total) > 1e-12)
            return fail("r2 decomposition identity broken");
        checks.push_back("r2 identity");
    }
    {  // bootstrap determinism
        CounterRng rng(46);
        std::vector<double> xs(60);
        for (auto& x : xs) x = rng.next_normal();
        auto a = bootstrap_ci(xs, Statistic::Mean, 999, 0.95, 12);
        auto b = bootstrap_ci(xs, Statistic::Mean, 999, 0.95, 12);
        if (a.replicate_stats != b.replicate_stats) return fail("bootstrap not deterministic");
        checks.push_back("bootstrap determinism");
    }
    {  // dc rows on the simplex across the grid
        CountsTable counts;
        counts.add("v", "a", 7);
        counts.add("v", "b", 0);
        counts.add("w", "a", 1);
        counts.add("w", "b", 9);
        for (double lam : {0.0, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0}) {
            auto dc = dc_map(counts, lam);
            for (int v = 0; v < 2; ++v)
                if (std::abs(dc.theta.row(v).sum() - 1.0) > 1e-10)
                    return fail("dc row off the simplex at lambda " + fmt(lam));
        }
        checks.push_back("dc simplex");
    }
    std::string joined;
    for (const auto& c : checks) joined += (joined.empty() ? "" : ", ") + c;
    return pass(joined);
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> body;
    };
    std::vector<Criterion> criteria{
        {1, "golden templates", golden_templates},
        {2, "mega list design", mega_design},
        {3, "ordinal-model recovery (synthetic oracle)", ordinal_recovery},
        {4, "normalizer concordance on real data", normalizer_concordance},
        {5, "variability floor and band", variability_floor_band},
        {6, "agreement statistics on real data", agreement_statistics},
        {7, "agreement simulation", agreement_simulation},
        {8, "closed-form vs optimizer (dc MAP)", dc_closed_form_vs_gd},
        {9, "frequency-model ordering on real data", freq_model_ordering},
        {10, "error correlations on real data", error_correlations},
        {11, "factor-model margin on real data", factor_model_margin},
        {12, "property suite (offline)", property_suite},
    };

    int failures = 0;
    for (auto& c : criteria) {
        auto start = std::chrono::steady_clock::now();
        Outcome outcome = fail("unhandled exception");
        try {
            outcome = c.body();
        } catch (const std::exception& e) {
            outcome = fail(std::string("exception: ") + e.what());
        }
        double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const char* tag = outcome.status == Outcome::Status::Pass   ? "PASS"
                          : outcome.status == Outcome::Status::Skip ? "SKIP"
                                                                    : "FAIL";
        if (outcome.status == Outcome::Status::Fail) ++failures;
        std::ostringstream line;
        line << "[" << tag << "] criterion " << c.id << ": " << c.name;
        if (!outcome.note.empty()) line << " - " << outcome.note;
        line.setf(std::ios::fixed);
        line.precision(1);
        line << " (" << seconds << "s)";
        std::cout << line.str() << std::endl;
    }
    if (failures > 0) {
        std::cout << failures << " criterion(s) failed" << std::endl;
        return 1;
    }
    return 0;
}

// lexsel: verb-frame acceptability pipeline
//
// Subcommands cover the full flow: bleached item generation and list designs,
// ordinal-model normalization of Likert ratings, interannotator agreement and
// its simulation, frequency-normalization and factorization representations
// of verb-frame counts, nested-CV ridge evaluation, and error analyses.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "lexsel/lexsel.hpp"

namespace {

using namespace lexsel;

std::vector<double> parse_grid(const std::string& spec) {
    std::vector<double> out;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        auto v = parse_real(tok);
        if (!v) throw config_error("bad number '" + tok + "' in grid");
        out.push_back(*v);
    }
    if (out.empty()) throw config_error("empty grid");
    return out;
}

VerbLexicon load_lexicon_with_overrides(const std::string& lexicon_path,
                                        const std::string& irregulars_path) {
    VerbLexicon lex = load_verb_lexicon(lexicon_path);
    if (!irregulars_path.empty()) lex.apply_overrides(load_verb_lexicon(irregulars_path));
    return lex;
}

Eigen::VectorXd quality_weights(const RatingsTable& ratings, const std::string& mode,
                                const std::string& quality_out) {
    if (mode == "uniform") return Eigen::VectorXd::Ones(ratings.participants().size());
    if (mode != "auto") throw config_error("--weights must be 'uniform' or 'auto'");
    auto pairs = pairwise_list_agreement(ratings);
    auto quality = participant_quality(pairs, ratings.participants(), ratings.lists());
    for (const auto& w : quality.warnings) std::cerr << "warning: " << w << "\n";
    if (!quality_out.empty()) {
        TsvWriter w(quality_out);
        w.row({"participant", "score"});
        for (int32_t p = 0; p < ratings.participants().size(); ++p)
            w.row({ratings.participants().name(p), format_real(quality.score[p])});
    }
    return quality.score;
}

int dispatch(CLI::App& app, int argc, char** argv) {
    // ---- generate ----
    auto* generate = app.add_subcommand("generate", "bleached items for a verb x frame product");
    std::string g_templates, g_lexicon, g_irregulars, g_out;
    generate->add_option("--templates", g_templates)->required();
    generate->add_option("--lexicon", g_lexicon)->required();
    generate->add_option("--irregulars", g_irregulars);
    generate->add_option("--out", g_out)->required();
    generate->callback([&] {
        TemplateSet templates = load_templates(g_templates);
        VerbLexicon lex = load_lexicon_with_overrides(g_lexicon, g_irregulars);
        auto items = generate_all(lex.entries(), templates);
        TsvWriter w(g_out);
        w.row({"verb", "frame_id", "sentence"});
        for (const auto& it : items) w.row({it.verb, it.frame_id, it.sentence});
        std::cout << items.size() << " items\n";
    });

    // ---- lists ----
    auto* lists = app.add_subcommand("lists", "experimental list designs");
    std::string l_design = "mega", l_templates, l_lexicon, l_irregulars, l_out, l_verb;
    uint64_t l_seed = 0;
    lists->add_option("--design", l_design)->check(CLI::IsMember({"pilot", "mega", "single-verb"}));
    lists->add_option("--templates", l_templates)->required();
    lists->add_option("--lexicon", l_lexicon)->required();
    lists->add_option("--irregulars", l_irregulars);
    lists->add_option("--seed", l_seed);
    lists->add_option("--verb", l_verb, "lemma for --design single-verb");
    lists->add_option("--out", l_out)->required();
    lists->callback([&] {
        TemplateSet templates = load_templates(l_templates);
        VerbLexicon lex = load_lexicon_with_overrides(l_lexicon, l_irregulars);
        ListDesign design{DesignKind::Mega, {}};
        if (l_design == "mega") {
            design = build_mega_lists(lex.entries(), templates, l_seed);
        } else if (l_design == "pilot") {
            design = build_pilot_lists(generate_all(lex.entries(), templates), l_seed);
        } else {
            if (l_verb.empty()) throw config_error("--design single-verb needs --verb");
            design = build_single_verb_list(lex.at(l_verb), templates, l_seed);
        }
        validate_design(design);
        std::ofstream(l_out) << design_to_json(design).dump(2) << "\n";
        std::cout << design.lists.size() << " lists of "
                  << (design.lists.empty() ? 0 : design.lists[0].size()) << "\n";
    });

    // ---- normalize ----
    auto* normalize = app.add_subcommand("normalize", "ordinal-model normalization of ratings");
    std::string n_ratings, n_weights = "uniform", n_out, n_diag, n_quality;
    bool n_lenient = false;
    uint64_t n_seed = 0;
    int n_max_iters = 5000;
    normalize->add_option("--ratings", n_ratings)->required();
    normalize->add_option("--weights", n_weights)->check(CLI::IsMember({"uniform", "auto"}));
    normalize->add_option("--out", n_out)->required();
    normalize->add_option("--diagnostics", n_diag);
    normalize->add_option("--quality-out", n_quality);
    normalize->add_option("--seed", n_seed);
    normalize->add_option("--max-iters", n_max_iters);
    normalize->add_flag("--lenient", n_lenient, "drop bad rows instead of failing");
    normalize->callback([&] {
        IngestReport report;
        RatingsTable ratings = load_ratings(n_ratings, {}, n_lenient, &report);
        if (report.rows_dropped > 0)
            std::cerr << "warning: dropped " << report.rows_dropped << " bad rows\n";
        Eigen::VectorXd weights = quality_weights(ratings, n_weights, n_quality);
        FitConfig cfg;
        cfg.seed = n_seed;
        cfg.max_iters = n_max_iters;
        OrdinalFit fit = fit_ordinal_model(ratings, weights, cfg);
        for (const auto& w : fit.diagnostics.warnings) std::cerr << "warning: " << w << "\n";
        save_acceptability(acceptability_matrix(fit.params, ratings, weights), n_out);
        auto cmp = compare_normalizers(fit.params, ratings);
        nlohmann::json diag{{"iterations", fit.diagnostics.iterations},
                            {"converged", fit.diagnostics.converged},
                            {"final_objective", fit.diagnostics.final_objective},
                            {"gradient_norm", fit.diagnostics.gradient_norm},
                            {"objective_trace", fit.diagnostics.objective_trace},
                            {"warnings", fit.diagnostics.warnings}};
        diag["pearson_vs_mean_rating"] =
            cmp.vs_mean_rating.defined ? nlohmann::json(cmp.vs_mean_rating.value)
                                       : nlohmann::json(cmp.vs_mean_rating.reason);
        diag["pearson_vs_zscored_rating"] =
            cmp.vs_zscored_rating.defined ? nlohmann::json(cmp.vs_zscored_rating.value)
                                          : nlohmann::json(cmp.vs_zscored_rating.reason);
        if (!n_diag.empty()) std::ofstream(n_diag) << diag.dump(2) << "\n";
        std::cout << "normalized " << ratings.items().size() << " items ("
                  << fit.diagnostics.iterations << " iterations)\n";
    });

    // ---- agreement ----
    auto* agreement = app.add_subcommand("agreement", "pairwise interannotator agreement");
    std::string a_ratings, a_out, a_summary;
    uint64_t a_seed = 0;
    agreement->add_option("--ratings", a_ratings)->required();
    agreement->add_option("--out", a_out)->required();
    agreement->add_option("--summary", a_summary);
    agreement->add_option("--seed", a_seed);
    agreement->callback([&] {
        RatingsTable ratings = load_ratings(a_ratings);
        auto pairs = pairwise_list_agreement(ratings);
        TsvWriter w(a_out);
        w.row({"list", "p1", "p2", "rho", "n_items"});
        std::vector<double> defined;
        for (const auto& pa : pairs) {
            w.row({ratings.lists().name(pa.list), ratings.participants().name(pa.p1),
                   ratings.participants().name(pa.p2),
                   pa.rho.defined ? format_real(pa.rho.value) : "NA",
                   std::to_string(pa.n_items)});
            if (pa.rho.defined) defined.push_back(pa.rho.value);
        }
        if (defined.empty()) {
            std::cout << "no defined pairwise correlations\n";
            return;
        }
        auto mean_ci = bootstrap_ci(defined, Statistic::Mean, 999, 0.95, a_seed);
        auto median_ci = bootstrap_ci(defined, Statistic::Median, 999, 0.95, a_seed);
        nlohmann::json summary{{"pairs", defined.size()},
                               {"mean", mean_ci.point},
                               {"mean_ci", {mean_ci.lo, mean_ci.hi}},
                               {"median", median_ci.point},
                               {"median_ci", {median_ci.lo, median_ci.hi}}};
        if (!a_summary.empty()) std::ofstream(a_summary) << summary.dump(2) << "\n";
        std::cout << "mean rho " << format_real(mean_ci.point) << " [" << format_real(mean_ci.lo)
                  << ", " << format_real(mean_ci.hi) << "], median "
                  << format_real(median_ci.point) << " over " << defined.size() << " pairs\n";
    });

    // ---- simulate-agreement ----
    auto* simulate = app.add_subcommand("simulate-agreement",
                                        "expected agreement under the fitted ordinal model");
    std::string s_ratings, s_out;
    int s_sims = 999;
    uint64_t s_seed = 0;
    bool s_all_pairs = false;
    simulate->add_option("--ratings", s_ratings)->required();
    simulate->add_option("--sims", s_sims);
    simulate->add_option("--seed", s_seed);
    simulate->add_option("--out", s_out);
    simulate->add_flag("--all-pairs", s_all_pairs,
                       "pair all participants, not only co-list pairs");
    simulate->callback([&] {
        RatingsTable ratings = load_ratings(s_ratings);
        FitConfig cfg;
        cfg.seed = s_seed;
        OrdinalFit fit = fit_ordinal_model(ratings, cfg);
        BootstrapCI sim = simulate_expected_agreement(fit.params, ratings, s_sims, s_seed,
                                                      s_all_pairs);
        nlohmann::json out{{"sims", s_sims},
                           {"mean", sim.point},
                           {"ci", {sim.lo, sim.hi}},
                           {"replicate_means", sim.replicate_stats}};
        if (!s_out.empty()) std::ofstream(s_out) << out.dump(2) << "\n";
        std::cout << "simulated mean agreement " << format_real(sim.point) << " ["
                  << format_real(sim.lo) << ", " << format_real(sim.hi) << "]\n";
    });

    // ---- fit-freq ----
    auto* fitfreq = app.add_subcommand("fit-freq", "direct frequency-normalization models");
    std::string ff_model, ff_grid = "0,0.1,0.2,0.5,1,2,5,10,20,50", ff_counts, ff_outdir,
                ff_verb_map;
    uint64_t ff_seed = 0;
    fitfreq->add_option("--model", ff_model)->required()
        ->check(CLI::IsMember({"dc", "bnb", "pmi", "g"}));
    fitfreq->add_option("--grid", ff_grid);
    fitfreq->add_option("--counts", ff_counts)->required();
    fitfreq->add_option("--verb-map", ff_verb_map);
    fitfreq->add_option("--out-dir", ff_outdir)->required();
    fitfreq->add_option("--seed", ff_seed);
    fitfreq->callback([&] {
        CountsTable counts = load_counts(ff_counts);
        if (!ff_verb_map.empty()) counts = counts.remap_verbs(load_verb_map(ff_verb_map));
        FitConfig cfg;
        cfg.seed = ff_seed;
        std::filesystem::create_directories(ff_outdir);
        auto reps = freq_grid(counts, parse_freq_model(ff_model), parse_grid(ff_grid), cfg);
        for (const auto& rep : reps) {
            std::string stem = ff_outdir + "/freq_" + rep.model + "_"
                               + format_real(rep.hyperparameter);
            save_features(rep.features, stem + ".tsv");
            std::ofstream(stem + ".json")
                << nlohmann::json{{"model", rep.model}, {"hyperparameter", rep.hyperparameter}}
                       .dump(2)
                << "\n";
        }
        std::cout << reps.size() << " representations\n";
    });

    // ---- fit-factor ----
    auto* fitfactor = app.add_subcommand("fit-factor", "abstraction models over the counts");
    std::string fa_model, fa_grid = "2,5,10,15,20,25,30,35,40,45,50", fa_counts, fa_outdir,
                fa_mode = "reconstruction", fa_verb_map;
    uint64_t fa_seed = 0;
    int fa_max_iters = 2000;
    fitfactor->add_option("--model", fa_model)->required()
        ->check(CLI::IsMember({"lda", "lfa", "glove"}));
    fitfactor->add_option("--k-grid", fa_grid);
    fitfactor->add_option("--counts", fa_counts)->required();
    fitfactor->add_option("--verb-map", fa_verb_map);
    fitfactor->add_option("--out-dir", fa_outdir)->required();
    fitfactor->add_option("--assembly", fa_mode)
        ->check(CLI::IsMember({"reconstruction", "latent"}));
    fitfactor->add_option("--seed", fa_seed);
    fitfactor->add_option("--max-iters", fa_max_iters);
    fitfactor->callback([&] {
        CountsTable counts = load_counts(fa_counts);
        if (!fa_verb_map.empty()) counts = counts.remap_verbs(load_verb_map(fa_verb_map));
        FitConfig cfg;
        cfg.seed = fa_seed;
        cfg.max_iters = fa_max_iters;
        FeatureMode mode = parse_feature_mode(fa_mode);
        std::filesystem::create_directories(fa_outdir);
        std::optional<FeatureMatrix> base;
        if (fa_model == "lda")
            base = features_from_matrix(counts, dc_map(counts, 0.0).theta, "dc_");
        else if (fa_model == "lfa")
            base = features_from_matrix(counts, bnb_map(counts, 0.1, cfg).pi, "bnb_");
        int n = 0;
        for (double kd : parse_grid(fa_grid)) {
            int k = int(kd);
            FeatureMatrix feats;
            if (fa_model == "lda") feats = lda_features(lda_fit(counts, k, cfg), counts, mode);
            else if (fa_model == "lfa") feats = lfa_features(lfa_fit(counts, k, cfg), counts, mode);
            else feats = glove_features(glove_fit(counts, k, cfg), counts);
            FeatureMatrix assembled = assemble_features(feats, base);
            std::string stem = fa_outdir + "/factor_" + fa_model + "_k" + std::to_string(k);
            save_features(assembled, stem + ".tsv");
            std::ofstream(stem + ".json")
                << nlohmann::json{{"model", fa_model}, {"hyperparameter", double(k)}}.dump(2)
                << "\n";
            ++n;
        }
        std::cout << n << " representations\n";
    });

    // ---- ingest-features ----
    auto* ingest = app.add_subcommand("ingest-features",
                                      "validate external sentence-feature vectors");
    std::string if_file, if_out;
    ingest->add_option("--file", if_file)->required();
    ingest->add_option("--out", if_out);
    ingest->callback([&] {
        FeatureMatrix m = load_sentence_features(if_file);
        if (!if_out.empty()) save_features(m, if_out);
        std::cout << m.rows() << " rows x " << m.dim() << " dims\n";
    });

    // ---- evaluate ----
    auto* evaluate = app.add_subcommand("evaluate", "nested-CV ridge evaluation");
    std::string e_features, e_targets, e_alpha = "0.01,0.1,0.2,0.5,1,2,5,10", e_out,
                e_unit = "verb";
    uint64_t e_seed = 0;
    evaluate->add_option("--features", e_features)->required();
    evaluate->add_option("--targets", e_targets, "acceptability TSV")->required();
    evaluate->add_option("--alpha-grid", e_alpha);
    evaluate->add_option("--seed", e_seed);
    evaluate->add_option("--unit", e_unit)->check(CLI::IsMember({"verb", "item"}));
    evaluate->add_option("--out", e_out)->required();
    evaluate->callback([&] {
        FeatureMatrix X = load_features(e_features);
        AcceptabilityMatrix accept = load_acceptability(e_targets);
        FeatureMatrix Y;
        if (e_unit == "verb") {
            Y = acceptability_targets(accept);
        } else {
            // sentence-level rows keyed "verb|frame", scalar target
            Y.col_names = {"acceptability"};
            std::vector<double> vals;
            for (int32_t v = 0; v < accept.verbs().size(); ++v)
                for (int32_t f = 0; f < accept.frames().size(); ++f)
                    if (accept.observed(v, f)) {
                        Y.row_keys.push_back(accept.verbs().name(v) + "|"
                                             + accept.frames().name(f));
                        vals.push_back(accept.acceptability(v, f));
                    }
            Y.values.resize(Eigen::Index(vals.size()), 1);
            for (size_t i = 0; i < vals.size(); ++i) Y.values(Eigen::Index(i), 0) = vals[i];
        }
        auto [Xa, Ya] = align_feature_rows(X, Y);
        CVReport r = nested_cv(Xa, Ya, parse_grid(e_alpha), 10, 10, e_seed);
        r.model = std::filesystem::path(e_features).stem().string();
        std::ofstream(e_out) << cv_report_to_json(r).dump(2) << "\n";
        std::cout << "mean R2 " << format_real(r.mean_r2) << " over "
                  << r.outer_fold_r2.size() << " folds\n";
    });

    // ---- error-analysis ----
    auto* erran = app.add_subcommand("error-analysis",
                                     "correlate held-out errors with a covariate");
    std::string x_report, x_covariate = "variability", x_accept, x_counts, x_out;
    uint64_t x_seed = 0;
    erran->add_option("--report", x_report)->required();
    erran->add_option("--covariate", x_covariate)
        ->check(CLI::IsMember({"variability", "frequency"}));
    erran->add_option("--acceptability", x_accept);
    erran->add_option("--counts", x_counts);
    erran->add_option("--seed", x_seed);
    erran->add_option("--out", x_out);
    erran->callback([&] {
        nlohmann::json j;
        std::ifstream in(x_report);
        if (!in) throw data_error("cannot open report: " + x_report);
        in >> j;
        CVReport r = cv_report_from_json(j);
        std::vector<double> errors, covariate;
        if (x_covariate == "variability") {
            if (x_accept.empty()) throw config_error("--covariate variability needs --acceptability");
            AcceptabilityMatrix accept = load_acceptability(x_accept);
            for (const auto& e : r.item_errors) {
                auto v = accept.verbs().find(e.row_key);
                auto f = accept.frames().find(e.column);
                if (v && f && accept.observed(*v, *f)) {
                    errors.push_back(e.abs_error);
                    covariate.push_back(accept.variability(*v, *f));
                }
            }
        } else {
            if (x_counts.empty()) throw config_error("--covariate frequency needs --counts");
            CountsTable counts = load_counts(x_counts);
            for (const auto& e : r.item_errors) {
                auto v = counts.verbs().find(e.row_key);
                if (v) {
                    errors.push_back(e.abs_error);
                    covariate.push_back(double(counts.row_total(*v)));
                }
            }
        }
        if (errors.size() < 3) throw analysis_error("too few aligned items for a correlation");
        auto ec = error_correlation(errors, covariate, 999, x_seed);
        if (!ec.rho.defined) throw analysis_error("correlation undefined: " + ec.rho.reason);
        nlohmann::json out{{"covariate", x_covariate},
                           {"rho", ec.rho.value},
                           {"ci", {ec.ci.lo, ec.ci.hi}},
                           {"n", errors.size()}};
        if (!x_out.empty()) std::ofstream(x_out) << out.dump(2) << "\n";
        std::cout << x_covariate << " rho " << format_real(ec.rho.value) << " ["
                  << format_real(ec.ci.lo) << ", " << format_real(ec.ci.hi) << "]\n";
    });

    // ---- summarize ----
    auto* summarize = app.add_subcommand("summarize", "tidy tables from CV reports");
    std::vector<std::string> m_reports;
    std::string m_out, m_per_frame;
    summarize->add_option("reports", m_reports, "report JSON paths")->required();
    summarize->add_option("--out", m_out)->required();
    summarize->add_option("--per-frame", m_per_frame);
    summarize->callback([&] {
        auto rows = summarize_reports(m_reports);
        write_summary_tsv(rows, m_out);
        if (!m_per_frame.empty()) {
            std::vector<std::pair<std::string, CVReport>> loaded;
            for (const auto& p : m_reports) {
                nlohmann::json j;
                std::ifstream(p) >> j;
                CVReport r = cv_report_from_json(j);
                loaded.emplace_back(r.model, std::move(r));
            }
            write_per_frame_tsv(loaded, m_per_frame);
        }
        std::cout << rows.size() << " rows\n";
    });

    // ---- run ----
    auto* run = app.add_subcommand("run", "full pipeline from one config file");
    std::string r_config;
    run->add_option("--config", r_config)->required();
    run->callback([&] {
        PipelineResult result = run_pipeline(parse_config(r_config));
        std::cout << "executed: " << result.executed.size() << " stages, skipped: "
                  << result.skipped.size() << "\n";
    });

    app.require_subcommand(1);
    CLI11_PARSE(app, argc, argv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"verb-frame acceptability pipeline"};
    try {
        return dispatch(app, argc, argv);
    } catch (const lexsel::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const lexsel::data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const lexsel::analysis_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const lexsel::numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

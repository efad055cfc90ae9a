#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexsel/agreement.hpp"
#include "lexsel/bleach.hpp"
#include "lexsel/data.hpp"
#include "lexsel/eval.hpp"
#include "lexsel/factor.hpp"
#include "lexsel/freq.hpp"
#include "lexsel/ordinal.hpp"

namespace lexsel {

inline constexpr const char* kVersion = "lexsel 0.1.0";

// ---- config -----------------------------------------------------------------

// One declarative key=value file ('#' comments). Unknown keys are kept; typed
// accessors validate on read.
struct PipelineConfig {
    std::map<std::string, std::string> values;

    bool has(const std::string& key) const { return values.count(key) > 0; }

    std::string get(const std::string& key, const std::string& fallback = "") const {
        auto it = values.find(key);
        return it == values.end() ? fallback : it->second;
    }

    std::string require(const std::string& key) const {
        auto it = values.find(key);
        if (it == values.end() || it->second.empty())
            throw config_error("config: missing required key '" + key + "'");
        return it->second;
    }

    uint64_t seed(const std::string& key = "seed", uint64_t fallback = 0) const {
        if (!has(key)) return fallback;
        auto v = parse_int(values.at(key));
        if (!v || *v < 0) throw config_error("config: '" + key + "' must be a nonnegative integer");
        return uint64_t(*v);
    }

    std::vector<double> grid(const std::string& key, const std::string& fallback) const {
        std::string spec = get(key, fallback);
        std::vector<double> out;
        std::stringstream ss(spec);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            auto v = parse_real(tok);
            if (!v) throw config_error("config: bad number '" + tok + "' in " + key);
            out.push_back(*v);
        }
        if (out.empty()) throw config_error("config: empty grid " + key);
        return out;
    }
};

inline PipelineConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    PipelineConfig cfg;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::string_view sv = trim(line);
        if (sv.empty()) continue;
        auto eq = sv.find('=');
        if (eq == std::string_view::npos)
            throw config_error(path + " line " + std::to_string(line_no)
                               + ": expected key = value");
        std::string key(trim(sv.substr(0, eq)));
        std::string value(trim(sv.substr(eq + 1)));
        if (key.empty())
            throw config_error(path + " line " + std::to_string(line_no) + ": empty key");
        cfg.values[key] = value;
    }
    return cfg;
}

// ---- content hashing --------------------------------------------------------

inline uint64_t fnv1a64(std::string_view bytes, uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot hash missing file: " + path);
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h = fnv1a64(std::string_view(buf, size_t(in.gcount())), h);
    return h;
}

inline std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---- manifest & staged execution ---------------------------------------------

struct RunManifest {
    nlohmann::json j = {{"version", kVersion}, {"stages", nlohmann::json::object()}};

    static RunManifest load(const std::string& path) {
        RunManifest m;
        std::ifstream in(path);
        if (in) in >> m.j;
        return m;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        out << j.dump(2) << "\n";
    }
};

// Runs stages in dependency order; a stage is skipped when its recorded input
// hash matches and every output file still exists.
class StageRunner {
  public:
    StageRunner(std::string out_dir, RunManifest previous)
        : out_dir_(std::move(out_dir)), previous_(std::move(previous)) {
        std::filesystem::create_directories(out_dir_);
        manifest_.j["started"] = timestamp();
    }

    const std::string& out_dir() const { return out_dir_; }
    std::vector<std::string> executed;
    std::vector<std::string> skipped;

    // inputs: files + a config fingerprint string; outputs: produced files
    template <typename Fn>
    void stage(const std::string& name, const std::vector<std::string>& input_files,
               const std::string& config_fingerprint, const std::vector<std::string>& outputs,
               Fn&& body) {
        uint64_t h = fnv1a64(config_fingerprint);
        h = fnv1a64(std::string_view("\x1f"), h);
        for (const auto& f : input_files) {
            h = fnv1a64(f, h);
            h = fnv1a64(hash_hex(hash_file(f)), h);
        }
        std::string input_hash = hash_hex(h);

        bool can_skip = false;
        if (previous_.j["stages"].contains(name)
            && previous_.j["stages"][name].value("inputs", "") == input_hash) {
            can_skip = true;
            for (const auto& o : outputs)
                if (!std::filesystem::exists(o)) can_skip = false;
        }
        nlohmann::json record{{"inputs", input_hash}, {"outputs", nlohmann::json::object()}};
        if (can_skip) {
            skipped.push_back(name);
            record["skipped"] = true;
        } else {
            try {
                body();
            } catch (const std::exception& e) {
                throw analysis_error("stage '" + name + "' failed ("
                                     + (outputs.empty() ? std::string("no artifact") : outputs[0])
                                     + "): " + e.what());
            }
            executed.push_back(name);
            record["skipped"] = false;
        }
        for (const auto& o : outputs)
            record["outputs"][o] = hash_hex(hash_file(o));
        record["finished"] = timestamp();
        manifest_.j["stages"][name] = std::move(record);
    }

    RunManifest finish(const std::string& config_hash) {
        manifest_.j["config_hash"] = config_hash;
        manifest_.j["finished"] = timestamp();
        manifest_.save(out_dir_ + "/manifest.json");
        return manifest_;
    }

  private:
    static std::string timestamp() {
        auto now = std::chrono::system_clock::now();
        auto t = std::chrono::system_clock::to_time_t(now);
        char buf[32];
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", std::gmtime(&t));
        return buf;
    }

    std::string out_dir_;
    RunManifest previous_;
    RunManifest manifest_;
};

// ---- summarize ----------------------------------------------------------------

struct SummaryRow {
    std::string model;
    double hyperparameter;
    double mean_r2, ci_lo, ci_hi;
};

inline std::vector<SummaryRow> summarize_reports(const std::vector<std::string>& report_paths) {
    if (report_paths.empty()) throw config_error("summarize: no reports given");
    std::vector<SummaryRow> rows;
    for (const auto& path : report_paths) {
        std::ifstream in(path);
        if (!in) throw data_error("cannot open report: " + path);
        nlohmann::json j;
        in >> j;
        CVReport r = cv_report_from_json(j);
        BootstrapCI ci = bootstrap_ci(r.outer_fold_r2, Statistic::Mean, 999, 0.95, r.seed);
        rows.push_back({r.model.empty() ? path : r.model, r.hyperparameter, r.mean_r2, ci.lo,
                        ci.hi});
    }
    return rows;
}

inline void write_summary_tsv(const std::vector<SummaryRow>& rows, const std::string& path) {
    TsvWriter w(path);
    w.row({"model", "hyperparameter", "mean_r2", "ci_lo", "ci_hi"});
    for (const auto& r : rows)
        w.row({r.model, format_real(r.hyperparameter), format_real(r.mean_r2),
               format_real(r.ci_lo), format_real(r.ci_hi)});
}

inline void write_per_frame_tsv(const std::vector<std::pair<std::string, CVReport>>& reports,
                                const std::string& path) {
    TsvWriter w(path);
    w.row({"model", "hyperparameter", "frame", "r2"});
    for (const auto& [model, r] : reports)
        for (const auto& [frame, value] : r.per_frame_r2)
            w.row({model, format_real(r.hyperparameter), frame, format_real(value)});
}

// ---- full pipeline -------------------------------------------------------------

struct PipelineResult {
    RunManifest manifest;
    std::vector<std::string> executed, skipped;
};

// Executes the requested stages in dependency order from one config. Stage
// errors abort with the stage name and first artifact path.
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
    const std::string out_dir = cfg.require("out_dir");
    const std::string ratings_path = cfg.require("ratings");
    const std::string counts_path = cfg.require("counts");
    for (const auto& key : {"ratings", "counts", "templates", "lexicon", "sentence_features",
                            "verb_map", "irregulars"}) {
        if (cfg.has(key) && !cfg.get(key).empty() && !std::filesystem::exists(cfg.get(key)))
            throw config_error("config: path for '" + std::string(key) + "' does not exist: "
                               + cfg.get(key));
    }
    const uint64_t seed = cfg.seed();
    const bool auto_weights = cfg.get("weights", "auto") == "auto";
    const std::string assembly = cfg.get("assembly", "reconstruction");
    FitConfig fit_cfg;
    fit_cfg.seed = seed;
    if (cfg.has("max_iters")) fit_cfg.max_iters = int(*parse_int(cfg.get("max_iters")));

    ColumnMap columns;
    if (cfg.has("column_participant")) columns.participant = cfg.get("column_participant");
    if (cfg.has("column_list")) columns.list = cfg.get("column_list");
    if (cfg.has("column_verb")) columns.verb = cfg.get("column_verb");
    if (cfg.has("column_frame")) columns.frame = cfg.get("column_frame");
    if (cfg.has("column_response")) columns.response = cfg.get("column_response");

    std::string config_fingerprint;
    for (const auto& [k, v] : cfg.values) config_fingerprint += k + "=" + v + "\n";
    const std::string config_hash = hash_hex(fnv1a64(config_fingerprint));

    StageRunner runner(out_dir, RunManifest::load(out_dir + "/manifest.json"));
    const std::string pairs_path = out_dir + "/pairwise_agreement.tsv";
    const std::string agreement_summary_path = out_dir + "/agreement_summary.json";
    const std::string quality_path = out_dir + "/participant_quality.tsv";
    const std::string accept_path = out_dir + "/acceptability.tsv";
    const std::string normalize_diag_path = out_dir + "/normalize_diagnostics.json";

    runner.stage("agreement", {ratings_path}, "v1|" + std::to_string(seed),
                 {pairs_path, agreement_summary_path}, [&] {
        RatingsTable ratings = load_ratings(ratings_path, columns,
                                            cfg.get("lenient", "false") == "true");
        auto pairs = pairwise_list_agreement(ratings);
        TsvWriter w(pairs_path);
        w.row({"list", "p1", "p2", "rho", "n_items"});
        std::vector<double> defined;
        for (const auto& pa : pairs) {
            w.row({ratings.lists().name(pa.list), ratings.participants().name(pa.p1),
                   ratings.participants().name(pa.p2),
                   pa.rho.defined ? format_real(pa.rho.value) : "NA",
                   std::to_string(pa.n_items)});
            if (pa.rho.defined) defined.push_back(pa.rho.value);
        }
        nlohmann::json summary;
        if (!defined.empty()) {
            auto mean_ci = bootstrap_ci(defined, Statistic::Mean, 999, 0.95, seed);
            auto median_ci = bootstrap_ci(defined, Statistic::Median, 999, 0.95, seed);
            summary = {{"pairs", defined.size()},
                       {"mean", mean_ci.point},
                       {"mean_ci", {mean_ci.lo, mean_ci.hi}},
                       {"median", median_ci.point},
                       {"median_ci", {median_ci.lo, median_ci.hi}}};
        } else {
            summary = {{"pairs", 0}};
        }
        std::ofstream(agreement_summary_path) << summary.dump(2) << "\n";
    });

    if (auto_weights) {
        runner.stage("quality", {ratings_path, pairs_path}, "v1", {quality_path}, [&] {
            RatingsTable ratings = load_ratings(ratings_path, columns,
                                                cfg.get("lenient", "false") == "true");
            auto pairs = pairwise_list_agreement(ratings);
            auto quality = participant_quality(pairs, ratings.participants(), ratings.lists());
            TsvWriter w(quality_path);
            w.row({"participant", "score"});
            for (int32_t p = 0; p < ratings.participants().size(); ++p)
                w.row({ratings.participants().name(p), format_real(quality.score[p])});
        });
    }

    {
        std::vector<std::string> inputs{ratings_path};
        if (auto_weights) inputs.push_back(quality_path);
        runner.stage("normalize", inputs,
                     "v1|" + std::to_string(seed) + "|" + std::to_string(fit_cfg.max_iters),
                     {accept_path, normalize_diag_path}, [&] {
            RatingsTable ratings = load_ratings(ratings_path, columns,
                                                cfg.get("lenient", "false") == "true");
            Eigen::VectorXd weights;
            if (auto_weights) {
                weights = Eigen::VectorXd::Ones(ratings.participants().size());
                TsvReader reader(quality_path);
                size_t ip = reader.column("participant"), is = reader.column("score");
                std::vector<std::string_view> f;
                while (reader.next(f)) {
                    auto p = ratings.participants().find(trim(f[ip]));
                    if (p) weights[*p] = *parse_real(f[is]);
                }
            }
            OrdinalFit fit = fit_ordinal_model(ratings, weights, fit_cfg);
            AcceptabilityMatrix m = acceptability_matrix(fit.params, ratings, weights);
            save_acceptability(m, accept_path);
            auto cmp = compare_normalizers(fit.params, ratings);
            nlohmann::json diag{{"iterations", fit.diagnostics.iterations},
                                {"converged", fit.diagnostics.converged},
                                {"final_objective", fit.diagnostics.final_objective},
                                {"gradient_norm", fit.diagnostics.gradient_norm},
                                {"objective_trace", fit.diagnostics.objective_trace},
                                {"warnings", fit.diagnostics.warnings}};
            if (cmp.vs_mean_rating.defined)
                diag["pearson_vs_mean_rating"] = cmp.vs_mean_rating.value;
            if (cmp.vs_zscored_rating.defined)
                diag["pearson_vs_zscored_rating"] = cmp.vs_zscored_rating.value;
            std::ofstream(normalize_diag_path) << diag.dump(2) << "\n";
        });
    }

    // representation fits
    std::filesystem::create_directories(out_dir + "/reps");
    std::vector<std::pair<std::string, std::string>> rep_files;  // (rep tsv, meta json)
    auto rep_path = [&](const std::string& stem) {
        return std::make_pair(out_dir + "/reps/" + stem + ".tsv",
                              out_dir + "/reps/" + stem + ".json");
    };

    auto save_rep = [&](const TaggedRepresentation& rep, const std::string& stem) {
        auto [tsv, meta] = rep_path(stem);
        save_features(rep.features, tsv);
        std::ofstream(meta) << nlohmann::json{{"model", rep.model},
                                              {"hyperparameter", rep.hyperparameter}}
                                   .dump(2)
                            << "\n";
    };

    auto lambda_grid = cfg.grid("lambda_grid", "0,0.1,0.2,0.5,1,2,5,10,20,50");
    auto gamma_grid = cfg.grid("gamma_grid", "0,0.1,0.2,0.5,1,2,5,10,20,50");
    auto k_grid_real = cfg.grid("k_grid", "2,5,10,15,20,25,30,35,40,45,50");
    std::vector<int> k_grid;
    for (double k : k_grid_real) k_grid.push_back(int(k));

    auto grid_string = [](const std::vector<double>& g) {
        std::string s;
        for (double v : g) s += format_real(v) + ",";
        return s;
    };

    std::vector<std::string> freq_outputs;
    std::vector<std::string> rep_stems;
    for (FreqModel model : {FreqModel::DC, FreqModel::BNB, FreqModel::PMI, FreqModel::G}) {
        const auto& grid_vals = (model == FreqModel::BNB) ? gamma_grid : lambda_grid;
        for (double v : grid_vals) {
            std::string stem = std::string("freq_") + freq_model_name(model) + "_"
                               + format_real(v);
            rep_stems.push_back(stem);
            auto [tsv, meta] = rep_path(stem);
            freq_outputs.push_back(tsv);
            freq_outputs.push_back(meta);
        }
    }
    runner.stage("fit-freq", {counts_path},
                 "v1|" + grid_string(lambda_grid) + "|" + grid_string(gamma_grid),
                 freq_outputs, [&] {
        CountsTable counts = load_counts(counts_path);
        if (cfg.has("verb_map"))
            counts = counts.remap_verbs(load_verb_map(cfg.get("verb_map")));
        for (FreqModel model : {FreqModel::DC, FreqModel::BNB, FreqModel::PMI, FreqModel::G}) {
            const auto& grid_vals = (model == FreqModel::BNB) ? gamma_grid : lambda_grid;
            auto reps = freq_grid(counts, model, grid_vals, fit_cfg);
            for (const auto& rep : reps)
                save_rep(rep, std::string("freq_") + rep.model + "_"
                                  + format_real(rep.hyperparameter));
        }
    });
    for (const auto& stem : rep_stems) rep_files.push_back(rep_path(stem));

    std::vector<std::string> factor_outputs;
    std::vector<std::string> factor_stems;
    for (const std::string model : {"lda", "lfa", "glove"}) {
        for (int k : k_grid) {
            std::string stem = "factor_" + model + "_k" + std::to_string(k);
            factor_stems.push_back(stem);
            auto [tsv, meta] = rep_path(stem);
            factor_outputs.push_back(tsv);
            factor_outputs.push_back(meta);
        }
    }
    runner.stage("fit-factor", {counts_path},
                 "v1|" + grid_string(k_grid_real) + "|" + assembly, factor_outputs, [&] {
        CountsTable counts = load_counts(counts_path);
        if (cfg.has("verb_map"))
            counts = counts.remap_verbs(load_verb_map(cfg.get("verb_map")));
        FeatureMode mode = parse_feature_mode(assembly);
        auto dc_base = features_from_matrix(counts, dc_map(counts, 0.0).theta, "dc_");
        auto bnb_base = features_from_matrix(counts, bnb_map(counts, 0.1, fit_cfg).pi, "bnb_");
        for (int k : k_grid) {
            {
                auto lda = lda_fit(counts, k, fit_cfg);
                TaggedRepresentation rep{"lda", double(k),
                                         assemble_features(lda_features(lda, counts, mode),
                                                           dc_base)};
                save_rep(rep, "factor_lda_k" + std::to_string(k));
            }
            {
                auto lfa = lfa_fit(counts, k, fit_cfg);
                TaggedRepresentation rep{"lfa", double(k),
                                         assemble_features(lfa_features(lfa, counts, mode),
                                                           bnb_base)};
                save_rep(rep, "factor_lfa_k" + std::to_string(k));
            }
            {
                auto glove = glove_fit(counts, k, fit_cfg);
                TaggedRepresentation rep{"glove", double(k),
                                         assemble_features(glove_features(glove, counts))};
                save_rep(rep, "factor_glove_k" + std::to_string(k));
            }
        }
    });
    for (const auto& stem : factor_stems) rep_files.push_back(rep_path(stem));

    // evaluation
    std::filesystem::create_directories(out_dir + "/reports");
    auto alpha_grid = cfg.grid("alpha_grid", "0.01,0.1,0.2,0.5,1,2,5,10");
    std::vector<std::string> report_paths;
    for (const auto& [rep_tsv, rep_meta] : rep_files) {
        std::string stem = std::filesystem::path(rep_tsv).stem().string();
        std::string report = out_dir + "/reports/" + stem + ".report.json";
        report_paths.push_back(report);
        runner.stage("evaluate-" + stem, {rep_tsv, rep_meta, accept_path},
                     "v1|" + grid_string(alpha_grid) + "|" + std::to_string(seed), {report},
                     [&, rep_tsv = rep_tsv, rep_meta = rep_meta, report] {
            FeatureMatrix X = load_features(rep_tsv);
            nlohmann::json meta;
            std::ifstream(rep_meta) >> meta;
            AcceptabilityMatrix accept = load_acceptability(accept_path);
            FeatureMatrix Y = acceptability_targets(accept);
            auto [Xa, Ya] = align_feature_rows(X, Y);
            CVReport r = nested_cv(Xa, Ya, alpha_grid, 10, 10, seed);
            r.model = meta.value("model", "");
            r.hyperparameter = meta.value("hyperparameter", 0.0);
            std::ofstream(report) << cv_report_to_json(r).dump(2) << "\n";
        });
    }

    const std::string summary_path = out_dir + "/summary.tsv";
    const std::string per_frame_path = out_dir + "/per_frame_r2.tsv";
    {
        std::vector<std::string> inputs = report_paths;
        runner.stage("summarize", inputs, "v1", {summary_path, per_frame_path}, [&] {
            auto rows = summarize_reports(report_paths);
            write_summary_tsv(rows, summary_path);
            std::vector<std::pair<std::string, CVReport>> loaded;
            for (const auto& p : report_paths) {
                nlohmann::json j;
                std::ifstream(p) >> j;
                CVReport r = cv_report_from_json(j);
                loaded.emplace_back(r.model, std::move(r));
            }
            write_per_frame_tsv(loaded, per_frame_path);
        });
    }

    const std::string errcorr_path = out_dir + "/error_correlations.json";
    {
        std::vector<std::string> inputs = report_paths;
        inputs.push_back(accept_path);
        inputs.push_back(counts_path);
        runner.stage("error-analysis", inputs, "v1|" + std::to_string(seed), {errcorr_path},
                     [&] {
            // best frequency-model report by mean R2
            std::optional<CVReport> best;
            for (const auto& p : report_paths) {
                nlohmann::json j;
                std::ifstream(p) >> j;
                CVReport r = cv_report_from_json(j);
                if (r.model != "dc" && r.model != "bnb" && r.model != "pmi" && r.model != "g")
                    continue;
                if (!best || r.mean_r2 > best->mean_r2) best = std::move(r);
            }
            if (!best) throw analysis_error("no frequency-model reports found");
            AcceptabilityMatrix accept = load_acceptability(accept_path);
            CountsTable counts = load_counts(counts_path);
            if (cfg.has("verb_map"))
                counts = counts.remap_verbs(load_verb_map(cfg.get("verb_map")));

            std::vector<double> errors_var, variability, errors_freq, frequency;
            for (const auto& e : best->item_errors) {
                auto v = accept.verbs().find(e.row_key);
                auto f = accept.frames().find(e.column);
                if (v && f && accept.observed(*v, *f)) {
                    errors_var.push_back(e.abs_error);
                    variability.push_back(accept.variability(*v, *f));
                }
                auto cv = counts.verbs().find(e.row_key);
                if (cv) {
                    errors_freq.push_back(e.abs_error);
                    frequency.push_back(double(counts.row_total(*cv)));
                }
            }
            nlohmann::json out{{"model", best->model},
                               {"hyperparameter", best->hyperparameter}};
            auto emit = [&](const char* name, const std::vector<double>& err,
                            const std::vector<double>& cov) {
                if (err.size() < 3) return;
                auto ec = error_correlation(err, cov, 999, seed);
                if (ec.rho.defined)
                    out[name] = {{"rho", ec.rho.value},
                                 {"ci", {ec.ci.lo, ec.ci.hi}},
                                 {"n", err.size()}};
            };
            emit("variability", errors_var, variability);
            emit("frequency", errors_freq, frequency);
            std::ofstream(errcorr_path) << out.dump(2) << "\n";
        });
    }

    PipelineResult result;
    result.manifest = runner.finish(config_hash);
    result.executed = runner.executed;
    result.skipped = runner.skipped;
    return result;
}

}  // namespace lexsel

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexsel/common.hpp"
#include "lexsel/data.hpp"
#include "lexsel/rng.hpp"
#include "lexsel/stats.hpp"

namespace lexsel {

struct RidgeModel {
    Eigen::MatrixXd weights;       // features x targets, standardized space
    Eigen::RowVectorXd intercept;  // per target
    double alpha = 0.0;
    Eigen::RowVectorXd feature_mean, feature_scale;
    bool used_pseudoinverse = false;

    Eigen::MatrixXd predict(const Eigen::MatrixXd& X) const {
        Eigen::MatrixXd Xs = (X.rowwise() - feature_mean).array().rowwise()
                             / feature_scale.array();
        Eigen::MatrixXd out = Xs * weights;
        out.rowwise() += intercept;
        return out;
    }
};

// Closed-form ridge on standardized features and centered targets; the
// penalty never touches the intercept. alpha = 0 falls back to a minimum-norm
// least squares solve when the design is rank-deficient.
inline RidgeModel ridge_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double alpha) {
    if (X.rows() != Y.rows()) throw analysis_error("ridge_fit: row mismatch");
    if (alpha < 0) throw config_error("ridge_fit: alpha must be nonnegative");
    const Eigen::Index n = X.rows(), p = X.cols();

    RidgeModel m;
    m.alpha = alpha;
    m.feature_mean = X.colwise().mean();
    Eigen::MatrixXd Xc = X.rowwise() - m.feature_mean;
    m.feature_scale.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        double sd = std::sqrt(Xc.col(j).squaredNorm() / double(n));
        m.feature_scale[j] = sd > 1e-12 ? sd : 1.0;
    }
    Eigen::MatrixXd Xs = Xc.array().rowwise() / m.feature_scale.array();

    Eigen::RowVectorXd ymean = Y.colwise().mean();
    Eigen::MatrixXd Yc = Y.rowwise() - ymean;

    if (alpha == 0.0) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(Xs, Eigen::ComputeThinU | Eigen::ComputeThinV);
        m.weights = svd.solve(Yc);
        m.used_pseudoinverse = svd.rank() < std::min(n, p);
    } else {
        Eigen::MatrixXd G = Xs.transpose() * Xs;
        G.diagonal().array() += alpha;
        m.weights = Eigen::LDLT<Eigen::MatrixXd>(G).solve(Xs.transpose() * Yc);
    }
    m.intercept = ymean;
    return m;
}

struct R2 {
    bool defined = false;
    double value = std::numeric_limits<double>::quiet_NaN();
    std::string reason;
};

// Pooled variance explained on held-out rows; the baseline is the
// training-set target mean, so values can go negative.
inline R2 r2_score(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth,
                   const Eigen::RowVectorXd& training_means) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
        throw analysis_error("r2: shape mismatch");
    double ss_res = (truth - pred).squaredNorm();
    double ss_tot = (truth.rowwise() - training_means).squaredNorm();
    R2 out;
    if (ss_tot <= 0.0) {
        out.reason = "zero total sum of squares";
        return out;
    }
    out.defined = true;
    out.value = 1.0 - ss_res / ss_tot;
    return out;
}

inline std::vector<R2> per_frame_r2(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth,
                                    const Eigen::RowVectorXd& training_means) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
        throw analysis_error("per_frame_r2: shape mismatch");
    std::vector<R2> out(size_t(pred.cols()));
    for (Eigen::Index j = 0; j < pred.cols(); ++j) {
        double ss_res = (truth.col(j) - pred.col(j)).squaredNorm();
        double ss_tot = (truth.col(j).array() - training_means[j]).matrix().squaredNorm();
        if (ss_tot <= 0.0) {
            out[size_t(j)].reason = "zero total sum of squares";
        } else {
            out[size_t(j)].defined = true;
            out[size_t(j)].value = 1.0 - ss_res / ss_tot;
        }
    }
    return out;
}

struct ItemError {
    std::string row_key;
    std::string column;
    double abs_error;
    double predicted;
    double truth;
};

struct CVReport {
    std::vector<double> outer_fold_r2;
    double mean_r2 = 0.0;
    std::vector<double> chosen_alpha;
    std::map<std::string, double> per_frame_r2;  // column -> pooled-across-folds R2
    std::vector<ItemError> item_errors;
    std::vector<int> fold_of_row;  // audit trail
    uint64_t seed = 0;
    std::string model;
    double hyperparameter = 0.0;
};

namespace detail {

// Seeded uniform shuffle then contiguous split.
inline std::vector<std::vector<Eigen::Index>> make_folds(size_t n, int k, CounterRng rng) {
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index(0));
    rng.shuffle(order);
    std::vector<std::vector<Eigen::Index>> folds(static_cast<size_t>(k));
    for (size_t i = 0; i < n; ++i) folds[i * size_t(k) / n].push_back(order[i]);
    return folds;
}

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m,
                                 const std::vector<Eigen::Index>& rows) {
    Eigen::MatrixXd out(Eigen::Index(rows.size()), m.cols());
    for (size_t i = 0; i < rows.size(); ++i) out.row(Eigen::Index(i)) = m.row(rows[i]);
    return out;
}

}  // namespace detail

// Nested cross-validation: the inner 10-fold on each training split selects
// alpha (ties toward the larger, more-shrunk value); the refit model is
// scored on the untouched outer fold.
inline CVReport nested_cv(const FeatureMatrix& X, const FeatureMatrix& Y,
                          const std::vector<double>& alpha_grid, int outer = 10, int inner = 10,
                          uint64_t seed = 0) {
    if (alpha_grid.empty()) throw config_error("nested_cv: empty alpha grid");
    if (X.row_keys != Y.row_keys)
        throw analysis_error("nested_cv: feature and target row keys are not aligned");
    const size_t n = size_t(X.values.rows());
    if (n < size_t(outer))
        throw config_error("nested_cv: " + std::to_string(n) + " rows is fewer than "
                           + std::to_string(outer) + " outer folds");

    std::vector<double> sorted_alphas = alpha_grid;
    std::sort(sorted_alphas.begin(), sorted_alphas.end());

    CounterRng root(seed, 0x666f6c64);  // stream tag: "fold"
    auto outer_folds = detail::make_folds(n, outer, root.substream(0));

    CVReport report;
    report.seed = seed;
    report.fold_of_row.assign(n, -1);
    for (size_t k = 0; k < outer_folds.size(); ++k)
        for (auto i : outer_folds[k]) report.fold_of_row[size_t(i)] = int(k);

    std::map<std::string, std::pair<double, double>> frame_ss;  // column -> (res, tot)

    for (size_t k = 0; k < outer_folds.size(); ++k) {
        std::vector<Eigen::Index> train_rows;
        for (size_t k2 = 0; k2 < outer_folds.size(); ++k2)
            if (k2 != k)
                train_rows.insert(train_rows.end(), outer_folds[k2].begin(),
                                  outer_folds[k2].end());
        const auto& test_rows = outer_folds[k];
        // fold-membership audit: no test row may appear in the training split
        for (auto i : test_rows)
            if (std::find(train_rows.begin(), train_rows.end(), i) != train_rows.end())
                throw analysis_error("nested_cv: fold leakage detected");

        Eigen::MatrixXd Xtr = detail::take_rows(X.values, train_rows);
        Eigen::MatrixXd Ytr = detail::take_rows(Y.values, train_rows);

        // inner CV over the alpha grid
        auto inner_folds = detail::make_folds(train_rows.size(), inner,
                                              root.substream(1 + k));
        double best_score = -std::numeric_limits<double>::infinity();
        double best_alpha = sorted_alphas.back();
        for (double alpha : sorted_alphas) {
            double total = 0.0;
            int used = 0;
            for (const auto& ifold : inner_folds) {
                std::vector<Eigen::Index> itr;
                for (const auto& other : inner_folds)
                    if (&other != &ifold) itr.insert(itr.end(), other.begin(), other.end());
                if (itr.empty() || ifold.empty()) continue;
                Eigen::MatrixXd Xi = detail::take_rows(Xtr, itr);
                Eigen::MatrixXd Yi = detail::take_rows(Ytr, itr);
                RidgeModel m = ridge_fit(Xi, Yi, alpha);
                Eigen::MatrixXd pred = m.predict(detail::take_rows(Xtr, ifold));
                R2 s = r2_score(pred, detail::take_rows(Ytr, ifold), Yi.colwise().mean());
                if (s.defined) {
                    total += s.value;
                    ++used;
                }
            }
            if (used == 0) continue;
            double score = total / used;
            if (score > best_score - 1e-12) {  // ties break toward larger alpha
                best_score = std::max(best_score, score);
                if (score >= best_score - 1e-12) best_alpha = alpha;
            }
        }
        report.chosen_alpha.push_back(best_alpha);

        RidgeModel m = ridge_fit(Xtr, Ytr, best_alpha);
        Eigen::MatrixXd Xte = detail::take_rows(X.values, test_rows);
        Eigen::MatrixXd Yte = detail::take_rows(Y.values, test_rows);
        Eigen::MatrixXd pred = m.predict(Xte);
        Eigen::RowVectorXd train_means = Ytr.colwise().mean();
        R2 fold = r2_score(pred, Yte, train_means);
        if (!fold.defined)
            throw analysis_error("nested_cv: held-out R2 undefined (" + fold.reason + ")");
        report.outer_fold_r2.push_back(fold.value);

        for (Eigen::Index j = 0; j < Yte.cols(); ++j) {
            std::string col = size_t(j) < Y.col_names.size() ? Y.col_names[size_t(j)]
                                                             : "y" + std::to_string(j);
            auto& [res, tot] = frame_ss[col];
            res += (Yte.col(j) - pred.col(j)).squaredNorm();
            tot += (Yte.col(j).array() - train_means[j]).matrix().squaredNorm();
            for (size_t i = 0; i < test_rows.size(); ++i)
                report.item_errors.push_back(
                    {X.row_keys[size_t(test_rows[i])], col,
                     std::abs(Yte(Eigen::Index(i), j) - pred(Eigen::Index(i), j)),
                     pred(Eigen::Index(i), j), Yte(Eigen::Index(i), j)});
        }
    }
    for (const auto& [col, ss] : frame_ss)
        if (ss.second > 0) report.per_frame_r2[col] = 1.0 - ss.first / ss.second;
    report.mean_r2 = mean(report.outer_fold_r2);
    return report;
}

struct ErrorCorrelation {
    Correlation rho;
    BootstrapCI ci;
};

// Tie-aware Spearman between held-out absolute errors and a per-item
// covariate, with a paired percentile bootstrap over items.
inline ErrorCorrelation error_correlation(const std::vector<double>& errors,
                                          const std::vector<double>& covariate,
                                          int replicates = 999, uint64_t seed = 0) {
    if (errors.size() != covariate.size())
        throw analysis_error("error_correlation: length mismatch");
    ErrorCorrelation out;
    out.rho = spearman(errors, covariate);
    if (!out.rho.defined) return out;

    CounterRng root(seed, 0x65636f72);  // stream tag: "ecor"
    out.ci.replicates = replicates;
    out.ci.level = 0.95;
    out.ci.point = out.rho.value;
    std::vector<double> e(errors.size()), c(errors.size());
    for (int r = 0; r < replicates; ++r) {
        CounterRng rng = root.substream(uint64_t(r));
        for (size_t i = 0; i < errors.size(); ++i) {
            size_t j = size_t(rng.next_below(errors.size()));
            e[i] = errors[j];
            c[i] = covariate[j];
        }
        auto rho = spearman(e, c);
        out.ci.replicate_stats.push_back(rho.defined
                                             ? rho.value
                                             : std::numeric_limits<double>::quiet_NaN());
    }
    std::vector<double> defined;
    for (double v : out.ci.replicate_stats)
        if (!std::isnan(v)) defined.push_back(v);
    if (!defined.empty()) {
        std::sort(defined.begin(), defined.end());
        out.ci.lo = quantile_sorted(defined, 0.025);
        out.ci.hi = quantile_sorted(defined, 0.975);
        out.ci.point_outside = out.ci.point < out.ci.lo || out.ci.point > out.ci.hi;
    }
    return out;
}

// ---- CVReport JSON ----------------------------------------------------------

inline nlohmann::json cv_report_to_json(const CVReport& r) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& e : r.item_errors)
        items.push_back({{"key", e.row_key},
                         {"column", e.column},
                         {"abs_error", e.abs_error},
                         {"predicted", e.predicted},
                         {"truth", e.truth}});
    return {{"model", r.model},
            {"hyperparameter", r.hyperparameter},
            {"seed", r.seed},
            {"outer_fold_r2", r.outer_fold_r2},
            {"mean_r2", r.mean_r2},
            {"chosen_alpha", r.chosen_alpha},
            {"per_frame_r2", r.per_frame_r2},
            {"fold_of_row", r.fold_of_row},
            {"item_errors", std::move(items)}};
}

inline CVReport cv_report_from_json(const nlohmann::json& j) {
    CVReport r;
    r.model = j.value("model", "");
    r.hyperparameter = j.value("hyperparameter", 0.0);
    r.seed = j.value("seed", uint64_t{0});
    r.outer_fold_r2 = j.at("outer_fold_r2").get<std::vector<double>>();
    r.mean_r2 = j.at("mean_r2").get<double>();
    r.chosen_alpha = j.at("chosen_alpha").get<std::vector<double>>();
    r.per_frame_r2 = j.at("per_frame_r2").get<std::map<std::string, double>>();
    r.fold_of_row = j.value("fold_of_row", std::vector<int>{});
    for (const auto& e : j.at("item_errors"))
        r.item_errors.push_back({e.at("key").get<std::string>(),
                                 e.at("column").get<std::string>(),
                                 e.at("abs_error").get<double>(),
                                 e.at("predicted").get<double>(),
                                 e.at("truth").get<double>()});
    return r;
}

// Verb-level targets: one row per verb fully covered by the acceptability
// matrix, one column per frame.
inline FeatureMatrix acceptability_targets(const AcceptabilityMatrix& m,
                                           size_t* dropped_verbs = nullptr) {
    FeatureMatrix out;
    size_t dropped = 0;
    std::vector<int32_t> rows;
    for (int32_t v = 0; v < m.verbs().size(); ++v) {
        bool full = true;
        for (int32_t f = 0; f < m.frames().size(); ++f)
            if (!m.observed(v, f)) {
                full = false;
                break;
            }
        if (full)
            rows.push_back(v);
        else
            ++dropped;
    }
    if (rows.empty()) throw analysis_error("no verbs with full frame coverage");
    out.values.resize(Eigen::Index(rows.size()), m.frames().size());
    for (size_t i = 0; i < rows.size(); ++i) {
        out.row_keys.push_back(m.verbs().name(rows[i]));
        for (int32_t f = 0; f < m.frames().size(); ++f)
            out.values(Eigen::Index(i), f) = m.acceptability(rows[i], f);
    }
    out.col_names = m.frames().names();
    if (dropped_verbs) *dropped_verbs = dropped;
    return out;
}

// Restrict two row-keyed matrices to their common keys, in the first
// argument's order.
inline std::pair<FeatureMatrix, FeatureMatrix> align_feature_rows(const FeatureMatrix& a,
                                                                  const FeatureMatrix& b) {
    std::unordered_map<std::string, Eigen::Index> b_ix;
    for (size_t i = 0; i < b.row_keys.size(); ++i) b_ix[b.row_keys[i]] = Eigen::Index(i);
    std::vector<Eigen::Index> ra, rb;
    for (size_t i = 0; i < a.row_keys.size(); ++i) {
        auto it = b_ix.find(a.row_keys[i]);
        if (it != b_ix.end()) {
            ra.push_back(Eigen::Index(i));
            rb.push_back(it->second);
        }
    }
    if (ra.empty()) throw analysis_error("align_feature_rows: no shared keys");
    FeatureMatrix oa, ob;
    oa.col_names = a.col_names;
    ob.col_names = b.col_names;
    oa.values = detail::take_rows(a.values, ra);
    ob.values = detail::take_rows(b.values, rb);
    for (auto i : ra) oa.row_keys.push_back(a.row_keys[size_t(i)]);
    for (auto i : rb) ob.row_keys.push_back(b.row_keys[size_t(i)]);
    return {std::move(oa), std::move(ob)};
}

}  // namespace lexsel

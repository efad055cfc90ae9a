#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lexsel/common.hpp"
#include "lexsel/data.hpp"
#include "lexsel/mathx.hpp"
#include "lexsel/parallel.hpp"

namespace lexsel {

// Dirichlet-Categorical MAP: row-wise add-lambda smoothing with the
// N_F * lambda denominator, so every row is a probability vector.
struct DCParams {
    Eigen::MatrixXd theta;  // verbs x frames, rows sum to 1
    double lambda = 0.0;
};

inline DCParams dc_map(const CountsTable& counts, double lambda) {
    if (lambda < 0) throw config_error("dc_map: lambda must be nonnegative");
    const int32_t V = counts.verbs().size(), F = counts.frames().size();
    DCParams out;
    out.lambda = lambda;
    out.theta.resize(V, F);
    for (int32_t v = 0; v < V; ++v) {
        double total = double(counts.row_total(v)) + lambda * double(F);
        if (!(total > 0))
            throw analysis_error("dc_map: verb '" + counts.verbs().name(v)
                                 + "' has zero total count and lambda is 0");
        for (int32_t f = 0; f < F; ++f) out.theta(v, f) = lambda / total;
        for (const auto& [f, c] : counts.row(v)) out.theta(v, f) = (double(c) + lambda) / total;
    }
    return out;
}

// Beta-Negative-Binomial MAP per verb: NegBin(c; pi_f, r) likelihood over the
// verb's row, Beta(gamma+1, gamma+1) prior on each pi_f, improper uniform
// prior on r. pi goes through a logit, r through a softplus.
struct BNBParams {
    Eigen::MatrixXd pi;    // verbs x frames, each in (0,1)
    Eigen::VectorXd rate;  // per verb, positive
    double gamma = 0.0;
    FitDiagnostics diagnostics;  // aggregate over verbs
};

// log NegBin(c; pi, r) with the generalized binomial coefficient via lgamma.
inline double log_negbin(double c, double pi, double r) {
    return std::lgamma(c + r) - std::lgamma(r) - std::lgamma(c + 1.0) + r * std::log1p(-pi)
           + c * std::log(pi);
}

namespace detail {

// Per-verb objective over unconstrained coordinates: z = logit(pi), r =
// softplus(y). Beta(gamma+1, gamma+1) prior on each pi, flat prior on r.
inline double bnb_row_objective(const Eigen::VectorXd& c, const Eigen::VectorXd& z, double y,
                                double gamma) {
    const double r = softplus(y);
    double obj = 0.0;
    for (Eigen::Index f = 0; f < c.size(); ++f) {
        double lp = log_sigmoid(z[f]);
        double l1p = log_sigmoid(-z[f]);
        obj += std::lgamma(c[f] + r) - std::lgamma(r) - std::lgamma(c[f] + 1.0) + r * l1p
               + c[f] * lp + gamma * (lp + l1p);
    }
    return obj;
}

inline void bnb_row_gradient(const Eigen::VectorXd& c, const Eigen::VectorXd& z, double y,
                             double gamma, Eigen::VectorXd& gz, double& gy) {
    const double r = softplus(y);
    gz.resize(c.size());
    double gy_inner = 0.0;
    for (Eigen::Index f = 0; f < c.size(); ++f) {
        double pi = sigmoid(z[f]);
        gz[f] = c[f] * (1.0 - pi) - r * pi + gamma * (1.0 - 2.0 * pi);
        gy_inner += digamma(c[f] + r) - digamma(r) + log_sigmoid(-z[f]);
    }
    gy = gy_inner * sigmoid(y);
}

struct BnbRowFit {
    Eigen::VectorXd pi;
    double rate;
    bool converged;
    int iterations;
    std::vector<double> trace;
};

// Monotone gradient ascent with step halving on one verb's row. A fixed rate
// restricts the fit to the pi coordinates (used by the recovery oracle).
inline BnbRowFit bnb_fit_row(const Eigen::VectorXd& c, double gamma, const FitConfig& cfg,
                             bool keep_trace = false,
                             std::optional<double> fixed_rate = std::nullopt) {
    const Eigen::Index F = c.size();
    auto objective = [&](const Eigen::VectorXd& z, double y) {
        return bnb_row_objective(c, z, y, gamma);
    };

    double occupied = 0.0, occ_total = 0.0;
    for (Eigen::Index f = 0; f < F; ++f)
        if (c[f] > 0) {
            occupied += 1.0;
            occ_total += c[f];
        }
    double r0 = occupied > 0 ? std::max(0.1, occ_total / occupied) : 1.0;

    Eigen::VectorXd z = Eigen::VectorXd::Zero(F);  // pi = 0.5
    double y = softplus_inverse(fixed_rate.value_or(r0));
    double obj = objective(z, y);
    BnbRowFit out;
    out.converged = false;
    if (keep_trace) out.trace.push_back(obj);

    double step = 1.0;
    int stable = 0;
    int iter = 0;
    for (; iter < cfg.max_iters; ++iter) {
        Eigen::VectorXd gz;
        double gy;
        bnb_row_gradient(c, z, y, gamma, gz, gy);
        if (fixed_rate) gy = 0.0;

        double next = obj;
        bool improved = false;
        for (int h = 0; h < 60; ++h) {
            Eigen::VectorXd zc = z + step * gz;
            double yc = y + step * gy;
            double cand = objective(zc, yc);
            if (cand >= obj) {  // never decrease
                z = zc;
                y = yc;
                next = cand;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (keep_trace) out.trace.push_back(next);
        if (!improved || std::abs(next - obj) < cfg.tolerance) {
            if (++stable >= 3 || !improved) {
                obj = next;
                out.converged = true;
                ++iter;
                break;
            }
        } else {
            stable = 0;
        }
        obj = next;
        step = std::min(1.0, step * 2.0);
    }
    out.iterations = iter;
    out.pi = z.unaryExpr([](double v) { return sigmoid(v); });
    out.rate = softplus(y);
    return out;
}

}  // namespace detail

inline BNBParams bnb_map(const CountsTable& counts, double gamma, const FitConfig& cfg = {}) {
    if (gamma < 0) throw config_error("bnb_map: gamma must be nonnegative");
    const int32_t V = counts.verbs().size(), F = counts.frames().size();
    BNBParams out;
    out.gamma = gamma;
    out.pi.resize(V, F);
    out.rate.resize(V);

    auto fits = parallel_map(size_t(V), [&](size_t v) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(F);
        for (const auto& [f, n] : counts.row(int32_t(v))) c[f] = double(n);
        return detail::bnb_fit_row(c, gamma, cfg);
    });
    int unconverged = 0;
    for (int32_t v = 0; v < V; ++v) {
        out.pi.row(v) = fits[size_t(v)].pi.transpose();
        out.rate[v] = fits[size_t(v)].rate;
        out.diagnostics.iterations = std::max(out.diagnostics.iterations,
                                              fits[size_t(v)].iterations);
        if (!fits[size_t(v)].converged) ++unconverged;
    }
    out.diagnostics.converged = unconverged == 0;
    if (unconverged > 0)
        out.diagnostics.warnings.push_back(std::to_string(unconverged)
                                           + " verb fits hit the iteration cap");
    return out;
}

// PMI and G over the add-lambda smoothed joint MAP: joint cell
// (c_vf + lambda) / (N + V*F*lambda), marginals by summation.
struct InfoScores {
    Eigen::MatrixXd pmi;
    Eigen::MatrixXd g;
    double lambda = 0.0;
    bool has_neg_inf = false;  // lambda = 0 with empty cells
};

inline InfoScores info_scores(const CountsTable& counts, double lambda) {
    if (lambda < 0) throw config_error("pmi: lambda must be nonnegative");
    const int32_t V = counts.verbs().size(), F = counts.frames().size();
    InfoScores out;
    out.lambda = lambda;
    Eigen::MatrixXd joint(V, F);
    double denom = double(counts.total()) + lambda * double(V) * double(F);
    if (!(denom > 0)) throw analysis_error("pmi: empty counts table");
    for (int32_t v = 0; v < V; ++v) {
        for (int32_t f = 0; f < F; ++f) joint(v, f) = lambda / denom;
        for (const auto& [f, c] : counts.row(v)) joint(v, f) = (double(c) + lambda) / denom;
    }
    Eigen::VectorXd pv = joint.rowwise().sum();
    Eigen::VectorXd pf = joint.colwise().sum();
    out.pmi.resize(V, F);
    out.g.resize(V, F);
    for (int32_t v = 0; v < V; ++v) {
        for (int32_t f = 0; f < F; ++f) {
            double j = joint(v, f);
            if (j <= 0.0) {
                out.pmi(v, f) = -std::numeric_limits<double>::infinity();
                out.g(v, f) = 0.0;  // conditional is 0: the x*log(x) limit
                out.has_neg_inf = true;
                continue;
            }
            double score = std::log(j) - std::log(pv[v]) - std::log(pf[f]);
            out.pmi(v, f) = score;
            out.g(v, f) = (j / pv[v]) * score;
        }
    }
    return out;
}

inline InfoScores pmi(const CountsTable& counts, double lambda) {
    return info_scores(counts, lambda);
}

inline InfoScores g_stat(const CountsTable& counts, double lambda) {
    return info_scores(counts, lambda);
}

// ---- FeatureMatrix adapters ------------------------------------------------

inline FeatureMatrix features_from_matrix(const CountsTable& counts, const Eigen::MatrixXd& m,
                                          const std::string& prefix = "") {
    FeatureMatrix out;
    out.row_keys = counts.verbs().names();
    out.col_names.reserve(size_t(m.cols()));
    for (int32_t f = 0; f < int32_t(m.cols()); ++f)
        out.col_names.push_back(prefix + counts.frames().name(f));
    out.values = m;
    out.validate();
    return out;
}

// PMI with -inf sentinels becomes usable features by zero-imputation plus a
// companion indicator column per affected frame column (configurable off).
inline FeatureMatrix pmi_features(const CountsTable& counts, const InfoScores& scores,
                                  bool indicator_columns = true) {
    const Eigen::Index V = scores.pmi.rows(), F = scores.pmi.cols();
    std::vector<Eigen::Index> flagged;
    for (Eigen::Index f = 0; f < F; ++f)
        for (Eigen::Index v = 0; v < V; ++v)
            if (std::isinf(scores.pmi(v, f))) {
                flagged.push_back(f);
                break;
            }
    FeatureMatrix out;
    out.row_keys = counts.verbs().names();
    Eigen::Index extra = indicator_columns ? Eigen::Index(flagged.size()) : 0;
    out.values.resize(V, F + extra);
    for (Eigen::Index f = 0; f < F; ++f) {
        out.col_names.push_back(counts.frames().name(int32_t(f)));
        for (Eigen::Index v = 0; v < V; ++v) {
            double x = scores.pmi(v, f);
            out.values(v, f) = std::isinf(x) ? 0.0 : x;
        }
    }
    if (indicator_columns) {
        for (size_t j = 0; j < flagged.size(); ++j) {
            Eigen::Index f = flagged[j];
            out.col_names.push_back(counts.frames().name(int32_t(f)) + "__imputed");
            for (Eigen::Index v = 0; v < V; ++v)
                out.values(v, F + Eigen::Index(j)) = std::isinf(scores.pmi(v, f)) ? 1.0 : 0.0;
        }
    }
    out.validate();
    return out;
}

enum class FreqModel { DC, BNB, PMI, G };

inline const char* freq_model_name(FreqModel m) {
    switch (m) {
        case FreqModel::DC: return "dc";
        case FreqModel::BNB: return "bnb";
        case FreqModel::PMI: return "pmi";
        case FreqModel::G: return "g";
    }
    return "?";
}

inline FreqModel parse_freq_model(std::string_view s) {
    if (s == "dc") return FreqModel::DC;
    if (s == "bnb") return FreqModel::BNB;
    if (s == "pmi") return FreqModel::PMI;
    if (s == "g") return FreqModel::G;
    throw config_error("unknown frequency model '" + std::string(s) + "'");
}

struct TaggedRepresentation {
    std::string model;
    double hyperparameter;
    FeatureMatrix features;
};

// One representation per grid value.
inline std::vector<TaggedRepresentation> freq_grid(const CountsTable& counts, FreqModel model,
                                                   const std::vector<double>& values,
                                                   const FitConfig& cfg = {}) {
    if (values.empty()) throw config_error("grid: empty value set");
    std::vector<TaggedRepresentation> out;
    for (double value : values) {
        TaggedRepresentation rep;
        rep.model = freq_model_name(model);
        rep.hyperparameter = value;
        switch (model) {
            case FreqModel::DC: rep.features = features_from_matrix(counts, dc_map(counts, value).theta); break;
            case FreqModel::BNB: rep.features = features_from_matrix(counts, bnb_map(counts, value, cfg).pi); break;
            case FreqModel::PMI: rep.features = pmi_features(counts, info_scores(counts, value)); break;
            case FreqModel::G: rep.features = features_from_matrix(counts, info_scores(counts, value).g); break;
        }
        out.push_back(std::move(rep));
    }
    return out;
}

}  // namespace lexsel

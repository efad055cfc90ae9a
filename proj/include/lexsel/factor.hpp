#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "lexsel/common.hpp"
#include "lexsel/data.hpp"
#include "lexsel/mathx.hpp"
#include "lexsel/rng.hpp"
#include "lexsel/tsv.hpp"

namespace lexsel {

// Latent Dirichlet Allocation over the verb-as-document, frame-as-word view,
// fit by batch mean-field variational EM with symmetric Dirichlet(1/K) priors
// on both the verb-component and component-frame distributions.
struct LDAParams {
    Eigen::MatrixXd theta;  // verbs x K, rows on the simplex
    Eigen::MatrixXd phi;    // K x frames, rows on the simplex
    int K = 0;
    double alpha = 0.0;  // document-side concentration (1/K)
    double eta = 0.0;    // topic-side concentration (1/K)
    FitDiagnostics diagnostics;  // objective_trace holds the ELBO per EM iteration
};

inline LDAParams lda_fit(const CountsTable& counts, int K, const FitConfig& cfg = {},
                         int max_em_iters = 100, double inner_tolerance = 1e-4) {
    if (K < 1) throw config_error("lda_fit: K must be >= 1");
    const Eigen::Index D = counts.verbs().size(), W = counts.frames().size();
    LDAParams out;
    out.K = K;
    out.alpha = 1.0 / double(K);
    out.eta = 1.0 / double(K);
    if (K > W)
        out.diagnostics.warnings.push_back("K=" + std::to_string(K)
                                           + " exceeds the frame count (over-complete)");

    Eigen::MatrixXd C = counts.dense();
    Eigen::VectorXd doc_total = C.rowwise().sum();

    CounterRng rng(cfg.seed, 0x6c646166);  // stream tag: "ldaf"
    Eigen::MatrixXd lambda(K, W);
    for (int k = 0; k < K; ++k)
        for (Eigen::Index w = 0; w < W; ++w)
            lambda(k, w) = out.eta + 0.5 + 0.5 * rng.next_double();

    Eigen::MatrixXd gamma(D, K);
    Eigen::MatrixXd elog_beta(K, W);
    double prev_elbo = -std::numeric_limits<double>::infinity();

    for (int em = 0; em < max_em_iters; ++em) {
        for (int k = 0; k < K; ++k) {
            double dg_total = digamma(lambda.row(k).sum());
            for (Eigen::Index w = 0; w < W; ++w)
                elog_beta(k, w) = digamma(lambda(k, w)) - dg_total;
        }

        Eigen::MatrixXd sstats = Eigen::MatrixXd::Zero(K, W);
        double corpus_bound = 0.0;
        for (Eigen::Index d = 0; d < D; ++d) {
            Eigen::VectorXd g = Eigen::VectorXd::Constant(K, out.alpha + doc_total[d] / double(K));
            Eigen::VectorXd elog_theta(K);
            Eigen::MatrixXd phi_d(K, W);  // responsibilities for this doc's words
            for (int inner = 0; inner < 200; ++inner) {
                double dg_total = digamma(g.sum());
                for (int k = 0; k < K; ++k) elog_theta[k] = digamma(g[k]) - dg_total;
                Eigen::VectorXd g_new = Eigen::VectorXd::Constant(K, out.alpha);
                for (const auto& [w, c] : counts.row(int32_t(d))) {
                    Eigen::VectorXd logp = elog_theta + elog_beta.col(w);
                    double mx = logp.maxCoeff();
                    Eigen::VectorXd p = (logp.array() - mx).exp();
                    p /= p.sum();
                    phi_d.col(w) = p;
                    g_new += double(c) * p;
                }
                double change = (g_new - g).cwiseAbs().mean();
                g = g_new;
                if (change < inner_tolerance) break;
            }
            gamma.row(d) = g.transpose();

            // document contribution to the ELBO
            double dg_total = digamma(g.sum());
            for (int k = 0; k < K; ++k) elog_theta[k] = digamma(g[k]) - dg_total;
            for (const auto& [w, c] : counts.row(int32_t(d))) {
                for (int k = 0; k < K; ++k) {
                    double p = phi_d(k, w);
                    if (p > 1e-300)
                        corpus_bound += double(c) * p
                                        * (elog_theta[k] + elog_beta(k, w) - std::log(p));
                    sstats(k, w) += double(c) * p;
                }
            }
            corpus_bound += std::lgamma(double(K) * out.alpha) - double(K) * std::lgamma(out.alpha)
                            - std::lgamma(g.sum());
            for (int k = 0; k < K; ++k)
                corpus_bound += (out.alpha - g[k]) * elog_theta[k] + std::lgamma(g[k]);
        }

        lambda = sstats.array() + out.eta;

        // topic contribution to the ELBO (uses the updated lambda)
        double topic_bound = 0.0;
        for (int k = 0; k < K; ++k) {
            double total = lambda.row(k).sum();
            double dg_total = digamma(total);
            topic_bound += std::lgamma(double(W) * out.eta) - double(W) * std::lgamma(out.eta)
                           - std::lgamma(total);
            for (Eigen::Index w = 0; w < W; ++w) {
                double el = digamma(lambda(k, w)) - dg_total;
                topic_bound += (out.eta - lambda(k, w)) * el + std::lgamma(lambda(k, w));
            }
        }
        double elbo = corpus_bound + topic_bound;
        out.diagnostics.objective_trace.push_back(elbo);
        out.diagnostics.iterations = em + 1;
        if (std::abs(elbo - prev_elbo) < 1e-8 * (1.0 + std::abs(elbo))) {
            out.diagnostics.converged = true;
            break;
        }
        prev_elbo = elbo;
    }
    if (!out.diagnostics.objective_trace.empty())
        out.diagnostics.final_objective = out.diagnostics.objective_trace.back();

    out.theta = gamma;
    for (Eigen::Index d = 0; d < D; ++d) out.theta.row(d) /= out.theta.row(d).sum();
    out.phi = lambda;
    for (int k = 0; k < K; ++k) out.phi.row(k) /= out.phi.row(k).sum();
    return out;
}

// Logistic factor analysis with a negative-binomial likelihood:
// pi_vf = sigmoid(u_v . a_f), rates per verb, maximum likelihood by Adam.
struct LFAParams {
    Eigen::MatrixXd U;     // verbs x K
    Eigen::MatrixXd A;     // K x frames
    Eigen::VectorXd rate;  // per verb, positive
    int K = 0;
    FitDiagnostics diagnostics;

    Eigen::MatrixXd reconstruct() const {
        Eigen::MatrixXd s = U * A;
        return s.unaryExpr([](double x) { return sigmoid(x); });
    }
};

// Full objective (and optional analytic gradients) for one parameter state;
// shared by the fit, the finite-difference checks, and the nesting identity.
inline double lfa_objective_grad(const Eigen::MatrixXd& C, const Eigen::MatrixXd& U,
                                 const Eigen::MatrixXd& A, const Eigen::VectorXd& raw_rate,
                                 Eigen::MatrixXd* gU = nullptr, Eigen::MatrixXd* gA = nullptr,
                                 Eigen::VectorXd* gr = nullptr) {
    const Eigen::Index V = C.rows(), F = C.cols();
    Eigen::MatrixXd S = U * A;
    Eigen::MatrixXd Gs;
    if (gU || gA) Gs.resize(V, F);
    if (gr) gr->setZero(V);
    double obj = 0.0;
    for (Eigen::Index v = 0; v < V; ++v) {
        double r = softplus(raw_rate[v]);
        double dr = 0.0;
        for (Eigen::Index f = 0; f < F; ++f) {
            double c = C(v, f);
            obj += std::lgamma(c + r) - std::lgamma(r) - std::lgamma(c + 1.0)
                   + r * log_sigmoid(-S(v, f)) + c * log_sigmoid(S(v, f));
            if (gU || gA) Gs(v, f) = c - (c + r) * sigmoid(S(v, f));
            if (gr) dr += digamma(c + r) - digamma(r) + log_sigmoid(-S(v, f));
        }
        if (gr) (*gr)[v] = dr * sigmoid(raw_rate[v]);
    }
    if (gU) *gU = Gs * A.transpose();
    if (gA) *gA = U.transpose() * Gs;
    return obj;
}

inline double lfa_objective(const Eigen::MatrixXd& C, const Eigen::MatrixXd& U,
                            const Eigen::MatrixXd& A, const Eigen::VectorXd& raw_rate) {
    return lfa_objective_grad(C, U, A, raw_rate);
}

inline LFAParams lfa_fit(const CountsTable& counts, int K, const FitConfig& cfg = {}) {
    if (K < 1) throw config_error("lfa_fit: K must be >= 1");
    const Eigen::Index V = counts.verbs().size(), F = counts.frames().size();
    Eigen::MatrixXd C = counts.dense();

    CounterRng rng(cfg.seed, 0x6c666166);  // stream tag: "lfaf"
    LFAParams out;
    out.K = K;
    out.U.resize(V, K);
    out.A.resize(K, F);
    for (Eigen::Index i = 0; i < V; ++i)
        for (int k = 0; k < K; ++k) out.U(i, k) = 0.1 * rng.next_normal();
    for (int k = 0; k < K; ++k)
        for (Eigen::Index f = 0; f < F; ++f) out.A(k, f) = 0.1 * rng.next_normal();
    Eigen::VectorXd raw_rate(V);
    for (Eigen::Index v = 0; v < V; ++v) {
        double total = C.row(v).sum();
        double occupied = double((C.row(v).array() > 0).count());
        raw_rate[v] = softplus_inverse(occupied > 0 ? std::max(0.1, total / occupied) : 1.0);
    }

    Eigen::MatrixXd mU = Eigen::MatrixXd::Zero(V, K), vU = mU;
    Eigen::MatrixXd mA = Eigen::MatrixXd::Zero(K, F), vA = mA;
    Eigen::VectorXd mr = Eigen::VectorXd::Zero(V), vr = mr;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

    double prev = -std::numeric_limits<double>::infinity();
    int stable = 0;
    int iter = 0;
    for (; iter < cfg.max_iters; ++iter) {
        Eigen::MatrixXd gU, gA;
        Eigen::VectorXd gr;
        double obj = lfa_objective_grad(C, out.U, out.A, raw_rate, &gU, &gA, &gr);
        out.diagnostics.objective_trace.push_back(obj);
        if (std::abs(obj - prev) < cfg.tolerance) {
            if (++stable >= cfg.patience) {
                out.diagnostics.converged = true;
                break;
            }
        } else {
            stable = 0;
        }
        prev = obj;

        double c1 = 1.0 - std::pow(b1, iter + 1), c2 = 1.0 - std::pow(b2, iter + 1);
        auto adam = [&](auto& param, auto& m, auto& v2, const auto& g) {
            m = b1 * m + (1.0 - b1) * g;
            v2 = b2 * v2 + (1.0 - b2) * g.cwiseProduct(g);
            param += (cfg.learning_rate * (m / c1).array() / ((v2 / c2).array().sqrt() + eps))
                         .matrix();
        };
        adam(out.U, mU, vU, gU);
        adam(out.A, mA, vA, gA);
        adam(raw_rate, mr, vr, gr);
    }
    out.diagnostics.iterations = iter;
    out.diagnostics.final_objective =
        out.diagnostics.objective_trace.empty() ? 0.0 : out.diagnostics.objective_trace.back();
    if (!out.diagnostics.converged)
        out.diagnostics.warnings.push_back("lfa fit hit the iteration cap");
    out.rate = raw_rate.unaryExpr([](double y) { return softplus(y); });
    return out;
}

// GloVe trained on the verb-frame counts: weighted least squares on
// log-counts over the nonzero cells, weight min(1, c/c_cutoff)^alpha.
struct GloveParams {
    Eigen::MatrixXd W;        // verbs x K
    Eigen::MatrixXd Wp;       // frames x K
    Eigen::VectorXd b;        // per verb
    Eigen::VectorXd bp;       // per frame
    double c_cutoff = 10.0;
    double alpha_exp = 0.75;
    int K = 0;
    FitDiagnostics diagnostics;
};

inline double glove_weight(double count, double c_cutoff, double alpha_exp) {
    return std::pow(std::min(1.0, count / c_cutoff), alpha_exp);
}

// Weighted squared loss over the nonzero count cells for a parameter state.
inline double glove_loss(const CountsTable& counts, const GloveParams& p) {
    double loss = 0.0;
    for (int32_t v = 0; v < counts.verbs().size(); ++v) {
        for (const auto& [f, c] : counts.row(v)) {
            if (c <= 0) continue;
            double pred = p.W.row(v).dot(p.Wp.row(f)) + p.b[v] + p.bp[f];
            double resid = pred - std::log(double(c));
            loss += glove_weight(double(c), p.c_cutoff, p.alpha_exp) * resid * resid;
        }
    }
    return loss;
}

inline GloveParams glove_fit(const CountsTable& counts, int K, const FitConfig& cfg = {},
                             double c_cutoff = 10.0, double alpha_exp = 0.75) {
    if (K < 1) throw config_error("glove_fit: K must be >= 1");
    const Eigen::Index V = counts.verbs().size(), F = counts.frames().size();

    struct Cell {
        int32_t v, f;
        double logc, weight;
    };
    std::vector<Cell> cells;
    for (int32_t v = 0; v < V; ++v)
        for (const auto& [f, c] : counts.row(v))
            if (c > 0)
                cells.push_back({v, f, std::log(double(c)),
                                 glove_weight(double(c), c_cutoff, alpha_exp)});
    if (cells.empty()) throw analysis_error("glove_fit: no nonzero counts");

    CounterRng rng(cfg.seed, 0x676c6f76);  // stream tag: "glov"
    GloveParams out;
    out.K = K;
    out.c_cutoff = c_cutoff;
    out.alpha_exp = alpha_exp;
    out.W.resize(V, K);
    out.Wp.resize(F, K);
    for (Eigen::Index i = 0; i < V; ++i)
        for (int k = 0; k < K; ++k) out.W(i, k) = 0.1 * rng.next_normal();
    for (Eigen::Index i = 0; i < F; ++i)
        for (int k = 0; k < K; ++k) out.Wp(i, k) = 0.1 * rng.next_normal();
    out.b = Eigen::VectorXd::Zero(V);
    out.bp = Eigen::VectorXd::Zero(F);

    Eigen::MatrixXd mW = Eigen::MatrixXd::Zero(V, K), vW = mW;
    Eigen::MatrixXd mWp = Eigen::MatrixXd::Zero(F, K), vWp = mWp;
    Eigen::VectorXd mb = Eigen::VectorXd::Zero(V), vb = mb;
    Eigen::VectorXd mbp = Eigen::VectorXd::Zero(F), vbp = mbp;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

    double prev = std::numeric_limits<double>::infinity();
    int stable = 0;
    int iter = 0;
    for (; iter < cfg.max_iters; ++iter) {
        double loss = 0.0;
        Eigen::MatrixXd gW = Eigen::MatrixXd::Zero(V, K);
        Eigen::MatrixXd gWp = Eigen::MatrixXd::Zero(F, K);
        Eigen::VectorXd gb = Eigen::VectorXd::Zero(V);
        Eigen::VectorXd gbp = Eigen::VectorXd::Zero(F);
        for (const auto& cell : cells) {
            double pred = out.W.row(cell.v).dot(out.Wp.row(cell.f)) + out.b[cell.v]
                          + out.bp[cell.f];
            double resid = pred - cell.logc;
            loss += cell.weight * resid * resid;
            double g = 2.0 * cell.weight * resid;
            gW.row(cell.v) += g * out.Wp.row(cell.f);
            gWp.row(cell.f) += g * out.W.row(cell.v);
            gb[cell.v] += g;
            gbp[cell.f] += g;
        }
        out.diagnostics.objective_trace.push_back(loss);
        if (std::abs(prev - loss) < cfg.tolerance) {
            if (++stable >= cfg.patience) {
                out.diagnostics.converged = true;
                break;
            }
        } else {
            stable = 0;
        }
        prev = loss;

        double c1 = 1.0 - std::pow(b1, iter + 1), c2 = 1.0 - std::pow(b2, iter + 1);
        auto adam = [&](auto& param, auto& m, auto& v2, const auto& g) {
            m = b1 * m + (1.0 - b1) * g;
            v2 = b2 * v2 + (1.0 - b2) * g.cwiseProduct(g);
            param -= (cfg.learning_rate * (m / c1).array() / ((v2 / c2).array().sqrt() + eps))
                         .matrix();
        };
        adam(out.W, mW, vW, gW);
        adam(out.Wp, mWp, vWp, gWp);
        adam(out.b, mb, vb, gb);
        adam(out.bp, mbp, vbp, gbp);
    }
    out.diagnostics.iterations = iter;
    out.diagnostics.final_objective =
        out.diagnostics.objective_trace.empty() ? 0.0 : out.diagnostics.objective_trace.back();
    if (!out.diagnostics.converged)
        out.diagnostics.warnings.push_back("glove fit hit the iteration cap");
    return out;
}

enum class FeatureMode { Reconstruction, Latent };

inline FeatureMode parse_feature_mode(std::string_view s) {
    if (s == "reconstruction") return FeatureMode::Reconstruction;
    if (s == "latent") return FeatureMode::Latent;
    throw config_error("unknown feature mode '" + std::string(s) + "'");
}

inline FeatureMatrix lda_features(const LDAParams& lda, const CountsTable& counts,
                                  FeatureMode mode) {
    FeatureMatrix out;
    out.row_keys = counts.verbs().names();
    if (mode == FeatureMode::Reconstruction) {
        out.values = lda.theta * lda.phi;  // P(f|v)
        for (int32_t f = 0; f < counts.frames().size(); ++f)
            out.col_names.push_back(counts.frames().name(f));
    } else {
        out.values = lda.theta;
        for (int k = 0; k < lda.K; ++k) out.col_names.push_back("k" + std::to_string(k));
    }
    out.validate();
    return out;
}

inline FeatureMatrix lfa_features(const LFAParams& lfa, const CountsTable& counts,
                                  FeatureMode mode) {
    FeatureMatrix out;
    out.row_keys = counts.verbs().names();
    if (mode == FeatureMode::Reconstruction) {
        out.values = lfa.reconstruct();
        for (int32_t f = 0; f < counts.frames().size(); ++f)
            out.col_names.push_back(counts.frames().name(f));
    } else {
        out.values = lfa.U;
        for (int k = 0; k < lfa.K; ++k) out.col_names.push_back("k" + std::to_string(k));
    }
    out.validate();
    return out;
}

inline FeatureMatrix glove_features(const GloveParams& g, const CountsTable& counts) {
    FeatureMatrix out;
    out.row_keys = counts.verbs().names();
    out.values = g.W;
    for (int k = 0; k < g.K; ++k) out.col_names.push_back("k" + std::to_string(k));
    out.validate();
    return out;
}

// Column-wise concatenation with strict row-key alignment.
inline FeatureMatrix assemble_features(const FeatureMatrix& model_features,
                                       const std::optional<FeatureMatrix>& base = std::nullopt) {
    if (!base) return model_features;
    if (model_features.row_keys != base->row_keys)
        throw analysis_error("assemble_features: row keys are not aligned");
    FeatureMatrix out;
    out.row_keys = model_features.row_keys;
    out.col_names = model_features.col_names;
    for (const auto& n : base->col_names) out.col_names.push_back("base_" + n);
    out.values.resize(model_features.values.rows(),
                      model_features.values.cols() + base->values.cols());
    out.values << model_features.values, base->values;
    out.validate();
    return out;
}

// Externally computed per-sentence feature vectors (embeddings), keyed by
// item id. Header row optional; width must be constant.
inline FeatureMatrix load_sentence_features(const std::string& path) {
    TsvReader reader(path);
    const auto& first = reader.header();
    if (first.size() < 2) throw data_error(path + ": expected an id column plus features");

    FeatureMatrix out;
    std::vector<std::vector<double>> rows;
    std::unordered_set<std::string> seen;
    auto push_row = [&](const std::vector<std::string_view>& f, size_t line_no) {
        if (!rows.empty() && f.size() != rows[0].size() + 1)
            throw data_error(path + " line " + std::to_string(line_no) + ": ragged row");
        std::string key(trim(f[0]));
        if (!seen.insert(key).second)
            throw data_error(path + " line " + std::to_string(line_no) + ": duplicate item id '"
                             + key + "'");
        std::vector<double> row;
        row.reserve(f.size() - 1);
        for (size_t j = 1; j < f.size(); ++j) {
            auto x = parse_real(f[j]);
            if (!x || !std::isfinite(*x))
                throw data_error(path + " line " + std::to_string(line_no) + ": bad value '"
                                 + std::string(f[j]) + "'");
            row.push_back(*x);
        }
        out.row_keys.push_back(std::move(key));
        rows.push_back(std::move(row));
    };

    bool headerless = parse_real(first[1]).has_value();
    if (headerless) {
        std::vector<std::string_view> f;
        f.reserve(first.size());
        for (const auto& s : first) f.push_back(s);
        push_row(f, 1);
    } else {
        out.col_names.assign(first.begin() + 1, first.end());
    }
    std::vector<std::string_view> f;
    while (reader.next(f)) push_row(f, reader.line_no());
    if (rows.empty()) throw data_error(path + ": no data rows");

    out.values.resize(Eigen::Index(rows.size()), Eigen::Index(rows[0].size()));
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < rows[i].size(); ++j)
            out.values(Eigen::Index(i), Eigen::Index(j)) = rows[i][j];
    out.validate();
    return out;
}

}  // namespace lexsel

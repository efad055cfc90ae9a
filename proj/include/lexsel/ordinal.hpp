#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lexsel/common.hpp"
#include "lexsel/data.hpp"
#include "lexsel/mathx.hpp"
#include "lexsel/rng.hpp"
#include "lexsel/stats.hpp"

namespace lexsel {

// Cumulative-logit model: P(r <= i) = sigmoid(c_pi - a_vf), with per-item
// acceptability a_vf = beta_v + beta_f + beta_vf and per-participant strictly
// increasing cutpoints. Identified by locking the mean third cutpoint to zero.
struct OrdinalModelParams {
    Vocabulary participants, verbs, frames;
    Eigen::VectorXd beta_verb;
    Eigen::VectorXd beta_frame;
    Eigen::VectorXd beta_interaction;                 // per observed item
    std::vector<std::pair<int32_t, int32_t>> item_keys;
    Eigen::MatrixXd cutpoints;                        // participants x (scale_max-1)
    int scale_max = 7;

    std::optional<int32_t> find_item(int32_t v, int32_t f) const {
        auto it = item_index_.find(item_key(v, f));
        if (it == item_index_.end()) return std::nullopt;
        return it->second;
    }

    double acceptability(int32_t item) const {
        auto [v, f] = item_keys[size_t(item)];
        return beta_verb[v] + beta_frame[f] + beta_interaction[item];
    }

    double acceptability(int32_t v, int32_t f) const {
        auto item = find_item(v, f);
        if (!item) throw analysis_error("no observed item for this (verb, frame)");
        return acceptability(*item);
    }

    void rebuild_item_index() {
        item_index_.clear();
        for (size_t i = 0; i < item_keys.size(); ++i)
            item_index_[item_key(item_keys[i].first, item_keys[i].second)] = int32_t(i);
    }

  private:
    static uint64_t item_key(int32_t v, int32_t f) {
        return (uint64_t(uint32_t(v)) << 32) | uint32_t(f);
    }
    std::unordered_map<uint64_t, int32_t> item_index_;
};

// P(r = rating) for one participant and one observed item.
inline double response_probability(const OrdinalModelParams& params, int32_t participant,
                                   int32_t verb, int32_t frame, int rating) {
    if (rating < 1 || rating > params.scale_max)
        throw data_error("rating " + std::to_string(rating) + " outside [1,"
                         + std::to_string(params.scale_max) + "]");
    double a = params.acceptability(verb, frame);
    const auto& c = params.cutpoints;
    double lo = rating == 1 ? -std::numeric_limits<double>::infinity()
                            : c(participant, rating - 2) - a;
    double hi = rating == params.scale_max ? std::numeric_limits<double>::infinity()
                                           : c(participant, rating - 1) - a;
    return logistic_interval(lo, hi);
}

inline double cumulative_response_probability(const OrdinalModelParams& params,
                                              int32_t participant, int32_t verb, int32_t frame,
                                              int rating) {
    if (rating >= params.scale_max) return 1.0;
    double a = params.acceptability(verb, frame);
    return sigmoid(params.cutpoints(participant, rating - 1) - a);
}

// Per-participant quality on [0,1]; monotone in the participant's BLUP.
struct ParticipantQuality {
    Eigen::VectorXd score;  // aligned with a participant vocabulary
    size_t unseen_participants = 0;
    std::vector<std::string> warnings;
};

// The weighted MAP objective and its analytic gradient over the raw parameter
// vector. Raw layout: [beta_v | beta_f | beta_vf | per participant:
// (first cutpoint, 5 unconstrained gap pre-images)]. Gaps go through softplus,
// so cutpoints are strictly increasing by construction and the Exponential
// prior applies to the gaps directly.
class OrdinalObjective {
  public:
    OrdinalObjective(const RatingsTable& ratings, Eigen::VectorXd participant_weights,
                     FitConfig cfg)
        : cfg_(cfg), scale_max_(ratings.scale_max()),
          n_verbs_(ratings.verbs().size()), n_frames_(ratings.frames().size()),
          n_participants_(ratings.participants().size()),
          weights_(std::move(participant_weights)) {
        if (weights_.size() == 0) weights_ = Eigen::VectorXd::Ones(n_participants_);
        if (weights_.size() != n_participants_)
            throw analysis_error("participant weight vector length mismatch");
        // equal weights must reproduce the unweighted fit exactly, so the
        // likelihood weighting is normalized to mean one (constant vectors
        // collapse to ones outright, keeping the equality bit-exact)
        double mw = weights_.mean();
        if (!(mw > 0)) throw analysis_error("participant weights must have positive mean");
        if (weights_.maxCoeff() == weights_.minCoeff())
            weights_.setOnes();
        else
            weights_ /= mw;

        std::unordered_map<uint64_t, int32_t> item_of;
        for (const auto& r : ratings.records()) {
            uint64_t key = (uint64_t(uint32_t(r.verb)) << 32) | uint32_t(r.frame);
            auto [it, fresh] = item_of.emplace(key, int32_t(item_keys_.size()));
            if (fresh) item_keys_.emplace_back(r.verb, r.frame);
            records_.push_back({r.participant, r.verb, r.frame, it->second, r.rating});
        }
        n_items_ = int32_t(item_keys_.size());
    }

    int32_t dim() const {
        return n_verbs_ + n_frames_ + n_items_ + n_participants_ * (scale_max_ - 1);
    }

    int32_t n_items() const { return n_items_; }
    const std::vector<std::pair<int32_t, int32_t>>& item_keys() const { return item_keys_; }
    const Eigen::VectorXd& weights() const { return weights_; }

    // log-likelihood + gap prior + L2 smoothing; gradient optional
    double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
        if (grad) grad->setZero(dim());
        double obj = 0.0;

        // cutpoints per participant
        const int k = scale_max_ - 1;
        Eigen::MatrixXd cut(n_participants_, k);
        for (int32_t p = 0; p < n_participants_; ++p) {
            int32_t base = cut_base(p);
            cut(p, 0) = x[base];
            for (int j = 1; j < k; ++j) cut(p, j) = cut(p, j - 1) + softplus(x[base + j]);
        }

        // weighted log-likelihood
        for (const auto& r : records_) {
            double a = x[r.verb] + x[n_verbs_ + r.frame] + x[n_verbs_ + n_frames_ + r.item];
            double w = weights_[r.participant];
            double lo = r.rating == 1 ? -std::numeric_limits<double>::infinity()
                                      : cut(r.participant, r.rating - 2) - a;
            double hi = r.rating == scale_max_ ? std::numeric_limits<double>::infinity()
                                               : cut(r.participant, r.rating - 1) - a;
            obj += w * log_logistic_interval(lo, hi);
            if (!grad) continue;

            double prob = std::max(logistic_interval(lo, hi), 1e-300);
            double dlo = std::isinf(lo) ? 0.0 : sigmoid(lo) * sigmoid(-lo);
            double dhi = std::isinf(hi) ? 0.0 : sigmoid(hi) * sigmoid(-hi);
            double ga = w * (dlo - dhi) / prob;  // d logP / d a
            (*grad)[r.verb] += ga;
            (*grad)[n_verbs_ + r.frame] += ga;
            (*grad)[n_verbs_ + n_frames_ + r.item] += ga;
            int32_t base = cut_base(r.participant);
            // d logP / d c_j, chained through the cumulative-gap parameterization
            if (r.rating < scale_max_) add_cut_grad(x, base, r.rating - 1, w * dhi / prob, grad);
            if (r.rating > 1) add_cut_grad(x, base, r.rating - 2, -w * dlo / prob, grad);
        }

        // Exponential prior on cutpoint gaps
        const double rate = cfg_.prior_rate;
        for (int32_t p = 0; p < n_participants_; ++p) {
            int32_t base = cut_base(p);
            for (int j = 1; j < k; ++j) {
                double gap = softplus(x[base + j]);
                obj += std::log(rate) - rate * gap;
                if (grad) (*grad)[base + j] -= rate * sigmoid(x[base + j]);
            }
        }

        // L2 smoothing on the location parameters
        const double lam = cfg_.smoothing;
        for (int32_t i = 0; i < n_verbs_ + n_frames_ + n_items_; ++i) {
            obj -= lam * x[i] * x[i];
            if (grad) (*grad)[i] -= 2.0 * lam * x[i];
        }
        return obj;
    }

    // Shift all betas and first cutpoints so the mean third cutpoint is zero.
    void project_identifiability(Eigen::VectorXd& x) const {
        double m = 0.0;
        for (int32_t p = 0; p < n_participants_; ++p) {
            int32_t base = cut_base(p);
            m += x[base] + softplus(x[base + 1]) + softplus(x[base + 2]);
        }
        m /= double(n_participants_);
        for (int32_t p = 0; p < n_participants_; ++p) x[cut_base(p)] -= m;
        for (int32_t v = 0; v < n_verbs_; ++v) x[v] -= m;
    }

    Eigen::VectorXd initial_point() const {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(dim());
        CounterRng rng(cfg_.seed, 0x6f726469);  // stream tag: "ordi"
        for (int32_t i = 0; i < n_verbs_ + n_frames_ + n_items_; ++i)
            x[i] = 0.01 * rng.next_normal();
        // evenly spread cutpoints straddling zero: c = -2.5 .. 2.5
        const int k = scale_max_ - 1;
        double first = -0.5 * double(k - 1);
        for (int32_t p = 0; p < n_participants_; ++p) {
            int32_t base = cut_base(p);
            x[base] = first;
            for (int j = 1; j < k; ++j) x[base + j] = softplus_inverse(1.0);
        }
        return x;
    }

    OrdinalModelParams unpack(const Eigen::VectorXd& x, const RatingsTable& ratings) const {
        OrdinalModelParams params;
        params.participants = ratings.participants();
        params.verbs = ratings.verbs();
        params.frames = ratings.frames();
        params.scale_max = scale_max_;
        params.beta_verb = x.segment(0, n_verbs_);
        params.beta_frame = x.segment(n_verbs_, n_frames_);
        params.beta_interaction = x.segment(n_verbs_ + n_frames_, n_items_);
        params.item_keys = item_keys_;
        const int k = scale_max_ - 1;
        params.cutpoints.resize(n_participants_, k);
        for (int32_t p = 0; p < n_participants_; ++p) {
            int32_t base = cut_base(p);
            params.cutpoints(p, 0) = x[base];
            for (int j = 1; j < k; ++j)
                params.cutpoints(p, j) = params.cutpoints(p, j - 1) + softplus(x[base + j]);
        }
        // center the beta decomposition; a_vf itself is unchanged
        double mv = params.beta_verb.mean();
        double mf = params.beta_frame.mean();
        params.beta_verb.array() -= mv;
        params.beta_frame.array() -= mf;
        params.beta_interaction.array() += mv + mf;
        params.rebuild_item_index();
        return params;
    }

  private:
    struct Obs {
        int32_t participant, verb, frame, item;
        int rating;
    };

    int32_t cut_base(int32_t p) const {
        return n_verbs_ + n_frames_ + n_items_ + p * (scale_max_ - 1);
    }

    void add_cut_grad(const Eigen::VectorXd& x, int32_t base, int cut_index, double g,
                      Eigen::VectorXd* grad) const {
        // c_j = x[base] + sum_{k<=j} softplus(x[base+k]) for the 0-based cut j
        (*grad)[base] += g;
        for (int t = 1; t <= cut_index; ++t) (*grad)[base + t] += g * sigmoid(x[base + t]);
    }

    FitConfig cfg_;
    int scale_max_;
    int32_t n_verbs_, n_frames_, n_participants_, n_items_ = 0;
    Eigen::VectorXd weights_;
    std::vector<Obs> records_;
    std::vector<std::pair<int32_t, int32_t>> item_keys_;
};

struct OrdinalFit {
    OrdinalModelParams params;
    FitDiagnostics diagnostics;
};

// Full-batch adaptive-moment gradient ascent with the identifiability
// projection applied after every step.
inline OrdinalFit fit_ordinal_model(const RatingsTable& ratings,
                                    const Eigen::VectorXd& participant_weights,
                                    const FitConfig& cfg) {
    if (ratings.records().empty()) throw analysis_error("fit_ordinal_model: no ratings");

    OrdinalObjective problem(ratings, participant_weights, cfg);
    Eigen::VectorXd x = problem.initial_point();
    problem.project_identifiability(x);

    Eigen::VectorXd grad(problem.dim());
    Eigen::VectorXd m = Eigen::VectorXd::Zero(problem.dim());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(problem.dim());
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

    FitDiagnostics diag;
    double prev = -std::numeric_limits<double>::infinity();
    int stable = 0;
    int iter = 0;
    for (; iter < cfg.max_iters; ++iter) {
        double obj = problem.evaluate(x, &grad);
        diag.objective_trace.push_back(obj);
        if (std::abs(obj - prev) < cfg.tolerance) {
            if (++stable >= cfg.patience) {
                diag.converged = true;
                break;
            }
        } else {
            stable = 0;
        }
        prev = obj;
        m = b1 * m + (1.0 - b1) * grad;
        v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
        double c1 = 1.0 - std::pow(b1, iter + 1);
        double c2 = 1.0 - std::pow(b2, iter + 1);
        x += (cfg.learning_rate * (m / c1).array() / ((v / c2).array().sqrt() + eps)).matrix();
        problem.project_identifiability(x);
    }
    diag.iterations = iter;
    diag.final_objective = problem.evaluate(x, &grad);
    diag.gradient_norm = grad.norm();
    if (!diag.converged)
        diag.warnings.push_back("ordinal fit did not converge within "
                                + std::to_string(cfg.max_iters) + " iterations (|grad|="
                                + format_real(diag.gradient_norm) + ")");

    OrdinalFit out{problem.unpack(x, ratings), std::move(diag)};
    return out;
}

inline OrdinalFit fit_ordinal_model(const RatingsTable& ratings, const FitConfig& cfg) {
    return fit_ordinal_model(ratings, Eigen::VectorXd(), cfg);
}

// Acceptability = fitted a_vf; variability = quality-weighted arithmetic mean
// of P(r = observed) over the item's responses, on the probability scale.
inline AcceptabilityMatrix acceptability_matrix(const OrdinalModelParams& params,
                                                const RatingsTable& ratings,
                                                const Eigen::VectorXd& participant_weights,
                                                bool weight_variability = true) {
    Eigen::VectorXd w = participant_weights;
    if (w.size() == 0) w = Eigen::VectorXd::Ones(ratings.participants().size());
    if (w.size() != ratings.participants().size())
        throw analysis_error("participant weight vector length mismatch");
    if (!weight_variability) w = Eigen::VectorXd::Ones(ratings.participants().size());

    AcceptabilityMatrix m(ratings.verbs(), ratings.frames());
    Eigen::MatrixXd num = Eigen::MatrixXd::Zero(ratings.verbs().size(), ratings.frames().size());
    Eigen::MatrixXd den = Eigen::MatrixXd::Zero(ratings.verbs().size(), ratings.frames().size());
    for (const auto& r : ratings.records()) {
        double p = response_probability(params, r.participant, r.verb, r.frame, r.rating);
        num(r.verb, r.frame) += w[r.participant] * p;
        den(r.verb, r.frame) += w[r.participant];
    }
    for (int32_t v = 0; v < ratings.verbs().size(); ++v)
        for (int32_t f = 0; f < ratings.frames().size(); ++f)
            if (den(v, f) > 0) m.set(v, f, params.acceptability(v, f), num(v, f) / den(v, f));
    return m;
}

struct NormalizerComparison {
    Correlation vs_mean_rating;
    Correlation vs_zscored_rating;
};

// Pearson correlations of the ordinal-model acceptabilities against the two
// simpler normalizers (mean raw rating; mean per-participant z-score).
inline NormalizerComparison compare_normalizers(const OrdinalModelParams& params,
                                                const RatingsTable& ratings) {
    const auto items = ratings.items();
    std::unordered_map<uint64_t, size_t> item_ix;
    auto key = [](int32_t v, int32_t f) {
        return (uint64_t(uint32_t(v)) << 32) | uint32_t(f);
    };
    for (size_t i = 0; i < items.size(); ++i)
        item_ix[key(items[i].first, items[i].second)] = i;

    // per-participant mean/sd for z-scoring
    int32_t nP = ratings.participants().size();
    Eigen::VectorXd psum = Eigen::VectorXd::Zero(nP), psq = Eigen::VectorXd::Zero(nP),
                    pn = Eigen::VectorXd::Zero(nP);
    for (const auto& r : ratings.records()) {
        psum[r.participant] += r.rating;
        psq[r.participant] += double(r.rating) * r.rating;
        pn[r.participant] += 1.0;
    }

    std::vector<double> mean_rating(items.size(), 0.0), zscored(items.size(), 0.0),
        count(items.size(), 0.0), model(items.size(), 0.0);
    for (const auto& r : ratings.records()) {
        size_t i = item_ix[key(r.verb, r.frame)];
        double pm = psum[r.participant] / pn[r.participant];
        double var = psq[r.participant] / pn[r.participant] - pm * pm;
        double sd = var > 1e-12 ? std::sqrt(var) : 0.0;
        mean_rating[i] += r.rating;
        zscored[i] += sd > 0 ? (r.rating - pm) / sd : 0.0;
        count[i] += 1.0;
    }
    for (size_t i = 0; i < items.size(); ++i) {
        mean_rating[i] /= count[i];
        zscored[i] /= count[i];
        model[i] = params.acceptability(items[i].first, items[i].second);
    }
    NormalizerComparison out;
    out.vs_mean_rating = pearson(model, mean_rating);
    out.vs_zscored_rating = pearson(model, zscored);
    return out;
}

namespace detail {

// Profiled ML deviance for the two-way crossed random-intercept model used by
// the quality scores, as a function of the two variance ratios.
struct CrossedLmm {
    Eigen::VectorXd y;
    std::vector<int32_t> g1, g2;  // participant, list index per row
    int32_t n1 = 0, n2 = 0;

    struct Solution {
        double deviance;
        double mu;
        double sigma2;
        Eigen::VectorXd u1, u2;
    };

    Solution solve(double log_gamma1, double log_gamma2) const {
        double gamma1 = std::exp(log_gamma1), gamma2 = std::exp(log_gamma2);
        const int32_t n = int32_t(y.size());
        const int32_t q = n1 + n2;
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(q + 1, q + 1);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(q + 1);
        // order: [intercept | u1 | u2]
        A(0, 0) = double(n);
        for (int32_t i = 0; i < n; ++i) {
            int32_t a = 1 + g1[size_t(i)];
            int32_t b = 1 + n1 + g2[size_t(i)];
            A(0, a) += 1;
            A(a, 0) += 1;
            A(0, b) += 1;
            A(b, 0) += 1;
            A(a, a) += 1;
            A(b, b) += 1;
            A(a, b) += 1;
            A(b, a) += 1;
            rhs[0] += y[i];
            rhs[a] += y[i];
            rhs[b] += y[i];
        }
        for (int32_t j = 0; j < n1; ++j) A(1 + j, 1 + j) += 1.0 / gamma1;
        for (int32_t j = 0; j < n2; ++j) A(1 + n1 + j, 1 + n1 + j) += 1.0 / gamma2;

        Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
        Eigen::VectorXd sol = ldlt.solve(rhs);
        double rss = y.squaredNorm() - sol.dot(rhs);  // generalized penalized RSS
        rss = std::max(rss, 1e-12);
        double sigma2 = rss / double(n);

        // log|I + Z D Z'| = log|D| + log|D^{-1} + Z'Z|
        Eigen::MatrixXd B = A.bottomRightCorner(q, q);
        Eigen::LDLT<Eigen::MatrixXd> ldltB(B);
        double logdetB = ldltB.vectorD().array().max(1e-300).log().sum();
        double logdet = double(n1) * log_gamma1 + double(n2) * log_gamma2 + logdetB;

        Solution s;
        s.sigma2 = sigma2;
        s.mu = sol[0];
        s.u1 = sol.segment(1, n1);
        s.u2 = sol.segment(1 + n1, n2);
        s.deviance = double(n) * std::log(2.0 * M_PI * sigma2) + logdet + double(n);
        return s;
    }
};

// Tiny Nelder-Mead for the 2-d profiled deviance.
template <typename F>
inline std::pair<Eigen::Vector2d, double> nelder_mead_2d(F f, Eigen::Vector2d start,
                                                         int max_evals = 300) {
    std::vector<Eigen::Vector2d> pts{start, start + Eigen::Vector2d(0.8, 0.0),
                                     start + Eigen::Vector2d(0.0, 0.8)};
    std::vector<double> vals{f(pts[0]), f(pts[1]), f(pts[2])};
    int evals = 3;
    while (evals < max_evals) {
        std::vector<size_t> ord{0, 1, 2};
        std::sort(ord.begin(), ord.end(), [&](size_t a, size_t b) { return vals[a] < vals[b]; });
        Eigen::Vector2d best = pts[ord[0]], mid = pts[ord[1]], worst = pts[ord[2]];
        if (std::abs(vals[ord[2]] - vals[ord[0]]) < 1e-10) break;
        Eigen::Vector2d centroid = 0.5 * (best + mid);
        Eigen::Vector2d refl = centroid + (centroid - worst);
        double fr = f(refl);
        ++evals;
        if (fr < vals[ord[0]]) {
            Eigen::Vector2d exp_pt = centroid + 2.0 * (centroid - worst);
            double fe = f(exp_pt);
            ++evals;
            if (fe < fr) {
                pts[ord[2]] = exp_pt;
                vals[ord[2]] = fe;
            } else {
                pts[ord[2]] = refl;
                vals[ord[2]] = fr;
            }
        } else if (fr < vals[ord[1]]) {
            pts[ord[2]] = refl;
            vals[ord[2]] = fr;
        } else {
            Eigen::Vector2d contr = centroid + 0.5 * (worst - centroid);
            double fc = f(contr);
            ++evals;
            if (fc < vals[ord[2]]) {
                pts[ord[2]] = contr;
                vals[ord[2]] = fc;
            } else {  // shrink toward best
                pts[ord[1]] = best + 0.5 * (pts[ord[1]] - best);
                pts[ord[2]] = best + 0.5 * (pts[ord[2]] - best);
                vals[ord[1]] = f(pts[ord[1]]);
                vals[ord[2]] = f(pts[ord[2]]);
                evals += 2;
            }
        }
    }
    size_t best = vals[0] <= vals[1] && vals[0] <= vals[2] ? 0 : (vals[1] <= vals[2] ? 1 : 2);
    return {pts[best], vals[best]};
}

}  // namespace detail

// Quality scores from pairwise agreement: ML fit of a linear mixed model with
// crossed random intercepts for participant and list (each pair contributes
// one row per member), participant BLUPs z-scored and squashed through the
// normal CDF. Participants with no usable pair get 0.5 with a warning.
inline ParticipantQuality participant_quality(const std::vector<PairAgreement>& pairs,
                                              const Vocabulary& participants,
                                              const Vocabulary& lists) {
    ParticipantQuality out;
    out.score = Eigen::VectorXd::Constant(participants.size(), 0.5);

    detail::CrossedLmm lmm;
    std::vector<double> ys;
    std::vector<int32_t> seen_participant(size_t(participants.size()), -1);
    std::vector<int32_t> seen_list(size_t(lists.size()), -1);
    std::vector<int32_t> participant_back;
    for (const auto& pa : pairs) {
        if (!pa.rho.defined) continue;
        for (int32_t p : {pa.p1, pa.p2}) {
            if (seen_participant[size_t(p)] < 0) {
                seen_participant[size_t(p)] = lmm.n1++;
                participant_back.push_back(p);
            }
            if (seen_list[size_t(pa.list)] < 0) seen_list[size_t(pa.list)] = lmm.n2++;
            ys.push_back(pa.rho.value);
            lmm.g1.push_back(seen_participant[size_t(p)]);
            lmm.g2.push_back(seen_list[size_t(pa.list)]);
        }
    }
    if (ys.empty()) {
        out.warnings.push_back("no defined pairwise correlations; all scores 0.5");
        out.unseen_participants = size_t(participants.size());
        return out;
    }
    lmm.y = Eigen::Map<Eigen::VectorXd>(ys.data(), Eigen::Index(ys.size()));

    // degenerate response (all correlations equal): BLUPs are zero
    double var = (lmm.y.array() - lmm.y.mean()).square().sum() / double(ys.size());
    Eigen::VectorXd blups = Eigen::VectorXd::Zero(lmm.n1);
    if (var > 1e-14) {
        auto objective = [&](const Eigen::Vector2d& lg) {
            Eigen::Vector2d clamped = lg.cwiseMax(-12.0).cwiseMin(6.0);
            return lmm.solve(clamped[0], clamped[1]).deviance;
        };
        auto [best, dev] = detail::nelder_mead_2d(objective, Eigen::Vector2d(-0.7, -0.7));
        (void)dev;
        Eigen::Vector2d clamped = best.cwiseMax(-12.0).cwiseMin(6.0);
        blups = lmm.solve(clamped[0], clamped[1]).u1;
    }

    double bm = blups.mean();
    double bsd = std::sqrt((blups.array() - bm).square().sum() / double(blups.size()));
    for (int32_t j = 0; j < lmm.n1; ++j) {
        double z = bsd > 1e-12 ? (blups[j] - bm) / bsd : 0.0;
        out.score[participant_back[size_t(j)]] = normal_cdf(z);
    }
    for (int32_t p = 0; p < participants.size(); ++p) {
        if (seen_participant[size_t(p)] < 0) {
            ++out.unseen_participants;
            out.warnings.push_back("participant '" + participants.name(p)
                                   + "' appears in no pair; score 0.5");
        }
    }
    return out;
}

}  // namespace lexsel

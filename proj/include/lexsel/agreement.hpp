#pragma once

#include <algorithm>
#include <map>
#include <unordered_map>
#include <vector>

#include "lexsel/data.hpp"
#include "lexsel/ordinal.hpp"
#include "lexsel/parallel.hpp"
#include "lexsel/rng.hpp"
#include "lexsel/stats.hpp"

namespace lexsel {

// One row per unordered participant pair per shared list, Spearman over the
// items both members rated. Degenerate pairs are emitted with undefined rho.
inline std::vector<PairAgreement> pairwise_list_agreement(const RatingsTable& ratings) {
    // list -> participant -> (item -> rating)
    std::map<int32_t, std::map<int32_t, std::unordered_map<uint64_t, int>>> by_list;
    auto key = [](int32_t v, int32_t f) {
        return (uint64_t(uint32_t(v)) << 32) | uint32_t(f);
    };
    for (const auto& r : ratings.records())
        by_list[r.list][r.participant][key(r.verb, r.frame)] = r.rating;

    std::vector<PairAgreement> out;
    for (const auto& [list, members] : by_list) {
        std::vector<int32_t> ids;
        for (const auto& [p, _] : members) ids.push_back(p);
        for (size_t i = 0; i < ids.size(); ++i) {
            for (size_t j = i + 1; j < ids.size(); ++j) {
                const auto& ri = members.at(ids[i]);
                const auto& rj = members.at(ids[j]);
                std::vector<double> xi, xj;
                for (const auto& [item, rating] : ri) {
                    auto it = rj.find(item);
                    if (it != rj.end()) {
                        xi.push_back(double(rating));
                        xj.push_back(double(it->second));
                    }
                }
                PairAgreement pa;
                pa.list = list;
                pa.p1 = ids[i];
                pa.p2 = ids[j];
                pa.n_items = int(xi.size());
                if (xi.size() >= 2) {
                    pa.rho = spearman(xi, xj);
                } else {
                    pa.rho.reason = "fewer than two shared items";
                }
                out.push_back(std::move(pa));
            }
        }
    }
    return out;
}

// Expected-agreement simulation: per replicate, draw one rating for every
// (participant, item) cell of the design from the fitted model, compute all
// per-list pairwise Spearman correlations, and keep the mean. The summary CI
// is the percentile interval over the replicate means.
inline BootstrapCI simulate_expected_agreement(const OrdinalModelParams& params,
                                               const RatingsTable& design, int n_sims,
                                               uint64_t seed, bool all_pairs = false) {
    struct Cell {
        int32_t row;             // index into the flat draw vector
        int32_t participant_ix;  // params-side participant
        int32_t item_ix;         // params-side item
    };
    // map design ids into params ids by name
    std::vector<int32_t> pmap(size_t(design.participants().size()));
    for (int32_t p = 0; p < design.participants().size(); ++p) {
        auto found = params.participants.find(design.participants().name(p));
        if (!found)
            throw data_error("design references unknown participant '"
                             + design.participants().name(p) + "'");
        pmap[size_t(p)] = *found;
    }
    struct DesignRow {
        int32_t list, participant_design, participant_model, item_model;
    };
    std::vector<DesignRow> rows;
    rows.reserve(design.records().size());
    for (const auto& r : design.records()) {
        auto v = params.verbs.find(design.verbs().name(r.verb));
        auto f = params.frames.find(design.frames().name(r.frame));
        if (!v || !f)
            throw data_error("design references unknown item ("
                             + design.verbs().name(r.verb) + ", "
                             + design.frames().name(r.frame) + ")");
        auto item = params.find_item(*v, *f);
        if (!item)
            throw data_error("model does not cover design item ("
                             + design.verbs().name(r.verb) + ", "
                             + design.frames().name(r.frame) + ")");
        rows.push_back({r.list, r.participant, pmap[size_t(r.participant)], *item});
    }

    // per-row categorical over the scale, from the fitted cutpoints
    const int k = params.scale_max;
    std::vector<std::vector<double>> probs(rows.size(), std::vector<double>(size_t(k)));
    for (size_t i = 0; i < rows.size(); ++i) {
        double a = params.acceptability(rows[i].item_model);
        for (int r = 1; r <= k; ++r) {
            double lo = r == 1 ? -std::numeric_limits<double>::infinity()
                               : params.cutpoints(rows[i].participant_model, r - 2) - a;
            double hi = r == k ? std::numeric_limits<double>::infinity()
                               : params.cutpoints(rows[i].participant_model, r - 1) - a;
            probs[i][size_t(r - 1)] = logistic_interval(lo, hi);
        }
    }

    // pair layout: (participant-row indices per list) or global when all_pairs
    std::map<int32_t, std::map<int32_t, std::vector<size_t>>> grouping;  // list -> p -> rows
    for (size_t i = 0; i < rows.size(); ++i) {
        int32_t group = all_pairs ? 0 : rows[i].list;
        grouping[group][rows[i].participant_design].push_back(i);
    }

    CounterRng root(seed, 0x73696d75);  // stream tag: "simu"
    auto one_sim = [&](size_t s) {
        CounterRng rng = root.substream(s);
        std::vector<int> draw(rows.size());
        for (size_t i = 0; i < rows.size(); ++i)
            draw[i] = 1 + rng.next_categorical(probs[i]);
        std::vector<double> rhos;
        for (const auto& [group, members] : grouping) {
            std::vector<int32_t> ids;
            for (const auto& [p, _] : members) ids.push_back(p);
            for (size_t a = 0; a < ids.size(); ++a) {
                for (size_t b = a + 1; b < ids.size(); ++b) {
                    // align on shared items
                    std::unordered_map<int32_t, double> first;
                    for (size_t i : members.at(ids[a])) first[rows[i].item_model] = draw[i];
                    std::vector<double> xa, xb;
                    for (size_t i : members.at(ids[b])) {
                        auto it = first.find(rows[i].item_model);
                        if (it != first.end()) {
                            xa.push_back(it->second);
                            xb.push_back(double(draw[i]));
                        }
                    }
                    if (xa.size() < 2) continue;
                    auto c = spearman(xa, xb);
                    if (c.defined) rhos.push_back(c.value);
                }
            }
        }
        return rhos.empty() ? std::numeric_limits<double>::quiet_NaN() : mean(rhos);
    };

    std::vector<double> sim_means = parallel_map(size_t(n_sims), one_sim);
    BootstrapCI out;
    out.replicates = n_sims;
    out.level = 0.95;
    out.replicate_stats = sim_means;
    std::vector<double> defined;
    for (double m : sim_means)
        if (!std::isnan(m)) defined.push_back(m);
    if (defined.empty()) throw analysis_error("simulation produced no defined agreements");
    out.point = mean(defined);
    std::sort(defined.begin(), defined.end());
    out.lo = quantile_sorted(defined, 0.025);
    out.hi = quantile_sorted(defined, 0.975);
    out.point_outside = out.point < out.lo || out.point > out.hi;
    return out;
}

}  // namespace lexsel

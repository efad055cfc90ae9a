#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "lexsel/common.hpp"
#include "lexsel/rng.hpp"
#include "lexsel/tsv.hpp"

namespace lexsel {

enum class MorphTag { Past, PassiveParticiple, Bare };

inline MorphTag parse_morph_tag(std::string_view s) {
    if (s == "PAST") return MorphTag::Past;
    if (s == "PASSIVE-PARTICIPLE") return MorphTag::PassiveParticiple;
    if (s == "BARE") return MorphTag::Bare;
    throw data_error("unknown morphology tag '" + std::string(s) + "'");
}

inline const char* morph_tag_name(MorphTag t) {
    switch (t) {
        case MorphTag::Past: return "PAST";
        case MorphTag::PassiveParticiple: return "PASSIVE-PARTICIPLE";
        case MorphTag::Bare: return "BARE";
    }
    return "?";
}

// A surface string with one verb slot: "___ed" for inflected tags, "___" for
// the bare slifting slot.
struct FrameTemplate {
    std::string frame_id;
    std::string text;
    MorphTag morph;
};

inline void validate_template(const FrameTemplate& t) {
    const std::string slot = "___";
    size_t first = t.text.find(slot);
    if (first == std::string::npos)
        throw data_error("template '" + t.frame_id + "' has no verb slot");
    if (t.text.find(slot, first + 1) != std::string::npos)
        throw data_error("template '" + t.frame_id + "' has more than one verb slot");
    bool inflected = t.text.compare(first, 5, "___ed") == 0;
    if (t.morph == MorphTag::Bare && inflected)
        throw data_error("template '" + t.frame_id + "' tagged BARE but slot is inflected");
    if (t.morph != MorphTag::Bare && !inflected)
        throw data_error("template '" + t.frame_id + "' tagged " + morph_tag_name(t.morph)
                         + " but slot is bare");
}

class TemplateSet {
  public:
    void add(FrameTemplate t) {
        validate_template(t);
        if (index_.count(t.frame_id))
            throw data_error("duplicate frame_id '" + t.frame_id + "'");
        index_[t.frame_id] = frames_.size();
        frames_.push_back(std::move(t));
    }

    const FrameTemplate& at(std::string_view frame_id) const {
        auto it = index_.find(std::string(frame_id));
        if (it == index_.end())
            throw data_error("unknown frame_id '" + std::string(frame_id) + "'");
        return frames_[it->second];
    }

    const std::vector<FrameTemplate>& frames() const { return frames_; }
    size_t size() const { return frames_.size(); }

  private:
    std::vector<FrameTemplate> frames_;
    std::unordered_map<std::string, size_t> index_;
};

inline TemplateSet load_templates(const std::string& path) {
    TsvReader reader(path);
    size_t iid = reader.column("frame_id");
    size_t itpl = reader.column("template");
    size_t itag = reader.column("morph_tag");
    TemplateSet set;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        if (f.size() <= std::max({iid, itpl, itag}))
            throw data_error(path + " line " + std::to_string(reader.line_no())
                             + ": too few columns");
        set.add({std::string(trim(f[iid])), std::string(f[itpl]),
                 parse_morph_tag(trim(f[itag]))});
    }
    if (set.size() == 0) throw data_error(path + ": no templates");
    return set;
}

struct VerbEntry {
    std::string lemma;
    std::string past;                // empty = derive by rule
    std::string passive_participle;  // empty = fall back to past
};

inline bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

// Regular "-ed" with e-drop, consonant-y -> -ied, and final-consonant doubling
// for single-vowel-group CVC stems. Multiword lemmas inflect the head (first
// token). Anything stress-sensitive belongs in the irregular lexicon.
inline std::string regular_past(const std::string& lemma) {
    size_t space = lemma.find(' ');
    if (space != std::string::npos)
        return regular_past(lemma.substr(0, space)) + lemma.substr(space);
    if (lemma.empty()) throw data_error("empty lemma");
    std::string w = lemma;
    size_t n = w.size();
    if (w.back() == 'e') return w + "d";
    if (n >= 2 && w.back() == 'y' && !is_vowel(w[n - 2]))
        return w.substr(0, n - 1) + "ied";
    int vowel_groups = 0;
    bool in_group = false;
    for (char c : w) {
        bool v = is_vowel(c);
        if (v && !in_group) ++vowel_groups;
        in_group = v;
    }
    bool cvc = n >= 2 && !is_vowel(w[n - 1]) && w[n - 1] != 'w' && w[n - 1] != 'x'
               && w[n - 1] != 'y' && is_vowel(w[n - 2]) && (n == 2 || !is_vowel(w[n - 3]));
    if (vowel_groups == 1 && cvc) return w + w.back() + "ed";
    return w + "ed";
}

inline std::string verb_form(const VerbEntry& verb, MorphTag tag, bool derive_by_rule = true) {
    switch (tag) {
        case MorphTag::Bare: return verb.lemma;
        case MorphTag::Past:
            if (!verb.past.empty()) return verb.past;
            if (!derive_by_rule)
                throw data_error("no past form for '" + verb.lemma
                                 + "' and rule derivation is disabled");
            return regular_past(verb.lemma);
        case MorphTag::PassiveParticiple:
            if (!verb.passive_participle.empty()) return verb.passive_participle;
            return verb_form(verb, MorphTag::Past, derive_by_rule);
    }
    throw data_error("unknown morphology tag");
}

class VerbLexicon {
  public:
    void add(VerbEntry e) {
        if (e.lemma.empty()) throw data_error("empty lemma");
        auto it = index_.find(e.lemma);
        if (it != index_.end()) {
            const VerbEntry& old = entries_[it->second];
            if (old.past != e.past || old.passive_participle != e.passive_participle)
                throw data_error("conflicting forms for lemma '" + e.lemma + "'");
            return;  // identical duplicate rows are harmless
        }
        index_[e.lemma] = entries_.size();
        entries_.push_back(std::move(e));
    }

    const VerbEntry& at(std::string_view lemma) const {
        auto it = index_.find(std::string(lemma));
        if (it == index_.end())
            throw data_error("unknown verb '" + std::string(lemma) + "'");
        return entries_[it->second];
    }

    bool contains(std::string_view lemma) const { return index_.count(std::string(lemma)) > 0; }
    const std::vector<VerbEntry>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }

    // Overlay overrides (irregular forms) onto lemmas already present, and add
    // any override lemmas not yet listed.
    void apply_overrides(const VerbLexicon& overrides) {
        for (const auto& o : overrides.entries()) {
            auto it = index_.find(o.lemma);
            if (it == index_.end()) {
                index_[o.lemma] = entries_.size();
                entries_.push_back(o);
            } else {
                if (!o.past.empty()) entries_[it->second].past = o.past;
                if (!o.passive_participle.empty())
                    entries_[it->second].passive_participle = o.passive_participle;
            }
        }
    }

  private:
    std::vector<VerbEntry> entries_;
    std::unordered_map<std::string, size_t> index_;
};

inline VerbLexicon load_verb_lexicon(const std::string& path) {
    TsvReader reader(path);
    size_t il = reader.column("lemma");
    std::optional<size_t> ip, ipp;
    if (reader.has_column("past")) ip = reader.column("past");
    if (reader.has_column("passive_participle")) ipp = reader.column("passive_participle");
    VerbLexicon lex;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        if (f.size() <= il)
            throw data_error(path + " line " + std::to_string(reader.line_no())
                             + ": too few columns");
        VerbEntry e;
        e.lemma = std::string(trim(f[il]));
        if (ip && f.size() > *ip) e.past = std::string(trim(f[*ip]));
        if (ipp && f.size() > *ipp) e.passive_participle = std::string(trim(f[*ipp]));
        lex.add(std::move(e));
    }
    if (lex.size() == 0) throw data_error(path + ": no verbs");
    return lex;
}

struct SentenceItem {
    std::string verb;      // lemma
    std::string frame_id;
    std::string sentence;

    bool operator==(const SentenceItem&) const = default;
};

inline SentenceItem instantiate(const VerbEntry& verb, const FrameTemplate& frame,
                                bool derive_by_rule = true) {
    std::string form = verb_form(verb, frame.morph, derive_by_rule);
    const std::string marker = frame.morph == MorphTag::Bare ? "___" : "___ed";
    size_t pos = frame.text.find(marker);
    if (pos == std::string::npos)
        throw data_error("template '" + frame.frame_id + "' missing slot marker");
    std::string sentence = frame.text;
    sentence.replace(pos, marker.size(), form);
    if (sentence.find("___") != std::string::npos)
        throw data_error("template '" + frame.frame_id + "' left an unexpanded placeholder");
    return {verb.lemma, frame.frame_id, std::move(sentence)};
}

// Full cartesian product, verb-major, template order within verb.
inline std::vector<SentenceItem> generate_all(const std::vector<VerbEntry>& verbs,
                                              const TemplateSet& templates,
                                              bool derive_by_rule = true) {
    if (verbs.empty() || templates.size() == 0)
        throw analysis_error("generate_all: empty verb or frame set");
    std::vector<SentenceItem> items;
    items.reserve(verbs.size() * templates.size());
    for (const auto& v : verbs)
        for (const auto& t : templates.frames()) items.push_back(instantiate(v, t, derive_by_rule));
    return items;
}

enum class DesignKind { Pilot, Mega, SingleVerb };

inline const char* design_kind_name(DesignKind k) {
    switch (k) {
        case DesignKind::Pilot: return "pilot";
        case DesignKind::Mega: return "mega";
        case DesignKind::SingleVerb: return "single-verb";
    }
    return "?";
}

inline DesignKind parse_design_kind(std::string_view s) {
    if (s == "pilot") return DesignKind::Pilot;
    if (s == "mega") return DesignKind::Mega;
    if (s == "single-verb") return DesignKind::SingleVerb;
    throw config_error("unknown design kind '" + std::string(s) + "'");
}

struct ListDesign {
    DesignKind kind;
    std::vector<std::vector<SentenceItem>> lists;
};

inline nlohmann::json design_to_json(const ListDesign& d) {
    nlohmann::json lists = nlohmann::json::array();
    for (const auto& list : d.lists) {
        nlohmann::json jl = nlohmann::json::array();
        for (const auto& item : list)
            jl.push_back({{"verb", item.verb},
                          {"frame_id", item.frame_id},
                          {"sentence", item.sentence}});
        lists.push_back(std::move(jl));
    }
    return {{"design", design_kind_name(d.kind)}, {"lists", std::move(lists)}};
}

inline ListDesign design_from_json(const nlohmann::json& j) {
    ListDesign d;
    d.kind = parse_design_kind(j.at("design").get<std::string>());
    for (const auto& jl : j.at("lists")) {
        std::vector<SentenceItem> list;
        for (const auto& ji : jl)
            list.push_back({ji.at("verb").get<std::string>(),
                            ji.at("frame_id").get<std::string>(),
                            ji.at("sentence").get<std::string>()});
        d.lists.push_back(std::move(list));
    }
    return d;
}

namespace detail {

// Index bookkeeping for design construction: verbs/frames in first-appearance
// order over an item product.
struct ProductIndex {
    std::vector<std::string> verbs, frames;
    std::unordered_map<std::string, size_t> verb_ix, frame_ix;
    // item lookup by (verb, frame)
    std::vector<std::vector<const SentenceItem*>> grid;

    explicit ProductIndex(const std::vector<SentenceItem>& items) {
        for (const auto& it : items) {
            if (!verb_ix.count(it.verb)) {
                verb_ix[it.verb] = verbs.size();
                verbs.push_back(it.verb);
            }
            if (!frame_ix.count(it.frame_id)) {
                frame_ix[it.frame_id] = frames.size();
                frames.push_back(it.frame_id);
            }
        }
        grid.assign(verbs.size(), std::vector<const SentenceItem*>(frames.size(), nullptr));
        for (const auto& it : items) {
            auto& slot = grid[verb_ix[it.verb]][frame_ix[it.frame_id]];
            if (slot) throw analysis_error("duplicate item (" + it.verb + ", " + it.frame_id + ")");
            slot = &it;
        }
        for (size_t v = 0; v < verbs.size(); ++v)
            for (size_t f = 0; f < frames.size(); ++f)
                if (!grid[v][f])
                    throw analysis_error("items do not form a complete product: missing ("
                                         + verbs[v] + ", " + frames[f] + ")");
    }
};

}  // namespace detail

// Pilot design: lists of size 2V over F/2 lists; every verb exactly twice per
// list (distinct frames), every frame 1-2 times per list, every item used
// exactly once. Randomized construction with min-conflicts repair; restarts
// draw fresh substreams, so the result is a pure function of (items, seed).
inline ListDesign build_pilot_lists(const std::vector<SentenceItem>& items, uint64_t seed,
                                    int max_restarts = 64, int max_repair_steps = 20000) {
    detail::ProductIndex ix(items);
    const size_t V = ix.verbs.size(), F = ix.frames.size();
    if (F % 2 != 0)
        throw analysis_error("pilot design needs an even frame count, got " + std::to_string(F));
    if (F > 2 * V || V > F)
        throw analysis_error("pilot design infeasible: need |F| <= 2|V| and |V| <= |F| for the "
                             "1-2 frame bound, got |V|="
                             + std::to_string(V) + " |F|=" + std::to_string(F));
    const size_t L = F / 2;  // lists; each holds 2V items

    CounterRng root(seed, 0x70696c6f);  // stream tag: "pilo"
    // assignment[v][slot] = frame at slot; slots 2l, 2l+1 belong to list l
    std::vector<std::vector<size_t>> assignment(V);
    std::vector<std::vector<int>> count;  // count[l][f]

    auto cell_energy = [](int c) { return (c > 2 ? c - 2 : 0) + (c < 1 ? 1 - c : 0); };

    for (int attempt = 0; attempt < max_restarts; ++attempt) {
        CounterRng rng = root.substream(uint64_t(attempt));
        for (size_t v = 0; v < V; ++v) {
            assignment[v].resize(F);
            std::iota(assignment[v].begin(), assignment[v].end(), size_t{0});
            rng.shuffle(assignment[v]);
        }
        count.assign(L, std::vector<int>(F, 0));
        long energy = 0;
        for (size_t v = 0; v < V; ++v)
            for (size_t s = 0; s < F; ++s) ++count[s / 2][assignment[v][s]];
        for (size_t l = 0; l < L; ++l)
            for (size_t f = 0; f < F; ++f) energy += cell_energy(count[l][f]);

        int consecutive_stuck = 0;
        for (int step = 0; step < max_repair_steps && energy > 0; ++step) {
            // pick a random violating cell
            std::vector<std::pair<size_t, size_t>> violations;
            for (size_t l = 0; l < L; ++l)
                for (size_t f = 0; f < F; ++f)
                    if (cell_energy(count[l][f]) > 0) violations.emplace_back(l, f);
            auto [vl, vf] = violations[rng.next_below(violations.size())];

            // move set: swap one verb's frames between list vl and another list
            long best_delta = 1;
            size_t best_v = 0, best_s1 = 0, best_s2 = 0;
            bool excess = count[vl][vf] > 2;
            for (size_t v = 0; v < V; ++v) {
                for (size_t s1 = 2 * vl; s1 <= 2 * vl + 1; ++s1) {
                    size_t f1 = assignment[v][s1];
                    if (excess && f1 != vf) continue;
                    size_t partner = s1 ^ 1;
                    for (size_t s2 = 0; s2 < F; ++s2) {
                        size_t l2 = s2 / 2;
                        if (l2 == vl) continue;
                        size_t f2 = assignment[v][s2];
                        if (!excess && f2 != vf) continue;
                        // distinct frames per verb per list after swap
                        if (assignment[v][partner] == f2) continue;
                        if (assignment[v][s2 ^ 1] == f1) continue;
                        long delta = 0;
                        delta -= cell_energy(count[vl][f1]) + cell_energy(count[vl][f2])
                                 + cell_energy(count[l2][f1]) + cell_energy(count[l2][f2]);
                        delta += cell_energy(count[vl][f1] - 1) + cell_energy(count[vl][f2] + 1)
                                 + cell_energy(count[l2][f1] + 1) + cell_energy(count[l2][f2] - 1);
                        if (delta < best_delta) {
                            best_delta = delta;
                            best_v = v;
                            best_s1 = s1;
                            best_s2 = s2;
                        }
                    }
                }
            }
            if (best_delta > 0) {  // no improving or sideways move for this cell
                if (++consecutive_stuck > 50) break;
                continue;
            }
            consecutive_stuck = 0;
            size_t f1 = assignment[best_v][best_s1];
            size_t f2 = assignment[best_v][best_s2];
            size_t l2 = best_s2 / 2;
            --count[vl][f1];
            ++count[vl][f2];
            ++count[l2][f1];
            --count[l2][f2];
            std::swap(assignment[best_v][best_s1], assignment[best_v][best_s2]);
            energy += best_delta;
        }
        if (energy == 0) {
            ListDesign design{DesignKind::Pilot, {}};
            design.lists.resize(L);
            for (size_t l = 0; l < L; ++l) {
                for (size_t v = 0; v < V; ++v)
                    for (size_t s = 2 * l; s <= 2 * l + 1; ++s)
                        design.lists[l].push_back(*ix.grid[v][assignment[v][s]]);
                // presentation order within the list
                CounterRng lrng = root.substream(0x1000 + l);
                lrng.shuffle(design.lists[l]);
            }
            return design;
        }
    }
    throw analysis_error("pilot design construction failed: could not satisfy the 1-2 "
                         "frames-per-list bound after "
                         + std::to_string(max_restarts) + " restarts");
}

// Mega design: shifted-block construction. Verbs are partitioned into blocks
// of |F|; list (block b, shift s) pairs block verb i with frame (i+s) mod F.
// Covers each (verb, frame) pair exactly once with per-list uniqueness.
inline ListDesign build_mega_lists(const std::vector<VerbEntry>& verbs,
                                   const TemplateSet& templates, uint64_t seed,
                                   bool derive_by_rule = true) {
    const size_t V = verbs.size(), F = templates.size();
    if (V == 0 || F == 0) throw analysis_error("mega design: empty verb or frame set");
    if (V % F != 0)
        throw analysis_error("mega design: verb count " + std::to_string(V)
                             + " is not a multiple of frame count " + std::to_string(F)
                             + "; pad the lexicon with " + std::to_string(F - V % F)
                             + " explicit padding verbs or drop " + std::to_string(V % F));
    CounterRng root(seed, 0x6d656761);  // stream tag: "mega"
    ListDesign design{DesignKind::Mega, {}};
    const size_t blocks = V / F;
    design.lists.reserve(V);
    for (size_t b = 0; b < blocks; ++b) {
        for (size_t s = 0; s < F; ++s) {
            std::vector<SentenceItem> list;
            list.reserve(F);
            for (size_t i = 0; i < F; ++i)
                list.push_back(instantiate(verbs[b * F + i],
                                           templates.frames()[(i + s) % F], derive_by_rule));
            CounterRng lrng = root.substream(b * F + s);
            lrng.shuffle(list);
            design.lists.push_back(std::move(list));
        }
    }
    return design;
}

inline ListDesign build_single_verb_list(const VerbEntry& verb, const TemplateSet& templates,
                                         uint64_t seed, bool derive_by_rule = true) {
    if (templates.size() == 0) throw analysis_error("single-verb design: empty frame set");
    ListDesign design{DesignKind::SingleVerb, {}};
    std::vector<SentenceItem> list;
    list.reserve(templates.size());
    for (const auto& t : templates.frames()) list.push_back(instantiate(verb, t, derive_by_rule));
    CounterRng rng(seed, 0x31766572);  // stream tag: "1ver"
    rng.shuffle(list);
    design.lists.push_back(std::move(list));
    return design;
}

// Counting checker for the stated design constraints; throws analysis_error
// naming the first violated constraint.
inline void validate_design(const ListDesign& d) {
    std::unordered_map<std::string, int> verb_count, frame_count;
    std::unordered_map<std::string, int> pair_count;
    for (size_t l = 0; l < d.lists.size(); ++l) {
        verb_count.clear();
        frame_count.clear();
        for (const auto& item : d.lists[l]) {
            ++verb_count[item.verb];
            ++frame_count[item.frame_id];
            ++pair_count[item.verb + "\t" + item.frame_id];
        }
        switch (d.kind) {
            case DesignKind::Pilot:
                for (const auto& [v, c] : verb_count)
                    if (c != 2)
                        throw analysis_error("pilot: verb '" + v + "' appears "
                                             + std::to_string(c) + " times in list "
                                             + std::to_string(l) + " (want exactly 2)");
                for (const auto& [f, c] : frame_count)
                    if (c < 1 || c > 2)
                        throw analysis_error("pilot: frame '" + f + "' appears "
                                             + std::to_string(c) + " times in list "
                                             + std::to_string(l) + " (want 1-2)");
                break;
            case DesignKind::Mega:
                for (const auto& [v, c] : verb_count)
                    if (c != 1)
                        throw analysis_error("mega: verb '" + v + "' appears "
                                             + std::to_string(c) + " times in list "
                                             + std::to_string(l) + " (want exactly 1)");
                for (const auto& [f, c] : frame_count)
                    if (c != 1)
                        throw analysis_error("mega: frame '" + f + "' appears "
                                             + std::to_string(c) + " times in list "
                                             + std::to_string(l) + " (want exactly 1)");
                break;
            case DesignKind::SingleVerb:
                if (verb_count.size() != 1)
                    throw analysis_error("single-verb: list has "
                                         + std::to_string(verb_count.size()) + " verbs");
                for (const auto& [f, c] : frame_count)
                    if (c != 1)
                        throw analysis_error("single-verb: frame '" + f + "' repeated");
                break;
        }
    }
    for (const auto& [key, c] : pair_count)
        if (c != 1)
            throw analysis_error("pair '" + key + "' covered " + std::to_string(c)
                                 + " times across lists (want exactly once)");
}

}  // namespace lexsel

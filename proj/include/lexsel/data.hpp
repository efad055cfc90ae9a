#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lexsel/common.hpp"
#include "lexsel/tsv.hpp"

namespace lexsel {

// Interned string ids, ordered by first appearance. Numeric indices are an
// internal detail; joins across modules go through the names.
class Vocabulary {
  public:
    int32_t intern(std::string_view name) {
        auto it = index_.find(std::string(name));
        if (it != index_.end()) return it->second;
        int32_t id = int32_t(items_.size());
        items_.emplace_back(name);
        index_.emplace(items_.back(), id);
        return id;
    }

    std::optional<int32_t> find(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    const std::string& name(int32_t id) const { return items_.at(size_t(id)); }
    int32_t size() const { return int32_t(items_.size()); }
    const std::vector<std::string>& names() const { return items_; }

  private:
    std::vector<std::string> items_;
    std::unordered_map<std::string, int32_t> index_;
};

struct RatingRecord {
    int32_t participant;
    int32_t list;
    int32_t verb;
    int32_t frame;
    int rating;  // 1..scale_max
};

class RatingsTable {
  public:
    explicit RatingsTable(int scale_max = 7) : scale_max_(scale_max) {}

    int scale_max() const { return scale_max_; }
    const Vocabulary& participants() const { return participants_; }
    const Vocabulary& lists() const { return lists_; }
    const Vocabulary& verbs() const { return verbs_; }
    const Vocabulary& frames() const { return frames_; }
    const std::vector<RatingRecord>& records() const { return records_; }

    void add(std::string_view participant, std::string_view list, std::string_view verb,
             std::string_view frame, int rating) {
        if (rating < 1 || rating > scale_max_)
            throw data_error("rating " + std::to_string(rating) + " outside [1,"
                             + std::to_string(scale_max_) + "]");
        RatingRecord rec{participants_.intern(participant), lists_.intern(list),
                         verbs_.intern(verb), frames_.intern(frame), rating};
        std::array<int32_t, 4> key{rec.participant, rec.list, rec.verb, rec.frame};
        if (!seen_.insert(key).second)
            throw data_error("duplicate (participant, list, verb, frame) record");
        records_.push_back(rec);
    }

    // Distinct (verb, frame) items in first-appearance order.
    std::vector<std::pair<int32_t, int32_t>> items() const {
        std::vector<std::pair<int32_t, int32_t>> out;
        std::unordered_set<uint64_t> seen;
        for (const auto& r : records_) {
            uint64_t key = (uint64_t(uint32_t(r.verb)) << 32) | uint32_t(r.frame);
            if (seen.insert(key).second) out.emplace_back(r.verb, r.frame);
        }
        return out;
    }

  private:
    struct KeyHash {
        size_t operator()(const std::array<int32_t, 4>& k) const {
            uint64_t h = 0xcbf29ce484222325ull;
            for (int32_t part : k) {
                h ^= uint64_t(uint32_t(part));
                h *= 0x100000001b3ull;
            }
            return size_t(h);
        }
    };

    int scale_max_;
    Vocabulary participants_, lists_, verbs_, frames_;
    std::vector<RatingRecord> records_;
    std::unordered_set<std::array<int32_t, 4>, KeyHash> seen_;
};

struct ColumnMap {
    std::string participant = "participant";
    std::string list = "list";
    std::string verb = "verb";
    std::string frame = "frame";
    std::string response = "response";
};

struct IngestReport {
    size_t rows_read = 0;
    size_t rows_dropped = 0;   // lenient mode only
    size_t verbs_dropped = 0;  // counts: zero-total verbs
};

inline RatingsTable load_ratings(const std::string& path, const ColumnMap& columns = {},
                                 bool lenient = false, IngestReport* report = nullptr,
                                 int scale_max = 7) {
    TsvReader reader(path);
    size_t ip = reader.column(columns.participant);
    size_t il = reader.column(columns.list);
    size_t iv = reader.column(columns.verb);
    size_t ifr = reader.column(columns.frame);
    size_t ir = reader.column(columns.response);
    size_t needed = std::max({ip, il, iv, ifr, ir});

    RatingsTable table(scale_max);
    IngestReport local;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        ++local.rows_read;
        try {
            if (f.size() <= needed)
                throw data_error("too few columns");
            auto rating = parse_int(f[ir]);
            if (!rating) throw data_error("non-integer rating '" + std::string(f[ir]) + "'");
            if (*rating < 1 || *rating > scale_max)
                throw data_error("rating " + std::to_string(*rating) + " outside [1,"
                                 + std::to_string(scale_max) + "]");
            table.add(trim(f[ip]), trim(f[il]), trim(f[iv]), trim(f[ifr]), int(*rating));
        } catch (const data_error& e) {
            if (!lenient)
                throw data_error(path + " line " + std::to_string(reader.line_no()) + ": "
                                 + e.what());
            ++local.rows_dropped;
        }
    }
    if (report) *report = local;
    return table;
}

inline void save_ratings(const RatingsTable& table, const std::string& path) {
    TsvWriter w(path);
    w.row({"participant", "list", "verb", "frame", "response"});
    for (const auto& r : table.records())
        w.row({table.participants().name(r.participant), table.lists().name(r.list),
               table.verbs().name(r.verb), table.frames().name(r.frame),
               std::to_string(r.rating)});
}

// Sparse verb x frame nonnegative counts; absent cells are zero. Every
// retained verb row has a positive total.
class CountsTable {
  public:
    const Vocabulary& verbs() const { return verbs_; }
    const Vocabulary& frames() const { return frames_; }

    void add(std::string_view verb, std::string_view frame, int64_t count) {
        if (count < 0) throw data_error("negative count");
        int32_t v = verbs_.intern(verb);
        int32_t f = frames_.intern(frame);
        if (size_t(v) >= rows_.size()) rows_.resize(size_t(v) + 1);
        for (auto& [fid, c] : rows_[size_t(v)]) {
            if (fid == f) {
                c += count;
                return;
            }
        }
        rows_[size_t(v)].emplace_back(f, count);
    }

    int64_t at(int32_t verb, int32_t frame) const {
        if (size_t(verb) >= rows_.size()) return 0;
        for (const auto& [fid, c] : rows_[size_t(verb)])
            if (fid == frame) return c;
        return 0;
    }

    const std::vector<std::pair<int32_t, int64_t>>& row(int32_t verb) const {
        static const std::vector<std::pair<int32_t, int64_t>> empty;
        return size_t(verb) < rows_.size() ? rows_[size_t(verb)] : empty;
    }

    int64_t row_total(int32_t verb) const {
        int64_t total = 0;
        for (const auto& [f, c] : row(verb)) total += c;
        return total;
    }

    int64_t total() const {
        int64_t t = 0;
        for (int32_t v = 0; v < verbs_.size(); ++v) t += row_total(v);
        return t;
    }

    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(verbs_.size(), frames_.size());
        for (int32_t v = 0; v < verbs_.size(); ++v)
            for (const auto& [f, c] : row(v)) m(v, f) = double(c);
        return m;
    }

    // New table with only the verbs accepted by keep(), original order.
    CountsTable filter_verbs(const std::vector<bool>& keep) const {
        CountsTable out;
        for (int32_t f = 0; f < frames_.size(); ++f) out.frames_.intern(frames_.name(f));
        for (int32_t v = 0; v < verbs_.size(); ++v) {
            if (!keep[size_t(v)]) continue;
            int32_t nv = out.verbs_.intern(verbs_.name(v));
            if (size_t(nv) >= out.rows_.size()) out.rows_.resize(size_t(nv) + 1);
            out.rows_[size_t(nv)] = rows_[size_t(v)];
        }
        out.rows_.resize(size_t(out.verbs_.size()));
        return out;
    }

    // Merge verbs under new names (e.g. lemma folding); counts add up.
    CountsTable remap_verbs(const std::unordered_map<std::string, std::string>& map) const {
        CountsTable out;
        for (int32_t v = 0; v < verbs_.size(); ++v) {
            const std::string& name = verbs_.name(v);
            auto it = map.find(name);
            const std::string& target = it == map.end() ? name : it->second;
            for (const auto& [f, c] : row(v)) out.add(target, frames_.name(f), c);
        }
        return out;
    }

  private:
    Vocabulary verbs_, frames_;
    std::vector<std::vector<std::pair<int32_t, int64_t>>> rows_;
};

inline CountsTable load_counts(const std::string& path, bool lenient = false,
                               IngestReport* report = nullptr) {
    TsvReader reader(path);
    size_t iv = reader.column("verb");
    size_t ifr = reader.column("frame");
    size_t ic = reader.column("count");
    size_t needed = std::max({iv, ifr, ic});

    CountsTable raw;
    IngestReport local;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        ++local.rows_read;
        try {
            if (f.size() <= needed) throw data_error("too few columns");
            auto count = parse_int(f[ic]);
            if (!count) throw data_error("non-integer count '" + std::string(f[ic]) + "'");
            if (*count < 0) throw data_error("negative count " + std::to_string(*count));
            raw.add(trim(f[iv]), trim(f[ifr]), *count);
        } catch (const data_error& e) {
            if (!lenient)
                throw data_error(path + " line " + std::to_string(reader.line_no()) + ": "
                                 + e.what());
            ++local.rows_dropped;
        }
    }

    std::vector<bool> keep(size_t(raw.verbs().size()));
    for (int32_t v = 0; v < raw.verbs().size(); ++v) {
        keep[size_t(v)] = raw.row_total(v) > 0;
        if (!keep[size_t(v)]) ++local.verbs_dropped;
    }
    if (report) *report = local;
    if (local.verbs_dropped == 0) return raw;
    return raw.filter_verbs(keep);
}

inline void save_counts(const CountsTable& counts, const std::string& path) {
    TsvWriter w(path);
    w.row({"verb", "frame", "count"});
    for (int32_t v = 0; v < counts.verbs().size(); ++v)
        for (const auto& [f, c] : counts.row(v))
            w.row({counts.verbs().name(v), counts.frames().name(f), std::to_string(c)});
}

// verb -> replacement map used to reconcile count vocabularies with judgment
// vocabularies (case folding, lemma merging) without guessing a policy.
inline std::unordered_map<std::string, std::string> load_verb_map(const std::string& path) {
    TsvReader reader(path);
    size_t ifrom = reader.column("from");
    size_t ito = reader.column("to");
    std::unordered_map<std::string, std::string> map;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        if (f.size() <= std::max(ifrom, ito))
            throw data_error(path + " line " + std::to_string(reader.line_no())
                             + ": too few columns");
        map[std::string(trim(f[ifrom]))] = std::string(trim(f[ito]));
    }
    return map;
}

// Normalized acceptability plus per-item variability, dense over the observed
// (verb, frame) cells.
class AcceptabilityMatrix {
  public:
    AcceptabilityMatrix() = default;
    AcceptabilityMatrix(Vocabulary verbs, Vocabulary frames)
        : verbs_(std::move(verbs)), frames_(std::move(frames)),
          acceptability_(Eigen::MatrixXd::Zero(verbs_.size(), frames_.size())),
          variability_(Eigen::MatrixXd::Zero(verbs_.size(), frames_.size())),
          observed_(Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(
              verbs_.size(), frames_.size(), false)) {}

    const Vocabulary& verbs() const { return verbs_; }
    const Vocabulary& frames() const { return frames_; }

    void set(int32_t v, int32_t f, double acceptability, double variability) {
        acceptability_(v, f) = acceptability;
        variability_(v, f) = variability;
        observed_(v, f) = true;
    }

    bool observed(int32_t v, int32_t f) const { return observed_(v, f); }
    double acceptability(int32_t v, int32_t f) const { return acceptability_(v, f); }
    double variability(int32_t v, int32_t f) const { return variability_(v, f); }
    const Eigen::MatrixXd& acceptability() const { return acceptability_; }
    const Eigen::MatrixXd& variability() const { return variability_; }

    size_t observed_count() const {
        size_t n = 0;
        for (Eigen::Index v = 0; v < observed_.rows(); ++v)
            for (Eigen::Index f = 0; f < observed_.cols(); ++f)
                if (observed_(v, f)) ++n;
        return n;
    }

    AcceptabilityMatrix filter_verbs(const std::vector<bool>& keep) const {
        Vocabulary verbs;
        for (int32_t v = 0; v < verbs_.size(); ++v)
            if (keep[size_t(v)]) verbs.intern(verbs_.name(v));
        AcceptabilityMatrix out(verbs, frames_);
        for (int32_t v = 0; v < verbs_.size(); ++v) {
            if (!keep[size_t(v)]) continue;
            int32_t nv = *out.verbs_.find(verbs_.name(v));
            for (int32_t f = 0; f < frames_.size(); ++f)
                if (observed_(v, f)) out.set(nv, f, acceptability_(v, f), variability_(v, f));
        }
        return out;
    }

  private:
    Vocabulary verbs_, frames_;
    Eigen::MatrixXd acceptability_, variability_;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> observed_;
};

inline void save_acceptability(const AcceptabilityMatrix& m, const std::string& path) {
    TsvWriter w(path);
    w.row({"verb", "frame", "acceptability", "variability"});
    for (int32_t v = 0; v < m.verbs().size(); ++v)
        for (int32_t f = 0; f < m.frames().size(); ++f)
            if (m.observed(v, f))
                w.row({m.verbs().name(v), m.frames().name(f), format_real(m.acceptability(v, f)),
                       format_real(m.variability(v, f))});
}

inline AcceptabilityMatrix load_acceptability(const std::string& path) {
    TsvReader reader(path);
    size_t iv = reader.column("verb");
    size_t ifr = reader.column("frame");
    size_t ia = reader.column("acceptability");
    size_t ivar = reader.column("variability");
    size_t needed = std::max({iv, ifr, ia, ivar});

    struct Cell {
        std::string verb, frame;
        double a, var;
    };
    std::vector<Cell> cells;
    Vocabulary verbs, frames;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        if (f.size() <= needed)
            throw data_error(path + " line " + std::to_string(reader.line_no())
                             + ": too few columns");
        auto a = parse_real(f[ia]);
        auto var = parse_real(f[ivar]);
        if (!a || !var)
            throw data_error(path + " line " + std::to_string(reader.line_no())
                             + ": non-numeric value");
        if (!std::isfinite(*a) || !std::isfinite(*var))
            throw data_error(path + " line " + std::to_string(reader.line_no())
                             + ": non-finite value");
        cells.push_back({std::string(trim(f[iv])), std::string(trim(f[ifr])), *a, *var});
        verbs.intern(cells.back().verb);
        frames.intern(cells.back().frame);
    }
    AcceptabilityMatrix m(verbs, frames);
    for (const auto& c : cells) m.set(*m.verbs().find(c.verb), *m.frames().find(c.frame), c.a, c.var);
    return m;
}

// Row-keyed dense real features used as regression inputs.
struct FeatureMatrix {
    std::vector<std::string> row_keys;
    std::vector<std::string> col_names;  // optional; defaults to x0..x{d-1} on save
    Eigen::MatrixXd values;

    Eigen::Index dim() const { return values.cols(); }
    Eigen::Index rows() const { return values.rows(); }

    std::optional<Eigen::Index> find_row(std::string_view key) const {
        for (size_t i = 0; i < row_keys.size(); ++i)
            if (row_keys[i] == key) return Eigen::Index(i);
        return std::nullopt;
    }

    void validate() const {
        if (Eigen::Index(row_keys.size()) != values.rows())
            throw analysis_error("feature matrix: row key count mismatch");
        if (!values.allFinite()) throw analysis_error("feature matrix: non-finite entries");
    }
};

inline void save_features(const FeatureMatrix& m, const std::string& path) {
    TsvWriter w(path);
    std::vector<std::string> header{"key"};
    for (Eigen::Index j = 0; j < m.dim(); ++j)
        header.push_back(size_t(j) < m.col_names.size() ? m.col_names[size_t(j)]
                                                        : "x" + std::to_string(j));
    w.row(header);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<std::string> row{m.row_keys[size_t(i)]};
        for (Eigen::Index j = 0; j < m.dim(); ++j) row.push_back(format_real(m.values(i, j)));
        w.row(row);
    }
}

inline FeatureMatrix load_features(const std::string& path) {
    TsvReader reader(path);
    const auto& header = reader.header();
    if (header.empty() || header[0] != "key")
        throw data_error(path + ": expected first column 'key'");
    FeatureMatrix m;
    m.col_names.assign(header.begin() + 1, header.end());
    std::vector<std::vector<double>> rows;
    std::unordered_set<std::string> seen;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        if (f.size() != header.size())
            throw data_error(path + " line " + std::to_string(reader.line_no())
                             + ": ragged row");
        std::string key(trim(f[0]));
        if (!seen.insert(key).second)
            throw data_error(path + " line " + std::to_string(reader.line_no())
                             + ": duplicate key '" + key + "'");
        m.row_keys.push_back(std::move(key));
        std::vector<double> row;
        for (size_t j = 1; j < f.size(); ++j) {
            auto x = parse_real(f[j]);
            if (!x || !std::isfinite(*x))
                throw data_error(path + " line " + std::to_string(reader.line_no())
                                 + ": bad value '" + std::string(f[j]) + "'");
            row.push_back(*x);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw data_error(path + ": no data rows");
    m.values.resize(Eigen::Index(rows.size()), Eigen::Index(rows[0].size()));
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < rows[i].size(); ++j)
            m.values(Eigen::Index(i), Eigen::Index(j)) = rows[i][j];
    m.validate();
    return m;
}

struct AlignResult {
    CountsTable counts;
    AcceptabilityMatrix acceptability;
    size_t dropped_counts_verbs = 0;
    size_t dropped_acceptability_verbs = 0;
};

// Restrict both tables to the shared verb set, keeping each side's original
// verb order. Idempotent.
inline AlignResult align_vocabularies(const CountsTable& counts,
                                      const AcceptabilityMatrix& accept) {
    if (counts.verbs().size() == 0 || accept.verbs().size() == 0)
        throw analysis_error("align_vocabularies: empty input");
    std::vector<bool> keep_counts(size_t(counts.verbs().size()));
    std::vector<bool> keep_accept(size_t(accept.verbs().size()));
    size_t shared = 0;
    for (int32_t v = 0; v < counts.verbs().size(); ++v) {
        keep_counts[size_t(v)] = accept.verbs().find(counts.verbs().name(v)).has_value();
        if (keep_counts[size_t(v)]) ++shared;
    }
    if (shared == 0) throw analysis_error("align_vocabularies: no shared verbs");
    for (int32_t v = 0; v < accept.verbs().size(); ++v)
        keep_accept[size_t(v)] = counts.verbs().find(accept.verbs().name(v)).has_value();

    AlignResult out{counts.filter_verbs(keep_counts), accept.filter_verbs(keep_accept), 0, 0};
    out.dropped_counts_verbs = size_t(counts.verbs().size()) - shared;
    out.dropped_acceptability_verbs = size_t(accept.verbs().size()) - shared;
    return out;
}

}  // namespace lexsel

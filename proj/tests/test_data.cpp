#include <catch2/catch_amalgamated.hpp>

#include "lexsel/data.hpp"
#include "helpers.hpp"

using namespace lexsel;
using testutil::TempDir;
using testutil::write_file;

namespace {

const char* kGoodRatings =
    "participant\tlist\tverb\tframe\tresponse\n"
    "p1\tl1\tthink\tNP Ved that S\t7\n"
    "p1\tl1\twant\tNP Ved that S\t2\n"
    "p2\tl1\tthink\tNP Ved that S\t6\n";

}  // namespace

TEST_CASE("load_ratings accepts a well-formed table") {
    TempDir tmp("ratings");
    auto path = write_file(tmp.file("r.tsv"), kGoodRatings);
    RatingsTable t = load_ratings(path);
    REQUIRE(t.records().size() == 3);
    REQUIRE(t.participants().size() == 2);
    REQUIRE(t.verbs().size() == 2);
    REQUIRE(t.scale_max() == 7);
    // first-appearance order
    REQUIRE(t.verbs().name(0) == "think");
    REQUIRE(t.verbs().name(1) == "want");
}

TEST_CASE("load_ratings rejects an out-of-scale rating with the line number") {
    TempDir tmp("ratings");
    auto path = write_file(tmp.file("r.tsv"),
                           "participant\tlist\tverb\tframe\tresponse\n"
                           "p1\tl1\tthink\tNP Ved\t8\n");
    try {
        load_ratings(path);
        FAIL("expected data_error");
    } catch (const data_error& e) {
        REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
        REQUIRE(std::string(e.what()).find("8") != std::string::npos);
    }
}

TEST_CASE("load_ratings rejects duplicate (participant, list, verb, frame) rows") {
    TempDir tmp("ratings");
    auto path = write_file(tmp.file("r.tsv"),
                           "participant\tlist\tverb\tframe\tresponse\n"
                           "p1\tl1\tthink\tNP Ved\t5\n"
                           "p1\tl1\tthink\tNP Ved\t6\n");
    REQUIRE_THROWS_AS(load_ratings(path), data_error);
}

TEST_CASE("lenient mode drops bad rows instead of failing") {
    TempDir tmp("ratings");
    auto path = write_file(tmp.file("r.tsv"),
                           "participant\tlist\tverb\tframe\tresponse\n"
                           "p1\tl1\tthink\tNP Ved\t5\n"
                           "p1\tl1\twant\tNP Ved\t9\n"
                           "p1\tl1\tsee\tNP Ved\tx\n");
    IngestReport report;
    RatingsTable t = load_ratings(path, {}, true, &report);
    REQUIRE(t.records().size() == 1);
    REQUIRE(report.rows_dropped == 2);
}

TEST_CASE("load_ratings with a remapped column name") {
    TempDir tmp("ratings");
    auto path = write_file(tmp.file("r.tsv"),
                           "worker\tlist\tverb\tframe\trating\n"
                           "p1\tl1\tthink\tNP Ved\t5\n");
    ColumnMap map;
    map.participant = "worker";
    map.response = "rating";
    REQUIRE(load_ratings(path, map).records().size() == 1);
    REQUIRE_THROWS_AS(load_ratings(path), config_error);  // default names absent
}

TEST_CASE("ratings round-trip exactly") {
    TempDir tmp("ratings");
    auto path = write_file(tmp.file("r.tsv"), kGoodRatings);
    RatingsTable t = load_ratings(path);
    save_ratings(t, tmp.file("r2.tsv"));
    RatingsTable t2 = load_ratings(tmp.file("r2.tsv"));
    REQUIRE(t2.records().size() == t.records().size());
    for (size_t i = 0; i < t.records().size(); ++i) {
        REQUIRE(t.records()[i].rating == t2.records()[i].rating);
        REQUIRE(t.verbs().name(t.records()[i].verb)
                == t2.verbs().name(t2.records()[i].verb));
    }
}

TEST_CASE("load_counts basics") {
    TempDir tmp("counts");
    SECTION("single cell") {
        auto path = write_file(tmp.file("c.tsv"), "verb\tframe\tcount\nthink\tthat_S\t120\n");
        CountsTable c = load_counts(path);
        REQUIRE(c.verbs().size() == 1);
        REQUIRE(c.frames().size() == 1);
        REQUIRE(c.at(0, 0) == 120);
        REQUIRE(c.total() == 120);
    }
    SECTION("negative count is a data error") {
        auto path = write_file(tmp.file("c.tsv"), "verb\tframe\tcount\nthink\tthat_S\t-1\n");
        REQUIRE_THROWS_AS(load_counts(path), data_error);
    }
    SECTION("non-integer count is a data error") {
        auto path = write_file(tmp.file("c.tsv"), "verb\tframe\tcount\nthink\tthat_S\t1.5\n");
        REQUIRE_THROWS_AS(load_counts(path), data_error);
    }
    SECTION("zero-total verbs are dropped with a warning count") {
        auto path = write_file(tmp.file("c.tsv"),
                               "verb\tframe\tcount\n"
                               "think\tthat_S\t120\n"
                               "mumble\tthat_S\t0\n"
                               "mumble\tNP\t0\n");
        IngestReport report;
        CountsTable c = load_counts(path, false, &report);
        REQUIRE(c.verbs().size() == 1);
        REQUIRE(report.verbs_dropped == 1);
        REQUIRE_FALSE(c.verbs().find("mumble").has_value());
    }
    SECTION("duplicate cells accumulate") {
        auto path = write_file(tmp.file("c.tsv"),
                               "verb\tframe\tcount\nthink\tthat_S\t5\nthink\tthat_S\t7\n");
        REQUIRE(load_counts(path).at(0, 0) == 12);
    }
}

TEST_CASE("counts round-trip exactly") {
    TempDir tmp("counts");
    auto path = write_file(tmp.file("c.tsv"),
                           "verb\tframe\tcount\n"
                           "think\tthat_S\t120\n"
                           "think\tNP\t37\n"
                           "want\tto_VP\t9\n");
    CountsTable c = load_counts(path);
    save_counts(c, tmp.file("c2.tsv"));
    CountsTable c2 = load_counts(tmp.file("c2.tsv"));
    REQUIRE(c2.verbs().names() == c.verbs().names());
    REQUIRE(c2.frames().names() == c.frames().names());
    for (int32_t v = 0; v < c.verbs().size(); ++v)
        for (int32_t f = 0; f < c.frames().size(); ++f) REQUIRE(c.at(v, f) == c2.at(v, f));
}

TEST_CASE("acceptability matrix save/load is bit-exact") {
    Vocabulary verbs, frames;
    verbs.intern("think");
    verbs.intern("want");
    frames.intern("f1");
    frames.intern("f2");
    AcceptabilityMatrix m(verbs, frames);
    m.set(0, 0, 1.234567890123456789, 0.3333333333333333);
    m.set(0, 1, -2.5e-17, 0.999999999999);
    m.set(1, 0, 0.1 + 0.2, 1.0 / 7.0);

    TempDir tmp("accept");
    save_acceptability(m, tmp.file("a.tsv"));
    AcceptabilityMatrix m2 = load_acceptability(tmp.file("a.tsv"));
    REQUIRE(m2.observed_count() == 3);
    for (int32_t v = 0; v < 2; ++v)
        for (int32_t f = 0; f < 2; ++f) {
            REQUIRE(m.observed(v, f) == m2.observed(v, f));
            if (m.observed(v, f)) {
                REQUIRE(m.acceptability(v, f) == m2.acceptability(v, f));
                REQUIRE(m.variability(v, f) == m2.variability(v, f));
            }
        }
}

TEST_CASE("feature matrix save/load is bit-exact and validates") {
    FeatureMatrix m;
    m.row_keys = {"a", "b"};
    m.col_names = {"x0", "x1", "x2"};
    m.values.resize(2, 3);
    m.values << 0.1, -1e300, 3.0, 1.0 / 3.0, 0.0, -0.0;

    TempDir tmp("feat");
    save_features(m, tmp.file("f.tsv"));
    FeatureMatrix m2 = load_features(tmp.file("f.tsv"));
    REQUIRE(m2.row_keys == m.row_keys);
    REQUIRE(m2.values.rows() == 2);
    for (Eigen::Index i = 0; i < 2; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) REQUIRE(m.values(i, j) == m2.values(i, j));

    SECTION("duplicate keys rejected") {
        write_file(tmp.file("dup.tsv"), "key\tx0\na\t1\na\t2\n");
        REQUIRE_THROWS_AS(load_features(tmp.file("dup.tsv")), data_error);
    }
    SECTION("ragged rows rejected") {
        write_file(tmp.file("rag.tsv"), "key\tx0\tx1\na\t1\t2\nb\t3\n");
        REQUIRE_THROWS_AS(load_features(tmp.file("rag.tsv")), data_error);
    }
    SECTION("non-finite rejected") {
        write_file(tmp.file("inf.tsv"), "key\tx0\na\tinf\n");
        REQUIRE_THROWS_AS(load_features(tmp.file("inf.tsv")), data_error);
    }
}

TEST_CASE("align_vocabularies") {
    auto make_counts = [](const std::vector<std::string>& verbs) {
        CountsTable c;
        for (const auto& v : verbs) c.add(v, "f", 1);
        return c;
    };
    auto make_accept = [](const std::vector<std::string>& verbs) {
        Vocabulary vv, fv;
        for (const auto& v : verbs) vv.intern(v);
        fv.intern("f");
        AcceptabilityMatrix m(vv, fv);
        for (int32_t i = 0; i < vv.size(); ++i) m.set(i, 0, double(i), 0.5);
        return m;
    };

    SECTION("identical vocabularies are unchanged") {
        auto r = align_vocabularies(make_counts({"a", "b"}), make_accept({"a", "b"}));
        REQUIRE(r.counts.verbs().names() == std::vector<std::string>{"a", "b"});
        REQUIRE(r.dropped_counts_verbs == 0);
        REQUIRE(r.dropped_acceptability_verbs == 0);
    }
    SECTION("intersection with order preserved per side") {
        auto r = align_vocabularies(make_counts({"a", "b", "c"}), make_accept({"c", "b", "d"}));
        REQUIRE(r.counts.verbs().names() == std::vector<std::string>{"b", "c"});
        REQUIRE(r.acceptability.verbs().names() == std::vector<std::string>{"c", "b"});
        REQUIRE(r.dropped_counts_verbs == 1);
        REQUIRE(r.dropped_acceptability_verbs == 1);
    }
    SECTION("empty intersection is an analysis error") {
        REQUIRE_THROWS_AS(align_vocabularies(make_counts({"a"}), make_accept({"z"})),
                          analysis_error);
    }
    SECTION("idempotent") {
        auto once = align_vocabularies(make_counts({"a", "b", "c"}), make_accept({"b", "c"}));
        auto twice = align_vocabularies(once.counts, once.acceptability);
        REQUIRE(twice.counts.verbs().names() == once.counts.verbs().names());
        REQUIRE(twice.acceptability.verbs().names() == once.acceptability.verbs().names());
        REQUIRE(twice.dropped_counts_verbs == 0);
        REQUIRE(twice.dropped_acceptability_verbs == 0);
    }
}

TEST_CASE("verb remapping merges counts") {
    CountsTable c;
    c.add("Think", "f", 5);
    c.add("think", "f", 7);
    CountsTable merged = c.remap_verbs({{"Think", "think"}});
    REQUIRE(merged.verbs().size() == 1);
    REQUIRE(merged.at(0, 0) == 12);
}

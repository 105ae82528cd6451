#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "hrf/corpus_store.hpp"
#include "oracles.hpp"

using namespace hrf;

namespace {

Snapshot make(Timestamp ts, std::vector<std::pair<std::string, std::string>> docs)
{
    std::vector<DocumentVersion> v;
    for (auto &[id, text] : docs) {
        v.push_back({id, ts, std::nullopt, text});
    }
    return Snapshot(std::move(ts), std::move(v));
}

std::string random_text(std::mt19937 &rng, std::size_t words, std::size_t vocab)
{
    std::uniform_int_distribution<std::size_t> pick(0, vocab - 1);
    std::string out;
    for (std::size_t i = 0; i < words; ++i) {
        out += "w" + std::to_string(pick(rng)) + ' ';
    }
    return out;
}

} // namespace

TEST(Ingest, ReadsWellFormedRecords)
{
    std::istringstream in(R"({"docno":"d1","text":"alpha beta","url":"https://a.example"}
{"docno":"d2","text":""}

{"docno":"d3","text":"gamma"}
)");
    auto snap = ingest_snapshot(in, "2022-07");
    ASSERT_EQ(snap.size(), 3u);
    EXPECT_EQ(snap.timestamp(), "2022-07");
    EXPECT_EQ(snap.find("d1")->url.value(), "https://a.example");
    EXPECT_EQ(snap.find("d2")->text, "");
    EXPECT_FALSE(snap.find("d3")->url.has_value());
}

TEST(Ingest, EmptyFileGivesEmptySnapshot)
{
    std::istringstream in("");
    EXPECT_EQ(ingest_snapshot(in, "2022-07").size(), 0u);
}

TEST(Ingest, DuplicateDocnoIsIntegrityError)
{
    std::istringstream in("{\"docno\":\"d1\",\"text\":\"a\"}\n{\"docno\":\"d1\",\"text\":\"b\"}\n");
    EXPECT_THROW(ingest_snapshot(in, "2022-07"), IntegrityError);
}

TEST(Ingest, MalformedRecordNamesLine)
{
    std::istringstream in("{\"docno\":\"d1\",\"text\":\"a\"}\n{\"docno\":\"d2\"}\n");
    try {
        ingest_snapshot(in, "2022-07");
        FAIL() << "expected ParseError";
    } catch (ParseError const &e) {
        EXPECT_EQ(e.line(), 2u);
    }
    std::istringstream broken("{\"docno\":\"d1\",\"text\":\"a\"}\n\n{not json\n");
    try {
        ingest_snapshot(broken, "2022-07");
        FAIL() << "expected ParseError";
    } catch (ParseError const &e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(Ingest, CorpusRoundTrips)
{
    auto snap = make("2022-07", {{"b", "zwei \"quoted\" é"}, {"a", "eins"}});
    std::ostringstream out;
    write_corpus(snap, out);
    std::istringstream in(out.str());
    auto back = ingest_snapshot(in, "2022-07");
    EXPECT_EQ(back.documents(), snap.documents());
}

TEST(Ingest, SnapshotRejectsEmptyIdAndForeignTimestamp)
{
    EXPECT_THROW(make("2022-07", {{"", "x"}}), IntegrityError);
    std::vector<DocumentVersion> v{{"d1", "2022-09", std::nullopt, "x"}};
    EXPECT_THROW(Snapshot("2022-07", v), IntegrityError);
}

TEST(Diff, DeletedCreatedUnchanged)
{
    auto t0 = make("2022-07", {{"gone", "alphabetical list of bird songs you may like"},
                               {"same", "x y z"}});
    auto t1 = make("2022-09", {{"same", "x y z"}, {"new", "fresh"}});
    auto cs = diff_snapshots(t0, t1);
    EXPECT_EQ(cs.deleted, (std::set<std::string>{"gone"}));
    EXPECT_EQ(cs.created, (std::set<std::string>{"new"}));
    EXPECT_EQ(cs.unchanged, (std::set<std::string>{"same"}));
    EXPECT_TRUE(cs.updated.empty());
}

TEST(Diff, OneWordChangeIsUpdate)
{
    auto t0 = make("2022-07", {{"d", "311 songs by birds from France by species"}});
    auto t1 = make("2022-09", {{"d", "312 songs by birds from France by species"}});
    auto cs = diff_snapshots(t0, t1);
    ASSERT_EQ(cs.updated.size(), 1u);
    // eight words form a single chunk, so any change leaves nothing shared
    EXPECT_EQ(cs.updated.at("d"), 0.0);
    EXPECT_EQ(cs.updated.at("d"), oracle::s3("311 songs by birds from France by species",
                                             "312 songs by birds from France by species"));
}

TEST(Diff, OneWordChangeInLongerTextKeepsMostChunks)
{
    std::string a = "311 songs by birds from France by species with recordings and notes";
    std::string b = "312 songs by birds from France by species with recordings and notes";
    auto cs = diff_snapshots(make("2022-07", {{"d", a}}), make("2022-09", {{"d", b}}));
    // 12 words: 5 chunks, only the first contains the changed word
    EXPECT_DOUBLE_EQ(cs.updated.at("d"), 4.0 / 5.0);
    EXPECT_DOUBLE_EQ(cs.updated.at("d"), oracle::s3(a, b));
}

TEST(Diff, EqualTimestampsRejected)
{
    auto a = make("2022-07", {});
    EXPECT_THROW(diff_snapshots(a, a), PreconditionError);
    EXPECT_THROW(diff_snapshots(make("2022-09", {}), a), PreconditionError);
}

TEST(Diff, PartitionsUnionOfIds)
{
    std::mt19937 rng(7);
    for (int round = 0; round < 20; ++round) {
        std::vector<std::pair<std::string, std::string>> a;
        std::vector<std::pair<std::string, std::string>> b;
        std::set<std::string> ids;
        for (int i = 0; i < 60; ++i) {
            auto id = "d" + std::to_string(i);
            int kind = static_cast<int>(rng() % 4);
            auto text = random_text(rng, 20, 30);
            if (kind != 0) {
                a.emplace_back(id, text);
                ids.insert(id);
            }
            if (kind != 1) {
                b.emplace_back(id, kind == 2 ? text : random_text(rng, 20, 30));
                ids.insert(id);
            }
        }
        auto cs = diff_snapshots(make("2022-07", a), make("2022-09", b));
        EXPECT_EQ(cs.total(), ids.size());
        std::set<std::string> seen;
        for (auto const &s : {cs.created, cs.deleted, cs.unchanged}) {
            for (auto const &id : s) {
                EXPECT_TRUE(seen.insert(id).second) << id;
            }
        }
        for (auto const &[id, s3] : cs.updated) {
            EXPECT_TRUE(seen.insert(id).second) << id;
            EXPECT_GE(s3, 0.0);
            EXPECT_LT(s3, 1.0);
        }
        EXPECT_EQ(seen, ids);
    }
}

TEST(S3, Endpoints)
{
    EXPECT_EQ(s3_similarity("the bird sings a song at dawn in spring", "the bird sings a song at dawn in spring"), 1.0);
    EXPECT_EQ(s3_similarity("alpha beta gamma", "delta epsilon zeta"), 0.0);
    EXPECT_EQ(s3_similarity("", ""), 1.0);
    EXPECT_EQ(s3_similarity("", "x"), 0.0);
    EXPECT_EQ(s3_similarity("x", ""), 0.0);
    // normalization: case and punctuation runs do not matter
    EXPECT_EQ(s3_similarity("Bird, song!", "bird song"), 1.0);
}

TEST(S3, TwelveWordsLastFourReplaced)
{
    std::string a = "one two three four five six seven eight nine ten eleven twelve";
    std::string b = "one two three four five six seven eight alpha beta gamma delta";
    double expected = oracle::s3(a, b);
    EXPECT_DOUBLE_EQ(expected, 1.0 / 5.0);
    EXPECT_DOUBLE_EQ(s3_similarity(a, b), expected);
}

TEST(S3, MatchesOracleAndIsSymmetric)
{
    std::mt19937 rng(11);
    for (int i = 0; i < 300; ++i) {
        auto a = random_text(rng, rng() % 25, 6);
        auto b = random_text(rng, rng() % 25, 6);
        double ab = s3_similarity(a, b);
        EXPECT_DOUBLE_EQ(ab, oracle::s3(a, b)) << a << " | " << b;
        EXPECT_EQ(ab, s3_similarity(b, a));
        if (!a.empty()) {
            EXPECT_EQ(s3_similarity(a, a), 1.0);
        }
    }
}

TEST(Profile, AllUnchangedIsSingleStep)
{
    ChangeSet cs;
    cs.unchanged = {"a", "b", "c"};
    auto ecdf = similarity_profile({cs});
    ASSERT_EQ(ecdf.size(), 1u);
    EXPECT_EQ(ecdf[0], (EcdfPoint{1.0, 1.0}));
    EXPECT_TRUE(similarity_profile({}).empty());
}

TEST(Profile, TwoOfFiveIdentical)
{
    ChangeSet cs;
    cs.unchanged = {"a", "b"};
    cs.updated = {{"c", 0.2}, {"d", 0.5}, {"e", 0.9}};
    auto ecdf = similarity_profile({cs});
    ASSERT_EQ(ecdf.size(), 4u);
    EXPECT_DOUBLE_EQ(ecdf[2].cumulative_fraction, 0.6);
    EXPECT_EQ(ecdf[2].s3, 0.9);
    EXPECT_DOUBLE_EQ(ecdf_mass_below(ecdf, 1.0), 0.6);
    EXPECT_DOUBLE_EQ(ecdf_mass_at_one(ecdf), 0.4);
    EXPECT_DOUBLE_EQ(ecdf_mass_below(ecdf, 0.8), 0.4);
    for (std::size_t i = 1; i < ecdf.size(); ++i) {
        EXPECT_LT(ecdf[i - 1].s3, ecdf[i].s3);
        EXPECT_LE(ecdf[i - 1].cumulative_fraction, ecdf[i].cumulative_fraction);
    }
    EXPECT_EQ(ecdf.back().cumulative_fraction, 1.0);

    std::ostringstream out;
    write_ecdf(ecdf, out);
    EXPECT_EQ(out.str(), "s3\tcum_fraction\n0.2\t0.2\n0.5\t0.4\n0.9\t0.6\n1\t1\n");
}

TEST(Overlap, DisjointAndIdentical)
{
    auto m = query_overlap({{"2022-07", {"a", "b"}}, {"2022-09", {"c"}}});
    EXPECT_EQ(m.counts, (std::vector<std::vector<std::size_t>>{{2, 0}, {0, 1}}));
    auto same = query_overlap({{"2022-07", {"a", "b", "c"}}, {"2022-09", {"A", " b ", "c"}}});
    EXPECT_EQ(same.counts[0][1], 3u);
    EXPECT_EQ(same.counts[1][0], 3u);
}

TEST(Overlap, FourTimestampHandCount)
{
    std::map<Timestamp, std::set<std::string>> sets{
        {"t1", {"bird songs", "cheap flights", "paris weather"}},
        {"t2", {"Bird Songs", "paris  weather", "train strike"}},
        {"t3", {"train strike", "cheap flights"}},
        {"t4", {"bird songs", "new query"}},
    };
    auto m = query_overlap(sets);
    std::vector<std::vector<std::size_t>> expected{
        {3, 2, 1, 1},
        {2, 3, 1, 1},
        {1, 1, 2, 0},
        {1, 1, 0, 2},
    };
    EXPECT_EQ(m.counts, expected);
    EXPECT_THROW(query_overlap({}), PreconditionError);
}

TEST(SnapshotDir, LoadsCorpusAndQueries)
{
    auto dir = std::filesystem::temp_directory_path() / "hrf_snapdir_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "corpus.jsonl") << "{\"docno\":\"d1\",\"text\":\"bird\"}\n";
        std::ofstream(dir / "queries.tsv") << "q1\tbird songs\nq2\tparis\n";
    }
    auto sd = load_snapshot_dir(dir, "2022-07");
    EXPECT_EQ(sd.snapshot.size(), 1u);
    EXPECT_EQ(sd.queries.at("q1"), "bird songs");
    std::ostringstream out;
    write_queries(sd.queries, out);
    EXPECT_EQ(out.str(), "q1\tbird songs\nq2\tparis\n");
    std::filesystem::remove_all(dir);
}

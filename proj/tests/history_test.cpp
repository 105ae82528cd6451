#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "hrf/history.hpp"

using namespace hrf;

TEST(LoadQrels, ParsesLine)
{
    std::istringstream in("q1 0 d7 2\n");
    auto obs = load_qrels(in, "2022-07");
    ASSERT_EQ(obs.size(), 1u);
    EXPECT_EQ(obs[0], (Observation{"q1", "d7", "2022-07", 2}));
}

TEST(LoadQrels, EmptyFile)
{
    std::istringstream in("");
    EXPECT_TRUE(load_qrels(in, "2022-07").empty());
}

TEST(LoadQrels, GradeOutOfRange)
{
    std::istringstream three("q1 0 d7 3\n");
    EXPECT_THROW(load_qrels(three, "2022-07"), RangeError);
    std::istringstream negative("q1 0 d7 -1\n");
    EXPECT_THROW(load_qrels(negative, "2022-07"), RangeError);
}

TEST(LoadQrels, MalformedLineNamesLine)
{
    std::istringstream in("q1 0 d1 1\nq1 0 d2\n");
    try {
        load_qrels(in, "2022-07");
        FAIL();
    } catch (ParseError const &e) {
        EXPECT_EQ(e.line(), 2u);
    }
    std::istringstream grade("q1 0 d1 high\n");
    EXPECT_THROW(load_qrels(grade, "2022-07"), ParseError);
}

TEST(LoadQrels, RoundTripsBitExactly)
{
    std::string text = "q1 0 d7 2\nq1 0 d3 0\nq10 0 doc-x 1\nq2 0 d7 1\n";
    std::istringstream in(text);
    std::ostringstream out;
    write_qrels(load_qrels(in, "2022-07"), out);
    EXPECT_EQ(out.str(), text);
}

TEST(Manifest, ResolvesRelativePaths)
{
    auto dir = std::filesystem::temp_directory_path() / "hrf_manifest_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir / "a");
    std::ofstream(dir / "qrels.manifest") << "# comment\n2022-07\ta/qrels.txt\n\n2022-09\t/abs/q.txt\n";
    auto m = load_qrels_manifest(dir / "qrels.manifest");
    ASSERT_EQ(m.size(), 2u);
    EXPECT_EQ(m.at("2022-07"), dir / "a/qrels.txt");
    EXPECT_EQ(m.at("2022-09"), std::filesystem::path("/abs/q.txt"));
    std::filesystem::remove_all(dir);
}

namespace {

FeedbackStore fixture()
{
    return FeedbackStore({{"q", "a", "2022-07", 0},
                          {"q", "b", "2022-07", 1},
                          {"q", "c", "2022-07", 2},
                          {"q", "a", "2022-09", 2},
                          {"q", "c", "2022-11", 0},
                          {"other", "a", "2022-07", 2}});
}

} // namespace

TEST(PositiveSet, OnlyPositiveGrades)
{
    auto store = fixture();
    auto pos = positive_set(store, "q", "2022-09");
    EXPECT_EQ(pos, (std::vector<std::pair<std::string, Timestamp>>{{"b", "2022-07"},
                                                                  {"c", "2022-07"}}));
}

TEST(PositiveSet, EarliestCutoffIsEmpty)
{
    EXPECT_TRUE(positive_set(fixture(), "q", "2022-07").empty());
    EXPECT_TRUE(positive_set(fixture(), "missing", "2023-01").empty());
}

TEST(PositiveSet, ReturnsEveryQualifyingTimestamp)
{
    auto store = fixture();
    store.add({"q", "b", "2022-09", 2});
    auto pos = positive_set(store, "q", "2023-01");
    EXPECT_EQ(pos, (std::vector<std::pair<std::string, Timestamp>>{
                       {"a", "2022-09"}, {"b", "2022-07"}, {"b", "2022-09"}, {"c", "2022-07"}}));
    auto latest = store.latest_positives("q", "2023-01");
    EXPECT_EQ(latest.at("b"), (std::pair<Timestamp, int>{"2022-09", 2}));
    EXPECT_EQ(latest.at("c"), (std::pair<Timestamp, int>{"2022-07", 2}));
}

TEST(PositiveSet, RandomStoresMatchLinearScan)
{
    std::mt19937 rng(29);
    std::vector<Timestamp> ts{"2022-07", "2022-09", "2022-11", "2023-01"};
    for (int round = 0; round < 30; ++round) {
        std::vector<Observation> all;
        std::set<std::tuple<std::string, std::string, Timestamp>> keys;
        for (int i = 0; i < 60; ++i) {
            Observation o{"q" + std::to_string(rng() % 3), "d" + std::to_string(rng() % 10),
                          ts[rng() % ts.size()], static_cast<int>(rng() % 3)};
            if (keys.insert({o.qid, o.doc_id, o.timestamp}).second) {
                all.push_back(o);
            }
        }
        FeedbackStore store(all);
        EXPECT_EQ(store.size(), all.size());
        for (auto const &before : ts) {
            for (std::string q : {"q0", "q1", "q2"}) {
                std::vector<std::pair<std::string, Timestamp>> expected;
                std::size_t negatives = 0;
                std::size_t total = 0;
                for (auto const &o : all) {
                    if (o.qid == q && o.timestamp < before) {
                        ++total;
                        if (o.rel > 0) {
                            expected.emplace_back(o.doc_id, o.timestamp);
                        } else {
                            ++negatives;
                        }
                    }
                }
                std::sort(expected.begin(), expected.end());
                auto got = positive_set(store, q, before);
                EXPECT_EQ(got, expected);
                EXPECT_EQ(got.size() + negatives, total);
                EXPECT_EQ(store.observations_for(q, before).size(), total);
            }
        }
    }
}

TEST(ObservationsFor, EmptyAndOrdered)
{
    auto store = fixture();
    EXPECT_TRUE(observations_for(store, "q", "zzz", "2023-01").empty());
    auto a = observations_for(store, "q", "a", "2023-01");
    ASSERT_EQ(a.size(), 2u);
    EXPECT_EQ(a[0].timestamp, "2022-07");
    EXPECT_EQ(a[1].timestamp, "2022-09");
    // strict cutoff
    EXPECT_EQ(observations_for(store, "q", "a", "2022-09").size(), 1u);
}

TEST(ObservationsFor, RandomInsertOrderIsSorted)
{
    std::mt19937 rng(31);
    std::vector<Observation> obs;
    for (int m = 1; m <= 12; ++m) {
        char ts[16];
        std::snprintf(ts, sizeof ts, "2022-%02d", m);
        obs.push_back({"q", "d", ts, m % 3});
    }
    for (int round = 0; round < 10; ++round) {
        std::shuffle(obs.begin(), obs.end(), rng);
        FeedbackStore store(obs);
        auto expected = obs;
        std::sort(expected.begin(), expected.end(),
                  [](auto const &x, auto const &y) { return x.timestamp < y.timestamp; });
        EXPECT_EQ(observations_for(store, "q", "d", "9999"), expected);
    }
}

TEST(FeedbackStoreTest, RejectsDuplicatesAndBadGrades)
{
    FeedbackStore store;
    store.add({"q", "d", "2022-07", 1});
    EXPECT_THROW(store.add({"q", "d", "2022-07", 2}), IntegrityError);
    EXPECT_THROW(store.add({"q", "d", "2022-09", 3}), RangeError);
    EXPECT_EQ(store.size(), 1u);
}

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hrf/corpus_store.hpp"
#include "hrf/testkit.hpp"

using namespace hrf;
using hrf::testkit::GeneratorConfig;

namespace {

std::string serialize(std::vector<testkit::TimestampData> const &data)
{
    std::ostringstream out;
    for (auto const &d : data) {
        write_corpus(d.snapshot, out);
        write_queries(d.queries, out);
        write_qrels(d.qrels, out);
    }
    return out.str();
}

GeneratorConfig small()
{
    GeneratorConfig c;
    c.docs_per_snapshot = 400;
    c.num_queries = 20;
    return c;
}

} // namespace

TEST(Testkit, TimestampLabels)
{
    EXPECT_EQ(testkit::timestamp_label(0), "2022-07");
    EXPECT_EQ(testkit::timestamp_label(1), "2022-09");
    EXPECT_EQ(testkit::timestamp_label(3), "2023-01");
    for (std::size_t i = 1; i < 30; ++i) {
        EXPECT_LT(testkit::timestamp_label(i - 1), testkit::timestamp_label(i));
    }
}

TEST(Testkit, SameSeedIsByteIdentical)
{
    auto a = serialize(testkit::generate(small()));
    auto b = serialize(testkit::generate(small()));
    EXPECT_EQ(a, b);
    auto other = small();
    other.seed = 7;
    EXPECT_NE(serialize(testkit::generate(other)), a);
}

TEST(Testkit, FrozenCorpus)
{
    auto c = small();
    c.frac_unchanged = 1.0;
    c.frac_heavy_change = 0.0;
    c.delete_rate = 0.0;
    c.create_rate = 0.0;
    auto data = testkit::generate(c);
    ASSERT_EQ(data.size(), 3u);
    for (std::size_t i = 1; i < data.size(); ++i) {
        auto cs = diff_snapshots(data[i - 1].snapshot, data[i].snapshot);
        EXPECT_TRUE(cs.created.empty());
        EXPECT_TRUE(cs.deleted.empty());
        EXPECT_TRUE(cs.updated.empty());
        EXPECT_EQ(cs.unchanged.size(), data[0].snapshot.size());
    }
}

TEST(Testkit, ChangeRatesMatchConfiguration)
{
    GeneratorConfig c;
    c.docs_per_snapshot = 2000;
    auto data = testkit::generate(c);
    std::vector<ChangeSet> changes;
    for (std::size_t i = 1; i < data.size(); ++i) {
        auto cs = diff_snapshots(data[i - 1].snapshot, data[i].snapshot);
        auto older = static_cast<double>(data[i - 1].snapshot.size());
        auto shared = static_cast<double>(cs.updated.size() + cs.unchanged.size());
        EXPECT_NEAR(static_cast<double>(cs.deleted.size()) / older, c.delete_rate, 0.05);
        EXPECT_NEAR(static_cast<double>(cs.created.size()) / older, c.create_rate, 0.05);
        EXPECT_NEAR(static_cast<double>(cs.unchanged.size()) / shared, c.frac_unchanged, 0.05);
        std::size_t heavy = 0;
        for (auto const &[id, s3] : cs.updated) {
            heavy += s3 < 0.8 ? 1 : 0;
        }
        EXPECT_NEAR(static_cast<double>(heavy) / shared, c.frac_heavy_change, 0.05);
        changes.push_back(cs);
    }
    auto ecdf = similarity_profile(changes);
    EXPECT_NEAR(ecdf_mass_at_one(ecdf), 0.40, 0.05);
}

TEST(Testkit, QrelsReferenceExistingDocuments)
{
    for (auto const &d : testkit::generate(small())) {
        ASSERT_FALSE(d.qrels.empty());
        for (auto const &o : d.qrels) {
            EXPECT_TRUE(d.snapshot.contains(o.doc_id)) << o.doc_id << " @ " << o.timestamp;
            EXPECT_EQ(o.timestamp, d.snapshot.timestamp());
            EXPECT_TRUE(d.queries.contains(o.qid));
        }
    }
}

TEST(Testkit, QueriesReoccurWithHistory)
{
    auto c = small();
    c.reoccur_rate = 0.0; // still forces one re-occurring query per timestamp
    auto data = testkit::generate(c);
    for (std::size_t i = 1; i < data.size(); ++i) {
        std::size_t reoccurring = 0;
        for (auto const &[qid, text] : data[i].queries) {
            for (std::size_t j = 0; j < i; ++j) {
                if (data[j].queries.contains(qid)) {
                    EXPECT_EQ(data[j].queries.at(qid), text);
                    ++reoccurring;
                    break;
                }
            }
        }
        EXPECT_GE(reoccurring, 1u);
    }
}

TEST(Testkit, RelevantDocumentsContainQueryTerms)
{
    auto data = testkit::generate(small());
    auto const &d = data[0];
    for (auto const &o : d.qrels) {
        if (o.rel == 0) {
            continue;
        }
        auto words = split_words(d.snapshot.find(o.doc_id)->text);
        std::size_t hits = 0;
        for (auto const &term : split_words(d.queries.at(o.qid))) {
            hits += static_cast<std::size_t>(std::count(words.begin(), words.end(), term));
        }
        EXPECT_GE(hits, o.rel == 2 ? 4u : 1u) << o.qid << " " << o.doc_id;
    }
}

TEST(Testkit, InfeasibleConfigurations)
{
    auto c = small();
    c.delete_rate = 1.0;
    EXPECT_THROW(testkit::generate(c), ConfigError);
    c = small();
    c.frac_unchanged = 0.7;
    c.frac_heavy_change = 0.5;
    EXPECT_THROW(testkit::generate(c), ConfigError);
    c = small();
    c.docs_per_snapshot = 10;
    EXPECT_THROW(testkit::generate(c), ConfigError);
    c = small();
    c.num_snapshots = 0;
    EXPECT_THROW(testkit::generate(c), ConfigError);
}

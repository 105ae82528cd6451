#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hrf/experiment.hpp"
#include "hrf/testkit.hpp"

using namespace hrf;
namespace fs = std::filesystem;

namespace {

std::string slurp(fs::path const &p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::map<std::string, std::string> tree(fs::path const &root)
{
    std::map<std::string, std::string> out;
    for (auto const &e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) {
            out[fs::relative(e.path(), root).string()] = slurp(e.path());
        }
    }
    return out;
}

class ExperimentTest : public ::testing::Test {
  protected:
    void SetUp() override
    {
        m_root = fs::temp_directory_path()
                 / ("hrf_experiment_" + std::string(::testing::UnitTest::GetInstance()
                                                         ->current_test_info()
                                                         ->name()));
        fs::remove_all(m_root);
    }
    void TearDown() override { fs::remove_all(m_root); }

    ExperimentConfig collection(testkit::GeneratorConfig gen, std::vector<std::string> systems)
    {
        auto data = testkit::generate(gen);
        testkit::write_collection(data, m_root / "data");
        ExperimentConfig cfg;
        for (auto const &d : data) {
            cfg.snapshots.emplace_back(d.snapshot.timestamp(),
                                       m_root / "data" / d.snapshot.timestamp());
        }
        cfg.qrels_manifest = m_root / "data" / "qrels.manifest";
        cfg.systems = std::move(systems);
        cfg.output_dir = m_root / "out";
        return cfg;
    }

    static testkit::GeneratorConfig small()
    {
        testkit::GeneratorConfig g;
        g.docs_per_snapshot = 400;
        g.num_queries = 20;
        return g;
    }

    fs::path m_root;
};

} // namespace

TEST_F(ExperimentTest, BoostAndBm25Pipeline)
{
    auto cfg = collection(small(), {"bm25", "boost"});
    auto report = run_experiment(cfg);
    ASSERT_EQ(report.timestamps.size(), 2u);
    for (auto const &tr : report.timestamps) {
        EXPECT_TRUE(fs::exists(run_path(cfg.output_dir, tr.timestamp, "bm25")));
        EXPECT_TRUE(fs::exists(run_path(cfg.output_dir, tr.timestamp, "boost")));
        EXPECT_TRUE(fs::exists(cfg.output_dir / "tables" / (tr.timestamp + ".tsv")));
        EXPECT_EQ(tr.systems, (std::vector<std::string>{"bm25", "boost"}));
    }
    for (auto const *f : {"effectiveness.tsv", "ablation.tsv", "significance.tsv",
                          "similarity_ecdf.tsv", "query_overlap.tsv", "changes.tsv"}) {
        EXPECT_TRUE(fs::exists(cfg.output_dir / f)) << f;
    }
    EXPECT_FALSE(fs::exists(cfg.output_dir / "INCOMPLETE"));
    EXPECT_TRUE(fs::exists(cfg.output_dir / "runs" / "2022-09"));
    EXPECT_FALSE(fs::exists(cfg.output_dir / "runs" / "2022-07"));
}

TEST_F(ExperimentTest, SingleSnapshotWithBoostIsConfigError)
{
    auto g = small();
    g.num_snapshots = 1;
    auto cfg = collection(g, {"bm25", "boost"});
    EXPECT_THROW(run_experiment(cfg), ConfigError);
    cfg.systems = {"bm25"};
    EXPECT_NO_THROW(cfg.validate());
}

TEST_F(ExperimentTest, FrozenCorpusBoostNeverLoses)
{
    auto g = small();
    g.frac_unchanged = 1.0;
    g.frac_heavy_change = 0.0;
    g.delete_rate = 0.0;
    g.create_rate = 0.0;
    auto cfg = collection(g, {"bm25", "boost"});
    auto report = run_experiment(cfg);
    for (auto const &tr : report.timestamps) {
        EXPECT_GE(tr.scores.at("boost").ndcg, tr.scores.at("bm25").ndcg) << tr.timestamp;
        EXPECT_GE(tr.scores.at("boost").ndcg_condensed, tr.scores.at("bm25").ndcg_condensed);
    }
}

TEST_F(ExperimentTest, ReportRegeneratesFromPersistedRuns)
{
    auto cfg = collection(small(), {"bm25", "bm25-rm3", "boost", "rf", "keyquery"});
    run_experiment(cfg);
    auto first = tree(cfg.output_dir);
    for (auto const &[name, content] : first) {
        if (name.rfind("runs/", 0) != 0 && name.rfind("rewrites/", 0) != 0) {
            fs::remove(cfg.output_dir / name);
        }
    }
    build_report(cfg, load_collection(cfg));
    EXPECT_EQ(tree(cfg.output_dir), first);

    // and the whole experiment is reproducible
    fs::remove_all(cfg.output_dir);
    run_experiment(cfg);
    EXPECT_EQ(tree(cfg.output_dir), first);
}

TEST_F(ExperimentTest, AblationZeroRowForBoost)
{
    auto g = small();
    g.docs_per_snapshot = 1000; // leaves room for created relevant documents
    auto cfg = collection(g, {"bm25", "boost"});
    auto report = run_experiment(cfg);
    for (auto const &tr : report.timestamps) {
        auto const &boost = tr.scores.at("boost");
        EXPECT_FALSE(boost.ablation_gain.empty());
        for (auto const &[qid, gain] : boost.ablation_gain) {
            EXPECT_EQ(gain, 0.0) << tr.timestamp << " " << qid;
        }
    }
    EXPECT_NE(slurp(cfg.output_dir / "ablation.tsv").find("+0.000±0.000"), std::string::npos);
}

TEST_F(ExperimentTest, ExternalRunJoinsEvaluation)
{
    auto cfg = collection(small(), {"bm25"});
    run_experiment(cfg);
    auto ts = cfg.snapshots[1].first;
    auto ext = m_root / "neural.run";
    {
        std::ifstream in(run_path(cfg.output_dir, ts, "bm25"));
        std::ofstream out(ext);
        std::string line;
        while (std::getline(in, line)) {
            out << line.substr(0, line.rfind(' ')) << " neural\n";
        }
    }
    cfg.external_runs.emplace_back(ts, ext);
    auto report = build_report(cfg, load_collection(cfg));
    auto const &tr = report.timestamps[0];
    ASSERT_TRUE(tr.scores.contains("neural"));
    EXPECT_EQ(tr.scores.at("neural").ndcg, tr.scores.at("bm25").ndcg);
    EXPECT_NE(slurp(cfg.output_dir / "effectiveness.tsv").find("neural"), std::string::npos);
}

TEST_F(ExperimentTest, FailureLeavesIncompleteMarker)
{
    auto cfg = collection(small(), {"bm25"});
    std::ofstream(m_root / "data" / "2022-09" / "corpus.jsonl", std::ios::app) << "{broken\n";
    EXPECT_THROW(run_experiment(cfg), ParseError);
    EXPECT_TRUE(fs::exists(cfg.output_dir / "INCOMPLETE"));
}

TEST_F(ExperimentTest, ReoccurringQueriesOnly)
{
    auto cfg = collection(small(), {"bm25"});
    auto c = load_collection(cfg);
    for (auto const &ts : evaluated_timestamps(c)) {
        auto q = reoccurring_queries(c, ts);
        EXPECT_FALSE(q.empty());
        EXPECT_LE(q.size(), c.queries.at(ts).size());
    }
    run_experiment(cfg);
    auto run = load_run(run_path(cfg.output_dir, "2022-09", "bm25"));
    EXPECT_EQ(run.by_qid.size(), reoccurring_queries(c, "2022-09").size());
}

TEST(Config, PrecedenceFlagOverFileOverDefault)
{
    auto dir = fs::temp_directory_path() / "hrf_config_test";
    fs::create_directories(dir);
    std::ofstream(dir / "exp.conf") << "# comment\nlambda = 0.6\nmu = 3 # trailing\n"
                                       "snapshot = a=snap/a\nsnapshot = b=/abs/b\n"
                                       "qrels_manifest = m.txt\n";
    auto file = load_config_file(dir / "exp.conf");
    auto cfg = resolve_config(file, {{"mu", "4"}, {"snapshot", "c=/x"}});
    EXPECT_EQ(cfg.boost.lambda, 0.6);
    EXPECT_EQ(cfg.boost.mu, 4.0);
    EXPECT_EQ(cfg.rm3.fb_docs, 3u);
    ASSERT_EQ(cfg.snapshots.size(), 1u);
    EXPECT_EQ(cfg.snapshots[0].first, "c");
    EXPECT_EQ(cfg.qrels_manifest, dir / "m.txt");
    auto from_file = resolve_config(file, {});
    ASSERT_EQ(from_file.snapshots.size(), 2u);
    EXPECT_EQ(from_file.snapshots[0].second, dir / "snap/a");
    EXPECT_THROW(resolve_config({{"nonsense", "1"}}, {}), ConfigError);
    EXPECT_THROW(resolve_config({{"lambda", "abc"}}, {}), ConfigError);
    fs::remove_all(dir);
}

TEST(Config, OutputDirectoryFromEnvironment)
{
    ::setenv("HRF_OUTPUT_DIR", "/tmp/hrf-env-out", 1);
    EXPECT_EQ(ExperimentConfig{}.output_dir, fs::path("/tmp/hrf-env-out"));
    ::unsetenv("HRF_OUTPUT_DIR");
    EXPECT_EQ(ExperimentConfig{}.output_dir, fs::path("hrf-out"));
}

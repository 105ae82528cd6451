// hrf: command-line front end for indexing, diffing, searching, rewriting,
// evaluating and running longitudinal experiments.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hrf/hrf.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode : int { ok = 0, usage = 1, data = 2, internal = 3 };

// Experiment-level flags, collected as config entries so they can override
// a config file key by key.
struct CollectionFlags {
    std::string config;
    std::vector<std::string> snapshots;
    std::vector<std::string> external_runs;
    std::map<std::string, std::string> values;

    void attach(CLI::App *cmd)
    {
        cmd->add_option("--config", config, "Flat key = value configuration file");
        cmd->add_option("--snapshot", snapshots, "Snapshot as TIMESTAMP=DIR (repeatable)");
        cmd->add_option("--external-run", external_runs,
                        "Externally produced TREC run as TIMESTAMP=FILE (repeatable)");
        for (auto const *key : {"qrels_manifest", "systems", "baselines", "stopwords", "output",
                                "lambda", "mu", "k", "top_k", "min_results", "vocab_size",
                                "max_candidate_terms", "fb_docs", "fb_terms", "orig_weight", "k1",
                                "b", "cutoff", "depth", "alpha"}) {
            std::string flag = std::string("--") + key;
            for (auto &ch : flag) {
                if (ch == '_') {
                    ch = '-';
                }
            }
            cmd->add_option(flag, values[key], std::string("Override config key '") + key + "'");
        }
    }

    [[nodiscard]] hrf::ExperimentConfig resolve() const
    {
        hrf::ConfigEntries file;
        if (!config.empty()) {
            file = hrf::load_config_file(config);
        }
        hrf::ConfigEntries flags;
        for (auto const &s : snapshots) {
            flags.emplace_back("snapshot", s);
        }
        for (auto const &r : external_runs) {
            flags.emplace_back("external_run", r);
        }
        for (auto const &[k, v] : values) {
            if (!v.empty()) {
                flags.emplace_back(k, v);
            }
        }
        return hrf::resolve_config(file, flags);
    }
};

std::pair<hrf::Timestamp, fs::path> parse_snapshot_arg(std::string const &arg)
{
    auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw hrf::ConfigError("expected TIMESTAMP=DIR, got '" + arg + "'");
    }
    return {arg.substr(0, eq), arg.substr(eq + 1)};
}

// Opens `path` for writing, or returns stdout for "-" / empty.
class Output {
  public:
    explicit Output(std::string const &path)
    {
        if (!path.empty() && path != "-") {
            if (fs::path(path).has_parent_path()) {
                fs::create_directories(fs::path(path).parent_path());
            }
            m_file.open(path, std::ios::binary);
            if (!m_file) {
                throw hrf::Error("cannot write " + path);
            }
        }
    }
    std::ostream &stream() { return m_file.is_open() ? m_file : std::cout; }

  private:
    std::ofstream m_file;
};

int cmd_generate(fs::path const &out, hrf::testkit::GeneratorConfig const &cfg)
{
    auto data = hrf::testkit::generate(cfg);
    hrf::testkit::write_collection(data, out);
    std::vector<hrf::Timestamp> timestamps;
    for (auto const &d : data) {
        timestamps.push_back(d.snapshot.timestamp());
    }
    hrf::write_experiment_config(out / "experiment.conf", timestamps);
    std::cerr << "wrote " << data.size() << " snapshots to " << out.string() << '\n';
    return ok;
}

int cmd_index(std::string const &snapshot, std::string const &stopwords, std::string const &out)
{
    auto [ts, dir] = parse_snapshot_arg(snapshot);
    auto analyzer = stopwords.empty() ? hrf::Analyzer{} : hrf::Analyzer::from_stopword_file(stopwords);
    auto snap = hrf::ingest_snapshot(fs::is_directory(dir) ? dir / "corpus.jsonl" : dir, ts);
    auto index = hrf::build_index(snap, analyzer);
    Output o(out);
    index.save(o.stream());
    std::cerr << "indexed " << index.num_docs() << " documents, " << index.num_terms()
              << " terms\n";
    return ok;
}

int cmd_diff(std::string const &older, std::string const &newer, std::string const &out,
             std::string const &ecdf_out)
{
    auto [ts_a, dir_a] = parse_snapshot_arg(older);
    auto [ts_b, dir_b] = parse_snapshot_arg(newer);
    auto a = hrf::ingest_snapshot(fs::is_directory(dir_a) ? dir_a / "corpus.jsonl" : dir_a, ts_a);
    auto b = hrf::ingest_snapshot(fs::is_directory(dir_b) ? dir_b / "corpus.jsonl" : dir_b, ts_b);
    auto cs = hrf::diff_snapshots(a, b);
    Output o(out);
    auto &s = o.stream();
    s << "doc_id\tchange\ts3\n";
    for (auto const &id : cs.created) {
        s << id << "\tcreate\t-\n";
    }
    for (auto const &id : cs.deleted) {
        s << id << "\tdelete\t-\n";
    }
    for (auto const &[id, s3] : cs.updated) {
        s << id << "\tupdate\t" << hrf::format_real(s3) << '\n';
    }
    for (auto const &id : cs.unchanged) {
        s << id << "\tunchanged\t1\n";
    }
    auto shared = cs.updated.size() + cs.unchanged.size();
    std::cerr << "created " << cs.created.size() << ", deleted " << cs.deleted.size()
              << ", updated " << cs.updated.size() << ", unchanged " << cs.unchanged.size();
    if (shared > 0) {
        std::cerr << " (" << hrf::format_fixed(100.0 * static_cast<double>(cs.unchanged.size())
                                                   / static_cast<double>(shared),
                                               1)
                  << "% of shared documents unchanged)";
    }
    std::cerr << '\n';
    if (!ecdf_out.empty()) {
        Output e(ecdf_out);
        hrf::write_ecdf(hrf::similarity_profile({cs}), e.stream());
    }
    return ok;
}

int cmd_search(std::string const &index_path, std::string const &snapshot,
               std::string const &queries_path, std::string const &system, std::size_t depth,
               hrf::Rm3Params const &rm3, std::string const &tag, std::string const &out)
{
    hrf::InvertedIndex index;
    if (!index_path.empty()) {
        std::ifstream in(index_path);
        if (!in) {
            throw hrf::Error("cannot open index " + index_path);
        }
        index = hrf::InvertedIndex::load(in, index_path);
    } else {
        auto [ts, dir] = parse_snapshot_arg(snapshot);
        index = hrf::build_index(
            hrf::ingest_snapshot(fs::is_directory(dir) ? dir / "corpus.jsonl" : dir, ts));
    }
    if (system != "bm25" && system != "bm25-rm3") {
        throw hrf::ConfigError("search supports --system bm25 or bm25-rm3; history-based "
                               "systems run through 'experiment' or 'rewrite'");
    }
    hrf::Run run{tag.empty() ? system : tag, {}};
    for (auto const &[qid, text] : hrf::load_queries(queries_path)) {
        auto query = hrf::WeightedQuery::from_text(qid, text, index.analyzer());
        if (system == "bm25-rm3") {
            query = hrf::rm3_expand(index, query, rm3);
        }
        run.add(hrf::search(index, query, depth));
    }
    Output o(out);
    hrf::write_run(run, o.stream());
    return ok;
}

int cmd_rewrite(CollectionFlags const &flags, std::string const &timestamp,
                std::string const &system, std::string const &out)
{
    auto cfg = flags.resolve();
    cfg.systems = {system};
    cfg.validate();
    auto c = hrf::load_collection(cfg);
    if (!c.archive.contains(timestamp)) {
        throw hrf::ConfigError("no snapshot configured for timestamp " + timestamp);
    }
    if (system != "bm25-rm3" && system != "rf" && system != "keyquery") {
        throw hrf::ConfigError("rewrite supports --system bm25-rm3, rf or keyquery");
    }
    auto const &analyzer = c.archive.at(timestamp).index.analyzer();
    std::map<std::string, hrf::WeightedQuery> rewrites;
    for (auto const &[qid, text] : c.queries.at(timestamp)) {
        auto query = hrf::WeightedQuery::from_text(qid, text, analyzer);
        rewrites.emplace(qid, hrf::rewrite_query(system, query, c, timestamp, cfg));
    }
    Output o(out);
    hrf::write_rewrites(rewrites, o.stream());
    return ok;
}

int cmd_evaluate(std::vector<std::string> const &run_paths, std::string const &qrels_path,
                 std::size_t k, bool condensed, std::string const &baseline, double alpha,
                 std::string const &out)
{
    auto observations = hrf::load_qrels(fs::path(qrels_path), "eval");
    auto qrels = hrf::to_qrels(observations);
    std::map<std::string, hrf::EvalReport> reports;
    Output o(out);
    auto &s = o.stream();
    for (auto const &path : run_paths) {
        auto run = hrf::load_run(fs::path(path));
        auto name = run.system_tag.empty() ? fs::path(path).stem().string() : run.system_tag;
        if (condensed) {
            run = hrf::condense_run(run, qrels);
        }
        auto report = hrf::ndcg_at_k(run, qrels, k, condensed ? "ndcg'" : "ndcg");
        if (run_paths.size() == 1) {
            hrf::write_report(report, s);
        }
        for (auto const &qid : report.missing_qrels) {
            std::cerr << "warning: " << name << ": query " << qid << " has no judgments\n";
        }
        reports[name] = std::move(report);
    }
    if (run_paths.size() > 1) {
        s << "system\tmean\tp_raw\tp_adjusted\tmarker\n";
        std::map<std::string, hrf::SignificanceResult> sig;
        if (!baseline.empty()) {
            sig = hrf::paired_ttest_bonferroni(reports, baseline, reports.size() - 1, alpha);
        }
        for (auto const &[name, report] : reports) {
            s << name << '\t' << hrf::format_real(report.mean);
            if (auto it = sig.find(name); it != sig.end()) {
                s << '\t' << hrf::format_real(it->second.p_raw) << '\t'
                  << hrf::format_real(it->second.p_adjusted) << '\t'
                  << (it->second.significant ? "*" : "");
                if (it->second.degenerate && it->second.mean_difference != 0.0) {
                    std::cerr << "warning: " << name
                              << ": zero-variance differences, p set to 0\n";
                }
            } else {
                s << "\t-\t-\t";
            }
            s << '\n';
        }
    }
    return ok;
}

void print_warnings(hrf::ExperimentReport const &report)
{
    for (auto const &w : report.warnings) {
        std::cerr << "warning: " << w << '\n';
    }
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Longitudinal retrieval with historical relevance feedback"};
    app.require_subcommand(1);

    // generate
    auto *gen = app.add_subcommand("generate", "Write a synthetic longitudinal collection");
    std::string gen_out;
    hrf::testkit::GeneratorConfig gen_cfg;
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--seed", gen_cfg.seed);
    gen->add_option("--snapshots", gen_cfg.num_snapshots);
    gen->add_option("--docs", gen_cfg.docs_per_snapshot);
    gen->add_option("--queries", gen_cfg.num_queries);
    gen->add_option("--unchanged", gen_cfg.frac_unchanged);
    gen->add_option("--heavy-change", gen_cfg.frac_heavy_change);
    gen->add_option("--delete-rate", gen_cfg.delete_rate);
    gen->add_option("--create-rate", gen_cfg.create_rate);
    gen->add_option("--judgments", gen_cfg.judgments_per_query);
    gen->add_option("--vocabulary", gen_cfg.vocabulary_size);

    // index
    auto *idx = app.add_subcommand("index", "Build and persist a snapshot index");
    std::string idx_snapshot, idx_stopwords, idx_out;
    idx->add_option("--snapshot", idx_snapshot, "TIMESTAMP=DIR or TIMESTAMP=corpus.jsonl")->required();
    idx->add_option("--stopwords", idx_stopwords, "Stopword list, one term per line");
    idx->add_option("--out", idx_out, "Index file (default: stdout)");

    // diff
    auto *diff = app.add_subcommand("diff", "Diff two snapshots into create/update/delete sets");
    std::string diff_older, diff_newer, diff_out, diff_ecdf;
    diff->add_option("--older", diff_older, "TIMESTAMP=DIR")->required();
    diff->add_option("--newer", diff_newer, "TIMESTAMP=DIR")->required();
    diff->add_option("--out", diff_out, "Per-document change list (default: stdout)");
    diff->add_option("--ecdf", diff_ecdf, "Write the s3 eCDF as TSV");

    // search
    auto *srch = app.add_subcommand("search", "Run BM25 or BM25+RM3 over a query file");
    std::string srch_index, srch_snapshot, srch_queries, srch_system = "bm25", srch_tag, srch_out;
    std::size_t srch_depth = 1000;
    hrf::Rm3Params srch_rm3;
    auto *index_opt = srch->add_option("--index", srch_index, "Persisted index file");
    auto *snap_opt = srch->add_option("--snapshot", srch_snapshot, "TIMESTAMP=DIR");
    index_opt->excludes(snap_opt);
    srch->add_option("--queries", srch_queries, "qid<TAB>query file")->required();
    srch->add_option("--system", srch_system)->check(CLI::IsMember({"bm25", "bm25-rm3"}));
    srch->add_option("--depth", srch_depth);
    srch->add_option("--fb-docs", srch_rm3.fb_docs);
    srch->add_option("--fb-terms", srch_rm3.fb_terms);
    srch->add_option("--orig-weight", srch_rm3.orig_weight);
    srch->add_option("--tag", srch_tag, "System tag written to the run");
    srch->add_option("--out", srch_out, "Run file (default: stdout)");

    // rewrite
    auto *rw = app.add_subcommand("rewrite", "Export rewritten queries for one timestamp");
    CollectionFlags rw_flags;
    rw_flags.attach(rw);
    std::string rw_ts, rw_system, rw_out;
    rw->add_option("--timestamp", rw_ts, "Timestamp whose queries are rewritten")->required();
    rw->add_option("--system", rw_system)
        ->required()
        ->check(CLI::IsMember({"bm25-rm3", "rf", "keyquery"}));
    rw->add_option("--out", rw_out, "TSV output (default: stdout)");

    // evaluate
    auto *ev = app.add_subcommand("evaluate", "nDCG@k of TREC runs, with significance");
    std::vector<std::string> ev_runs;
    std::string ev_qrels, ev_baseline, ev_out;
    std::size_t ev_k = 10;
    bool ev_condensed = false;
    double ev_alpha = 0.05;
    ev->add_option("--run", ev_runs, "Run file (repeatable)")->required();
    ev->add_option("--qrels", ev_qrels, "TREC qrels file")->required();
    ev->add_option("--k", ev_k, "Cutoff");
    ev->add_flag("--condensed", ev_condensed, "Remove unjudged documents first (nDCG')");
    ev->add_option("--baseline", ev_baseline, "System tag to test the other runs against");
    ev->add_option("--alpha", ev_alpha);
    ev->add_option("--out", ev_out, "TSV output (default: stdout)");

    // experiment / report
    auto *exp = app.add_subcommand("experiment", "Run the full longitudinal experiment");
    CollectionFlags exp_flags;
    exp_flags.attach(exp);
    auto *rep = app.add_subcommand("report", "Rebuild report tables from persisted runs");
    CollectionFlags rep_flags;
    rep_flags.attach(rep);

    try {
        app.parse(argc, argv);
    } catch (CLI::CallForHelp const &e) {
        return app.exit(e);
    } catch (CLI::ParseError const &e) {
        app.exit(e);
        std::cerr << '\n' << app.help();
        return usage;
    }

    try {
        if (*gen) {
            return cmd_generate(gen_out, gen_cfg);
        }
        if (*idx) {
            return cmd_index(idx_snapshot, idx_stopwords, idx_out);
        }
        if (*diff) {
            return cmd_diff(diff_older, diff_newer, diff_out, diff_ecdf);
        }
        if (*srch) {
            if (srch_index.empty() && srch_snapshot.empty()) {
                throw hrf::ConfigError("search needs --index or --snapshot");
            }
            return cmd_search(srch_index, srch_snapshot, srch_queries, srch_system, srch_depth,
                              srch_rm3, srch_tag, srch_out);
        }
        if (*rw) {
            return cmd_rewrite(rw_flags, rw_ts, rw_system, rw_out);
        }
        if (*ev) {
            return cmd_evaluate(ev_runs, ev_qrels, ev_k, ev_condensed, ev_baseline, ev_alpha,
                                ev_out);
        }
        if (*exp) {
            auto report = hrf::run_experiment(exp_flags.resolve());
            print_warnings(report);
            return ok;
        }
        if (*rep) {
            auto cfg = rep_flags.resolve();
            cfg.validate();
            auto c = hrf::load_collection(cfg);
            print_warnings(hrf::build_report(cfg, c));
            return ok;
        }
    } catch (hrf::ConfigError const &e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (hrf::PreconditionError const &e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (hrf::Error const &e) {
        std::cerr << "error: " << e.what() << '\n';
        return data;
    } catch (std::filesystem::filesystem_error const &e) {
        std::cerr << "error: " << e.what() << '\n';
        return data;
    } catch (std::exception const &e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return internal;
    }
    return internal;
}

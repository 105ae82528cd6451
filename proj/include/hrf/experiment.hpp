#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hrf/corpus_store.hpp"
#include "hrf/error.hpp"
#include "hrf/eval.hpp"
#include "hrf/format.hpp"
#include "hrf/history.hpp"
#include "hrf/index.hpp"
#include "hrf/rewrite.hpp"

namespace hrf {

inline std::vector<std::string> const &known_systems()
{
    static std::vector<std::string> const systems{"bm25", "bm25-rm3", "boost", "rf", "keyquery"};
    return systems;
}

inline bool uses_history(std::string const &system)
{
    return system == "boost" || system == "rf" || system == "keyquery";
}

/// Default output directory: $HRF_OUTPUT_DIR, else ./hrf-out.
inline std::filesystem::path default_output_dir()
{
    if (char const *env = std::getenv("HRF_OUTPUT_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return "hrf-out";
}

struct ExperimentConfig {
    std::vector<std::pair<Timestamp, std::filesystem::path>> snapshots;
    std::filesystem::path qrels_manifest;
    std::vector<std::string> systems{"bm25", "bm25-rm3", "boost", "rf", "keyquery"};
    std::vector<std::string> baselines{"bm25"};
    std::vector<std::pair<Timestamp, std::filesystem::path>> external_runs;
    std::filesystem::path stopwords;
    std::filesystem::path output_dir = default_output_dir();

    Bm25Params bm25;
    Rm3Params rm3;
    BoostParams boost;
    KeyqueryParams keyquery;
    std::size_t rf_terms = 10;
    std::size_t cutoff = 10;
    std::size_t depth = 1000;
    double alpha = 0.05;

    void validate() const
    {
        if (snapshots.empty()) {
            throw ConfigError("no snapshots configured");
        }
        for (auto const &s : systems) {
            if (std::find(known_systems().begin(), known_systems().end(), s)
                == known_systems().end()) {
                throw ConfigError("unknown system '" + s + "'");
            }
            if (uses_history(s) && snapshots.size() < 2) {
                throw ConfigError("system '" + s + "' needs at least two snapshots");
            }
        }
        std::set<Timestamp> seen;
        for (auto const &[ts, dir] : snapshots) {
            if (!seen.insert(ts).second) {
                throw ConfigError("snapshot timestamp " + ts + " configured twice");
            }
            if (!std::filesystem::is_directory(dir)) {
                throw ConfigError("snapshot directory does not exist: " + dir.string());
            }
        }
        if (qrels_manifest.empty() || !std::filesystem::exists(qrels_manifest)) {
            throw ConfigError("qrels manifest does not exist: " + qrels_manifest.string());
        }
        for (auto const &[ts, path] : external_runs) {
            if (!seen.contains(ts)) {
                throw ConfigError("external run for unknown timestamp " + ts);
            }
            if (!std::filesystem::exists(path)) {
                throw ConfigError("external run does not exist: " + path.string());
            }
        }
        if (!stopwords.empty() && !std::filesystem::exists(stopwords)) {
            throw ConfigError("stopword list does not exist: " + stopwords.string());
        }
        boost.validate();
        keyquery.validate();
        if (rf_terms == 0 || cutoff == 0 || depth == 0 || rm3.fb_docs == 0 || rm3.fb_terms == 0) {
            throw ConfigError("counts (k, cutoff, depth, fb_docs, fb_terms) must be at least 1");
        }
        if (!(rm3.orig_weight >= 0.0 && rm3.orig_weight <= 1.0)) {
            throw ConfigError("orig_weight must lie in [0, 1]");
        }
        if (!(alpha > 0.0 && alpha < 1.0)) {
            throw ConfigError("alpha must lie in (0, 1)");
        }
    }
};

// ---------------------------------------------------------------------------
// Flat key = value configuration

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

namespace detail {

    inline std::string trim(std::string s)
    {
        auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) {
            return {};
        }
        auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    inline std::vector<std::string> split_list(std::string const &value)
    {
        std::vector<std::string> out;
        std::stringstream ss(value);
        for (std::string item; std::getline(ss, item, ',');) {
            if (auto t = trim(item); !t.empty()) {
                out.push_back(t);
            }
        }
        return out;
    }

    inline std::pair<Timestamp, std::filesystem::path> split_assignment(std::string const &key,
                                                                        std::string const &value)
    {
        auto eq = value.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == value.size()) {
            throw ConfigError(key + " expects TIMESTAMP=PATH, got '" + value + "'");
        }
        return {trim(value.substr(0, eq)), trim(value.substr(eq + 1))};
    }

    template <typename T>
    T parse_number(std::string const &key, std::string const &value)
    {
        T out{};
        bool ok = false;
        if constexpr (std::is_floating_point_v<T>) {
            ok = parse_real(value, out);
        } else {
            ok = parse_int(value, out);
        }
        if (!ok) {
            throw ConfigError("invalid value for " + key + ": '" + value + "'");
        }
        return out;
    }

} // namespace detail

/// Reads `key = value` lines; `#` starts a comment. Relative paths in
/// path-valued keys resolve against the file's directory.
inline ConfigEntries load_config_file(std::filesystem::path const &path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    static std::set<std::string> const path_keys{"qrels_manifest", "stopwords", "output"};
    static std::set<std::string> const assignment_keys{"snapshot", "external_run"};
    auto base = path.parent_path();
    auto resolve = [&](std::string const &p) {
        std::filesystem::path fp = p;
        return fp.is_relative() ? (base / fp).string() : fp.string();
    };
    ConfigEntries entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = detail::trim(line);
        if (line.empty()) {
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no)
                              + ": expected key = value");
        }
        auto key = detail::trim(line.substr(0, eq));
        auto value = detail::trim(line.substr(eq + 1));
        if (path_keys.contains(key)) {
            value = resolve(value);
        } else if (assignment_keys.contains(key)) {
            auto [ts, p] = detail::split_assignment(key, value);
            value = ts + "=" + resolve(p.string());
        }
        entries.emplace_back(key, value);
    }
    return entries;
}

inline void apply_config_entry(ExperimentConfig &cfg, std::string const &key,
                               std::string const &value)
{
    using detail::parse_number;
    if (key == "snapshot") {
        cfg.snapshots.push_back(detail::split_assignment(key, value));
    } else if (key == "external_run") {
        cfg.external_runs.push_back(detail::split_assignment(key, value));
    } else if (key == "qrels_manifest") {
        cfg.qrels_manifest = value;
    } else if (key == "systems") {
        cfg.systems = detail::split_list(value);
    } else if (key == "baselines") {
        cfg.baselines = detail::split_list(value);
    } else if (key == "stopwords") {
        cfg.stopwords = value;
    } else if (key == "output") {
        cfg.output_dir = value;
    } else if (key == "lambda") {
        cfg.boost.lambda = parse_number<double>(key, value);
    } else if (key == "mu") {
        cfg.boost.mu = parse_number<double>(key, value);
    } else if (key == "k") {
        cfg.rf_terms = parse_number<std::size_t>(key, value);
    } else if (key == "top_k") {
        cfg.keyquery.top_k = parse_number<std::size_t>(key, value);
    } else if (key == "min_results") {
        cfg.keyquery.min_results = parse_number<std::size_t>(key, value);
    } else if (key == "vocab_size") {
        cfg.keyquery.vocab_size = parse_number<std::size_t>(key, value);
    } else if (key == "max_candidate_terms") {
        cfg.keyquery.max_candidate_terms = parse_number<std::size_t>(key, value);
    } else if (key == "fb_docs") {
        cfg.rm3.fb_docs = parse_number<std::size_t>(key, value);
    } else if (key == "fb_terms") {
        cfg.rm3.fb_terms = parse_number<std::size_t>(key, value);
    } else if (key == "orig_weight") {
        cfg.rm3.orig_weight = parse_number<double>(key, value);
    } else if (key == "k1") {
        cfg.bm25.k1 = parse_number<double>(key, value);
    } else if (key == "b") {
        cfg.bm25.b = parse_number<double>(key, value);
    } else if (key == "cutoff") {
        cfg.cutoff = parse_number<std::size_t>(key, value);
        cfg.keyquery.ndcg_cutoff = cfg.cutoff;
    } else if (key == "depth") {
        cfg.depth = parse_number<std::size_t>(key, value);
    } else if (key == "alpha") {
        cfg.alpha = parse_number<double>(key, value);
    } else {
        throw ConfigError("unknown configuration key '" + key + "'");
    }
}

/// Defaults, then file entries, then flag entries. A key given as a flag
/// replaces every file entry with that key.
inline ExperimentConfig resolve_config(ConfigEntries const &file, ConfigEntries const &flags)
{
    std::set<std::string> flagged;
    for (auto const &[k, v] : flags) {
        flagged.insert(k);
    }
    ExperimentConfig cfg;
    for (auto const &[k, v] : file) {
        if (!flagged.contains(k)) {
            apply_config_entry(cfg, k, v);
        }
    }
    for (auto const &[k, v] : flags) {
        apply_config_entry(cfg, k, v);
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Collection

struct Collection {
    Archive archive;
    std::map<Timestamp, Topics> queries;
    std::map<Timestamp, std::vector<Observation>> qrels;
    FeedbackStore history; // every loaded judgment; lookups filter by time

    [[nodiscard]] std::vector<Timestamp> timestamps() const
    {
        std::vector<Timestamp> out;
        for (auto const &[ts, s] : archive) {
            out.push_back(ts);
        }
        return out;
    }
};

inline Analyzer make_analyzer(ExperimentConfig const &cfg)
{
    return cfg.stopwords.empty() ? Analyzer{} : Analyzer::from_stopword_file(cfg.stopwords.string());
}

inline Collection load_collection(ExperimentConfig const &cfg)
{
    Collection c;
    auto analyzer = make_analyzer(cfg);
    for (auto const &[ts, dir] : cfg.snapshots) {
        auto loaded = load_snapshot_dir(dir, ts);
        c.queries[ts] = std::move(loaded.queries);
        c.archive.emplace(ts, IndexedSnapshot::build(std::move(loaded.snapshot), analyzer));
    }
    for (auto const &[ts, path] : load_qrels_manifest(cfg.qrels_manifest)) {
        if (!c.archive.contains(ts)) {
            throw IntegrityError("qrels manifest lists timestamp " + ts
                                 + " which has no configured snapshot");
        }
        auto qrels = load_qrels(path, ts);
        c.history.add_all(qrels);
        c.qrels[ts] = std::move(qrels);
    }
    return c;
}

/// Queries at `ts` whose normalized text was issued at an earlier timestamp.
inline Topics reoccurring_queries(Collection const &c, Timestamp const &ts)
{
    std::set<std::string> earlier;
    for (auto const &[t, topics] : c.queries) {
        if (t < ts) {
            for (auto const &[qid, text] : topics) {
                earlier.insert(normalize_query(text));
            }
        }
    }
    Topics out;
    if (auto it = c.queries.find(ts); it != c.queries.end()) {
        for (auto const &[qid, text] : it->second) {
            if (earlier.contains(normalize_query(text))) {
                out.emplace(qid, text);
            }
        }
    }
    return out;
}

/// Timestamps after the first; each is evaluated on its re-occurring queries.
inline std::vector<Timestamp> evaluated_timestamps(Collection const &c)
{
    auto all = c.timestamps();
    if (!all.empty()) {
        all.erase(all.begin());
    }
    return all;
}

// ---------------------------------------------------------------------------
// Systems

/// Final query each system submits to the current index (boost and bm25 use
/// the original query).
inline WeightedQuery rewrite_query(std::string const &system, WeightedQuery const &query,
                                   Collection const &c, Timestamp const &now,
                                   ExperimentConfig const &cfg)
{
    if (system == "bm25-rm3") {
        return rm3_expand(c.archive.at(now).index, query, cfg.rm3, cfg.bm25);
    }
    if (system == "rf") {
        return rf_expand(query, c.history, c.archive, now, cfg.rf_terms);
    }
    if (system == "keyquery") {
        return keyquery_rewrite(query, c.history, c.archive, now, cfg.keyquery, cfg.bm25).query;
    }
    return query;
}

/// Searches the current index with an already rewritten query; boost
/// re-ranks the result.
inline Ranking rank_submitted(std::string const &system, std::string const &qid,
                              WeightedQuery const &submitted, Collection const &c,
                              Timestamp const &now, ExperimentConfig const &cfg)
{
    auto ranking = search(c.archive.at(now).index, submitted, cfg.depth, cfg.bm25);
    ranking.qid = qid;
    if (system == "boost") {
        ranking = boost_rerank(ranking, c.history, now, cfg.boost);
    }
    return ranking;
}

inline Ranking run_system(std::string const &system, WeightedQuery const &query,
                          Collection const &c, Timestamp const &now, ExperimentConfig const &cfg)
{
    return rank_submitted(system, query.qid(), rewrite_query(system, query, c, now, cfg), c, now,
                          cfg);
}

// ---------------------------------------------------------------------------
// Report

struct SystemScores {
    double ndcg = 0.0;
    double ndcg_condensed = 0.0;
    EvalReport ndcg_report;
    EvalReport condensed_report;
    EvalReport ablation_report;                 // nDCG' on never-seen documents
    std::map<std::string, double> ablation_gain; // per query: system − bm25
    double ablation_mean = 0.0;
    double ablation_std = 0.0;
    std::optional<SignificanceResult> ablation_test;
};

struct TimestampReport {
    Timestamp timestamp;
    std::vector<std::string> systems; // report order
    std::map<std::string, SystemScores> scores;
    // metric -> baseline -> system -> result
    std::map<std::string, std::map<std::string, std::map<std::string, SignificanceResult>>>
        significance;
};

struct ExperimentReport {
    std::vector<TimestampReport> timestamps;
    std::vector<std::string> warnings;
};

namespace detail {

    inline std::ofstream open_output(std::filesystem::path const &path)
    {
        if (path.has_parent_path()) {
            std::filesystem::create_directories(path.parent_path());
        }
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw Error("cannot write " + path.string());
        }
        return out;
    }

    inline Qrels restrict_qrels(std::vector<Observation> const &observations,
                                Topics const &queries)
    {
        Qrels out;
        for (auto const &o : observations) {
            if (queries.contains(o.qid)) {
                out[o.qid][o.doc_id] = o.rel;
            }
        }
        return out;
    }

    inline Run restrict_run(Run run, Topics const &queries)
    {
        std::erase_if(run.by_qid, [&](auto const &kv) { return !queries.contains(kv.first); });
        return run;
    }

    inline std::string marker_for(std::size_t baseline_position)
    {
        static char const *markers[] = {"†", "‡", "§", "¶"};
        return baseline_position < std::size(markers)
                   ? markers[baseline_position]
                   : "^" + std::to_string(baseline_position + 1);
    }

} // namespace detail

inline std::filesystem::path run_path(std::filesystem::path const &out, Timestamp const &ts,
                                      std::string const &system)
{
    return out / "runs" / ts / (system + ".run");
}

/// Evaluates the persisted runs of every evaluated timestamp and writes the
/// report tables. Reads only files and the collection, so it can be re-run
/// without searching.
inline ExperimentReport build_report(ExperimentConfig const &cfg, Collection const &c)
{
    ExperimentReport report;
    auto const &out = cfg.output_dir;
    std::vector<Snapshot const *> previous;
    auto all = c.timestamps();
    for (std::size_t i = 1; i < all.size(); ++i) {
        previous.push_back(&c.archive.at(all[i - 1]).snapshot);
        auto const &ts = all[i];
        auto queries = reoccurring_queries(c, ts);
        auto qrels_it = c.qrels.find(ts);
        Qrels qrels = qrels_it == c.qrels.end() ? Qrels{}
                                                : detail::restrict_qrels(qrels_it->second, queries);

        TimestampReport tr;
        tr.timestamp = ts;
        std::map<std::string, Run> runs;
        for (auto const &system : cfg.systems) {
            runs[system] = load_run(run_path(out, ts, system));
            tr.systems.push_back(system);
        }
        for (auto const &[ext_ts, path] : cfg.external_runs) {
            if (ext_ts != ts) {
                continue;
            }
            auto run = detail::restrict_run(load_run(path), queries);
            auto name = run.system_tag.empty() ? path.stem().string() : run.system_tag;
            if (runs.contains(name)) {
                throw IntegrityError("external run tag '" + name + "' collides with a system");
            }
            tr.systems.push_back(name);
            runs[name] = std::move(run);
        }

        std::map<std::string, EvalReport> plain, condensed, ablated;
        for (auto const &[system, run] : runs) {
            auto &s = tr.scores[system];
            s.ndcg_report = ndcg_at_k(run, qrels, cfg.cutoff, "ndcg");
            s.condensed_report = ndcg_at_k(condense_run(run, qrels), qrels, cfg.cutoff, "ndcg'");
            auto ab = ablation_filter_new(run, qrels, previous);
            s.ablation_report = ndcg_at_k(condense_run(ab.run, ab.qrels), ab.qrels, cfg.cutoff,
                                          "ndcg'-new");
            s.ndcg = s.ndcg_report.mean;
            s.ndcg_condensed = s.condensed_report.mean;
            plain[system] = s.ndcg_report;
            condensed[system] = s.condensed_report;
            ablated[system] = s.ablation_report;
        }

        auto num_comparisons = runs.size() > 1 ? runs.size() - 1 : 1;
        auto test = [&](std::map<std::string, EvalReport> const &reports,
                        std::string const &baseline) {
            std::map<std::string, SignificanceResult> results;
            if (!reports.contains(baseline)) {
                return results;
            }
            for (auto const &[system, r] : reports) {
                if (system == baseline) {
                    continue;
                }
                std::map<std::string, EvalReport> pair{{baseline, reports.at(baseline)},
                                                       {system, r}};
                try {
                    auto one = paired_ttest_bonferroni(pair, baseline, num_comparisons, cfg.alpha);
                    results.emplace(system, one.at(system));
                    if (one.at(system).degenerate && one.at(system).mean_difference != 0.0) {
                        report.warnings.push_back(ts + ": " + system + " vs " + baseline
                                                  + ": zero-variance differences, p set to 0");
                    }
                } catch (PreconditionError const &) {
                    report.warnings.push_back(ts + ": " + system + " vs " + baseline
                                              + ": fewer than two shared queries, no test");
                }
            }
            return results;
        };
        for (auto const &baseline : cfg.baselines) {
            tr.significance["ndcg"][baseline] = test(plain, baseline);
            tr.significance["ndcg'"][baseline] = test(condensed, baseline);
        }

        if (ablated.contains("bm25")) {
            auto const &base = ablated.at("bm25").per_query;
            for (auto const &[system, r] : ablated) {
                if (system == "bm25") {
                    continue;
                }
                auto &s = tr.scores[system];
                std::vector<double> diffs;
                for (auto const &[qid, v] : r.per_query) {
                    if (auto b = base.find(qid); b != base.end()) {
                        s.ablation_gain[qid] = v - b->second;
                        diffs.push_back(v - b->second);
                    }
                }
                if (!diffs.empty()) {
                    double sum = 0.0;
                    for (double d : diffs) {
                        sum += d;
                    }
                    s.ablation_mean = sum / static_cast<double>(diffs.size());
                    double ss = 0.0;
                    for (double d : diffs) {
                        ss += (d - s.ablation_mean) * (d - s.ablation_mean);
                    }
                    s.ablation_std = diffs.size() > 1
                                         ? std::sqrt(ss / static_cast<double>(diffs.size() - 1))
                                         : 0.0;
                }
                if (diffs.size() >= 2) {
                    auto t = paired_ttest(diffs);
                    t.p_adjusted = bonferroni(t.p_raw, num_comparisons);
                    t.significant = t.p_adjusted < cfg.alpha;
                    s.ablation_test = t;
                }
            }
        }
        report.timestamps.push_back(std::move(tr));
    }

    // per-query reports
    for (auto const &tr : report.timestamps) {
        for (auto const &system : tr.systems) {
            auto const &s = tr.scores.at(system);
            auto dir = out / "eval" / tr.timestamp;
            auto f1 = detail::open_output(dir / (system + ".ndcg.tsv"));
            write_report(s.ndcg_report, f1);
            auto f2 = detail::open_output(dir / (system + ".ndcg_condensed.tsv"));
            write_report(s.condensed_report, f2);
            auto f3 = detail::open_output(dir / (system + ".ablation.tsv"));
            write_report(s.ablation_report, f3);
        }
    }

    auto cell = [&](TimestampReport const &tr, std::string const &metric,
                    std::string const &system, double value) {
        std::string text = format_fixed(value, 3);
        auto m = tr.significance.find(metric);
        for (std::size_t b = 0; b < cfg.baselines.size(); ++b) {
            if (m == tr.significance.end()) {
                break;
            }
            auto base = m->second.find(cfg.baselines[b]);
            if (base == m->second.end()) {
                continue;
            }
            auto r = base->second.find(system);
            if (r != base->second.end() && r->second.significant) {
                text += detail::marker_for(b);
            }
        }
        return text;
    };

    // effectiveness table: nDCG@k and condensed nDCG@k per timestamp
    {
        auto f = detail::open_output(out / "effectiveness.tsv");
        f << "system";
        for (auto const &tr : report.timestamps) {
            f << "\tndcg@" << cfg.cutoff << ':' << tr.timestamp;
        }
        for (auto const &tr : report.timestamps) {
            f << "\tndcg'@" << cfg.cutoff << ':' << tr.timestamp;
        }
        f << '\n';
        std::vector<std::string> order;
        for (auto const &tr : report.timestamps) {
            for (auto const &s : tr.systems) {
                if (std::find(order.begin(), order.end(), s) == order.end()) {
                    order.push_back(s);
                }
            }
        }
        for (auto const &system : order) {
            f << system;
            for (auto const &tr : report.timestamps) {
                auto it = tr.scores.find(system);
                f << '\t' << (it == tr.scores.end() ? "-" : cell(tr, "ndcg", system, it->second.ndcg));
            }
            for (auto const &tr : report.timestamps) {
                auto it = tr.scores.find(system);
                f << '\t'
                  << (it == tr.scores.end() ? "-"
                                            : cell(tr, "ndcg'", system, it->second.ndcg_condensed));
            }
            f << '\n';
        }
    }

    // ablation table: mean (± std) gain over bm25 on never-seen documents
    {
        auto f = detail::open_output(out / "ablation.tsv");
        f << "system";
        for (auto const &tr : report.timestamps) {
            f << '\t' << tr.timestamp;
        }
        f << '\n';
        std::vector<std::string> order;
        for (auto const &tr : report.timestamps) {
            for (auto const &s : tr.systems) {
                if (s != "bm25" && std::find(order.begin(), order.end(), s) == order.end()) {
                    order.push_back(s);
                }
            }
        }
        for (auto const &system : order) {
            f << system;
            for (auto const &tr : report.timestamps) {
                auto it = tr.scores.find(system);
                if (it == tr.scores.end() || !tr.scores.contains("bm25")) {
                    f << "\t-";
                    continue;
                }
                auto const &s = it->second;
                f << '\t' << format_fixed(s.ablation_mean, 3, true) << "±"
                  << format_fixed(s.ablation_std, 3)
                  << (s.ablation_test && s.ablation_test->significant ? "*" : "");
            }
            f << '\n';
        }
        auto d = detail::open_output(out / "ablation_per_query.tsv");
        d << "timestamp\tsystem\tqid\tgain\n";
        for (auto const &tr : report.timestamps) {
            for (auto const &system : tr.systems) {
                for (auto const &[qid, g] : tr.scores.at(system).ablation_gain) {
                    d << tr.timestamp << '\t' << system << '\t' << qid << '\t' << format_real(g)
                      << '\n';
                }
            }
        }
    }

    // significance table (long form) and one comparison table per timestamp
    {
        auto f = detail::open_output(out / "significance.tsv");
        f << "timestamp\tmetric\tbaseline\tsystem\tmean\tp_raw\tp_adjusted\tmarker\n";
        for (auto const &tr : report.timestamps) {
            for (auto const &[metric, by_base] : tr.significance) {
                for (std::size_t b = 0; b < cfg.baselines.size(); ++b) {
                    auto base = by_base.find(cfg.baselines[b]);
                    if (base == by_base.end()) {
                        continue;
                    }
                    for (auto const &system : tr.systems) {
                        auto r = base->second.find(system);
                        if (r == base->second.end()) {
                            continue;
                        }
                        auto const &s = tr.scores.at(system);
                        double mean = metric == "ndcg" ? s.ndcg : s.ndcg_condensed;
                        f << tr.timestamp << '\t' << metric << '\t' << cfg.baselines[b] << '\t'
                          << system << '\t' << format_real(mean) << '\t'
                          << format_real(r->second.p_raw) << '\t'
                          << format_real(r->second.p_adjusted) << '\t'
                          << (r->second.significant ? detail::marker_for(b) : "") << '\n';
                    }
                }
            }
        }
        for (auto const &tr : report.timestamps) {
            auto t = detail::open_output(out / "tables" / (tr.timestamp + ".tsv"));
            t << "system\tndcg@" << cfg.cutoff << "\tndcg'@" << cfg.cutoff
              << "\tablation_gain\tqueries\n";
            for (auto const &system : tr.systems) {
                auto const &s = tr.scores.at(system);
                t << system << '\t' << cell(tr, "ndcg", system, s.ndcg) << '\t'
                  << cell(tr, "ndcg'", system, s.ndcg_condensed) << '\t'
                  << (system == "bm25" ? std::string("-") : format_fixed(s.ablation_mean, 3, true))
                  << '\t' << s.ndcg_report.per_query.size() << '\n';
            }
        }
    }

    // corpus drift and query overlap
    {
        std::vector<ChangeSet> changes;
        auto summary = detail::open_output(out / "changes.tsv");
        summary << "older\tnewer\tcreated\tdeleted\tupdated\tunchanged\n";
        for (std::size_t i = 1; i < all.size(); ++i) {
            changes.push_back(
                diff_snapshots(c.archive.at(all[i - 1]).snapshot, c.archive.at(all[i]).snapshot));
            auto const &cs = changes.back();
            summary << cs.older << '\t' << cs.newer << '\t' << cs.created.size() << '\t'
                    << cs.deleted.size() << '\t' << cs.updated.size() << '\t'
                    << cs.unchanged.size() << '\n';
        }
        auto ecdf = detail::open_output(out / "similarity_ecdf.tsv");
        write_ecdf(similarity_profile(changes), ecdf);
        std::map<Timestamp, std::set<std::string>> topic_sets;
        for (auto const &[ts, topics] : c.queries) {
            auto &set = topic_sets[ts];
            for (auto const &[qid, text] : topics) {
                set.insert(text);
            }
        }
        auto overlap = detail::open_output(out / "query_overlap.tsv");
        write_overlap(query_overlap(topic_sets), overlap);
    }

    if (!report.warnings.empty()) {
        auto w = detail::open_output(out / "warnings.txt");
        for (auto const &msg : report.warnings) {
            w << msg << '\n';
        }
    }
    return report;
}

/// Runs every configured system on every evaluated timestamp, persists runs
/// and rewrites, then builds the report from the persisted runs. On failure an
/// `INCOMPLETE` marker describing the error is left in the output directory.
inline ExperimentReport run_experiment(ExperimentConfig const &cfg)
{
    cfg.validate();
    auto const &out = cfg.output_dir;
    std::filesystem::create_directories(out);
    auto marker = out / "INCOMPLETE";
    std::filesystem::remove(marker);
    try {
        auto c = load_collection(cfg);
        std::vector<std::string> warnings;
        for (auto const &ts : evaluated_timestamps(c)) {
            auto queries = reoccurring_queries(c, ts);
            auto const &analyzer = c.archive.at(ts).index.analyzer();
            for (auto const &system : cfg.systems) {
                Run run{system, {}};
                std::map<std::string, WeightedQuery> rewrites;
                for (auto const &[qid, text] : queries) {
                    WeightedQuery query;
                    try {
                        query = WeightedQuery::from_text(qid, text, analyzer);
                    } catch (PreconditionError const &) {
                        warnings.push_back(ts + ": query " + qid + " has no terms; skipped");
                        continue;
                    }
                    auto submitted = rewrite_query(system, query, c, ts, cfg);
                    run.add(rank_submitted(system, qid, submitted, c, ts, cfg));
                    if (system == "bm25-rm3" || system == "rf" || system == "keyquery") {
                        rewrites.emplace(qid, std::move(submitted));
                    }
                }
                auto f = detail::open_output(run_path(out, ts, system));
                write_run(run, f);
                if (!rewrites.empty()) {
                    auto r = detail::open_output(out / "rewrites" / ts / (system + ".tsv"));
                    write_rewrites(rewrites, r);
                }
            }
        }
        auto report = build_report(cfg, c);
        if (!warnings.empty()) {
            report.warnings.insert(report.warnings.begin(), warnings.begin(), warnings.end());
            auto w = detail::open_output(out / "warnings.txt");
            for (auto const &msg : report.warnings) {
                w << msg << '\n';
            }
        }
        return report;
    } catch (std::exception const &e) {
        auto f = detail::open_output(marker);
        f << e.what() << '\n';
        throw;
    }
}

/// Writes a config file pointing at a collection produced by the testkit.
inline void write_experiment_config(std::filesystem::path const &path,
                                    std::vector<Timestamp> const &timestamps)
{
    auto f = detail::open_output(path);
    f << "# generated collection\n";
    for (auto const &ts : timestamps) {
        f << "snapshot = " << ts << '=' << ts << '\n';
    }
    f << "qrels_manifest = qrels.manifest\n";
    f << "systems = bm25,bm25-rm3,boost,rf,keyquery\n";
    f << "lambda = 0.7\nmu = 2\nk = 10\ntop_k = 10\nmin_results = 25\n";
    f << "fb_docs = 3\nfb_terms = 10\norig_weight = 0.5\ncutoff = 10\n";
}

} // namespace hrf

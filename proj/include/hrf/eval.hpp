#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "hrf/corpus_store.hpp"
#include "hrf/error.hpp"
#include "hrf/format.hpp"
#include "hrf/history.hpp"
#include "hrf/index.hpp"

namespace hrf {

struct RunEntry {
    std::string doc_id;
    std::size_t rank;
    double score;

    bool operator==(RunEntry const &) const = default;
};

/// TREC-style run: per qid, entries with contiguous ranks from 1.
struct Run {
    std::string system_tag;
    std::map<std::string, std::vector<RunEntry>> by_qid;

    void add(Ranking const &ranking)
    {
        auto &entries = by_qid[ranking.qid];
        entries.clear();
        for (auto const &e : ranking.entries) {
            entries.push_back({e.doc_id, e.rank, e.score});
        }
    }

    [[nodiscard]] std::size_t size() const noexcept
    {
        std::size_t n = 0;
        for (auto const &[q, e] : by_qid) {
            n += e.size();
        }
        return n;
    }

    bool operator==(Run const &) const = default;
};

/// qid -> doc_id -> grade
using Qrels = std::map<std::string, std::map<std::string, int>>;

inline Qrels to_qrels(std::vector<Observation> const &observations)
{
    Qrels q;
    for (auto const &o : observations) {
        q[o.qid][o.doc_id] = o.rel;
    }
    return q;
}

// ---------------------------------------------------------------------------
// TREC run files

/// Parses `qid Q0 docno rank score tag`. Entries are ordered by rank and
/// renumbered from 1 when a producer counted from 0.
inline Run load_run(std::istream &in, std::string const &source = "<run>")
{
    Run run;
    std::map<std::string, std::set<std::string>> docs_seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream fields(line);
        std::vector<std::string> parts;
        for (std::string f; fields >> f;) {
            parts.push_back(std::move(f));
        }
        if (parts.empty()) {
            continue;
        }
        if (parts.size() != 6) {
            throw ParseError(source, line_no, "expected 'qid Q0 docno rank score tag'");
        }
        RunEntry entry{parts[2], 0, 0.0};
        if (!parse_int(parts[3], entry.rank)) {
            throw ParseError(source, line_no, "rank is not a non-negative integer: " + parts[3]);
        }
        if (!parse_real(parts[4], entry.score)) {
            throw ParseError(source, line_no, "score is not a number: " + parts[4]);
        }
        if (run.system_tag.empty()) {
            run.system_tag = parts[5];
        } else if (run.system_tag != parts[5]) {
            throw IntegrityError(source + ":" + std::to_string(line_no)
                                 + ": run mixes system tags " + run.system_tag + " and "
                                 + parts[5]);
        }
        if (!docs_seen[parts[0]].insert(entry.doc_id).second) {
            throw IntegrityError(source + ":" + std::to_string(line_no) + ": document "
                                 + entry.doc_id + " listed twice for query " + parts[0]);
        }
        run.by_qid[parts[0]].push_back(std::move(entry));
    }
    for (auto &[qid, entries] : run.by_qid) {
        std::stable_sort(entries.begin(), entries.end(),
                         [](auto const &a, auto const &b) { return a.rank < b.rank; });
        for (std::size_t i = 0; i < entries.size(); ++i) {
            entries[i].rank = i + 1;
            if (i > 0 && entries[i].score > entries[i - 1].score) {
                throw IntegrityError(source + ": scores increase with rank for query " + qid);
            }
        }
    }
    return run;
}

inline Run load_run(std::filesystem::path const &path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open run file " + path.string());
    }
    return load_run(in, path.string());
}

inline void write_run(Run const &run, std::ostream &out)
{
    auto tag = run.system_tag.empty() ? std::string("hrf") : run.system_tag;
    for (auto const &[qid, entries] : run.by_qid) {
        for (auto const &e : entries) {
            out << qid << " Q0 " << e.doc_id << ' ' << e.rank << ' ' << format_real(e.score) << ' '
                << tag << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// nDCG

struct EvalReport {
    std::string metric;
    std::size_t k = 10;
    std::map<std::string, double> per_query;
    double mean = 0.0;
    std::vector<std::string> missing_qrels;      // run qids without judgments
    std::vector<std::string> without_positives;  // judged qids lacking rel > 0
};

inline double dcg(std::vector<int> const &gains, std::size_t k)
{
    double sum = 0.0;
    for (std::size_t i = 0; i < gains.size() && i < k; ++i) {
        sum += static_cast<double>(gains[i]) / std::log2(static_cast<double>(i) + 2.0);
    }
    return sum;
}

/// Linear-gain nDCG@k. Judged queries absent from the run score 0; queries
/// without positive judgments are left out of the mean.
inline EvalReport ndcg_at_k(Run const &run, Qrels const &qrels, std::size_t k = 10,
                            std::string metric = "ndcg")
{
    if (k == 0) {
        throw PreconditionError("ndcg cutoff must be at least 1");
    }
    EvalReport report{std::move(metric), k, {}, 0.0, {}, {}};
    for (auto const &[qid, entries] : run.by_qid) {
        if (!qrels.contains(qid)) {
            report.missing_qrels.push_back(qid);
        }
    }
    static std::vector<RunEntry> const no_entries;
    for (auto const &[qid, judged] : qrels) {
        std::vector<int> ideal;
        for (auto const &[doc, rel] : judged) {
            if (rel > 0) {
                ideal.push_back(rel);
            }
        }
        if (ideal.empty()) {
            report.without_positives.push_back(qid);
            continue;
        }
        std::sort(ideal.rbegin(), ideal.rend());
        auto it = run.by_qid.find(qid);
        auto const &entries = it == run.by_qid.end() ? no_entries : it->second;
        std::vector<int> gains;
        for (std::size_t i = 0; i < entries.size() && i < k; ++i) {
            auto j = judged.find(entries[i].doc_id);
            gains.push_back(j == judged.end() ? 0 : std::max(j->second, 0));
        }
        report.per_query[qid] = dcg(gains, k) / dcg(ideal, k);
    }
    if (!report.per_query.empty()) {
        double sum = 0.0;
        for (auto const &[q, v] : report.per_query) {
            sum += v;
        }
        report.mean = sum / static_cast<double>(report.per_query.size());
    }
    return report;
}

/// Drops unjudged entries and re-ranks contiguously; queries left empty are
/// removed.
inline Run condense_run(Run const &run, Qrels const &qrels)
{
    Run out{run.system_tag, {}};
    for (auto const &[qid, entries] : run.by_qid) {
        auto judged = qrels.find(qid);
        if (judged == qrels.end()) {
            continue;
        }
        std::vector<RunEntry> kept;
        for (auto const &e : entries) {
            if (judged->second.contains(e.doc_id)) {
                kept.push_back({e.doc_id, kept.size() + 1, e.score});
            }
        }
        if (!kept.empty()) {
            out.by_qid.emplace(qid, std::move(kept));
        }
    }
    return out;
}

inline void write_report(EvalReport const &report, std::ostream &out)
{
    out << "qid\t" << report.metric << '@' << report.k << '\n';
    for (auto const &[qid, v] : report.per_query) {
        out << qid << '\t' << format_real(v) << '\n';
    }
    out << "all\t" << format_real(report.mean) << '\n';
}

// ---------------------------------------------------------------------------
// Significance

struct SignificanceResult {
    std::size_t n = 0;
    double mean_difference = 0.0;
    double t_statistic = 0.0; // NaN when the differences have zero variance
    double p_raw = 1.0;
    double p_adjusted = 1.0;
    bool significant = false;
    bool degenerate = false; // zero-variance differences
};

/// Two-sided paired t-test p-value of per-query differences.
inline SignificanceResult paired_ttest(std::vector<double> const &differences)
{
    SignificanceResult r;
    r.n = differences.size();
    if (r.n < 2) {
        throw PreconditionError("paired t-test needs at least two shared queries");
    }
    auto n = static_cast<double>(r.n);
    double sum = 0.0;
    for (double d : differences) {
        sum += d;
    }
    double mean = sum / n;
    double ss = 0.0;
    for (double d : differences) {
        ss += (d - mean) * (d - mean);
    }
    double sd = std::sqrt(ss / (n - 1.0));
    r.mean_difference = mean;
    bool constant = std::all_of(differences.begin(), differences.end(),
                                [&](double d) { return d == differences.front(); });
    if (constant || sd == 0.0) {
        r.degenerate = true;
        r.t_statistic = std::numeric_limits<double>::quiet_NaN();
        r.p_raw = mean == 0.0 ? 1.0 : 0.0;
        return r;
    }
    r.t_statistic = mean / (sd / std::sqrt(n));
    boost::math::students_t dist(n - 1.0);
    r.p_raw = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t_statistic)));
    r.p_raw = std::min(r.p_raw, 1.0);
    return r;
}

inline double bonferroni(double p_raw, std::size_t num_comparisons)
{
    return std::min(1.0, p_raw * static_cast<double>(num_comparisons));
}

/// Paired t-test of every system against `baseline` on their shared
/// queries, Bonferroni-corrected for `num_comparisons`.
inline std::map<std::string, SignificanceResult>
paired_ttest_bonferroni(std::map<std::string, EvalReport> const &reports,
                        std::string const &baseline, std::size_t num_comparisons,
                        double alpha = 0.05)
{
    if (num_comparisons == 0) {
        throw PreconditionError("num_comparisons must be at least 1");
    }
    auto base = reports.find(baseline);
    if (base == reports.end()) {
        throw PreconditionError("no report for baseline system " + baseline);
    }
    std::map<std::string, SignificanceResult> out;
    for (auto const &[system, report] : reports) {
        if (system == baseline) {
            continue;
        }
        std::vector<double> diffs;
        for (auto const &[qid, v] : report.per_query) {
            if (auto b = base->second.per_query.find(qid); b != base->second.per_query.end()) {
                diffs.push_back(v - b->second);
            }
        }
        auto r = paired_ttest(diffs);
        r.p_adjusted = bonferroni(r.p_raw, num_comparisons);
        r.significant = r.p_adjusted < alpha;
        out.emplace(system, r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Never-seen-document ablation

struct AblatedPair {
    Run run;
    Qrels qrels;
};

/// Removes every document that occurs in any earlier snapshot from both the
/// run (re-ranking contiguously) and the qrels.
inline AblatedPair ablation_filter_new(Run const &run, Qrels const &qrels,
                                       std::vector<Snapshot const *> const &previous)
{
    if (previous.empty()) {
        throw PreconditionError("ablation needs at least one previous snapshot");
    }
    auto seen = [&](std::string const &doc) {
        return std::any_of(previous.begin(), previous.end(),
                           [&](Snapshot const *s) { return s->contains(doc); });
    };
    AblatedPair out{Run{run.system_tag, {}}, {}};
    for (auto const &[qid, entries] : run.by_qid) {
        std::vector<RunEntry> kept;
        for (auto const &e : entries) {
            if (!seen(e.doc_id)) {
                kept.push_back({e.doc_id, kept.size() + 1, e.score});
            }
        }
        if (!kept.empty()) {
            out.run.by_qid.emplace(qid, std::move(kept));
        }
    }
    for (auto const &[qid, judged] : qrels) {
        std::map<std::string, int> kept;
        for (auto const &[doc, rel] : judged) {
            if (!seen(doc)) {
                kept.emplace(doc, rel);
            }
        }
        if (!kept.empty()) {
            out.qrels.emplace(qid, std::move(kept));
        }
    }
    return out;
}

inline AblatedPair ablation_filter_new(Run const &run, Qrels const &qrels,
                                       std::vector<Snapshot> const &previous)
{
    std::vector<Snapshot const *> ptrs;
    for (auto const &s : previous) {
        ptrs.push_back(&s);
    }
    return ablation_filter_new(run, qrels, ptrs);
}

} // namespace hrf

#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "hrf/corpus_store.hpp"
#include "hrf/error.hpp"
#include "hrf/eval.hpp"
#include "hrf/history.hpp"
#include "hrf/index.hpp"

namespace hrf {

/// A snapshot together with its index.
struct IndexedSnapshot {
    Snapshot snapshot;
    InvertedIndex index;

    static IndexedSnapshot build(Snapshot snapshot, Analyzer analyzer = {})
    {
        auto index = build_index(snapshot, std::move(analyzer));
        return {std::move(snapshot), std::move(index)};
    }
};

/// Every snapshot of the collection, by timestamp.
using Archive = std::map<Timestamp, IndexedSnapshot>;

// ---------------------------------------------------------------------------
// Boosting

struct BoostParams {
    double lambda = 0.7;
    double mu = 2.0;

    void validate() const
    {
        if (!(lambda > 0.0 && lambda < 1.0)) {
            throw ConfigError("boost lambda must lie strictly inside (0, 1)");
        }
        if (!(mu > 0.0)) {
            throw ConfigError("boost mu must be positive");
        }
    }
};

/// Per-observation factor: (1-λ)² for rel 0, λ² for rel 1, λ²·μ for rel 2.
inline double boost_factor(int rel, BoostParams const &p)
{
    switch (rel) {
    case 0:
        return (1.0 - p.lambda) * (1.0 - p.lambda);
    case 1:
        return p.lambda * p.lambda;
    case 2:
        return p.lambda * p.lambda * p.mu;
    default:
        throw RangeError("relevance grade " + std::to_string(rel) + " outside {0, 1, 2}");
    }
}

inline double boost_multiplier(std::span<Observation const> observations, BoostParams const &p)
{
    double m = 1.0;
    for (auto const &o : observations) {
        m *= boost_factor(o.rel, p);
    }
    return m;
}

/// Rescales each score by the product of its observation factors before
/// `now`, then re-sorts. Documents without history keep their score.
inline Ranking boost_rerank(Ranking const &ranking, FeedbackStore const &store,
                            Timestamp const &now, BoostParams const &params = {})
{
    params.validate();
    Ranking out = ranking;
    for (auto &e : out.entries) {
        auto history = store.observations_for(ranking.qid, e.doc_id, now);
        if (!history.empty()) {
            e.score = e.score * boost_multiplier(history, params);
        }
    }
    sort_ranking(out);
    return out;
}

// ---------------------------------------------------------------------------
// Feedback documents

struct FeedbackDoc {
    DocumentVersion version; // text as of the most recent positive judgment
    int grade;               // grade given at that judgment
};

/// Resolves D+ for `qid` before `now` to concrete document versions from the
/// archive, ordered by doc_id.
inline std::vector<FeedbackDoc> feedback_documents(FeedbackStore const &store,
                                                   std::string const &qid, Archive const &archive,
                                                   Timestamp const &now)
{
    std::vector<FeedbackDoc> out;
    for (auto const &[doc_id, latest] : store.latest_positives(qid, now)) {
        auto const &[ts, grade] = latest;
        auto snap = archive.find(ts);
        if (snap == archive.end()) {
            throw IntegrityError("feedback for " + qid + "/" + doc_id + " observed at " + ts
                                 + " but no snapshot exists for that timestamp");
        }
        auto const *doc = snap->second.snapshot.find(doc_id);
        if (doc == nullptr) {
            throw IntegrityError("feedback document " + doc_id + " (query " + qid
                                 + ") is missing from snapshot " + ts);
        }
        out.push_back({*doc, grade});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Relevance-feedback expansion

/// Appends the `k` highest tf-idf terms of D+ with weight 1 each. Statistics
/// come from the index of the most recent timestamp among the feedback
/// versions. Without feedback the query is returned unchanged.
inline WeightedQuery rf_expand(WeightedQuery const &query, FeedbackStore const &store,
                               Archive const &archive, Timestamp const &now, std::size_t k = 10)
{
    if (k == 0) {
        throw PreconditionError("rf_expand: k must be at least 1");
    }
    auto feedback = feedback_documents(store, query.qid(), archive, now);
    if (feedback.empty()) {
        return query;
    }
    std::vector<std::string> texts;
    Timestamp stats_ts;
    for (auto const &f : feedback) {
        texts.push_back(f.version.text);
        stats_ts = std::max(stats_ts, f.version.timestamp);
    }
    auto const &index = archive.at(stats_ts).index;
    WeightedQuery out = query;
    for (auto const &[term, score] : tfidf_terms(std::span<std::string const>(texts), index, k)) {
        out.add(term, 1.0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Keyqueries

struct KeyqueryParams {
    std::size_t top_k = 10;
    std::size_t min_results = 25;
    std::size_t vocab_size = 10;
    std::size_t max_candidate_terms = 3;
    std::size_t ndcg_cutoff = 10;

    void validate() const
    {
        if (top_k == 0 || ndcg_cutoff == 0) {
            throw ConfigError("keyquery top_k and ndcg cutoff must be at least 1");
        }
    }

    [[nodiscard]] std::size_t search_depth() const
    {
        return std::max({top_k, min_results + 1, ndcg_cutoff});
    }
};

struct KeyqueryCandidate {
    WeightedQuery query;
    std::vector<std::size_t> term_subset; // ascending positions in the vocabulary
    std::size_t generation_index = 0;
};

/// Candidate 0 is the query itself; then the query extended by every subset
/// of `vocabulary` with 1..max_candidate_terms members, by size and then
/// lexicographically by member positions.
inline std::vector<KeyqueryCandidate> generate_candidates(WeightedQuery const &query,
                                                          std::span<std::string const> vocabulary,
                                                          KeyqueryParams const &params)
{
    std::vector<KeyqueryCandidate> out;
    out.push_back({query, {}, 0});
    auto n = vocabulary.size();
    auto max_size = std::min(params.max_candidate_terms, n);
    for (std::size_t size = 1; size <= max_size; ++size) {
        std::vector<std::size_t> pick(size);
        for (std::size_t i = 0; i < size; ++i) {
            pick[i] = i;
        }
        while (true) {
            WeightedQuery q = query;
            for (auto i : pick) {
                q.add(vocabulary[i], 1.0);
            }
            out.push_back({std::move(q), pick, out.size()});
            // advance to the next combination in lexicographic order
            std::size_t i = size;
            while (i > 0 && pick[i - 1] == n - size + (i - 1)) {
                --i;
            }
            if (i == 0) {
                break;
            }
            ++pick[i - 1];
            for (std::size_t j = i; j < size; ++j) {
                pick[j] = pick[j - 1] + 1;
            }
        }
    }
    return out;
}

struct KeyqueryCheck {
    bool all_targets_in_top_k = false; // criterion (i)
    bool enough_results = false;       // criterion (ii)
    std::size_t result_count = 0;
    std::map<std::string, std::size_t> target_ranks; // 0: not within search depth
    Ranking ranking;

    [[nodiscard]] bool satisfied() const noexcept
    {
        return all_targets_in_top_k && enough_results;
    }
};

inline KeyqueryCheck is_keyquery(WeightedQuery const &candidate,
                                 std::span<std::string const> targets, InvertedIndex const &index,
                                 KeyqueryParams const &params, Bm25Params const &bm25 = {})
{
    if (targets.empty()) {
        throw PreconditionError("is_keyquery: target set is empty");
    }
    for (auto const &t : targets) {
        if (!index.find_doc(t)) {
            throw PreconditionError("is_keyquery: target " + t + " is not in the index");
        }
    }
    KeyqueryCheck check;
    check.ranking = search(index, candidate, params.search_depth(), bm25);
    check.result_count = check.ranking.total_matches;
    check.enough_results = check.result_count > params.min_results;
    check.all_targets_in_top_k = true;
    for (auto const &t : targets) {
        std::size_t rank = 0;
        for (auto const &e : check.ranking.entries) {
            if (e.doc_id == t) {
                rank = e.rank;
                break;
            }
        }
        check.target_ranks[t] = rank;
        if (rank == 0 || rank > params.top_k) {
            check.all_targets_in_top_k = false;
        }
    }
    return check;
}

struct KeyquerySelection {
    WeightedQuery query;                      // selected keyquery, or the original on fallback
    std::optional<std::size_t> chosen;        // generation index of the selected candidate
    double ndcg = 0.0;                        // nDCG on D+ of the selected candidate
    std::vector<KeyqueryCheck> checks;        // one per candidate
    std::vector<bool> is_keyquery;            // (i), (ii) and minimality
    std::vector<double> candidate_ndcg;       // nDCG on D+ per candidate

    [[nodiscard]] bool fallback() const noexcept { return !chosen.has_value(); }
};

/// Evaluates every candidate, keeps the minimal ones satisfying (i) and (ii)
/// and returns the one with the highest nDCG on the graded targets (ties:
/// lowest generation index). Returns the first candidate's query when no
/// keyquery exists.
inline KeyquerySelection select_keyquery(std::span<KeyqueryCandidate const> candidates,
                                         std::map<std::string, int> const &graded_targets,
                                         InvertedIndex const &index, KeyqueryParams const &params,
                                         Bm25Params const &bm25 = {})
{
    if (candidates.empty()) {
        throw PreconditionError("select_keyquery: no candidates");
    }
    params.validate();
    std::vector<std::string> targets;
    for (auto const &[doc, grade] : graded_targets) {
        targets.push_back(doc);
    }
    Qrels target_qrels;
    KeyquerySelection sel;
    sel.query = candidates.front().query;
    for (auto const &c : candidates) {
        sel.checks.push_back(is_keyquery(c.query, targets, index, params, bm25));
        Run run;
        auto ranking = sel.checks.back().ranking;
        ranking.qid = "q";
        run.add(ranking);
        target_qrels["q"] = graded_targets;
        sel.candidate_ndcg.push_back(ndcg_at_k(run, target_qrels, params.ndcg_cutoff).mean);
    }
    auto is_strict_subset = [](std::vector<std::size_t> const &a,
                               std::vector<std::size_t> const &b) {
        return a.size() < b.size() && std::includes(b.begin(), b.end(), a.begin(), a.end());
    };
    sel.is_keyquery.assign(candidates.size(), false);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!sel.checks[i].satisfied()) {
            continue;
        }
        bool minimal = true;
        for (std::size_t j = 0; j < candidates.size() && minimal; ++j) {
            if (j != i && sel.checks[j].satisfied()
                && is_strict_subset(candidates[j].term_subset, candidates[i].term_subset)) {
                minimal = false;
            }
        }
        sel.is_keyquery[i] = minimal;
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!sel.is_keyquery[i]) {
            continue;
        }
        bool better = !sel.chosen || sel.candidate_ndcg[i] > sel.ndcg
                      || (sel.candidate_ndcg[i] == sel.ndcg
                          && candidates[i].generation_index
                                 < candidates[*sel.chosen].generation_index);
        if (better) {
            sel.chosen = i;
            sel.ndcg = sel.candidate_ndcg[i];
        }
    }
    if (sel.chosen) {
        sel.query = candidates[*sel.chosen].query;
        sel.chosen = candidates[*sel.chosen].generation_index;
    }
    return sel;
}

/// The current snapshot plus counterfactual copies of feedback documents it
/// no longer contains. The current version wins on doc_id collisions.
inline InvertedIndex build_union_index(IndexedSnapshot const &current,
                                       std::span<FeedbackDoc const> feedback)
{
    std::vector<DocumentVersion> extra;
    for (auto const &f : feedback) {
        if (!current.snapshot.contains(f.version.doc_id)) {
            auto copy = f.version;
            copy.timestamp = current.snapshot.timestamp();
            extra.push_back(std::move(copy));
        }
    }
    if (extra.empty()) {
        return current.index;
    }
    auto docs = current.snapshot.documents();
    docs.insert(docs.end(), std::make_move_iterator(extra.begin()),
                std::make_move_iterator(extra.end()));
    return build_index(Snapshot(current.snapshot.timestamp(), std::move(docs)),
                       current.index.analyzer());
}

/// Candidate vocabulary: the most probable relevance-model terms of the
/// target documents (uniformly weighted), excluding terms already in the
/// query.
inline std::vector<std::string> keyquery_vocabulary(InvertedIndex const &index,
                                                    WeightedQuery const &query,
                                                    std::span<std::string const> targets,
                                                    std::size_t vocab_size)
{
    std::vector<std::pair<DocId, double>> feedback;
    for (auto const &t : targets) {
        auto doc = index.find_doc(t);
        if (!doc) {
            throw PreconditionError("keyquery target " + t + " is not in the index");
        }
        feedback.emplace_back(*doc, 1.0);
    }
    auto model = relevance_model(index, feedback, std::numeric_limits<std::size_t>::max());
    std::vector<std::string> vocab;
    for (auto const &[term, p] : model) {
        if (vocab.size() == vocab_size) {
            break;
        }
        if (!query.contains(term)) {
            vocab.push_back(term);
        }
    }
    return vocab;
}

/// Full keyquery rewrite of `query` at timestamp `now`: D+ resolution, union
/// index, vocabulary, enumeration and selection.
inline KeyquerySelection keyquery_rewrite(WeightedQuery const &query, FeedbackStore const &store,
                                          Archive const &archive, Timestamp const &now,
                                          KeyqueryParams const &params = {},
                                          Bm25Params const &bm25 = {})
{
    auto current = archive.find(now);
    if (current == archive.end()) {
        throw PreconditionError("no snapshot for timestamp " + now);
    }
    auto feedback = feedback_documents(store, query.qid(), archive, now);
    if (feedback.empty()) {
        KeyquerySelection sel;
        sel.query = query;
        return sel;
    }
    auto union_index = build_union_index(current->second, feedback);
    std::map<std::string, int> graded;
    std::vector<std::string> targets;
    for (auto const &f : feedback) {
        graded.emplace(f.version.doc_id, f.grade);
        targets.push_back(f.version.doc_id);
    }
    auto vocab = keyquery_vocabulary(union_index, query, targets, params.vocab_size);
    auto candidates = generate_candidates(query, vocab, params);
    return select_keyquery(candidates, graded, union_index, params, bm25);
}

/// `qid<TAB>term term ...`, weights dropped.
inline void write_rewrites(std::map<std::string, WeightedQuery> const &rewrites, std::ostream &out)
{
    for (auto const &[qid, q] : rewrites) {
        out << qid << '\t' << q.to_text() << '\n';
    }
}

} // namespace hrf

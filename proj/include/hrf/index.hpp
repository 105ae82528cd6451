#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrf/corpus_store.hpp"
#include "hrf/error.hpp"
#include "hrf/text.hpp"

namespace hrf {

using DocId = std::uint32_t;
using TermId = std::uint32_t;

/// Bag of weighted terms. Insertion order is kept; adding a term twice sums
/// its weights.
class WeightedQuery {
  public:
    using Term = std::pair<std::string, double>;

    WeightedQuery() = default;
    explicit WeightedQuery(std::string qid) : m_qid(std::move(qid)) {}

    /// Each token contributes weight 1. Throws if the text has no tokens.
    static WeightedQuery from_text(std::string qid, std::string_view text,
                                   Analyzer const &analyzer = {})
    {
        WeightedQuery q(std::move(qid));
        for (auto &tok : analyzer.tokenize(text)) {
            q.add(tok, 1.0);
        }
        if (q.empty()) {
            throw PreconditionError("query '" + q.m_qid + "' has no indexable terms");
        }
        return q;
    }

    void add(std::string const &term, double weight)
    {
        if (!(weight > 0.0) || !std::isfinite(weight)) {
            throw PreconditionError("query term weight must be positive and finite: " + term);
        }
        for (auto &[t, w] : m_terms) {
            if (t == term) {
                w += weight;
                return;
            }
        }
        m_terms.emplace_back(term, weight);
    }

    [[nodiscard]] std::string const &qid() const noexcept { return m_qid; }
    [[nodiscard]] std::vector<Term> const &terms() const noexcept { return m_terms; }
    [[nodiscard]] bool empty() const noexcept { return m_terms.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return m_terms.size(); }

    [[nodiscard]] double weight(std::string_view term) const noexcept
    {
        for (auto const &[t, w] : m_terms) {
            if (t == term) {
                return w;
            }
        }
        return 0.0;
    }

    [[nodiscard]] bool contains(std::string_view term) const noexcept { return weight(term) > 0.0; }

    [[nodiscard]] double total_weight() const noexcept
    {
        double sum = 0.0;
        for (auto const &[t, w] : m_terms) {
            sum += w;
        }
        return sum;
    }

    /// Same terms with weights scaled to sum to one.
    [[nodiscard]] WeightedQuery normalized() const
    {
        WeightedQuery out(m_qid);
        double total = total_weight();
        for (auto const &[t, w] : m_terms) {
            out.m_terms.emplace_back(t, w / total);
        }
        return out;
    }

    /// Space-separated terms, weights dropped.
    [[nodiscard]] std::string to_text() const
    {
        std::string out;
        for (auto const &[t, w] : m_terms) {
            if (!out.empty()) {
                out.push_back(' ');
            }
            out += t;
        }
        return out;
    }

    bool operator==(WeightedQuery const &) const = default;

  private:
    std::string m_qid;
    std::vector<Term> m_terms;
};

struct RankedDoc {
    std::string doc_id;
    double score;
    std::size_t rank; // 1-based

    bool operator==(RankedDoc const &) const = default;
};

/// Scores are non-increasing with rank; ties are ordered by ascending doc_id.
struct Ranking {
    std::string qid;
    std::vector<RankedDoc> entries;
    std::size_t total_matches = 0; // documents with a positive score, before truncation

    bool operator==(Ranking const &) const = default;
};

/// Reassigns ranks after sorting by (score desc, doc_id asc).
inline void sort_ranking(Ranking &ranking)
{
    std::sort(ranking.entries.begin(), ranking.entries.end(), [](auto const &a, auto const &b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.doc_id < b.doc_id;
    });
    for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
        ranking.entries[i].rank = i + 1;
    }
}

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Immutable per-snapshot inverted index with a forward index for feedback
/// models. Internal document ids follow ascending docno order, so the
/// structure does not depend on ingestion order.
class InvertedIndex {
  public:
    struct Posting {
        DocId doc;
        std::uint32_t tf;
    };
    struct DocTerm {
        TermId term;
        std::uint32_t tf;
    };
    using TermCounts = std::map<std::string, std::uint32_t>;

    InvertedIndex() = default;

    static InvertedIndex build(Snapshot const &snapshot, Analyzer analyzer = {})
    {
        std::vector<std::pair<std::string, TermCounts>> docs;
        docs.reserve(snapshot.size());
        for (auto const &doc : snapshot.documents()) {
            TermCounts counts;
            for (auto &tok : analyzer.tokenize(doc.text)) {
                ++counts[tok];
            }
            docs.emplace_back(doc.doc_id, std::move(counts));
        }
        return from_term_counts(snapshot.timestamp(), std::move(analyzer), std::move(docs));
    }

    /// Assembles an index from per-document term counts. Shared by `build`
    /// and `load`.
    static InvertedIndex from_term_counts(Timestamp timestamp, Analyzer analyzer,
                                          std::vector<std::pair<std::string, TermCounts>> docs)
    {
        std::sort(docs.begin(), docs.end(),
                  [](auto const &a, auto const &b) { return a.first < b.first; });
        for (std::size_t i = 1; i < docs.size(); ++i) {
            if (docs[i - 1].first == docs[i].first) {
                throw IntegrityError("duplicate docno in index: " + docs[i].first);
            }
        }
        InvertedIndex idx;
        idx.m_timestamp = std::move(timestamp);
        idx.m_analyzer = std::move(analyzer);

        std::map<std::string, TermId> vocab;
        for (auto const &[docno, counts] : docs) {
            for (auto const &[term, tf] : counts) {
                vocab.emplace(term, 0);
            }
        }
        idx.m_terms.reserve(vocab.size());
        for (auto &[term, id] : vocab) {
            id = static_cast<TermId>(idx.m_terms.size());
            idx.m_terms.push_back(term);
            idx.m_term_ids.emplace(term, id);
        }

        idx.m_postings.resize(idx.m_terms.size());
        idx.m_forward.resize(docs.size());
        idx.m_doc_lengths.resize(docs.size(), 0);
        std::uint64_t total_length = 0;
        for (std::size_t d = 0; d < docs.size(); ++d) {
            auto doc = static_cast<DocId>(d);
            idx.m_docnos.push_back(docs[d].first);
            idx.m_doc_ids.emplace(docs[d].first, doc);
            for (auto const &[term, tf] : docs[d].second) {
                if (tf == 0) {
                    continue;
                }
                TermId id = vocab.at(term);
                idx.m_postings[id].push_back({doc, tf});
                idx.m_forward[d].push_back({id, tf});
                idx.m_doc_lengths[d] += tf;
            }
            total_length += idx.m_doc_lengths[d];
        }
        idx.m_avg_doc_length = docs.empty() ? 0.0
                                            : static_cast<double>(total_length)
                                                  / static_cast<double>(docs.size());
        return idx;
    }

    [[nodiscard]] Timestamp const &timestamp() const noexcept { return m_timestamp; }
    [[nodiscard]] Analyzer const &analyzer() const noexcept { return m_analyzer; }
    [[nodiscard]] std::size_t num_docs() const noexcept { return m_docnos.size(); }
    [[nodiscard]] std::size_t num_terms() const noexcept { return m_terms.size(); }
    [[nodiscard]] double avg_doc_length() const noexcept { return m_avg_doc_length; }

    [[nodiscard]] std::string const &docno(DocId doc) const { return m_docnos.at(doc); }
    [[nodiscard]] std::uint32_t doc_length(DocId doc) const { return m_doc_lengths.at(doc); }
    [[nodiscard]] std::string const &term(TermId id) const { return m_terms.at(id); }

    [[nodiscard]] std::optional<DocId> find_doc(std::string_view docno) const
    {
        auto it = m_doc_ids.find(std::string(docno));
        if (it == m_doc_ids.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    [[nodiscard]] std::optional<TermId> find_term(std::string_view term) const
    {
        auto it = m_term_ids.find(std::string(term));
        if (it == m_term_ids.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    [[nodiscard]] std::span<Posting const> postings(TermId id) const { return m_postings.at(id); }
    [[nodiscard]] std::span<DocTerm const> doc_terms(DocId doc) const { return m_forward.at(doc); }

    [[nodiscard]] std::size_t doc_frequency(std::string_view term) const
    {
        auto id = find_term(term);
        return id ? m_postings[*id].size() : 0;
    }

    [[nodiscard]] std::uint32_t term_frequency(DocId doc, std::string_view term) const
    {
        auto id = find_term(term);
        if (!id) {
            return 0;
        }
        auto const &fwd = m_forward.at(doc);
        auto it = std::lower_bound(fwd.begin(), fwd.end(), *id,
                                   [](DocTerm const &dt, TermId t) { return dt.term < t; });
        return (it != fwd.end() && it->term == *id) ? it->tf : 0;
    }

    static constexpr std::string_view format_name = "hrf-inverted-index";
    static constexpr int format_version = 1;

    /// JSON-lines persistence: a header object, then one object per document
    /// with its term counts.
    void save(std::ostream &out) const
    {
        nlohmann::json header = {{"format", format_name},
                                 {"version", format_version},
                                 {"timestamp", m_timestamp},
                                 {"num_docs", num_docs()},
                                 {"stopwords", m_analyzer.stopwords()}};
        out << header.dump() << '\n';
        for (DocId d = 0; d < num_docs(); ++d) {
            nlohmann::json terms = nlohmann::json::object();
            for (auto const &[id, tf] : m_forward[d]) {
                terms[m_terms[id]] = tf;
            }
            out << nlohmann::json{{"docno", m_docnos[d]}, {"terms", std::move(terms)}}.dump()
                << '\n';
        }
    }

    static InvertedIndex load(std::istream &in, std::string const &source = "<index>")
    {
        std::string line;
        std::size_t line_no = 1;
        if (!std::getline(in, line)) {
            throw ParseError(source, line_no, "missing index header");
        }
        nlohmann::json header;
        try {
            header = nlohmann::json::parse(line);
        } catch (nlohmann::json::exception const &e) {
            throw ParseError(source, line_no, e.what());
        }
        if (!header.is_object() || header.value("format", "") != format_name) {
            throw ParseError(source, line_no, "not an hrf index file");
        }
        if (header.value("version", 0) != format_version) {
            throw ParseError(source, line_no,
                             "unsupported index version " + header["version"].dump());
        }
        std::vector<std::pair<std::string, TermCounts>> docs;
        Analyzer analyzer;
        try {
            analyzer = Analyzer(header.at("stopwords").get<std::set<std::string>>());
            while (std::getline(in, line)) {
                ++line_no;
                if (line.empty()) {
                    continue;
                }
                auto record = nlohmann::json::parse(line);
                docs.emplace_back(record.at("docno").get<std::string>(),
                                  record.at("terms").get<TermCounts>());
            }
        } catch (nlohmann::json::exception const &e) {
            throw ParseError(source, line_no, e.what());
        }
        if (docs.size() != header.at("num_docs").get<std::size_t>()) {
            throw IntegrityError(source + ": header announces " + header["num_docs"].dump()
                                 + " documents, found " + std::to_string(docs.size()));
        }
        return from_term_counts(header.at("timestamp").get<std::string>(), std::move(analyzer),
                                std::move(docs));
    }

  private:
    Timestamp m_timestamp;
    Analyzer m_analyzer;
    std::vector<std::string> m_docnos;
    std::unordered_map<std::string, DocId> m_doc_ids;
    std::vector<std::uint32_t> m_doc_lengths;
    double m_avg_doc_length = 0.0;
    std::vector<std::string> m_terms;
    std::unordered_map<std::string, TermId> m_term_ids;
    std::vector<std::vector<Posting>> m_postings;
    std::vector<std::vector<DocTerm>> m_forward;
};

inline InvertedIndex build_index(Snapshot const &snapshot, Analyzer analyzer = {})
{
    return InvertedIndex::build(snapshot, std::move(analyzer));
}

// ---------------------------------------------------------------------------
// BM25

inline double bm25_idf(std::size_t num_docs, std::size_t df)
{
    auto n = static_cast<double>(num_docs);
    auto f = static_cast<double>(df);
    return std::log(1.0 + (n - f + 0.5) / (f + 0.5));
}

inline double bm25_tf(std::uint32_t tf, std::uint32_t doc_length, double avg_doc_length,
                      Bm25Params const &p)
{
    auto f = static_cast<double>(tf);
    double norm = 1.0 - p.b + p.b * static_cast<double>(doc_length) / avg_doc_length;
    return f * (p.k1 + 1.0) / (f + p.k1 * norm);
}

/// Per-document BM25 scores of every matching document, indexed by DocId.
/// Contributions are summed in query-term order.
inline std::vector<double> score_all(InvertedIndex const &index, WeightedQuery const &query,
                                     Bm25Params const &params = {})
{
    std::vector<double> acc(index.num_docs(), 0.0);
    for (auto const &[term, weight] : query.terms()) {
        auto id = index.find_term(term);
        if (!id) {
            continue;
        }
        auto postings = index.postings(*id);
        double idf = bm25_idf(index.num_docs(), postings.size());
        for (auto const &p : postings) {
            acc[p.doc] += weight * idf
                          * bm25_tf(p.tf, index.doc_length(p.doc), index.avg_doc_length(), params);
        }
    }
    return acc;
}

inline Ranking search(InvertedIndex const &index, WeightedQuery const &query, std::size_t depth,
                      Bm25Params const &params = {})
{
    if (depth == 0) {
        throw PreconditionError("search depth must be at least 1");
    }
    auto acc = score_all(index, query, params);
    std::vector<DocId> hits;
    for (DocId d = 0; d < acc.size(); ++d) {
        if (acc[d] > 0.0) {
            hits.push_back(d);
        }
    }
    Ranking ranking{query.qid(), {}, hits.size()};
    auto keep = std::min(depth, hits.size());
    // DocId order equals docno order, so comparing ids is the docno tie-break
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                      [&](DocId a, DocId b) { return acc[a] != acc[b] ? acc[a] > acc[b] : a < b; });
    ranking.entries.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
        ranking.entries.push_back({index.docno(hits[i]), acc[hits[i]], i + 1});
    }
    return ranking;
}

// ---------------------------------------------------------------------------
// Feedback term statistics

using ScoredTerm = std::pair<std::string, double>;

/// Orders by score descending, then term ascending.
inline void sort_scored_terms(std::vector<ScoredTerm> &terms)
{
    std::sort(terms.begin(), terms.end(), [](auto const &a, auto const &b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
}

/// Top-k terms of the concatenated feedback texts by
/// tf(t) * ln((N + 1) / (df(t) + 1)); df and N come from `index`.
inline std::vector<ScoredTerm> tfidf_terms(std::span<std::string const> texts,
                                           InvertedIndex const &index, std::size_t k)
{
    if (texts.empty()) {
        throw PreconditionError("tfidf_terms: no positive feedback documents");
    }
    std::map<std::string, std::uint64_t> tf;
    for (auto const &text : texts) {
        for (auto &tok : index.analyzer().tokenize(text)) {
            ++tf[tok];
        }
    }
    auto n = static_cast<double>(index.num_docs());
    std::vector<ScoredTerm> scored;
    for (auto const &[term, count] : tf) {
        auto df = static_cast<double>(index.doc_frequency(term));
        double score = static_cast<double>(count) * std::log((n + 1.0) / (df + 1.0));
        if (score > 0.0) {
            scored.emplace_back(term, score);
        }
    }
    sort_scored_terms(scored);
    if (scored.size() > k) {
        scored.resize(k);
    }
    return scored;
}

inline std::vector<ScoredTerm> tfidf_terms(std::span<DocumentVersion const> docs,
                                           InvertedIndex const &index, std::size_t k)
{
    std::vector<std::string> texts;
    texts.reserve(docs.size());
    for (auto const &d : docs) {
        texts.push_back(d.text);
    }
    return tfidf_terms(std::span<std::string const>(texts), index, k);
}

// ---------------------------------------------------------------------------
// RM3

struct Rm3Params {
    std::size_t fb_docs = 3;
    std::size_t fb_terms = 10;
    double orig_weight = 0.5;
};

/// Relevance model P(t|R) ∝ Σ_d tf(t,d)/|d| · w_d over weighted feedback
/// documents. Returns the `num_terms` most probable terms renormalized to sum
/// to one.
inline std::vector<ScoredTerm>
relevance_model(InvertedIndex const &index, std::span<std::pair<DocId, double> const> feedback,
                std::size_t num_terms)
{
    double weight_sum = 0.0;
    for (auto const &[doc, w] : feedback) {
        weight_sum += w;
    }
    std::vector<ScoredTerm> model;
    if (!(weight_sum > 0.0)) {
        return model;
    }
    std::map<TermId, double> prob;
    for (auto const &[doc, w] : feedback) {
        auto len = static_cast<double>(index.doc_length(doc));
        if (len == 0.0) {
            continue;
        }
        for (auto const &[term, tf] : index.doc_terms(doc)) {
            prob[term] += static_cast<double>(tf) / len * (w / weight_sum);
        }
    }
    model.reserve(prob.size());
    for (auto const &[term, p] : prob) {
        model.emplace_back(index.term(term), p);
    }
    sort_scored_terms(model);
    if (model.size() > num_terms) {
        model.resize(num_terms);
    }
    double kept = 0.0;
    for (auto const &[t, p] : model) {
        kept += p;
    }
    for (auto &[t, p] : model) {
        p /= kept;
    }
    return model;
}

/// Pseudo-relevance feedback: the relevance model of the top `fb_docs`
/// results, weighted by normalized BM25 score, mixed with the normalized
/// original query at `orig_weight`.
inline WeightedQuery rm3_expand(InvertedIndex const &index, WeightedQuery const &query,
                                Rm3Params const &params = {}, Bm25Params const &bm25 = {})
{
    if (params.fb_docs == 0 || params.fb_terms == 0) {
        throw PreconditionError("rm3_expand: fb_docs and fb_terms must be at least 1");
    }
    if (!(params.orig_weight >= 0.0 && params.orig_weight <= 1.0)) {
        throw PreconditionError("rm3_expand: orig_weight must lie in [0, 1]");
    }
    auto original = query.normalized();
    auto top = search(index, query, params.fb_docs, bm25);
    if (top.entries.empty()) {
        return original;
    }
    std::vector<std::pair<DocId, double>> feedback;
    for (auto const &e : top.entries) {
        feedback.emplace_back(*index.find_doc(e.doc_id), e.score);
    }
    auto model = relevance_model(index, feedback, params.fb_terms);

    WeightedQuery out(query.qid());
    for (auto const &[term, w] : original.terms()) {
        if (double mixed = params.orig_weight * w; mixed > 0.0) {
            out.add(term, mixed);
        }
    }
    for (auto const &[term, p] : model) {
        if (double mixed = (1.0 - params.orig_weight) * p; mixed > 0.0) {
            out.add(term, mixed);
        }
    }
    if (out.empty()) {
        return original;
    }
    return out;
}

} // namespace hrf

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrf/error.hpp"
#include "hrf/format.hpp"
#include "hrf/text.hpp"

namespace hrf {

/// Snapshot label. Labels are ISO-like ("2022-07") and ordered lexicographically.
using Timestamp = std::string;

struct DocumentVersion {
    std::string doc_id;
    Timestamp timestamp;
    std::optional<std::string> url;
    std::string text;

    bool operator==(DocumentVersion const &) const = default;
};

/// All documents of the corpus at one timestamp, ordered by doc_id.
class Snapshot {
  public:
    Snapshot() = default;

    Snapshot(Timestamp timestamp, std::vector<DocumentVersion> documents)
        : m_timestamp(std::move(timestamp)), m_documents(std::move(documents))
    {
        std::sort(m_documents.begin(), m_documents.end(),
                  [](auto const &a, auto const &b) { return a.doc_id < b.doc_id; });
        for (std::size_t i = 0; i < m_documents.size(); ++i) {
            auto const &doc = m_documents[i];
            if (doc.doc_id.empty()) {
                throw IntegrityError("empty doc_id in snapshot " + m_timestamp);
            }
            if (doc.timestamp != m_timestamp) {
                throw IntegrityError("document " + doc.doc_id + " carries timestamp "
                                     + doc.timestamp + " inside snapshot " + m_timestamp);
            }
            if (i > 0 && m_documents[i - 1].doc_id == doc.doc_id) {
                throw IntegrityError("duplicate doc_id " + doc.doc_id + " in snapshot "
                                     + m_timestamp);
            }
        }
    }

    [[nodiscard]] Timestamp const &timestamp() const noexcept { return m_timestamp; }
    [[nodiscard]] std::vector<DocumentVersion> const &documents() const noexcept
    {
        return m_documents;
    }
    [[nodiscard]] std::size_t size() const noexcept { return m_documents.size(); }
    [[nodiscard]] bool empty() const noexcept { return m_documents.empty(); }

    [[nodiscard]] DocumentVersion const *find(std::string_view doc_id) const
    {
        auto it = std::lower_bound(m_documents.begin(), m_documents.end(), doc_id,
                                   [](auto const &d, std::string_view id) { return d.doc_id < id; });
        if (it == m_documents.end() || it->doc_id != doc_id) {
            return nullptr;
        }
        return &*it;
    }

    [[nodiscard]] bool contains(std::string_view doc_id) const { return find(doc_id) != nullptr; }

  private:
    Timestamp m_timestamp;
    std::vector<DocumentVersion> m_documents;
};

/// qid -> query text
using Topics = std::map<std::string, std::string>;

/// Document-level changes between two consecutive snapshots.
struct ChangeSet {
    Timestamp older;
    Timestamp newer;
    std::set<std::string> created;
    std::set<std::string> deleted;
    std::map<std::string, double> updated; // doc_id -> s3 in [0, 1)
    std::set<std::string> unchanged;       // s3 == 1

    [[nodiscard]] std::size_t total() const noexcept
    {
        return created.size() + deleted.size() + updated.size() + unchanged.size();
    }
};

// ---------------------------------------------------------------------------
// Corpus files

/// Reads a JSONL corpus file (`docno`, optional `url`, `text` per line).
/// Blank lines are skipped.
inline Snapshot ingest_snapshot(std::istream &in, Timestamp const &timestamp,
                                std::string const &source = "<corpus>")
{
    std::vector<DocumentVersion> docs;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (nlohmann::json::parse_error const &e) {
            throw ParseError(source, line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!record.is_object()) {
            throw ParseError(source, line_no, "record is not a JSON object");
        }
        auto docno = record.find("docno");
        auto text = record.find("text");
        if (docno == record.end() || !docno->is_string() || docno->get_ref<std::string const &>().empty()) {
            throw ParseError(source, line_no, "missing or empty string field 'docno'");
        }
        if (text == record.end() || !text->is_string()) {
            throw ParseError(source, line_no, "missing string field 'text'");
        }
        DocumentVersion doc{docno->get<std::string>(), timestamp, std::nullopt, text->get<std::string>()};
        if (auto url = record.find("url"); url != record.end() && !url->is_null()) {
            if (!url->is_string()) {
                throw ParseError(source, line_no, "field 'url' is not a string");
            }
            doc.url = url->get<std::string>();
        }
        if (!seen.insert(doc.doc_id).second) {
            throw IntegrityError(source + ":" + std::to_string(line_no) + ": duplicate doc_id "
                                 + doc.doc_id);
        }
        docs.push_back(std::move(doc));
    }
    return Snapshot(timestamp, std::move(docs));
}

inline Snapshot ingest_snapshot(std::filesystem::path const &path, Timestamp const &timestamp)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open corpus file " + path.string());
    }
    return ingest_snapshot(in, timestamp, path.string());
}

inline void write_corpus(Snapshot const &snapshot, std::ostream &out)
{
    for (auto const &doc : snapshot.documents()) {
        nlohmann::json record = {{"docno", doc.doc_id}, {"text", doc.text}};
        if (doc.url) {
            record["url"] = *doc.url;
        }
        out << record.dump() << '\n';
    }
}

/// Reads `qid<TAB>query` lines.
inline Topics load_queries(std::istream &in, std::string const &source = "<queries>")
{
    Topics topics;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw ParseError(source, line_no, "expected qid<TAB>query");
        }
        auto qid = line.substr(0, tab);
        if (!topics.emplace(qid, line.substr(tab + 1)).second) {
            throw IntegrityError(source + ":" + std::to_string(line_no) + ": duplicate qid " + qid);
        }
    }
    return topics;
}

inline Topics load_queries(std::filesystem::path const &path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open queries file " + path.string());
    }
    return load_queries(in, path.string());
}

inline void write_queries(Topics const &topics, std::ostream &out)
{
    for (auto const &[qid, query] : topics) {
        out << qid << '\t' << query << '\n';
    }
}

/// A snapshot directory: `corpus.jsonl` plus `queries.tsv` (the latter optional).
struct SnapshotDir {
    Snapshot snapshot;
    Topics queries;
};

inline SnapshotDir load_snapshot_dir(std::filesystem::path const &dir, Timestamp const &timestamp)
{
    SnapshotDir out{ingest_snapshot(dir / "corpus.jsonl", timestamp), {}};
    if (std::filesystem::exists(dir / "queries.tsv")) {
        out.queries = load_queries(dir / "queries.tsv");
    }
    return out;
}

// ---------------------------------------------------------------------------
// S3 similarity

inline constexpr std::size_t s3_chunk_words = 8;

/// Distinct overlapping word 8-grams of the normalized text. Texts shorter
/// than eight words yield their whole word sequence as the only chunk.
inline std::vector<std::string> s3_chunks(std::string_view text)
{
    auto words = split_words(text);
    std::vector<std::string> chunks;
    if (words.empty()) {
        return chunks;
    }
    auto join = [&](std::size_t from, std::size_t to) {
        std::string chunk;
        for (std::size_t i = from; i < to; ++i) {
            if (i > from) {
                chunk.push_back(' ');
            }
            chunk += words[i];
        }
        return chunk;
    };
    if (words.size() < s3_chunk_words) {
        chunks.push_back(join(0, words.size()));
        return chunks;
    }
    chunks.reserve(words.size() - s3_chunk_words + 1);
    for (std::size_t i = 0; i + s3_chunk_words <= words.size(); ++i) {
        chunks.push_back(join(i, i + s3_chunk_words));
    }
    std::sort(chunks.begin(), chunks.end());
    chunks.erase(std::unique(chunks.begin(), chunks.end()), chunks.end());
    return chunks;
}

/// |C(a) ∩ C(b)| / min(|C(a)|, |C(b)|) over the chunk sets of `s3_chunks`.
inline double s3_similarity(std::string_view a, std::string_view b)
{
    auto ca = s3_chunks(a);
    auto cb = s3_chunks(b);
    if (ca.empty() && cb.empty()) {
        return 1.0;
    }
    if (ca.empty() || cb.empty()) {
        return 0.0;
    }
    std::size_t shared = 0;
    auto ia = ca.begin();
    auto ib = cb.begin();
    while (ia != ca.end() && ib != cb.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++shared;
            ++ia;
            ++ib;
        }
    }
    return static_cast<double>(shared) / static_cast<double>(std::min(ca.size(), cb.size()));
}

// ---------------------------------------------------------------------------
// Diffing and drift

inline ChangeSet diff_snapshots(Snapshot const &older, Snapshot const &newer)
{
    if (!(older.timestamp() < newer.timestamp())) {
        throw PreconditionError("diff_snapshots: older timestamp '" + older.timestamp()
                                + "' is not before newer timestamp '" + newer.timestamp() + "'");
    }
    ChangeSet changes{older.timestamp(), newer.timestamp(), {}, {}, {}, {}};
    auto const &a = older.documents();
    auto const &b = newer.documents();
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() || j < b.size()) {
        if (j == b.size() || (i < a.size() && a[i].doc_id < b[j].doc_id)) {
            changes.deleted.insert(a[i++].doc_id);
        } else if (i == a.size() || b[j].doc_id < a[i].doc_id) {
            changes.created.insert(b[j++].doc_id);
        } else {
            double s3 = a[i].text == b[j].text ? 1.0 : s3_similarity(a[i].text, b[j].text);
            if (s3 == 1.0) {
                changes.unchanged.insert(a[i].doc_id);
            } else {
                changes.updated.emplace(a[i].doc_id, s3);
            }
            ++i;
            ++j;
        }
    }
    return changes;
}

struct EcdfPoint {
    double s3;
    double cumulative_fraction;

    bool operator==(EcdfPoint const &) const = default;
};

/// Empirical CDF of the s3 values of all documents present in both snapshots
/// of each change set. One point per distinct value.
inline std::vector<EcdfPoint> similarity_profile(std::vector<ChangeSet> const &changesets)
{
    std::vector<double> values;
    for (auto const &cs : changesets) {
        for (auto const &[id, s3] : cs.updated) {
            values.push_back(s3);
        }
        values.insert(values.end(), cs.unchanged.size(), 1.0);
    }
    std::vector<EcdfPoint> ecdf;
    if (values.empty()) {
        return ecdf;
    }
    std::sort(values.begin(), values.end());
    auto n = static_cast<double>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i + 1 < values.size() && values[i + 1] == values[i]) {
            continue;
        }
        ecdf.push_back({values[i], static_cast<double>(i + 1) / n});
    }
    return ecdf;
}

/// Fraction of mass strictly below `threshold`.
inline double ecdf_mass_below(std::vector<EcdfPoint> const &ecdf, double threshold)
{
    double mass = 0.0;
    for (auto const &p : ecdf) {
        if (p.s3 < threshold) {
            mass = p.cumulative_fraction;
        }
    }
    return mass;
}

/// Probability mass located exactly at s3 = 1.
inline double ecdf_mass_at_one(std::vector<EcdfPoint> const &ecdf)
{
    if (ecdf.empty() || ecdf.back().s3 != 1.0) {
        return 0.0;
    }
    return 1.0 - ecdf_mass_below(ecdf, 1.0);
}

inline void write_ecdf(std::vector<EcdfPoint> const &ecdf, std::ostream &out)
{
    out << "s3\tcum_fraction\n";
    for (auto const &p : ecdf) {
        out << format_real(p.s3) << '\t' << format_real(p.cumulative_fraction) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Query overlap

struct OverlapMatrix {
    std::vector<Timestamp> timestamps;
    std::vector<std::vector<std::size_t>> counts; // symmetric; diagonal = set sizes
};

inline OverlapMatrix query_overlap(std::map<Timestamp, std::set<std::string>> const &topic_sets)
{
    if (topic_sets.empty()) {
        throw PreconditionError("query_overlap needs at least one timestamp");
    }
    OverlapMatrix m;
    std::vector<std::set<std::string>> normalized;
    for (auto const &[ts, queries] : topic_sets) {
        m.timestamps.push_back(ts);
        std::set<std::string> norm;
        for (auto const &q : queries) {
            norm.insert(normalize_query(q));
        }
        normalized.push_back(std::move(norm));
    }
    auto n = normalized.size();
    m.counts.assign(n, std::vector<std::size_t>(n, 0));
    for (std::size_t i = 0; i < n; ++i) {
        m.counts[i][i] = normalized[i].size();
        for (std::size_t j = i + 1; j < n; ++j) {
            std::size_t shared = 0;
            for (auto const &q : normalized[i]) {
                shared += normalized[j].count(q);
            }
            m.counts[i][j] = m.counts[j][i] = shared;
        }
    }
    return m;
}

inline void write_overlap(OverlapMatrix const &m, std::ostream &out)
{
    out << "timestamp";
    for (auto const &ts : m.timestamps) {
        out << '\t' << ts;
    }
    out << '\n';
    for (std::size_t i = 0; i < m.timestamps.size(); ++i) {
        out << m.timestamps[i];
        for (auto c : m.counts[i]) {
            out << '\t' << c;
        }
        out << '\n';
    }
}

} // namespace hrf

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "hrf/corpus_store.hpp"
#include "hrf/error.hpp"
#include "hrf/format.hpp"

namespace hrf {

/// One graded relevance judgment rel(q, d, t).
struct Observation {
    std::string qid;
    std::string doc_id;
    Timestamp timestamp;
    int rel = 0; // 0, 1 or 2

    bool operator==(Observation const &) const = default;
};

inline constexpr int max_grade = 2;

/// Parses whitespace-separated `qid 0 docno rel` lines, preserving file order.
inline std::vector<Observation> load_qrels(std::istream &in, Timestamp const &timestamp,
                                           std::string const &source = "<qrels>")
{
    std::vector<Observation> out;
    std::set<std::pair<std::string, std::string>> seen;
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
        if (parts.size() != 4) {
            throw ParseError(source, line_no,
                             "expected 'qid 0 docno rel', got " + std::to_string(parts.size())
                                 + " fields");
        }
        int rel = 0;
        if (!parse_int(parts[3], rel)) {
            throw ParseError(source, line_no, "relevance grade is not an integer: " + parts[3]);
        }
        if (rel < 0 || rel > max_grade) {
            throw RangeError(source + ":" + std::to_string(line_no) + ": relevance grade "
                             + std::to_string(rel) + " outside {0, 1, 2}");
        }
        if (!seen.emplace(parts[0], parts[2]).second) {
            throw IntegrityError(source + ":" + std::to_string(line_no) + ": duplicate judgment for "
                                 + parts[0] + "/" + parts[2]);
        }
        out.push_back({parts[0], parts[2], timestamp, rel});
    }
    return out;
}

inline std::vector<Observation> load_qrels(std::filesystem::path const &path,
                                           Timestamp const &timestamp)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open qrels file " + path.string());
    }
    return load_qrels(in, timestamp, path.string());
}

inline void write_qrels(std::vector<Observation> const &qrels, std::ostream &out)
{
    for (auto const &o : qrels) {
        out << o.qid << " 0 " << o.doc_id << ' ' << o.rel << '\n';
    }
}

/// Manifest lines are `timestamp<TAB>path`; relative paths resolve against
/// the manifest's directory.
inline std::map<Timestamp, std::filesystem::path>
load_qrels_manifest(std::filesystem::path const &manifest)
{
    std::ifstream in(manifest);
    if (!in) {
        throw Error("cannot open qrels manifest " + manifest.string());
    }
    std::map<Timestamp, std::filesystem::path> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ParseError(manifest.string(), line_no, "expected timestamp<TAB>path");
        }
        std::filesystem::path path = line.substr(tab + 1);
        if (path.is_relative()) {
            path = manifest.parent_path() / path;
        }
        if (!out.emplace(line.substr(0, tab), path).second) {
            throw IntegrityError(manifest.string() + ":" + std::to_string(line_no)
                                 + ": timestamp listed twice");
        }
    }
    return out;
}

/// Historical relevance feedback H, indexed by (qid, doc_id, timestamp).
class FeedbackStore {
  public:
    FeedbackStore() = default;

    explicit FeedbackStore(std::vector<Observation> observations)
    {
        for (auto &o : observations) {
            add(std::move(o));
        }
    }

    void add(Observation o)
    {
        if (o.rel < 0 || o.rel > max_grade) {
            throw RangeError("relevance grade " + std::to_string(o.rel) + " outside {0, 1, 2}");
        }
        auto &slot = m_by_query[o.qid][o.doc_id];
        auto it = std::lower_bound(slot.begin(), slot.end(), o.timestamp,
                                   [](auto const &x, auto const &ts) { return x.timestamp < ts; });
        if (it != slot.end() && it->timestamp == o.timestamp) {
            throw IntegrityError("duplicate observation " + o.qid + "/" + o.doc_id + "@"
                                 + o.timestamp);
        }
        slot.insert(it, std::move(o));
        ++m_size;
    }

    void add_all(std::vector<Observation> const &observations)
    {
        for (auto const &o : observations) {
            add(o);
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return m_size; }
    [[nodiscard]] bool empty() const noexcept { return m_size == 0; }

    /// Observations for (qid, doc_id) strictly before `before`, ascending by time.
    [[nodiscard]] std::vector<Observation> observations_for(std::string const &qid,
                                                            std::string const &doc_id,
                                                            Timestamp const &before) const
    {
        std::vector<Observation> out;
        auto q = m_by_query.find(qid);
        if (q == m_by_query.end()) {
            return out;
        }
        auto d = q->second.find(doc_id);
        if (d == q->second.end()) {
            return out;
        }
        for (auto const &o : d->second) {
            if (!(o.timestamp < before)) {
                break;
            }
            out.push_back(o);
        }
        return out;
    }

    /// All observations for `qid` strictly before `before`, ordered by
    /// (doc_id, timestamp).
    [[nodiscard]] std::vector<Observation> observations_for(std::string const &qid,
                                                            Timestamp const &before) const
    {
        std::vector<Observation> out;
        auto q = m_by_query.find(qid);
        if (q == m_by_query.end()) {
            return out;
        }
        for (auto const &[doc, list] : q->second) {
            for (auto const &o : list) {
                if (o.timestamp < before) {
                    out.push_back(o);
                }
            }
        }
        return out;
    }

    /// D+: every (doc_id, t) with rel > 0 and t < before, ordered by (doc_id, t).
    [[nodiscard]] std::vector<std::pair<std::string, Timestamp>>
    positive_set(std::string const &qid, Timestamp const &before) const
    {
        std::vector<std::pair<std::string, Timestamp>> out;
        for (auto const &o : observations_for(qid, before)) {
            if (o.rel > 0) {
                out.emplace_back(o.doc_id, o.timestamp);
            }
        }
        return out;
    }

    /// One entry per positive document: the most recent timestamp at which it
    /// was judged positive and the grade given then.
    [[nodiscard]] std::map<std::string, std::pair<Timestamp, int>>
    latest_positives(std::string const &qid, Timestamp const &before) const
    {
        std::map<std::string, std::pair<Timestamp, int>> out;
        for (auto const &o : observations_for(qid, before)) {
            if (o.rel > 0) {
                out[o.doc_id] = {o.timestamp, o.rel}; // ascending time: last write wins
            }
        }
        return out;
    }

  private:
    std::map<std::string, std::map<std::string, std::vector<Observation>>> m_by_query;
    std::size_t m_size = 0;
};

inline std::vector<std::pair<std::string, Timestamp>>
positive_set(FeedbackStore const &store, std::string const &qid, Timestamp const &before)
{
    return store.positive_set(qid, before);
}

inline std::vector<Observation> observations_for(FeedbackStore const &store,
                                                 std::string const &qid, std::string const &doc_id,
                                                 Timestamp const &before)
{
    return store.observations_for(qid, doc_id, before);
}

} // namespace hrf

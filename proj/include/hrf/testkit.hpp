#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hrf/corpus_store.hpp"
#include "hrf/error.hpp"
#include "hrf/history.hpp"

// Synthetic longitudinal collections: Zipf background text, per-topic
// vocabularies, graded labels and a configurable create/delete/update mix
// between consecutive snapshots.

namespace hrf::testkit {

struct GeneratorConfig {
    std::uint64_t seed = 42;
    std::size_t num_snapshots = 3;
    std::size_t docs_per_snapshot = 1000; // size of the first snapshot
    double frac_unchanged = 0.4;          // surviving docs kept byte-identical
    double frac_heavy_change = 0.5;       // surviving docs rewritten to s3 < 0.8
    double delete_rate = 0.1;
    double create_rate = 0.1;
    std::size_t num_queries = 60;
    std::size_t judgments_per_query = 12;
    std::size_t vocabulary_size = 5000;

    std::size_t min_doc_length = 60;
    std::size_t max_doc_length = 120;
    double reoccur_rate = 0.85;            // chance an older query is issued again
    std::size_t new_queries_per_snapshot = 4; // their documents are created; none if create_rate = 0
    std::size_t relevant_per_query = 4;
    std::size_t distractors_per_query = 5;
    double topical_share_of_created = 0.5; // created docs tied to some topic
    std::size_t topic_vocabulary = 12;

    [[nodiscard]] std::size_t total_topics() const
    {
        if (create_rate <= 0.0 || num_snapshots < 2) {
            return num_queries;
        }
        return num_queries + new_queries_per_snapshot * (num_snapshots - 1);
    }

    void validate() const
    {
        auto fraction = [](double v, char const *name) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ConfigError(std::string(name) + " must lie in [0, 1]");
            }
        };
        fraction(frac_unchanged, "frac_unchanged");
        fraction(frac_heavy_change, "frac_heavy_change");
        fraction(delete_rate, "delete_rate");
        fraction(reoccur_rate, "reoccur_rate");
        fraction(topical_share_of_created, "topical_share_of_created");
        if (frac_unchanged + frac_heavy_change > 1.0) {
            throw ConfigError("frac_unchanged + frac_heavy_change must not exceed 1");
        }
        if (!(create_rate >= 0.0)) {
            throw ConfigError("create_rate must be non-negative");
        }
        if (num_snapshots == 0) {
            throw ConfigError("num_snapshots must be at least 1");
        }
        if (num_snapshots > 1 && delete_rate >= 1.0) {
            throw ConfigError("delete_rate = 1 leaves no judged document to re-occur");
        }
        if (num_queries == 0) {
            throw ConfigError("num_queries must be at least 1");
        }
        if (min_doc_length < 1 || max_doc_length < min_doc_length) {
            throw ConfigError("invalid document length range");
        }
        if (relevant_per_query == 0) {
            throw ConfigError("relevant_per_query must be at least 1");
        }
        if (docs_per_snapshot < num_queries * (relevant_per_query + distractors_per_query)) {
            throw ConfigError("docs_per_snapshot too small for the requested topical documents");
        }
        if (vocabulary_size < topic_pool_begin + total_topics() * topic_vocabulary) {
            throw ConfigError("vocabulary_size too small for the requested topics");
        }
    }

    // Zipf ranks reserved for query terms and topic vocabularies.
    static constexpr std::size_t query_term_pool_begin = 100;
    static constexpr std::size_t query_term_pool_end = 600;
    static constexpr std::size_t topic_pool_begin = 1000;
};

/// Everything observed at one timestamp.
struct TimestampData {
    Snapshot snapshot;
    Topics queries;
    std::vector<Observation> qrels;
};

/// "2022-07", "2022-09", ...: two-month steps from July 2022.
inline Timestamp timestamp_label(std::size_t step)
{
    auto month_index = 6 + 2 * step;
    auto year = 2022 + month_index / 12;
    auto month = month_index % 12 + 1;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04zu-%02zu", year, month);
    return buf;
}

namespace detail {

    inline std::string word(std::size_t index)
    {
        static constexpr char const *syllables[] = {
            "ba", "ce", "di", "fo", "gu", "ha", "je", "ki", "lo", "mu", "na", "pe", "qui",
            "ro", "su", "ta", "ve", "wi", "xo", "zu", "bra", "cle", "dri", "flo", "gra",
            "pla", "tri", "spo", "cha", "sto"};
        constexpr std::size_t base = std::size(syllables);
        std::string w;
        do {
            w += syllables[index % base];
            index /= base;
        } while (index > 0);
        return w;
    }

    enum class DocKind { background, relevant, distractor };

    struct DocState {
        std::string id;
        std::vector<std::uint32_t> tokens;
        DocKind kind = DocKind::background;
        std::size_t topic = 0;
        int grade = 0;
    };

    struct Topic {
        std::vector<std::uint32_t> query_terms;
        std::vector<std::uint32_t> vocabulary;
        std::size_t introduced_at = 0;
    };

    class Generator {
      public:
        explicit Generator(GeneratorConfig const &cfg) : m_cfg(cfg), m_rng(cfg.seed)
        {
            m_zipf_cdf.resize(cfg.vocabulary_size);
            double sum = 0.0;
            for (std::size_t r = 0; r < cfg.vocabulary_size; ++r) {
                sum += 1.0 / static_cast<double>(r + 1);
                m_zipf_cdf[r] = sum;
            }
            for (auto &c : m_zipf_cdf) {
                c /= sum;
            }
        }

        std::vector<TimestampData> run()
        {
            make_topics();
            std::vector<DocState> docs;
            for (std::size_t t = 0; t < m_cfg.num_queries; ++t) {
                add_topical_docs(docs, t);
            }
            while (docs.size() < m_cfg.docs_per_snapshot) {
                docs.push_back(make_doc(DocKind::background, 0, 0));
            }
            std::vector<TimestampData> out;
            std::set<std::size_t> active;
            for (std::size_t t = 0; t < m_cfg.num_queries; ++t) {
                active.insert(t);
            }
            out.push_back(emit(0, docs, active));
            for (std::size_t s = 1; s < m_cfg.num_snapshots; ++s) {
                docs = evolve(docs, s);
                active = choose_active(s);
                out.push_back(emit(s, docs, active));
            }
            return out;
        }

      private:
        double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(m_rng); }

        std::size_t uniform_index(std::size_t n)
        {
            return std::uniform_int_distribution<std::size_t>(0, n - 1)(m_rng);
        }

        std::uint32_t zipf_token()
        {
            auto it = std::upper_bound(m_zipf_cdf.begin(), m_zipf_cdf.end(), uniform());
            auto r = static_cast<std::size_t>(it - m_zipf_cdf.begin());
            return static_cast<std::uint32_t>(std::min(r, m_zipf_cdf.size() - 1));
        }

        void make_topics()
        {
            std::vector<std::uint32_t> pool;
            for (auto r = GeneratorConfig::query_term_pool_begin;
                 r < GeneratorConfig::query_term_pool_end; ++r) {
                pool.push_back(static_cast<std::uint32_t>(r));
            }
            std::vector<std::uint32_t> topic_pool;
            for (auto r = GeneratorConfig::topic_pool_begin; r < m_cfg.vocabulary_size; ++r) {
                topic_pool.push_back(static_cast<std::uint32_t>(r));
            }
            std::shuffle(topic_pool.begin(), topic_pool.end(), m_rng);
            std::set<std::vector<std::uint32_t>> used_queries;
            for (std::size_t t = 0; t < m_cfg.total_topics(); ++t) {
                Topic topic;
                do {
                    topic.query_terms.clear();
                    auto len = 2 + uniform_index(2);
                    while (topic.query_terms.size() < len) {
                        auto term = pool[uniform_index(pool.size())];
                        if (std::find(topic.query_terms.begin(), topic.query_terms.end(), term)
                            == topic.query_terms.end()) {
                            topic.query_terms.push_back(term);
                        }
                    }
                } while (!used_queries.insert(sorted(topic.query_terms)).second);
                for (std::size_t v = 0; v < m_cfg.topic_vocabulary; ++v) {
                    topic.vocabulary.push_back(topic_pool[t * m_cfg.topic_vocabulary + v]);
                }
                topic.introduced_at =
                    t < m_cfg.num_queries
                        ? 0
                        : 1 + (t - m_cfg.num_queries) / std::max<std::size_t>(m_cfg.new_queries_per_snapshot, 1);
                m_topics.push_back(std::move(topic));
            }
        }

        static std::vector<std::uint32_t> sorted(std::vector<std::uint32_t> v)
        {
            std::sort(v.begin(), v.end());
            return v;
        }

        std::string next_id()
        {
            char buf[32];
            std::snprintf(buf, sizeof buf, "d%06zu", m_next_id++);
            return buf;
        }

        void insert_randomly(std::vector<std::uint32_t> &tokens, std::uint32_t term)
        {
            auto pos = uniform_index(tokens.size() + 1);
            tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(pos), term);
        }

        DocState make_doc(DocKind kind, std::size_t topic_id, int grade)
        {
            DocState d;
            d.id = next_id();
            d.kind = kind;
            d.topic = topic_id;
            d.grade = grade;
            auto length = m_cfg.min_doc_length
                          + uniform_index(m_cfg.max_doc_length - m_cfg.min_doc_length + 1);
            auto const &topic = m_topics[topic_id];
            std::size_t inserted = 0;
            if (kind == DocKind::relevant) {
                inserted = grade == 2 ? 2 * topic.query_terms.size() : 1;
            } else if (kind == DocKind::distractor) {
                inserted = 4 * topic.query_terms.size();
            }
            auto base_length = length > inserted ? length - inserted : 1;
            for (std::size_t i = 0; i < base_length; ++i) {
                if (kind == DocKind::relevant && uniform() < 0.3) {
                    d.tokens.push_back(topic.vocabulary[uniform_index(topic.vocabulary.size())]);
                } else {
                    d.tokens.push_back(zipf_token());
                }
            }
            if (kind == DocKind::relevant) {
                if (grade == 2) {
                    for (auto term : topic.query_terms) {
                        insert_randomly(d.tokens, term);
                        insert_randomly(d.tokens, term);
                    }
                } else {
                    insert_randomly(d.tokens,
                                    topic.query_terms[uniform_index(topic.query_terms.size())]);
                }
            } else if (kind == DocKind::distractor) {
                for (auto term : topic.query_terms) {
                    auto copies = 3 + uniform_index(2);
                    for (std::size_t c = 0; c < copies; ++c) {
                        insert_randomly(d.tokens, term);
                    }
                }
            }
            return d;
        }

        void add_topical_docs(std::vector<DocState> &docs, std::size_t topic)
        {
            for (std::size_t i = 0; i < m_cfg.relevant_per_query; ++i) {
                docs.push_back(make_doc(DocKind::relevant, topic, i % 2 == 0 ? 2 : 1));
            }
            for (std::size_t i = 0; i < m_cfg.distractors_per_query; ++i) {
                docs.push_back(make_doc(DocKind::distractor, topic, 0));
            }
        }

        std::uint32_t different_token(std::uint32_t old)
        {
            std::uint32_t t = zipf_token();
            while (t == old) {
                t = zipf_token();
            }
            return t;
        }

        std::vector<DocState> evolve(std::vector<DocState> const &docs, std::size_t step)
        {
            std::vector<DocState> next;
            for (auto const &d : docs) {
                if (uniform() < m_cfg.delete_rate) {
                    continue;
                }
                DocState copy = d;
                double u = uniform();
                if (u < m_cfg.frac_unchanged) {
                    // untouched
                } else if (u < m_cfg.frac_unchanged + m_cfg.frac_heavy_change) {
                    double share = 0.3 + 0.3 * uniform();
                    for (auto &tok : copy.tokens) {
                        if (uniform() < share) {
                            tok = different_token(tok);
                        }
                    }
                    // guarantee at least one edit for very short documents
                    auto pos = uniform_index(copy.tokens.size());
                    copy.tokens[pos] = different_token(copy.tokens[pos]);
                } else {
                    auto pos = uniform_index(copy.tokens.size());
                    copy.tokens[pos] = different_token(copy.tokens[pos]);
                }
                next.push_back(std::move(copy));
            }
            auto created = static_cast<std::size_t>(
                std::llround(m_cfg.create_rate * static_cast<double>(docs.size())));
            // documents of topics introduced now are part of the creation budget
            for (auto const &topic : m_topics) {
                if (topic.introduced_at == step) {
                    auto n = m_cfg.relevant_per_query + m_cfg.distractors_per_query;
                    created -= std::min(created, n);
                }
            }
            std::vector<std::size_t> live_topics;
            for (std::size_t t = 0; t < m_topics.size(); ++t) {
                if (m_topics[t].introduced_at < step) {
                    live_topics.push_back(t);
                }
            }
            for (std::size_t i = 0; i < created; ++i) {
                if (!live_topics.empty() && uniform() < m_cfg.topical_share_of_created) {
                    auto topic = live_topics[uniform_index(live_topics.size())];
                    if (uniform() < 0.4) {
                        next.push_back(make_doc(DocKind::relevant, topic, uniform() < 0.5 ? 2 : 1));
                    } else {
                        next.push_back(make_doc(DocKind::distractor, topic, 0));
                    }
                } else {
                    next.push_back(make_doc(DocKind::background, 0, 0));
                }
            }
            for (std::size_t t = 0; t < m_topics.size(); ++t) {
                if (m_topics[t].introduced_at == step) {
                    add_topical_docs(next, t);
                }
            }
            return next;
        }

        std::set<std::size_t> choose_active(std::size_t step)
        {
            std::set<std::size_t> active;
            for (std::size_t t = 0; t < m_topics.size(); ++t) {
                if (m_topics[t].introduced_at == step) {
                    active.insert(t);
                } else if (m_topics[t].introduced_at < step && uniform() < m_cfg.reoccur_rate) {
                    active.insert(t);
                }
            }
            bool any_reoccurring = std::any_of(active.begin(), active.end(), [&](std::size_t t) {
                return m_topics[t].introduced_at < step;
            });
            if (!any_reoccurring) {
                active.insert(0);
            }
            return active;
        }

        static std::string qid(std::size_t topic)
        {
            auto n = std::to_string(topic + 1);
            return "q" + std::string(n.size() < 3 ? 3 - n.size() : 0, '0') + n;
        }

        TimestampData emit(std::size_t step, std::vector<DocState> const &docs,
                           std::set<std::size_t> const &active)
        {
            auto ts = timestamp_label(step);
            std::vector<DocumentVersion> versions;
            versions.reserve(docs.size());
            for (auto const &d : docs) {
                std::string text;
                for (auto tok : d.tokens) {
                    if (!text.empty()) {
                        text.push_back(' ');
                    }
                    text += word(tok);
                }
                versions.push_back({d.id, ts, "https://example.org/" + d.id, std::move(text)});
            }
            TimestampData out{Snapshot(ts, std::move(versions)), {}, {}};
            for (auto t : active) {
                std::string query;
                for (auto term : m_topics[t].query_terms) {
                    if (!query.empty()) {
                        query.push_back(' ');
                    }
                    query += word(term);
                }
                out.queries.emplace(qid(t), std::move(query));

                std::vector<DocState const *> relevant;
                std::vector<DocState const *> negative;
                for (auto const &d : docs) {
                    if (d.kind != DocKind::background && d.topic == t) {
                        (d.kind == DocKind::relevant ? relevant : negative).push_back(&d);
                    }
                }
                std::size_t budget = m_cfg.judgments_per_query;
                for (auto const *d : relevant) {
                    if (budget == 0) {
                        break;
                    }
                    out.qrels.push_back({qid(t), d->id, ts, d->grade});
                    --budget;
                }
                for (auto const *d : negative) {
                    if (budget == 0) {
                        break;
                    }
                    out.qrels.push_back({qid(t), d->id, ts, 0});
                    --budget;
                }
            }
            return out;
        }

        GeneratorConfig m_cfg;
        std::mt19937_64 m_rng;
        std::vector<double> m_zipf_cdf;
        std::vector<Topic> m_topics;
        std::size_t m_next_id = 1;
    };

} // namespace detail

inline std::vector<TimestampData> generate(GeneratorConfig const &config)
{
    config.validate();
    return detail::Generator(config).run();
}

/// Writes `<root>/<timestamp>/{corpus.jsonl,queries.tsv,qrels.txt}` and
/// `<root>/qrels.manifest`.
inline void write_collection(std::vector<TimestampData> const &data,
                             std::filesystem::path const &root)
{
    std::filesystem::create_directories(root);
    std::ofstream manifest(root / "qrels.manifest");
    for (auto const &d : data) {
        auto dir = root / d.snapshot.timestamp();
        std::filesystem::create_directories(dir);
        std::ofstream corpus(dir / "corpus.jsonl");
        write_corpus(d.snapshot, corpus);
        std::ofstream queries(dir / "queries.tsv");
        write_queries(d.queries, queries);
        std::ofstream qrels(dir / "qrels.txt");
        write_qrels(d.qrels, qrels);
        manifest << d.snapshot.timestamp() << '\t' << d.snapshot.timestamp() << "/qrels.txt\n";
    }
}

} // namespace hrf::testkit

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hrf/error.hpp"

namespace hrf {

namespace detail {

    // Decodes one code point starting at `pos`. Invalid sequences decode to
    // U+FFFD and consume a single byte.
    inline char32_t decode_utf8(std::string_view text, std::size_t &pos)
    {
        auto byte = [&](std::size_t i) { return static_cast<unsigned char>(text[i]); };
        unsigned char lead = byte(pos);
        if (lead < 0x80) {
            ++pos;
            return lead;
        }
        std::size_t len = 0;
        char32_t cp = 0;
        if ((lead & 0xE0) == 0xC0) {
            len = 2;
            cp = lead & 0x1F;
        } else if ((lead & 0xF0) == 0xE0) {
            len = 3;
            cp = lead & 0x0F;
        } else if ((lead & 0xF8) == 0xF0) {
            len = 4;
            cp = lead & 0x07;
        } else {
            ++pos;
            return 0xFFFD;
        }
        if (pos + len > text.size()) {
            ++pos;
            return 0xFFFD;
        }
        for (std::size_t i = 1; i < len; ++i) {
            unsigned char cont = byte(pos + i);
            if ((cont & 0xC0) != 0x80) {
                ++pos;
                return 0xFFFD;
            }
            cp = (cp << 6) | (cont & 0x3F);
        }
        pos += len;
        return cp;
    }

    inline void encode_utf8(char32_t cp, std::string &out)
    {
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }

} // namespace detail

/// Letter-or-digit test. Exact for ASCII and Latin-1; beyond that every code
/// point counts as alphanumeric except the common punctuation, symbol and
/// space blocks.
constexpr bool is_alnum(char32_t cp) noexcept
{
    if (cp < 0x80) {
        return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    }
    if (cp < 0xC0) {
        return cp == 0xAA || cp == 0xB2 || cp == 0xB3 || cp == 0xB5 || cp == 0xB9 || cp == 0xBA
               || (cp >= 0xBC && cp <= 0xBE);
    }
    if (cp == 0xD7 || cp == 0xF7) {
        return false;
    }
    struct Range {
        char32_t lo, hi;
    };
    constexpr Range non_word[] = {
        {0x02B9, 0x02FF}, // modifier letters / spacing accents
        {0x037E, 0x037E}, {0x0387, 0x0387}, {0x055A, 0x055F}, {0x0589, 0x058A},
        {0x05BE, 0x05BE}, {0x05C0, 0x05C0}, {0x05C3, 0x05C3}, {0x05F3, 0x05F4},
        {0x060C, 0x060D}, {0x061B, 0x061F}, {0x066A, 0x066D}, {0x06D4, 0x06D4},
        {0x0964, 0x0965}, {0x0E5A, 0x0E5B}, {0x1680, 0x1680}, {0x2000, 0x206F},
        {0x20A0, 0x20CF}, {0x2100, 0x2101}, {0x2103, 0x2106}, {0x2108, 0x2109},
        {0x2116, 0x2118}, {0x211E, 0x2123}, {0x2125, 0x2125}, {0x2127, 0x2127},
        {0x2129, 0x2129}, {0x212E, 0x212E}, {0x213A, 0x213B}, {0x2140, 0x2144},
        {0x214A, 0x214D}, {0x2190, 0x245F}, {0x2500, 0x2775}, {0x2794, 0x2BFF},
        {0x2E00, 0x2E7F}, {0x3000, 0x3004}, {0x3008, 0x3020}, {0x3030, 0x3030},
        {0xFD3E, 0xFD3F}, {0xFE10, 0xFE1F}, {0xFE30, 0xFE6F}, {0xFEFF, 0xFEFF},
        {0xFF01, 0xFF0F}, {0xFF1A, 0xFF20}, {0xFF3B, 0xFF40}, {0xFF5B, 0xFF65},
        {0xFFE0, 0xFFEE}, {0xFFF9, 0xFFFD}, {0x1F000, 0x1FAFF},
    };
    for (auto const &r : non_word) {
        if (cp >= r.lo && cp <= r.hi) {
            return false;
        }
    }
    return true;
}

/// Simple lowercase mapping for ASCII, Latin-1, Latin Extended-A, Greek and
/// Cyrillic. Other code points map to themselves.
constexpr char32_t to_lower(char32_t cp) noexcept
{
    if (cp >= 'A' && cp <= 'Z') {
        return cp + 0x20;
    }
    if (cp < 0xC0) {
        return cp;
    }
    if (cp <= 0xDE) {
        return cp == 0xD7 ? cp : cp + 0x20;
    }
    if (cp >= 0x100 && cp <= 0x17F) {
        if (cp == 0x130) {
            return 'i';
        }
        if (cp == 0x178) {
            return 0xFF;
        }
        bool even_upper = (cp <= 0x137) || (cp >= 0x14A && cp <= 0x177);
        bool odd_upper = (cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E);
        if (even_upper && cp % 2 == 0) {
            return cp + 1;
        }
        if (odd_upper && cp % 2 == 1) {
            return cp + 1;
        }
        return cp;
    }
    if (cp >= 0x391 && cp <= 0x3AB && cp != 0x3A2) {
        return cp + 0x20;
    }
    if (cp >= 0x410 && cp <= 0x42F) {
        return cp + 0x20;
    }
    if (cp >= 0x400 && cp <= 0x40F) {
        return cp + 0x50;
    }
    return cp;
}

/// Lowercases and splits on every non-alphanumeric code point.
inline std::vector<std::string> split_words(std::string_view text)
{
    std::vector<std::string> words;
    std::string current;
    std::size_t pos = 0;
    while (pos < text.size()) {
        char32_t cp = detail::decode_utf8(text, pos);
        if (is_alnum(cp)) {
            detail::encode_utf8(to_lower(cp), current);
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        words.push_back(std::move(current));
    }
    return words;
}

/// Lowercase + whitespace collapse + trim; the identity used to decide
/// whether two query strings are "the same query".
inline std::string normalize_query(std::string_view query)
{
    std::string out;
    std::size_t pos = 0;
    bool pending_space = false;
    while (pos < query.size()) {
        char32_t cp = detail::decode_utf8(query, pos);
        bool space = cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f'
                     || cp == '\v' || cp == 0xA0;
        if (space) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        detail::encode_utf8(to_lower(cp), out);
    }
    return out;
}

/// Tokenizer shared by indexing, querying and feedback-term extraction.
/// Stopwords are compared after lowercasing.
class Analyzer {
  public:
    Analyzer() = default;

    explicit Analyzer(std::set<std::string> stopwords) : m_stopwords(std::move(stopwords)) {}

    static Analyzer from_stopword_file(std::string const &path)
    {
        std::ifstream in(path);
        if (!in) {
            throw Error("cannot open stopword list " + path);
        }
        std::set<std::string> words;
        std::string line;
        while (std::getline(in, line)) {
            for (auto &w : split_words(line)) {
                words.insert(std::move(w));
            }
        }
        return Analyzer(std::move(words));
    }

    [[nodiscard]] std::vector<std::string> tokenize(std::string_view text) const
    {
        auto words = split_words(text);
        if (!m_stopwords.empty()) {
            std::erase_if(words, [&](auto const &w) { return m_stopwords.contains(w); });
        }
        return words;
    }

    [[nodiscard]] std::set<std::string> const &stopwords() const noexcept { return m_stopwords; }

    bool operator==(Analyzer const &) const = default;

  private:
    std::set<std::string> m_stopwords;
};

} // namespace hrf

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "fipp/common.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace fipp {

/// A vocabulary with one row vector per token.
struct Embedding {
    std::vector<std::string> vocab;
    Matrix matrix;

    Index size() const { return matrix.rows(); }
    Index dim() const { return matrix.cols(); }

    /// Map from token to row. Built on each call; cache it if used in a loop.
    std::unordered_map<std::string, Index> index() const {
        std::unordered_map<std::string, Index> out;
        out.reserve(vocab.size());
        for (std::size_t i = 0; i < vocab.size(); ++i) {
            out.emplace(vocab[i], static_cast<Index>(i));
        }
        return out;
    }
};

struct IndexPair {
    Index src = 0;
    Index tgt = 0;

    friend bool operator==(const IndexPair&, const IndexPair&) = default;
    friend auto operator<=>(const IndexPair&, const IndexPair&) = default;
};

/// Seed translation pairs resolved against a source and target vocabulary.
struct SeedDictionary {
    std::vector<IndexPair> pairs;
    std::size_t skipped = 0; // lines dropped because a word was out of vocabulary

    Index size() const { return static_cast<Index>(pairs.size()); }

    std::vector<Index> src_indices() const {
        std::vector<Index> out;
        out.reserve(pairs.size());
        for (const auto& p : pairs) out.push_back(p.src);
        return out;
    }

    std::vector<Index> tgt_indices() const {
        std::vector<Index> out;
        out.reserve(pairs.size());
        for (const auto& p : pairs) out.push_back(p.tgt);
        return out;
    }
};

/// Gathers the given rows of `m` in order.
inline Matrix gather_rows(const Matrix& m, std::span<const Index> rows) {
    Matrix out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Index>(i)) = m.row(rows[i]);
    }
    return out;
}

/// Checks the Embedding invariants: matching sizes, unique tokens, finite entries.
inline void validate(const Embedding& emb) {
    detail::require(static_cast<Index>(emb.vocab.size()) == emb.matrix.rows(),
                    "embedding: vocab size " + std::to_string(emb.vocab.size()) + " != row count " +
                        std::to_string(emb.matrix.rows()));
    detail::require(emb.matrix.allFinite(), "embedding: non-finite entry");
    std::unordered_map<std::string_view, std::size_t> seen;
    seen.reserve(emb.vocab.size());
    for (std::size_t i = 0; i < emb.vocab.size(); ++i) {
        if (!seen.emplace(emb.vocab[i], i).second) {
            throw ConfigError("embedding: duplicate token '" + emb.vocab[i] + "'");
        }
    }
}

namespace detail {

inline std::string_view trim_line(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == '\n' || s.back() == ' ' || s.back() == '\t')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::string_view next_field(std::string_view& rest) {
    std::size_t b = 0;
    while (b < rest.size() && rest[b] == ' ') ++b;
    std::size_t e = b;
    while (e < rest.size() && rest[e] != ' ') ++e;
    std::string_view f = rest.substr(b, e - b);
    rest.remove_prefix(e);
    return f;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

} // namespace detail

/// Reads a word2vec-style text embedding: header "n d", then "token v1 ... vd" per line.
/// With `limit`, only the first min(n, limit) rows are read.
inline Embedding load_embeddings(const std::string& path, std::optional<Index> limit = std::nullopt) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open embedding file '" + path + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(path, 1, "missing header \"n d\"");
    }
    std::string_view rest = detail::trim_line(line);
    Index n = 0;
    Index d = 0;
    if (!detail::parse_number(detail::next_field(rest), n) || !detail::parse_number(detail::next_field(rest), d) ||
        !detail::next_field(rest).empty() || n < 0 || d <= 0) {
        throw ParseError(path, 1, "malformed header, expected \"n d\" with n >= 0 and d >= 1");
    }
    const Index rows = limit ? std::min(n, std::max<Index>(*limit, 0)) : n;

    Embedding emb;
    emb.vocab.reserve(static_cast<std::size_t>(rows));
    emb.matrix.resize(rows, d);
    std::unordered_map<std::string, std::size_t> seen;
    seen.reserve(static_cast<std::size_t>(rows));

    std::size_t lineno = 1;
    Index r = 0;
    while (r < rows && std::getline(in, line)) {
        ++lineno;
        std::string_view body = detail::trim_line(line);
        if (body.empty()) {
            throw ParseError(path, lineno, "empty line inside vector block");
        }
        const std::size_t sp = body.find(' ');
        if (sp == std::string_view::npos || sp == 0) {
            throw ParseError(path, lineno, "expected a token followed by " + std::to_string(d) + " values");
        }
        std::string token(body.substr(0, sp));
        std::string_view values = body.substr(sp);
        Index k = 0;
        for (std::string_view f = detail::next_field(values); !f.empty(); f = detail::next_field(values)) {
            if (k >= d) {
                throw ParseError(path, lineno, "row '" + token + "' has more than " + std::to_string(d) + " values");
            }
            double v = 0.0;
            if (!detail::parse_number(f, v)) {
                throw ParseError(path, lineno, "cannot parse value '" + std::string(f) + "'");
            }
            if (!std::isfinite(v)) {
                throw ParseError(path, lineno, "non-finite value in row '" + token + "'");
            }
            emb.matrix(r, k++) = v;
        }
        if (k != d) {
            throw ParseError(path, lineno,
                             "row '" + token + "' has " + std::to_string(k) + " values, expected " + std::to_string(d));
        }
        if (!seen.emplace(token, lineno).second) {
            throw ParseError(path, lineno, "duplicate token '" + token + "'");
        }
        emb.vocab.push_back(std::move(token));
        ++r;
    }
    if (r < rows) {
        throw ParseError(path, lineno + 1,
                         "header promises " + std::to_string(n) + " rows but file ends after " + std::to_string(r));
    }
    return emb;
}

/// Writes `emb` in the format load_embeddings reads. Values use the shortest
/// representation that parses back to the identical double.
inline void save_embeddings(const Embedding& emb, const std::string& path) {
    validate(emb);
    if (emb.size() == 0) {
        throw ConfigError("refusing to write empty embedding to '" + path + "'");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    out << emb.size() << ' ' << emb.dim() << '\n';
    char buf[64];
    std::string row;
    for (Index i = 0; i < emb.size(); ++i) {
        row.assign(emb.vocab[static_cast<std::size_t>(i)]);
        for (Index j = 0; j < emb.dim(); ++j) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), emb.matrix(i, j));
            row.push_back(' ');
            row.append(buf, ptr);
        }
        row.push_back('\n');
        out << row;
    }
    out.flush();
    if (!out) {
        throw IoError("write failed for '" + path + "'");
    }
}

/// A dictionary line as written in the file, before vocabulary lookup.
struct WordPair {
    std::string src;
    std::string tgt;
};

/// Reads "src<TAB or space>tgt" lines. Extra trailing columns are ignored.
inline std::vector<WordPair> read_word_pairs(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open dictionary file '" + path + "'");
    }
    std::vector<WordPair> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view body = detail::trim_line(line);
        if (body.empty()) continue;
        const std::size_t sep = body.find_first_of("\t ");
        if (sep == std::string_view::npos || sep == 0) {
            throw ParseError(path, lineno, "expected \"src<TAB>tgt\"");
        }
        std::string_view rest = body.substr(sep + 1);
        const std::size_t end = rest.find_first_of("\t ");
        std::string_view tgt = rest.substr(0, end);
        if (tgt.empty()) {
            throw ParseError(path, lineno, "expected \"src<TAB>tgt\"");
        }
        out.push_back({std::string(body.substr(0, sep)), std::string(tgt)});
    }
    return out;
}

/// Resolves dictionary words to row indices. Out-of-vocabulary pairs are
/// skipped and counted; duplicates keep their first occurrence.
inline SeedDictionary resolve_dictionary(std::span<const WordPair> words, const Embedding& src, const Embedding& tgt) {
    const auto src_index = src.index();
    const auto tgt_index = tgt.index();
    SeedDictionary dict;
    std::set<IndexPair> seen;
    for (const auto& w : words) {
        const auto s = src_index.find(w.src);
        const auto t = tgt_index.find(w.tgt);
        if (s == src_index.end() || t == tgt_index.end()) {
            ++dict.skipped;
            continue;
        }
        const IndexPair p{s->second, t->second};
        if (seen.insert(p).second) {
            dict.pairs.push_back(p);
        }
    }
    return dict;
}

inline SeedDictionary load_dictionary(const std::string& path, const Embedding& src, const Embedding& tgt) {
    SeedDictionary dict = resolve_dictionary(read_word_pairs(path), src, tgt);
    if (dict.pairs.empty()) {
        throw ConfigError("dictionary '" + path + "' has no pair with both words in vocabulary (" +
                          std::to_string(dict.skipped) + " skipped)");
    }
    return dict;
}

/// Writes "src<TAB>tgt[<TAB>score]" lines; `scores` may be empty.
inline void save_dictionary(const std::string& path, const Embedding& src, const Embedding& tgt,
                            std::span<const IndexPair> pairs, std::span<const double> scores = {}) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    char buf[64];
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        out << src.vocab[static_cast<std::size_t>(pairs[i].src)] << '\t'
            << tgt.vocab[static_cast<std::size_t>(pairs[i].tgt)];
        if (i < scores.size()) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), scores[i]);
            out << '\t' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
        }
        out << '\n';
    }
    if (!out) {
        throw IoError("write failed for '" + path + "'");
    }
}

} // namespace fipp

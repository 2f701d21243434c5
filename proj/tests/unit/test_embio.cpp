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


#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

namespace {

using fipp::Embedding;
using fipp::Index;
using fipp::Matrix;

Embedding make(std::vector<std::string> vocab, Matrix m) { return Embedding{std::move(vocab), std::move(m)}; }

TEST(LoadEmbeddings, ParsesHeaderAndRows) {
    const auto dir = fixture::scratch_dir("embio_parse");
    const auto path = fixture::write_file(dir / "e.vec", "2 3\na 1 0 0\nb 0 1 0");
    const Embedding e = fipp::load_embeddings(path);
    ASSERT_EQ(e.vocab, (std::vector<std::string>{"a", "b"}));
    ASSERT_EQ(e.size(), 2);
    ASSERT_EQ(e.dim(), 3);
    Matrix expect(2, 3);
    expect << 1, 0, 0, 0, 1, 0;
    EXPECT_EQ(e.matrix, expect);
}

TEST(LoadEmbeddings, LimitTruncates) {
    const auto dir = fixture::scratch_dir("embio_limit");
    const auto path = fixture::write_file(dir / "e.vec", "2 3\na 1 0 0\nb 0 1 0\n");
    const Embedding e = fipp::load_embeddings(path, 1);
    EXPECT_EQ(e.vocab, std::vector<std::string>{"a"});
    EXPECT_EQ(e.size(), 1);
}

TEST(LoadEmbeddings, WrongArityNamesLine) {
    const auto dir = fixture::scratch_dir("embio_arity");
    const auto path = fixture::write_file(dir / "e.vec", "2 3\na 1 0 0\nb 0 1 0 7\n");
    try {
        fipp::load_embeddings(path);
        FAIL() << "expected ParseError";
    } catch (const fipp::ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos);
    }
}

TEST(LoadEmbeddings, RejectsBadInput) {
    const auto dir = fixture::scratch_dir("embio_bad");
    const std::vector<std::pair<std::string, std::size_t>> cases = {
        {"2\na 1\n", 1},                     // header
        {"x 3\na 1 0 0\n", 1},               // header
        {"1 2\na 1 nan\n", 2},               // non-finite
        {"1 2\na 1 inf\n", 2},               // non-finite
        {"2 2\na 1 0\na 0 1\n", 3},          // duplicate
        {"1 2\na 1 zz\n", 2},                // not a number
        {"3 2\na 1 0\nb 0 1\n", 4},          // truncated
        {"1 2\na 1\n", 2},                   // short row
    };
    for (std::size_t k = 0; k < cases.size(); ++k) {
        const auto path = fixture::write_file(dir / ("c" + std::to_string(k)), cases[k].first);
        try {
            fipp::load_embeddings(path);
            ADD_FAILURE() << "case " << k << " parsed";
        } catch (const fipp::ParseError& e) {
            EXPECT_EQ(e.line(), cases[k].second) << "case " << k << ": " << e.what();
        }
    }
}

TEST(LoadEmbeddings, MissingFileIsIoError) {
    EXPECT_THROW(fipp::load_embeddings("/nonexistent/e.vec"), fipp::IoError);
}

TEST(LoadEmbeddings, ValuesParseExactly) {
    const auto dir = fixture::scratch_dir("embio_exact");
    const auto path = fixture::write_file(dir / "e.vec", "1 3\nw 0.1 -2.5e-3 +7\n");
    const Embedding e = fipp::load_embeddings(path);
    EXPECT_EQ(e.matrix(0, 0), 0.1);
    EXPECT_EQ(e.matrix(0, 1), -2.5e-3);
    EXPECT_EQ(e.matrix(0, 2), 7.0);
}

TEST(SaveEmbeddings, RoundTrip) {
    const auto dir = fixture::scratch_dir("embio_roundtrip");
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix m = oracle::random_matrix(5, 4, rng, std::pow(10.0, trial % 7 - 3));
        const Embedding e = make({"a", "b", "c", "d", "e"}, m);
        const auto path = (dir / "e.vec").string();
        fipp::save_embeddings(e, path);
        const Embedding back = fipp::load_embeddings(path);
        EXPECT_EQ(back.vocab, e.vocab);
        EXPECT_LE((back.matrix - e.matrix).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(SaveEmbeddings, TwoByThreeRoundTripThenLimit) {
    const auto dir = fixture::scratch_dir("embio_small");
    Matrix m(2, 3);
    m << 0.123456789012, -1.5, 3e-7, 2, 0, -0.333333333333;
    const Embedding e = make({"x", "y"}, m);
    const auto path = (dir / "e.vec").string();
    fipp::save_embeddings(e, path);
    EXPECT_LE((fipp::load_embeddings(path).matrix - m).cwiseAbs().maxCoeff(), 1e-9);
    const Embedding first = fipp::load_embeddings(path, 1);
    ASSERT_EQ(first.size(), 1);
    EXPECT_EQ(first.vocab[0], "x");
    EXPECT_LE((first.matrix.row(0) - m.row(0)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(SaveEmbeddings, RefusesEmpty) {
    const auto dir = fixture::scratch_dir("embio_empty");
    const Embedding e = make({}, Matrix(0, 3));
    EXPECT_THROW(fipp::save_embeddings(e, (dir / "e.vec").string()), fipp::Error);
    EXPECT_FALSE(std::filesystem::exists(dir / "e.vec"));
}

TEST(SaveEmbeddings, UnwritablePathNamesPath) {
    const Embedding e = make({"a"}, Matrix::Ones(1, 2));
    try {
        fipp::save_embeddings(e, "/nonexistent/dir/e.vec");
        FAIL();
    } catch (const fipp::IoError& err) {
        EXPECT_NE(std::string(err.what()).find("/nonexistent/dir/e.vec"), std::string::npos);
    }
}

class Dictionary : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fixture::scratch_dir("embio_dict");
        src = make({"a", "b", "c"}, Matrix::Identity(3, 3));
        tgt = make({"x", "y"}, Matrix::Identity(2, 2));
    }
    std::filesystem::path dir;
    Embedding src, tgt;
};

TEST_F(Dictionary, ResolvesPairs) {
    const auto d = fipp::load_dictionary(fixture::write_file(dir / "d.tsv", "a\tx\nb\ty\n"), src, tgt);
    EXPECT_EQ(d.pairs, (std::vector<fipp::IndexPair>{{0, 0}, {1, 1}}));
    EXPECT_EQ(d.skipped, 0u);
}

TEST_F(Dictionary, SkipsOutOfVocabulary) {
    const auto d = fipp::load_dictionary(fixture::write_file(dir / "d.tsv", "a\tzzz\nb\ty\n"), src, tgt);
    EXPECT_EQ(d.pairs, (std::vector<fipp::IndexPair>{{1, 1}}));
    EXPECT_EQ(d.skipped, 1u);
}

TEST_F(Dictionary, Deduplicates) {
    const auto d = fipp::load_dictionary(fixture::write_file(dir / "d.tsv", "a\tx\nc y\na\tx\n\n"), src, tgt);
    EXPECT_EQ(d.pairs, (std::vector<fipp::IndexPair>{{0, 0}, {2, 1}}));
}

TEST_F(Dictionary, NothingResolvesIsError) {
    EXPECT_THROW(fipp::load_dictionary(fixture::write_file(dir / "d.tsv", "q\tx\n"), src, tgt), fipp::ConfigError);
    EXPECT_THROW(fipp::load_dictionary((dir / "missing.tsv").string(), src, tgt), fipp::IoError);
}

TEST_F(Dictionary, IndicesAlwaysValid) {
    std::mt19937_64 rng(3);
    const std::vector<std::string> words = {"a", "b", "c", "x", "y", "q"};
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<fipp::WordPair> lines;
        for (int k = 0; k < 10; ++k) lines.push_back({words[pick(rng)], words[pick(rng)]});
        const auto d = fipp::resolve_dictionary(lines, src, tgt);
        for (const auto& p : d.pairs) {
            EXPECT_TRUE(p.src >= 0 && p.src < src.size());
            EXPECT_TRUE(p.tgt >= 0 && p.tgt < tgt.size());
        }
    }
}

TEST_F(Dictionary, SaveWritesScores) {
    const std::vector<fipp::IndexPair> pairs{{2, 0}, {0, 1}};
    const std::vector<double> scores{0.5, 0.25};
    const auto path = (dir / "out.tsv").string();
    fipp::save_dictionary(path, src, tgt, pairs, scores);
    EXPECT_EQ(fixture::read_file(path), "c\tx\t0.5\na\ty\t0.25\n");
    const auto back = fipp::load_dictionary(path, src, tgt);
    EXPECT_EQ(back.pairs, pairs);
}

} // namespace

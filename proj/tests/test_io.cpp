#include "doctest.h"
#include "support.hpp"

#include "ccax/archive.hpp"
#include "ccax/error.hpp"
#include "ccax/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

using namespace ccax;
using testing::TempDir;

namespace {

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
}

std::string fmat_bytes(std::uint64_t rows, std::uint64_t cols, const std::vector<double>& values) {
  std::string s = "FMATRX01";
  for (auto v : {rows, cols})
    for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  for (double d : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  return s;
}

}  // namespace

TEST_CASE("feature matrix invariants") {
  CHECK_THROWS_AS(FeatureMatrix{Eigen::MatrixXd(0, 3)}, DimensionError);
  CHECK_THROWS_AS(FeatureMatrix{Eigen::MatrixXd(2, 0)}, DimensionError);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(FeatureMatrix{bad}, FormatError);
  bad(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(FeatureMatrix{bad}, FormatError);
  CHECK_THROWS(FeatureMatrix(Eigen::MatrixXd::Zero(2, 2), {"a", "a"}));
  CHECK_THROWS(FeatureMatrix(Eigen::MatrixXd::Zero(2, 2), {"a"}));
  FeatureMatrix named(Eigen::MatrixXd::Zero(2, 2), {"a", "b"});
  CHECK(named.id(1) == "b");
  CHECK(FeatureMatrix(Eigen::MatrixXd::Zero(3, 1)).id(2) == "2");
}

TEST_CASE("FMAT1 decode of a hand-built file") {
  TempDir dir;
  write_bytes(dir / "m.fmat", fmat_bytes(2, 3, {1, 2, 3, 4, 5, 6}));
  const auto m = load_matrix(dir / "m.fmat");
  Eigen::MatrixXd expected(2, 3);
  expected << 1, 2, 3, 4, 5, 6;
  CHECK(m.values() == expected);
}

TEST_CASE("FMAT1 1x1 file is 32 bytes") {
  TempDir dir;
  save_matrix(FeatureMatrix(Eigen::MatrixXd::Zero(1, 1)), dir / "z.fmat");
  CHECK(read_bytes(dir / "z.fmat").size() == 32);
  CHECK(read_bytes(dir / "z.fmat") == fmat_bytes(1, 1, {0.0}));
}

TEST_CASE("FMAT1 round trip is bit exact (property)") {
  TempDir dir;
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    const auto rows = static_cast<Eigen::Index>(1 + rng() % 9);
    const auto cols = static_cast<Eigen::Index>(1 + rng() % 9);
    Eigen::MatrixXd values = testing::random_matrix(rows, cols, rng());
    values *= std::pow(10.0, static_cast<double>(rng() % 40) - 20.0);
    const FeatureMatrix m(values);
    save_matrix(m, dir / "a.fmat");
    const auto back = load_matrix(dir / "a.fmat");
    CHECK(back == m);
    save_matrix(back, dir / "b.fmat");
    CHECK(read_bytes(dir / "a.fmat") == read_bytes(dir / "b.fmat"));
  }
}

TEST_CASE("FMAT1 rejects malformed files") {
  TempDir dir;
  write_bytes(dir / "empty.fmat", "");
  CHECK_THROWS_AS(load_matrix(dir / "empty.fmat"), FormatError);
  write_bytes(dir / "magic.fmat", "FMATRX02" + fmat_bytes(1, 1, {1}).substr(8));
  CHECK_THROWS_AS(load_matrix(dir / "magic.fmat"), FormatError);
  write_bytes(dir / "short.fmat", fmat_bytes(2, 2, {1, 2, 3}));
  CHECK_THROWS_AS(load_matrix(dir / "short.fmat"), DimensionError);
  write_bytes(dir / "long.fmat", fmat_bytes(1, 2, {1, 2, 3}));
  CHECK_THROWS_AS(load_matrix(dir / "long.fmat"), DimensionError);
  write_bytes(dir / "nan.fmat", fmat_bytes(1, 2, {1, std::numeric_limits<double>::quiet_NaN()}));
  CHECK_THROWS_AS(load_matrix(dir / "nan.fmat"), FormatError);
  write_bytes(dir / "zero.fmat", fmat_bytes(0, 2, {}));
  CHECK_THROWS(load_matrix(dir / "zero.fmat"));
  CHECK_THROWS_AS(load_matrix(dir / "missing.fmat"), IoError);
}

TEST_CASE("CSV load and save") {
  TempDir dir;
  write_bytes(dir / "m.csv", "1,2\n3,4\n");
  Eigen::MatrixXd expected(2, 2);
  expected << 1, 2, 3, 4;
  CHECK(load_matrix(dir / "m.csv", MatrixFormat::csv).values() == expected);
  CHECK(load_matrix_auto(dir / "m.csv").values() == expected);

  write_bytes(dir / "ragged.csv", "1,2\n3\n");
  CHECK_THROWS_AS(load_matrix(dir / "ragged.csv", MatrixFormat::csv), DimensionError);
  write_bytes(dir / "junk.csv", "1,x\n");
  CHECK_THROWS_AS(load_matrix(dir / "junk.csv", MatrixFormat::csv), FormatError);
  write_bytes(dir / "inf.csv", "1,inf\n");
  CHECK_THROWS_AS(load_matrix(dir / "inf.csv", MatrixFormat::csv), FormatError);
  write_bytes(dir / "empty.csv", "");
  CHECK_THROWS_AS(load_matrix(dir / "empty.csv", MatrixFormat::csv), FormatError);

  const FeatureMatrix m(testing::random_matrix(4, 3, 11));
  save_matrix_auto(m, dir / "r.csv");
  CHECK(load_matrix_auto(dir / "r.csv") == m);
}

TEST_CASE("embedding table parsing") {
  TempDir dir;
  write_bytes(dir / "ok.txt", "2 3\na 1 0 0\nb 0 1 0\n");
  const auto t = load_embedding_table(dir / "ok.txt");
  CHECK(t.size() == 2);
  CHECK(t.dim() == 3);
  CHECK(t.vector("a") == Eigen::Vector3d(1, 0, 0));
  CHECK(t.vector("b") == Eigen::Vector3d(0, 1, 0));
  CHECK_FALSE(t.contains("c"));

  write_bytes(dir / "count.txt", "3 3\na 1 0 0\nb 0 1 0\n");
  CHECK_THROWS_AS(load_embedding_table(dir / "count.txt"), FormatError);
  write_bytes(dir / "dim.txt", "2 3\na 1 0\nb 0 1 0\n");
  CHECK_THROWS_AS(load_embedding_table(dir / "dim.txt"), DimensionError);
  write_bytes(dir / "dup.txt", "2 1\na 1\na 2\n");
  CHECK_THROWS_AS(load_embedding_table(dir / "dup.txt"), FormatError);
  write_bytes(dir / "header.txt", "two 3\n");
  CHECK_THROWS_AS(load_embedding_table(dir / "header.txt"), FormatError);
}

TEST_CASE("embedding table re-save keeps every bit") {
  TempDir dir;
  Eigen::MatrixXd v = testing::random_matrix(5, 4, 3) * 1e-3;
  v(0, 0) = 0.1;
  v(1, 1) = 1.0 / 3.0;
  const EmbeddingTable t({"w0", "w1", "w2", "w3", "w4"}, v);
  save_embedding_table(t, dir / "t.txt");
  const auto back = load_embedding_table(dir / "t.txt");
  CHECK(back.tokens() == t.tokens());
  CHECK(back.vectors() == t.vectors());
}

TEST_CASE("tokenizer") {
  CHECK(tokenize("The cat, sat.") == std::vector<std::string>{"the", "cat", "sat"});
  CHECK(tokenize("  A\tdog's  ball!! ") == std::vector<std::string>{"a", "dog's", "ball"});
  CHECK(tokenize("-- ... !") .empty());
}

TEST_CASE("corpus loading and out-of-vocabulary policy") {
  TempDir dir;
  const EmbeddingTable table({"a", "b"}, Eigen::MatrixXd::Identity(2, 2));
  write_bytes(dir / "ab.txt", "a b\n");
  auto c = load_corpus(dir / "ab.txt", table);
  REQUIRE(c.size() == 1);
  CHECK(c.sentences[0] == std::vector<std::string>{"a", "b"});
  CHECK(c.pair_index == std::vector<std::size_t>{0});

  write_bytes(dir / "oov.txt", "a zzz\n");
  CHECK(load_corpus(dir / "oov.txt", table, OovPolicy::skip).sentences[0] == std::vector<std::string>{"a"});
  CHECK_THROWS_AS(load_corpus(dir / "oov.txt", table, OovPolicy::error), FormatError);

  write_bytes(dir / "empty.txt", "zzz\n");
  CHECK_THROWS_AS(load_corpus(dir / "empty.txt", table, OovPolicy::skip), FormatError);

  write_bytes(dir / "two.txt", "a\nb\n");
  write_bytes(dir / "pairs.txt", "1\n1\n");
  c = load_corpus(dir / "two.txt", table, OovPolicy::skip, std::filesystem::path(dir / "pairs.txt"), 2);
  CHECK(c.pair_index == std::vector<std::size_t>{1, 1});
  CHECK_THROWS(load_corpus(dir / "two.txt", table, OovPolicy::skip, std::filesystem::path(dir / "pairs.txt"), 1));
  write_bytes(dir / "short_pairs.txt", "0\n");
  CHECK_THROWS(load_corpus(dir / "two.txt", table, OovPolicy::skip, std::filesystem::path(dir / "short_pairs.txt")));
}

TEST_CASE("pairing and split files round trip") {
  TempDir dir;
  save_pairing({0, 0, 1, 2}, dir / "p.txt");
  CHECK(load_pairing(dir / "p.txt") == std::vector<std::size_t>{0, 0, 1, 2});
  CHECK_THROWS(load_pairing(dir / "p.txt", 2));

  SplitAssignment s;
  s.roles = {SplitRole::train, SplitRole::train, SplitRole::val, SplitRole::test};
  save_splits(s, dir / "s.tsv");
  CHECK(read_bytes(dir / "s.tsv") == "0\ttrain\n1\ttrain\n2\tval\n3\ttest\n");
  CHECK(load_splits(dir / "s.tsv").roles == s.roles);
  CHECK(s.rows_with(SplitRole::train) == std::vector<std::size_t>{0, 1});

  write_bytes(dir / "dup.tsv", "0\ttrain\n0\tval\n");
  CHECK_THROWS_AS(load_splits(dir / "dup.tsv"), FormatError);
  write_bytes(dir / "gap.tsv", "0\ttrain\n2\tval\n");
  CHECK_THROWS_AS(load_splits(dir / "gap.tsv"), FormatError);
  write_bytes(dir / "role.tsv", "0\tdev\n");
  CHECK_THROWS_AS(load_splits(dir / "role.tsv"), FormatError);
}

TEST_CASE("model archive round trip") {
  TempDir dir;
  ModelArchive a;
  a.set("model", std::string("cca"));
  a.set("gamma", 0.1);
  a.set("k", 7LL);
  a.add_blob("U", FeatureMatrix(testing::random_matrix(3, 2, 1)));
  a.add_blob("S", FeatureMatrix(testing::random_matrix(1, 2, 2)));
  save_archive(a, dir / "a.arc");
  const auto b = load_archive(dir / "a.arc");
  CHECK(b.get("model") == "cca");
  CHECK(b.get_double("gamma") == 0.1);
  CHECK(b.get_int("k") == 7);
  CHECK(b.blob("U") == a.blob("U"));
  CHECK(b.blob("S") == a.blob("S"));
  save_archive(b, dir / "b.arc");
  CHECK(read_bytes(dir / "a.arc") == read_bytes(dir / "b.arc"));
  CHECK(read_bytes(dir / "a.arc").substr(0, 8) == "CCAXARC1");

  CHECK_THROWS(b.get("nope"));
  CHECK_THROWS(b.blob("nope"));
  CHECK_THROWS_AS(a.set("bad=key", std::string("v")), InvalidArgument);

  auto bytes = read_bytes(dir / "a.arc");
  write_bytes(dir / "trunc.arc", bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_archive(dir / "trunc.arc"), DimensionError);
  write_bytes(dir / "magic.arc", "XXXXXXXX" + bytes.substr(8));
  CHECK_THROWS_AS(load_archive(dir / "magic.arc"), FormatError);
}

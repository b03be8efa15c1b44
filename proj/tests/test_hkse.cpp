#include "doctest.h"
#include "support.hpp"

#include "ccax/error.hpp"
#include "ccax/hkse.hpp"

#include <cmath>
#include <random>

using namespace ccax;
using testing::random_matrix;

namespace {

Eigen::VectorXd unit_vector(Eigen::Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  Eigen::VectorXd v(d);
  for (auto& x : v) x = n(rng);
  return v / v.norm();
}

// max over pairs of |<phi(a), phi(b)> - exp(-gamma/2 |a-b|^2)| for unit-vector pairs
double word_layer_error(Eigen::Index m, std::uint64_t seed) {
  const auto map = HkseMap::build(LayerKind::rbf, LayerKind::lin, 1.0, 0.0, m, 0, 8, seed);
  std::mt19937_64 rng(1234);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const auto a = unit_vector(8, rng), b = unit_vector(8, rng);
    const double approx = map.word_feature(a).dot(map.word_feature(b));
    worst = std::max(worst, std::abs(approx - std::exp(-0.5 * (a - b).squaredNorm())));
  }
  return worst;
}

}  // namespace

TEST_CASE("exact sum is correctly rounded and order independent") {
  std::vector<double> v{1e100, 1.0, -1e100, 1e-3};
  CHECK(exact_sum(v) == 1.0 + 1e-3);
  std::vector<double> w{0.1, 0.2, 0.3};
  CHECK(exact_sum(w) == 0.6);
  std::vector<double> r = {0.1, 0.7, -0.3, 1e-17, 5.5, -2.25};
  const double s = exact_sum(r);
  std::sort(r.begin(), r.end());
  do {
    CHECK(exact_sum(r) == s);
  } while (std::next_permutation(r.begin(), r.end()));
  CHECK(exact_sum({}) == 0.0);
}

TEST_CASE("build is deterministic per seed") {
  const auto a = HkseMap::build(LayerKind::rbf, LayerKind::rbf, 0.5, 0.01, 16, 12, 5, 7);
  const auto b = HkseMap::build(LayerKind::rbf, LayerKind::rbf, 0.5, 0.01, 16, 12, 5, 7);
  const auto c = HkseMap::build(LayerKind::rbf, LayerKind::rbf, 0.5, 0.01, 16, 12, 5, 8);
  CHECK(a.w_word() == b.w_word());
  CHECK(a.b_word() == b.b_word());
  CHECK(a.w_sent() == b.w_sent());
  CHECK(a.b_sent() == b.b_sent());
  CHECK((a.w_word() - c.w_word()).norm() > 0);
  CHECK(a.w_word().rows() == 16);
  CHECK(a.w_word().cols() == 5);
  CHECK(a.w_sent().rows() == 12);
  CHECK(a.w_sent().cols() == 16);
  CHECK(a.output_dim() == 12);
  CHECK(a.b_word().minCoeff() >= 0.0);
  CHECK(a.b_word().maxCoeff() <= 2 * M_PI);
}

TEST_CASE("lin layers carry no random arrays") {
  const auto m = HkseMap::build(LayerKind::lin, LayerKind::lin, 0, 0, 0, 0, 4, 1);
  CHECK(m.w_word().size() == 0);
  CHECK(m.w_sent().size() == 0);
  CHECK(m.output_dim() == 4);
  const auto lr = HkseMap::build(LayerKind::lin, LayerKind::rbf, 0, 0.01, 0, 9, 4, 1);
  CHECK(lr.w_sent().cols() == 4);
  CHECK(lr.output_dim() == 9);
}

TEST_CASE("build rejects bad bandwidths and sizes") {
  CHECK_THROWS_AS(HkseMap::build(LayerKind::rbf, LayerKind::lin, 0.0, 0, 4, 0, 3, 1), InvalidArgument);
  CHECK_THROWS_AS(HkseMap::build(LayerKind::lin, LayerKind::rbf, 0, -1.0, 0, 4, 3, 1), InvalidArgument);
  CHECK_THROWS_AS(HkseMap::build(LayerKind::rbf, LayerKind::lin, 1.0, 0, 0, 0, 3, 1), InvalidArgument);
  CHECK_THROWS_AS(HkseMap::build(LayerKind::lin, LayerKind::lin, 0, 0, 0, 0, 0, 1), InvalidArgument);
}

TEST_CASE("word features") {
  const auto lin = HkseMap::build(LayerKind::lin, LayerKind::lin, 0, 0, 0, 0, 3, 1);
  const Eigen::Vector3d a(0.1, -2, 3);
  CHECK(lin.word_feature(a) == Eigen::VectorXd(a));
  CHECK_THROWS_AS(lin.word_feature(Eigen::Vector2d(1, 2)), DimensionError);

  const auto rbf = HkseMap::build(LayerKind::rbf, LayerKind::lin, 1.0, 0, 8192, 0, 8, 3);
  std::mt19937_64 rng(5);
  const auto u = unit_vector(8, rng);
  CHECK(std::abs(rbf.word_feature(u).squaredNorm() - 1.0) <= 0.05);
  CHECK(rbf.word_feature(u).cwiseAbs().maxCoeff() <= std::sqrt(2.0 / 8192) + 1e-15);
}

TEST_CASE("word-level approximation error shrinks as m grows") {
  const double e512 = word_layer_error(512, 11);
  const double e2048 = word_layer_error(2048, 11);
  const double e8192 = word_layer_error(8192, 11);
  CHECK(e2048 < e512);
  CHECK(e8192 < e2048);
  CHECK(e8192 <= 0.05);
}

TEST_CASE("(lin,lin) sentence embedding is the mean word vector") {
  const auto m = HkseMap::build(LayerKind::lin, LayerKind::lin, 0, 0, 0, 0, 3, 1);
  Eigen::MatrixXd one(1, 3);
  one << 0.1, 0.2, 0.3;
  CHECK(m.embed_sentence(one) == Eigen::VectorXd(one.row(0).transpose()));
  Eigen::MatrixXd two(2, 3);
  two << 0.1, 0.2, 0.3, 0.7, -0.5, 1.25;
  const Eigen::VectorXd expected = ((two.row(0) + two.row(1)) / 2.0).transpose();
  CHECK(m.embed_sentence(two) == expected);
  CHECK_THROWS_AS(m.embed_sentence(Eigen::MatrixXd(0, 3)), InvalidArgument);
}

TEST_CASE("sentence embedding ignores token order exactly") {
  const auto m = HkseMap::build(LayerKind::rbf, LayerKind::rbf, 0.7, 0.3, 64, 32, 5, 2);
  Eigen::MatrixXd s = random_matrix(6, 5, 3);
  const auto e = m.embed_sentence(s);
  std::vector<Eigen::Index> perm{0, 1, 2, 3, 4, 5};
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd p(6, 5);
    for (Eigen::Index i = 0; i < 6; ++i) p.row(i) = s.row(perm[static_cast<std::size_t>(i)]);
    CHECK(m.embed_sentence(p) == e);
    CHECK(m.embed_sentence(p) == m.embed_sentence(p));
  }
}

TEST_CASE("exact kernel identities") {
  const Eigen::MatrixXd s1 = random_matrix(5, 4, 1), s2 = random_matrix(3, 4, 2);
  // identical multisets in a different order
  Eigen::MatrixXd s1r = s1.colwise().reverse();
  CHECK(exact_kernel(s1, s1r, LayerKind::rbf, LayerKind::rbf, 0.5, 0.3) == 1.0);
  CHECK(exact_kernel(s1, s1, LayerKind::lin, LayerKind::rbf, 0, 0.3) == 1.0);
  for (auto w : {LayerKind::lin, LayerKind::rbf})
    for (auto s : {LayerKind::lin, LayerKind::rbf})
      CHECK(exact_kernel(s1, s2, w, s, 0.5, 0.3) == exact_kernel(s2, s1, w, s, 0.5, 0.3));
  const double k = exact_kernel(s1, s2, LayerKind::rbf, LayerKind::rbf, 0.5, 0.3);
  CHECK(k > 0.0);
  CHECK(k <= 1.0);

  // (lin, rbf) reduces to a Gaussian in the token means
  const Eigen::VectorXd mu1 = s1.colwise().mean().transpose(), mu2 = s2.colwise().mean().transpose();
  CHECK(exact_kernel(s1, s2, LayerKind::lin, LayerKind::rbf, 0, 0.3) ==
        doctest::Approx(std::exp(-0.15 * (mu1 - mu2).squaredNorm())).epsilon(1e-12));
  // (lin, lin) is the inner product of the means
  CHECK(exact_kernel(s1, s2, LayerKind::lin, LayerKind::lin, 0, 0) == doctest::Approx(mu1.dot(mu2)).epsilon(1e-12));

  CHECK_THROWS(exact_kernel(Eigen::MatrixXd(0, 4), s2, LayerKind::lin, LayerKind::lin, 0, 0));
}

TEST_CASE("brute-force double sum equals the mean-difference expansion") {
  const Eigen::MatrixXd a = random_matrix(5, 6, 8), b = random_matrix(5, 6, 9);
  double cross = 0, aa = 0, bb = 0;
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 5; ++j) {
      cross += a.row(i).dot(b.row(j));
      aa += a.row(i).dot(a.row(j));
      bb += b.row(i).dot(b.row(j));
    }
  const double brute = aa / 25 + bb / 25 - 2 * cross / 25;
  const Eigen::RowVectorXd diff = a.colwise().mean() - b.colwise().mean();
  CHECK(std::abs(brute - diff.squaredNorm()) < 1e-12);
}

TEST_CASE("two-layer inner products track the exact kernel") {
  const Eigen::Index d = 8;
  const auto map = HkseMap::build(LayerKind::rbf, LayerKind::rbf, 0.5, 1.0, 2048, 4096, d, 21);
  std::mt19937_64 rng(22);
  int within = 0;
  for (int t = 0; t < 20; ++t) {
    const auto n1 = static_cast<Eigen::Index>(1 + rng() % 10), n2 = static_cast<Eigen::Index>(1 + rng() % 10);
    const auto s1 = random_matrix(n1, d, rng()), s2 = random_matrix(n2, d, rng());
    const double approx = map.embed_sentence(s1).dot(map.embed_sentence(s2));
    const double exact = exact_kernel(s1, s2, LayerKind::rbf, LayerKind::rbf, 0.5, 1.0);
    within += std::abs(approx - exact) <= 0.1;
  }
  CHECK(within >= 19);
}

TEST_CASE("bandwidth heuristic") {
  Eigen::MatrixXd square(4, 2);
  square << 0, 0, 1, 0, 0, 1, 1, 1;
  const EmbeddingTable t({"a", "b", "c", "d"}, square);
  CHECK(bandwidth_heuristic(t, 100, 1) == 1.0);
  CHECK(bandwidth_heuristic(t, 4, 99) == 1.0);

  Eigen::MatrixXd simplex = 2.0 * Eigen::MatrixXd::Identity(3, 3);  // all distances 2 sqrt(2)
  const EmbeddingTable eq({"a", "b", "c"}, simplex);
  CHECK(bandwidth_heuristic(eq, 3, 0) == doctest::Approx(1.0 / 8.0).epsilon(1e-15));

  const EmbeddingTable same({"a", "b"}, Eigen::MatrixXd::Ones(2, 3));
  CHECK_THROWS_AS(bandwidth_heuristic(same, 2, 0), SingularInputError);
  CHECK_THROWS_AS(bandwidth_heuristic(t, 1, 0), InvalidArgument);

  const EmbeddingTable big([] {
    std::vector<std::string> v;
    for (int i = 0; i < 50; ++i) v.push_back("w" + std::to_string(i));
    return v;
  }(), random_matrix(50, 4, 3));
  CHECK(bandwidth_heuristic(big, 20, 5) == bandwidth_heuristic(big, 20, 5));
  CHECK(bandwidth_heuristic(big, 50, 5) == bandwidth_heuristic(big, 500, 6));
}

TEST_CASE("dimension bounds") {
  const auto b = dimension_bound(10000, 1, 0.1, 0.01);
  CHECK(b.m_min == 1152);
  CHECK(hoeffding_dimension(0.0, 1.0, 1.0) == 1);  // log argument 1 clamps to the minimum
  const auto s5 = dimension_bound(1000, 5, 0.2, 0.05).m_prime_min;
  const auto s10 = dimension_bound(1000, 10, 0.2, 0.05).m_prime_min;
  const auto s20 = dimension_bound(1000, 20, 0.2, 0.05).m_prime_min;
  CHECK(std::abs((s20 - s10) - 2 * (s10 - s5)) <= 2);
  CHECK_THROWS_AS(dimension_bound(10, 1, 1.0, 0.5), InvalidArgument);
  CHECK_THROWS_AS(dimension_bound(10, 1, 0.5, 0.0), InvalidArgument);
  CHECK_THROWS_AS(dimension_bound(0, 1, 0.5, 0.5), InvalidArgument);
}

TEST_CASE("corpus embedding and concatenation") {
  Eigen::MatrixXd v(3, 3);
  v << 1, 0, 0, 0, 2, 0, 0, 0, 4;
  const EmbeddingTable table({"a", "b", "c"}, v);
  SentenceCorpus corpus;
  corpus.sentences = {{"a", "b"}, {"c"}};
  corpus.pair_index = {0, 1};
  const std::vector<HkseMap> lin{HkseMap::build(LayerKind::lin, LayerKind::lin, 0, 0, 0, 0, 3, 1)};
  const auto e = embed_corpus(lin, corpus, table);
  Eigen::MatrixXd expected(2, 3);
  expected << 0.5, 1, 0, 0, 0, 4;
  CHECK(e.values() == expected);

  const std::vector<HkseMap> cat{HkseMap::build(LayerKind::lin, LayerKind::rbf, 0, 0.01, 0, 16, 3, 1),
                                 HkseMap::build(LayerKind::rbf, LayerKind::rbf, 1.0, 0.01, 8, 32, 3, 2)};
  const auto c = embed_corpus(cat, corpus, table, 2);
  CHECK(c.cols() == 48);
  for (Eigen::Index i = 0; i < 2; ++i) {
    const auto vecs = sentence_vectors(corpus.sentences[static_cast<std::size_t>(i)], table);
    CHECK(c.values().row(i).head(16).transpose() == cat[0].embed_sentence(vecs));
    CHECK(c.values().row(i).tail(32).transpose() == cat[1].embed_sentence(vecs));
  }
  corpus.sentences.push_back({"zzz"});
  corpus.pair_index.push_back(0);
  CHECK_THROWS(embed_corpus(lin, corpus, table));
}

TEST_CASE("map archive round trip") {
  const auto m = HkseMap::build(LayerKind::rbf, LayerKind::rbf, 0.3, 0.01, 10, 7, 4, 42);
  const auto back = HkseMap::from_archive(m.to_archive());
  CHECK(back.w_word() == m.w_word());
  CHECK(back.b_word() == m.b_word());
  CHECK(back.w_sent() == m.w_sent());
  CHECK(back.b_sent() == m.b_sent());
  CHECK(back.gamma() == m.gamma());
  CHECK(back.seed() == 42);
  const Eigen::MatrixXd s = random_matrix(3, 4, 1);
  CHECK(back.embed_sentence(s) == m.embed_sentence(s));

  ModelArchive two;
  m.append_to(two, "map0.");
  HkseMap::build(LayerKind::lin, LayerKind::lin, 0, 0, 0, 0, 4, 1).append_to(two, "map1.");
  CHECK(HkseMap::from_archive(two, "map1.").sentence_kind() == LayerKind::lin);
  CHECK(HkseMap::from_archive(two, "map0.").output_dim() == 7);
}

TEST_CASE("two-layer sandwich bound at twice the dimension bound") {
  const double delta = 0.2, eps = 0.05, gamma = 0.25, eta = 1.0;
  const std::size_t vocab = 50, s = 10;
  const auto bound = dimension_bound(vocab, s, delta, eps);
  const auto map = HkseMap::build(LayerKind::rbf, LayerKind::rbf, gamma, eta, 2 * bound.m_min,
                                  2 * bound.m_prime_min, 8, 31);
  const Eigen::MatrixXd words = random_matrix(static_cast<Eigen::Index>(vocab), 8, 32);
  std::mt19937_64 rng(33);
  auto sentence = [&] {
    const auto n = static_cast<Eigen::Index>(1 + rng() % s);
    Eigen::MatrixXd out(n, 8);
    for (Eigen::Index i = 0; i < n; ++i) out.row(i) = words.row(static_cast<Eigen::Index>(rng() % vocab));
    return out;
  };
  int ok = 0;
  for (int t = 0; t < 50; ++t) {
    const auto s1 = sentence(), s2 = sentence();
    const double k = exact_kernel(s1, s2, LayerKind::rbf, LayerKind::rbf, gamma, eta);
    const double h = map.embed_sentence(s1).dot(map.embed_sentence(s2));
    const double c = std::exp(1.5 * eta * delta);
    ok += k / c - delta <= h && h <= c * k + delta;
  }
  CHECK(ok >= 48);
}

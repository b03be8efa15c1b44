#include "ccax/retrieval.hpp"

#include "ccax/error.hpp"
#include "ccax/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

namespace ccax {
namespace {

constexpr Eigen::Index kQueryBlock = 256;

// Scores such that larger means more similar. Rows of the returned matrices
// are ready for a plain inner product.
struct Scorer {
  Eigen::MatrixXd queries;
  Eigen::MatrixXd items;
  Eigen::VectorXd item_bias;  // subtracted from every score (l2 only)

  Scorer(const Eigen::MatrixXd& q, const Eigen::MatrixXd& s, Similarity similarity) {
    if (q.cols() != s.cols()) {
      throw DimensionError("query and item embeddings differ in dimension: " + std::to_string(q.cols()) + " vs " +
                           std::to_string(s.cols()));
    }
    if (similarity == Similarity::cosine) {
      queries = normalized(q, "query");
      items = normalized(s, "item");
      item_bias = Eigen::VectorXd::Zero(s.rows());
    } else {
      // -||q - s||^2 = 2 q.s - ||s||^2 - ||q||^2; the last term is constant per query.
      queries = 2.0 * q;
      items = s;
      item_bias = s.rowwise().squaredNorm();
    }
  }

  static Eigen::MatrixXd normalized(const Eigen::MatrixXd& m, const char* what) {
    Eigen::MatrixXd out = m;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double norm = m.row(i).norm();
      if (norm == 0.0) {
        throw SingularInputError(std::string("zero-norm ") + what + " vector at index " + std::to_string(i) +
                                 " cannot be compared by cosine");
      }
      out.row(i) /= norm;
    }
    return out;
  }

  /// Scores of queries [begin, end) against all items, one row per query.
  Eigen::MatrixXd block(Eigen::Index begin, Eigen::Index end) const {
    Eigen::MatrixXd s = queries.middleRows(begin, end - begin) * items.transpose();
    s.rowwise() -= item_bias.transpose();
    return s;
  }
};

template <typename PerQuery>
void for_each_query_block(const Scorer& scorer, std::size_t threads, PerQuery&& per_query) {
  const Eigen::Index nq = scorer.queries.rows();
  const auto blocks = static_cast<std::size_t>((nq + kQueryBlock - 1) / kQueryBlock);
  parallel_for(blocks, threads, [&](std::size_t b) {
    const Eigen::Index begin = static_cast<Eigen::Index>(b) * kQueryBlock;
    const Eigen::Index end = std::min(nq, begin + kQueryBlock);
    const Eigen::MatrixXd scores = scorer.block(begin, end);
    for (Eigen::Index q = begin; q < end; ++q) per_query(q, scores.row(q - begin));
  });
}

void check_truth(const GroundTruth& truth, std::size_t n_queries, std::size_t n_items) {
  if (truth.size() != n_queries) {
    throw DimensionError("ground truth has " + std::to_string(truth.size()) + " entries for " +
                         std::to_string(n_queries) + " queries");
  }
  for (std::size_t q = 0; q < truth.size(); ++q) {
    if (truth[q].empty()) throw InvalidArgument("query " + std::to_string(q) + " has no ground-truth item");
    for (auto item : truth[q]) {
      if (item >= n_items) {
        throw DimensionError("ground-truth index " + std::to_string(item) + " of query " + std::to_string(q) +
                             " out of range (" + std::to_string(n_items) + " items)");
      }
    }
  }
}

std::string format_number(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

std::string to_string(Task task) { return task == Task::search ? "search" : "annotation"; }

std::string to_string(Similarity similarity) { return similarity == Similarity::cosine ? "cosine" : "l2"; }

Similarity parse_similarity(const std::string& text) {
  if (text == "cosine") return Similarity::cosine;
  if (text == "l2") return Similarity::l2;
  throw InvalidArgument("unknown similarity '" + text + "' (expected cosine or l2)");
}

Weighting Weighting::symmetric(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidArgument("symmetric weighting needs alpha >= 0");
  return {Kind::symmetric, alpha};
}

Weighting Weighting::sweep(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("sweep weighting needs alpha in [0, 1]");
  return {Kind::sweep, alpha};
}

std::string Weighting::describe() const {
  switch (kind) {
    case Kind::asymmetric: return "asymmetric";
    case Kind::symmetric: return "symmetric:" + format_number(alpha);
    case Kind::sweep: return "sweep:" + format_number(alpha);
  }
  return "?";
}

Weighting parse_weighting(const std::string& text) {
  if (text == "asymmetric") return Weighting::asymmetric();
  const auto colon = text.find(':');
  const auto head = text.substr(0, colon);
  if (colon == std::string::npos || (head != "symmetric" && head != "sweep")) {
    throw InvalidArgument("unknown weighting '" + text + "' (expected asymmetric, symmetric:<alpha> or sweep:<alpha>)");
  }
  const auto tail = text.substr(colon + 1);
  double alpha = 0.0;
  auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), alpha);
  if (ec != std::errc() || ptr != tail.data() + tail.size()) {
    throw InvalidArgument("cannot parse weighting exponent '" + tail + "'");
  }
  return head == "symmetric" ? Weighting::symmetric(alpha) : Weighting::sweep(alpha);
}

Eigen::VectorXd sigma_power(const Eigen::VectorXd& sigma, double alpha) {
  Eigen::VectorXd out(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    out(i) = alpha == 0.0 ? 1.0 : (sigma(i) == 0.0 ? 0.0 : std::pow(sigma(i), alpha));
  }
  return out;
}

Eigen::MatrixXd TaskEmbedding::embed_images(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean_x.size()) {
    throw DimensionError("image features have " + std::to_string(x.cols()) + " columns, model expects " +
                         std::to_string(mean_x.size()));
  }
  return (x.rowwise() - mean_x.transpose()) * image_proj.transpose();
}

Eigen::MatrixXd TaskEmbedding::embed_texts(const Eigen::MatrixXd& y) const {
  if (y.cols() != mean_y.size()) {
    throw DimensionError("text features have " + std::to_string(y.cols()) + " columns, model expects " +
                         std::to_string(mean_y.size()));
  }
  return (y.rowwise() - mean_y.transpose()) * text_proj.transpose();
}

TaskEmbedding make_task_embedding(const CcaModel& model, Task task, Weighting weighting) {
  double image_alpha = 0.0;
  double text_alpha = 0.0;
  switch (weighting.kind) {
    case Weighting::Kind::asymmetric:
      image_alpha = task == Task::search ? 1.0 : 0.0;
      text_alpha = task == Task::search ? 0.0 : 1.0;
      break;
    case Weighting::Kind::symmetric:
      weighting = Weighting::symmetric(weighting.alpha);
      image_alpha = text_alpha = weighting.alpha;
      break;
    case Weighting::Kind::sweep:
      weighting = Weighting::sweep(weighting.alpha);
      image_alpha = weighting.alpha;
      text_alpha = 1.0 - weighting.alpha;
      break;
  }
  TaskEmbedding e;
  e.task = task;
  e.weighting = weighting;
  e.image_proj = sigma_power(model.sigma, image_alpha).asDiagonal() * model.u.transpose();
  e.text_proj = sigma_power(model.sigma, text_alpha).asDiagonal() * model.v.transpose();
  e.mean_x = model.mean_x;
  e.mean_y = model.mean_y;
  return e;
}

RankedList rank(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& items, Similarity similarity,
                std::size_t threads) {
  const Scorer scorer(queries, items, similarity);
  RankedList out;
  out.order.resize(static_cast<std::size_t>(queries.rows()));
  for_each_query_block(scorer, threads, [&](Eigen::Index q, const auto& scores) {
    auto& order = out.order[static_cast<std::size_t>(q)];
    order.resize(static_cast<std::size_t>(items.rows()));
    std::iota(order.begin(), order.end(), 0U);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      const double sa = scores(a);
      const double sb = scores(b);
      return sa > sb || (sa == sb && a < b);
    });
  });
  return out;
}

EvalReport evaluate(const RankedList& ranked, const GroundTruth& truth) {
  const std::size_t n_items = ranked.order.empty() ? 0 : ranked.order.front().size();
  check_truth(truth, ranked.queries(), n_items);
  std::vector<std::size_t> ranks(ranked.queries());
  for (std::size_t q = 0; q < ranked.queries(); ++q) {
    const auto& order = ranked.order[q];
    if (order.size() != n_items) throw DimensionError("ranked lists have different lengths");
    std::vector<bool> relevant(n_items, false);
    for (auto t : truth[q]) relevant[t] = true;
    std::size_t pos = 0;
    while (!relevant[order[pos]]) ++pos;
    ranks[q] = pos + 1;
  }
  return report_from_ranks(ranks, n_items);
}

std::vector<std::size_t> best_truth_ranks(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& items,
                                          const GroundTruth& truth, Similarity similarity, std::size_t threads) {
  check_truth(truth, static_cast<std::size_t>(queries.rows()), static_cast<std::size_t>(items.rows()));
  const Scorer scorer(queries, items, similarity);
  std::vector<std::size_t> ranks(static_cast<std::size_t>(queries.rows()));
  for_each_query_block(scorer, threads, [&](Eigen::Index q, const auto& scores) {
    const auto& t = truth[static_cast<std::size_t>(q)];
    auto best = static_cast<Eigen::Index>(t.front());
    for (auto item : t) {
      const auto i = static_cast<Eigen::Index>(item);
      if (scores(i) > scores(best) || (scores(i) == scores(best) && i < best)) best = i;
    }
    const double sb = scores(best);
    std::size_t ahead = 0;
    for (Eigen::Index j = 0; j < scores.size(); ++j) {
      if (scores(j) > sb || (scores(j) == sb && j < best)) ++ahead;
    }
    ranks[static_cast<std::size_t>(q)] = ahead + 1;
  });
  return ranks;
}

EvalReport report_from_ranks(const std::vector<std::size_t>& ranks, std::size_t n_items) {
  if (ranks.empty()) throw InvalidArgument("no queries to evaluate");
  EvalReport r;
  r.n_queries = ranks.size();
  r.n_items = n_items;
  std::size_t h1 = 0, h5 = 0, h10 = 0;
  for (auto rk : ranks) {
    h1 += rk <= 1;
    h5 += rk <= 5;
    h10 += rk <= 10;
  }
  const double n = static_cast<double>(ranks.size());
  r.r1 = 100.0 * static_cast<double>(h1) / n;
  r.r5 = 100.0 * static_cast<double>(h5) / n;
  r.r10 = 100.0 * static_cast<double>(h10) / n;
  auto sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  const auto mid = sorted.size() / 2;
  r.median_rank = sorted.size() % 2 == 1
                      ? static_cast<double>(sorted[mid])
                      : 0.5 * (static_cast<double>(sorted[mid - 1]) + static_cast<double>(sorted[mid]));
  return r;
}

// ---------------------------------------------------------------------------

void RetrievalSet::validate() const {
  if (images.rows() < 1 || texts.rows() < 1) throw DimensionError("retrieval set needs images and captions");
  if (pair_index.size() != static_cast<std::size_t>(texts.rows())) {
    throw DimensionError("retrieval set has " + std::to_string(pair_index.size()) + " pair entries for " +
                         std::to_string(texts.rows()) + " captions");
  }
  std::vector<bool> covered(static_cast<std::size_t>(images.rows()), false);
  for (auto p : pair_index) {
    if (p >= covered.size()) {
      throw DimensionError("caption pairs with image " + std::to_string(p) + " but only " +
                           std::to_string(images.rows()) + " images exist");
    }
    covered[p] = true;
  }
  for (std::size_t i = 0; i < covered.size(); ++i) {
    if (!covered[i]) throw InvalidArgument("image " + std::to_string(i) + " has no caption");
  }
}

GroundTruth RetrievalSet::search_truth() const {
  GroundTruth t(pair_index.size());
  for (std::size_t i = 0; i < pair_index.size(); ++i) t[i] = {pair_index[i]};
  return t;
}

GroundTruth RetrievalSet::annotation_truth() const {
  GroundTruth t(static_cast<std::size_t>(images.rows()));
  for (std::size_t i = 0; i < pair_index.size(); ++i) t.at(pair_index[i]).push_back(i);
  return t;
}

RetrievalSet RetrievalSet::image_block(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > static_cast<std::size_t>(images.rows())) throw InvalidArgument("bad image block");
  RetrievalSet out;
  out.images = images.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < pair_index.size(); ++i) {
    if (pair_index[i] >= begin && pair_index[i] < end) {
      rows.push_back(static_cast<Eigen::Index>(i));
      out.pair_index.push_back(pair_index[i] - begin);
    }
  }
  out.texts.resize(static_cast<Eigen::Index>(rows.size()), texts.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.texts.row(static_cast<Eigen::Index>(r)) = texts.row(rows[r]);
  return out;
}

BidirectionalReport evaluate_bidirectional(const CcaModel& model, const RetrievalSet& set, Weighting weighting,
                                           Similarity similarity, std::size_t threads) {
  return evaluate_bidirectional(model, model, set, weighting, similarity, threads);
}

BidirectionalReport evaluate_bidirectional(const CcaModel& search_model, const CcaModel& annotation_model,
                                           const RetrievalSet& set, Weighting weighting, Similarity similarity,
                                           std::size_t threads) {
  set.validate();
  BidirectionalReport out;
  {
    const auto e = make_task_embedding(search_model, Task::search, weighting);
    const auto ranks = best_truth_ranks(e.embed_texts(set.texts), e.embed_images(set.images), set.search_truth(),
                                        similarity, threads);
    out.search = report_from_ranks(ranks, static_cast<std::size_t>(set.images.rows()));
  }
  {
    const auto e = make_task_embedding(annotation_model, Task::annotation, weighting);
    const auto ranks = best_truth_ranks(e.embed_images(set.images), e.embed_texts(set.texts),
                                        set.annotation_truth(), similarity, threads);
    out.annotation = report_from_ranks(ranks, static_cast<std::size_t>(set.texts.rows()));
  }
  return out;
}

std::vector<BidirectionalReport> evaluate_blocks(const CcaModel& search_model, const CcaModel& annotation_model,
                                                 const RetrievalSet& set, Weighting weighting, std::size_t blocks,
                                                 Similarity similarity, std::size_t threads) {
  const auto n = static_cast<std::size_t>(set.images.rows());
  if (blocks < 1 || blocks > n) throw InvalidArgument("block count must be in [1, number of images]");
  std::vector<BidirectionalReport> out;
  BidirectionalReport mean;
  auto accumulate = [](EvalReport& acc, const EvalReport& r) {
    acc.r1 += r.r1;
    acc.r5 += r.r5;
    acc.r10 += r.r10;
    acc.median_rank += r.median_rank;
    acc.n_queries += r.n_queries;
    acc.n_items += r.n_items;
  };
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto begin = b * n / blocks;
    const auto end = (b + 1) * n / blocks;
    out.push_back(evaluate_bidirectional(search_model, annotation_model, set.image_block(begin, end), weighting,
                                         similarity, threads));
    accumulate(mean.search, out.back().search);
    accumulate(mean.annotation, out.back().annotation);
  }
  // The mean row averages rates, median ranks and block sizes.
  for (auto* r : {&mean.search, &mean.annotation}) {
    const double k = static_cast<double>(blocks);
    r->r1 /= k;
    r->r5 /= k;
    r->r10 /= k;
    r->median_rank /= k;
    r->n_queries /= blocks;
    r->n_items /= blocks;
  }
  out.push_back(mean);
  return out;
}

std::vector<SweepRow> alpha_sweep(const CcaModel& model, const RetrievalSet& set, const std::vector<double>& alphas,
                                  Similarity similarity, std::size_t threads) {
  std::vector<SweepRow> rows;
  rows.reserve(alphas.size());
  for (double a : alphas) {
    const auto r = evaluate_bidirectional(model, set, Weighting::sweep(a), similarity, threads);
    rows.push_back({a, r.search.r10, r.annotation.r10});
  }
  return rows;
}

void write_report_tsv(std::ostream& out, const std::vector<std::pair<std::string, EvalReport>>& rows) {
  out << "task\tr1\tr5\tr10\tmedr\tn_queries\tn_items\n";
  for (const auto& [task, r] : rows) {
    out << task << '\t' << format_number(r.r1) << '\t' << format_number(r.r5) << '\t' << format_number(r.r10) << '\t'
        << format_number(r.median_rank) << '\t' << r.n_queries << '\t' << r.n_items << '\n';
  }
}

void write_sweep_tsv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "alpha\tr10_search\tr10_annotation\n";
  for (const auto& r : rows) {
    out << format_number(r.alpha) << '\t' << format_number(r.r10_search) << '\t' << format_number(r.r10_annotation)
        << '\n';
  }
}

}  // namespace ccax

#include "ccax/selection.hpp"

#include "ccax/error.hpp"
#include "ccax/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ostream>

namespace ccax {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format_number(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <typename CellFit>
PathGrid run_grid(RegularizationSpec::Kind kind, std::vector<double> axis_x, std::vector<double> axis_y,
                  const RetrievalSet& val, const PathOptions& options, CellFit&& fit_cell) {
  if (axis_x.empty() || axis_y.empty()) throw InvalidArgument("regularization grid axes must be non-empty");
  val.validate();
  PathGrid grid;
  grid.kind = kind;
  grid.axis_x = std::move(axis_x);
  grid.axis_y = std::move(axis_y);
  const auto nx = static_cast<Eigen::Index>(grid.axis_x.size());
  const auto ny = static_cast<Eigen::Index>(grid.axis_y.size());
  grid.r1_search.resize(nx, ny);
  grid.r1_annotation.resize(nx, ny);
  grid.cell_seconds.resize(nx, ny);

  const auto start = Clock::now();
  parallel_for(static_cast<std::size_t>(nx * ny), options.threads, [&](std::size_t cell) {
    const auto ix = static_cast<Eigen::Index>(cell) / ny;
    const auto iy = static_cast<Eigen::Index>(cell) % ny;
    const auto cell_start = Clock::now();
    const CcaModel model = fit_cell(ix, iy);
    const auto report = evaluate_bidirectional(model, val, Weighting::asymmetric(), options.similarity, 1);
    grid.r1_search(ix, iy) = report.search.r1;
    grid.r1_annotation(ix, iy) = report.annotation.r1;
    grid.cell_seconds(ix, iy) = seconds_since(cell_start);
  });
  grid.total_seconds = seconds_since(start);
  return grid;
}

std::vector<double> as_doubles(const std::vector<Eigen::Index>& ranks) {
  return {ranks.begin(), ranks.end()};
}

void check_ranks(const std::vector<Eigen::Index>& ranks, Eigen::Index limit, const char* side) {
  for (auto k : ranks) {
    if (k < 1 || k > limit) {
      throw InvalidArgument(std::string("grid rank ") + std::to_string(k) + " for " + side +
                            " outside [1, " + std::to_string(limit) + "]");
    }
  }
}

void check_penalties(const std::vector<double>& gammas) {
  for (auto g : gammas) {
    if (!(g >= 0.0) || !std::isfinite(g)) throw InvalidArgument("grid penalties must be finite and >= 0");
  }
}

}  // namespace

std::string to_string(SelectionMetric metric) {
  return metric == SelectionMetric::r1_per_task ? "r1" : "r1-combined";
}

SelectionMetric parse_selection_metric(const std::string& text) {
  if (text == "r1") return SelectionMetric::r1_per_task;
  if (text == "r1-combined" || text == "combined") return SelectionMetric::r1_combined;
  throw InvalidArgument("unknown selection metric '" + text + "' (expected r1 or r1-combined)");
}

RegularizationSpec PathGrid::cell_spec(Eigen::Index ix, Eigen::Index iy) const {
  const double px = axis_x.at(static_cast<std::size_t>(ix));
  const double py = axis_y.at(static_cast<std::size_t>(iy));
  if (kind == RegularizationSpec::Kind::tsvd) {
    return RegularizationSpec::tsvd(static_cast<Eigen::Index>(px), static_cast<Eigen::Index>(py));
  }
  return RegularizationSpec::tikhonov(px, py);
}

std::vector<Eigen::Index> default_rank_grid(Eigen::Index rank, std::size_t size) {
  if (rank < 1 || size < 1) throw InvalidArgument("default grid needs rank >= 1 and size >= 1");
  std::vector<Eigen::Index> out;
  const auto g = static_cast<Eigen::Index>(size);
  for (Eigen::Index j = 1; j <= g; ++j) {
    const Eigen::Index k = (j * rank + g - 1) / g;  // ceil(j * rank / size)
    if (out.empty() || out.back() != k) out.push_back(k);
  }
  return out;
}

std::vector<double> penalties_for_ranks(const Eigen::VectorXd& s, const std::vector<Eigen::Index>& ranks) {
  std::vector<double> out;
  out.reserve(ranks.size());
  for (auto k : ranks) {
    if (k < 1 || k > s.size()) throw InvalidArgument("rank " + std::to_string(k) + " outside the spectrum");
    out.push_back(s(k - 1) * s(k - 1));
  }
  return out;
}

std::vector<double> default_penalty_grid(const Eigen::VectorXd& s, std::size_t size) {
  return penalties_for_ranks(s, default_rank_grid(s.size(), size));
}

SelectionResult select_best(const PathGrid& grid, SelectionMetric metric) {
  const bool prefer_small = grid.kind == RegularizationSpec::Kind::tsvd;
  const auto better_params = [&](Eigen::Index ax, Eigen::Index ay, Eigen::Index bx, Eigen::Index by) {
    const auto a = std::pair(grid.axis_x[static_cast<std::size_t>(ax)], grid.axis_y[static_cast<std::size_t>(ay)]);
    const auto b = std::pair(grid.axis_x[static_cast<std::size_t>(bx)], grid.axis_y[static_cast<std::size_t>(by)]);
    return prefer_small ? a < b : a > b;
  };
  const auto argmax = [&](const Eigen::MatrixXd& scores) {
    Selection best;
    bool first = true;
    for (Eigen::Index ix = 0; ix < scores.rows(); ++ix) {
      for (Eigen::Index iy = 0; iy < scores.cols(); ++iy) {
        const double s = scores(ix, iy);
        if (first || s > best.score || (s == best.score && better_params(ix, iy, best.ix, best.iy))) {
          best.ix = ix;
          best.iy = iy;
          best.score = s;
          first = false;
        }
      }
    }
    best.spec = grid.cell_spec(best.ix, best.iy);
    return best;
  };
  SelectionResult out;
  out.metric = metric;
  if (metric == SelectionMetric::r1_per_task) {
    out.best_search = argmax(grid.r1_search);
    out.best_annotation = argmax(grid.r1_annotation);
  } else {
    const Eigen::MatrixXd combined = 0.5 * (grid.r1_search + grid.r1_annotation);
    out.best_search = out.best_annotation = argmax(combined);
  }
  return out;
}

PathRun tsvd_path(const CcaDecomposition& train, const RetrievalSet& val, const std::vector<Eigen::Index>& ranks_x,
                  const std::vector<Eigen::Index>& ranks_y, const PathOptions& options) {
  check_ranks(ranks_x, train.rank_x(), "X");
  check_ranks(ranks_y, train.rank_y(), "Y");
  PathRun run;
  run.grid = run_grid(RegularizationSpec::Kind::tsvd, as_doubles(ranks_x), as_doubles(ranks_y), val, options,
                      [&](Eigen::Index ix, Eigen::Index iy) {
                        return train.fit_tsvd(ranks_x[static_cast<std::size_t>(ix)],
                                              ranks_y[static_cast<std::size_t>(iy)]);
                      });
  run.selection = select_best(run.grid, options.metric);
  return run;
}

PathRun tsvd_path(const Eigen::MatrixXd& x_train, const Eigen::MatrixXd& y_train, const RetrievalSet& val,
                  const std::vector<Eigen::Index>& ranks_x, const std::vector<Eigen::Index>& ranks_y,
                  const PathOptions& options) {
  return tsvd_path(CcaDecomposition(x_train, y_train), val, ranks_x, ranks_y, options);
}

PathRun tikhonov_path(const CcaDecomposition& train, const RetrievalSet& val, const std::vector<double>& gammas_x,
                      const std::vector<double>& gammas_y, const PathOptions& options) {
  check_penalties(gammas_x);
  check_penalties(gammas_y);
  PathRun run;
  run.grid = run_grid(RegularizationSpec::Kind::tikhonov, gammas_x, gammas_y, val, options,
                      [&](Eigen::Index ix, Eigen::Index iy) {
                        return train.fit_tikhonov(gammas_x[static_cast<std::size_t>(ix)],
                                                  gammas_y[static_cast<std::size_t>(iy)]);
                      });
  run.selection = select_best(run.grid, options.metric);
  return run;
}

PathRun tikhonov_path(const Eigen::MatrixXd& x_train, const Eigen::MatrixXd& y_train, const RetrievalSet& val,
                      const std::vector<double>& gammas_x, const std::vector<double>& gammas_y,
                      const PathOptions& options) {
  return tikhonov_path(CcaDecomposition(x_train, y_train), val, gammas_x, gammas_y, options);
}

GuidedResult guided_tikhonov(const CcaDecomposition& train, const RetrievalSet& val,
                             const std::vector<Eigen::Index>& ranks_x, const std::vector<Eigen::Index>& ranks_y,
                             const PathOptions& options) {
  GuidedResult out;
  out.tsvd = tsvd_path(train, val, ranks_x, ranks_y, options);
  const auto& sx = train.x_factors().s;
  const auto& sy = train.y_factors().s;
  const auto fit_at = [&](const Selection& sel) {
    const auto kx = sel.spec.k_x;
    const auto ky = sel.spec.k_y;
    return train.fit_tikhonov(sx(kx - 1) * sx(kx - 1), sy(ky - 1) * sy(ky - 1));
  };
  out.search_model = fit_at(out.tsvd.selection.best_search);
  out.annotation_model = fit_at(out.tsvd.selection.best_annotation);
  return out;
}

GuidedResult guided_tikhonov(const Eigen::MatrixXd& x_train, const Eigen::MatrixXd& y_train, const RetrievalSet& val,
                             const std::vector<Eigen::Index>& ranks_x, const std::vector<Eigen::Index>& ranks_y,
                             const PathOptions& options) {
  return guided_tikhonov(CcaDecomposition(x_train, y_train), val, ranks_x, ranks_y, options);
}

TimingComparison measure_path_timing(const Eigen::MatrixXd& x_train, const Eigen::MatrixXd& y_train,
                                     const RetrievalSet& val, const std::vector<Eigen::Index>& ranks_x,
                                     const std::vector<Eigen::Index>& ranks_y, std::size_t repeats,
                                     Similarity similarity) {
  if (repeats < 1) throw InvalidArgument("timing needs at least one repeat");
  PathOptions options;
  options.threads = 1;
  options.similarity = similarity;

  // The penalty grid is read off the spectrum, which is not part of the timed work.
  const CcaDecomposition probe(x_train, y_train);
  const auto gammas_x = penalties_for_ranks(probe.x_factors().s, ranks_x);
  const auto gammas_y = penalties_for_ranks(probe.y_factors().s, ranks_y);

  const auto time_tsvd = [&] {
    const auto start = Clock::now();
    tsvd_path(x_train, y_train, val, ranks_x, ranks_y, options);
    return seconds_since(start);
  };
  const auto time_tikhonov = [&] {
    const auto start = Clock::now();
    tikhonov_path(x_train, y_train, val, gammas_x, gammas_y, options);
    return seconds_since(start);
  };

  TimingComparison out;
  out.cells = ranks_x.size() * ranks_y.size();
  time_tsvd();
  time_tikhonov();
  for (std::size_t r = 0; r < repeats; ++r) {
    out.tsvd_runs.push_back(time_tsvd());
    out.tikhonov_runs.push_back(time_tikhonov());
  }
  const auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
  };
  out.tsvd_seconds = median(out.tsvd_runs);
  out.tikhonov_seconds = median(out.tikhonov_runs);
  out.speedup = out.tikhonov_seconds / out.tsvd_seconds;
  return out;
}

void write_path_tsv(std::ostream& out, const PathGrid& grid) {
  out << "param_x\tparam_y\tr1_search\tr1_annotation\tcell_seconds\n";
  for (Eigen::Index ix = 0; ix < grid.r1_search.rows(); ++ix) {
    for (Eigen::Index iy = 0; iy < grid.r1_search.cols(); ++iy) {
      out << format_number(grid.axis_x[static_cast<std::size_t>(ix)]) << '\t'
          << format_number(grid.axis_y[static_cast<std::size_t>(iy)]) << '\t' << format_number(grid.r1_search(ix, iy))
          << '\t' << format_number(grid.r1_annotation(ix, iy)) << '\t' << format_number(grid.cell_seconds(ix, iy))
          << '\n';
    }
  }
}

void write_timing_tsv(std::ostream& out, const TimingComparison& t) {
  out << "path\tmedian_seconds\truns\tcells\n";
  out << "tsvd\t" << format_number(t.tsvd_seconds) << '\t' << t.tsvd_runs.size() << '\t' << t.cells << '\n';
  out << "tikhonov\t" << format_number(t.tikhonov_seconds) << '\t' << t.tikhonov_runs.size() << '\t' << t.cells
      << '\n';
  out << "speedup\t" << format_number(t.speedup) << '\t' << t.tsvd_runs.size() << '\t' << t.cells << '\n';
}

}  // namespace ccax

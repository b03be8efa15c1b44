#include "cli.hpp"

#include "ccax/archive.hpp"
#include "ccax/cca.hpp"
#include "ccax/error.hpp"
#include "ccax/hkse.hpp"
#include "ccax/io.hpp"
#include "ccax/retrieval.hpp"
#include "ccax/rng.hpp"
#include "ccax/selection.hpp"
#include "ccax/synthetic.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

namespace ccax::cli {
namespace {

namespace fs = std::filesystem;

struct Common {
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

// Where a tabular result goes: a file, or stdout when no path is given.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (path.empty() || path == "-") {
      stream_ = &fallback;
      return;
    }
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    if (!*file_) throw IoError("cannot open '" + path + "' for writing");
    stream_ = file_.get();
    path_ = path;
  }
  std::ostream& operator*() { return *stream_; }
  void close() {
    stream_->flush();
    if (!*stream_) throw IoError("write failed" + (path_.empty() ? std::string() : " for '" + path_ + "'"));
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_ = nullptr;
  std::string path_;
};

std::pair<std::size_t, std::size_t> parse_grid(const std::string& text) {
  const auto x = text.find('x');
  std::size_t a = 0, b = 0;
  const auto* s = text.data();
  if (x == std::string::npos || std::from_chars(s, s + x, a).ptr != s + x ||
      std::from_chars(s + x + 1, s + text.size(), b).ptr != s + text.size() || a == 0 || b == 0) {
    throw CLI::ValidationError("--grid", "expected <rows>x<cols>, e.g. 20x20, got '" + text + "'");
  }
  return {a, b};
}

std::pair<LayerKind, LayerKind> parse_variant(const std::string& text, const std::string& flag) {
  const auto comma = text.find(',');
  try {
    if (comma == std::string::npos) throw InvalidArgument("missing comma");
    return {parse_layer_kind(text.substr(0, comma)), parse_layer_kind(text.substr(comma + 1))};
  } catch (const InvalidArgument&) {
    throw CLI::ValidationError(flag, "expected <word>,<sentence> with each lin or rbf, got '" + text + "'");
  }
}

std::vector<double> parse_alphas(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    const auto* b = item.data();
    const auto* e = b + item.size();
    if (item.empty() || std::from_chars(b, e, v).ptr != e || !(v >= 0.0 && v <= 1.0))
      throw CLI::ValidationError("--alphas", "every alpha must be a number in [0, 1], got '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw CLI::ValidationError("--alphas", "empty alpha list");
  return out;
}

template <typename T>
T parse_choice(const std::string& flag, const std::string& text, T (*parse)(const std::string&)) {
  try {
    return parse(text);
  } catch (const InvalidArgument& e) {
    throw CLI::ValidationError(flag, e.what());
  }
}

Eigen::MatrixXd load_values(const std::string& path) { return load_matrix_auto(path).values(); }

std::vector<std::size_t> resolve_pairs(const std::string& pairs_path, const Eigen::MatrixXd& images,
                                       const Eigen::MatrixXd& texts, const std::string& what) {
  if (!pairs_path.empty()) {
    auto pairs = load_pairing(pairs_path, static_cast<std::size_t>(images.rows()));
    if (pairs.size() != static_cast<std::size_t>(texts.rows()))
      throw DimensionError(what + ": pairing file has " + std::to_string(pairs.size()) + " entries for " +
                           std::to_string(texts.rows()) + " text rows");
    return pairs;
  }
  if (images.rows() != texts.rows())
    throw DimensionError(what + ": " + std::to_string(texts.rows()) + " text rows and " +
                         std::to_string(images.rows()) + " image rows need a pairing file");
  std::vector<std::size_t> pairs(static_cast<std::size_t>(texts.rows()));
  for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i] = i;
  return pairs;
}

RetrievalSet load_retrieval_set(const std::string& x, const std::string& y, const std::string& pairs,
                                const std::string& what) {
  RetrievalSet set;
  set.images = load_values(x);
  set.texts = load_values(y);
  set.pair_index = resolve_pairs(pairs, set.images, set.texts, what);
  set.validate();
  return set;
}

CcaModel load_model(const std::string& path) { return cca_model_from_archive(load_archive(path)); }

void write_text_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  body(out);
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_selection(std::ostream& out, const PathGrid& grid, const SelectionResult& sel) {
  out << "task\tparam_x\tparam_y\tr1\n";
  auto row = [&](const char* task, const Selection& s) {
    out << task << '\t' << format_double(grid.axis_x[static_cast<std::size_t>(s.ix)]) << '\t'
        << format_double(grid.axis_y[static_cast<std::size_t>(s.iy)]) << '\t' << format_double(s.score) << '\n';
  };
  row("search", sel.best_search);
  row("annotation", sel.best_annotation);
}

// ---- synth

struct SynthArgs {
  LatentModelConfig cfg;
  std::size_t captions = 1;
  std::string out_dir;
};

void cmd_synth(const SynthArgs& a, const Common& common) {
  auto cfg = a.cfg;
  cfg.seed = common.seed;
  const auto data = generate_caption_like(cfg, a.captions);
  const fs::path dir(a.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());

  save_matrix(data.images, dir / "images.fmat");
  save_matrix(data.texts, dir / "texts.fmat");
  save_pairing(data.pair_index, dir / "pairs.txt");
  save_splits(data.image_splits, dir / "splits.tsv");
  if (cfg.n_train > 0) {
    auto [x, y] = data.training_pairs(SplitRole::train);
    save_matrix(FeatureMatrix(std::move(x)), dir / "train_x.fmat");
    save_matrix(FeatureMatrix(std::move(y)), dir / "train_y.fmat");
  }
  for (auto role : {SplitRole::val, SplitRole::test}) {
    if ((role == SplitRole::val ? cfg.n_val : cfg.n_test) == 0) continue;
    const auto set = data.retrieval_set(role);
    const std::string p(to_string(role));
    save_matrix(FeatureMatrix(set.images), dir / (p + "_images.fmat"));
    save_matrix(FeatureMatrix(set.texts), dir / (p + "_texts.fmat"));
    save_pairing(set.pair_index, dir / (p + "_pairs.txt"));
  }
}

// ---- embed

struct EmbedArgs {
  std::string corpus, vectors, pairs, out, map_out, map_in;
  std::string variant = "lin,lin";
  std::string concat;
  std::string preset;
  Eigen::Index m = 2000;
  Eigen::Index m_prime = 3000;
  std::string gamma = "median";
  double eta = 0.01;
  std::size_t bandwidth_sample = 2000;
  std::string oov = "skip";
};

void cmd_embed(const EmbedArgs& a, const Common& common) {
  const auto policy = a.oov == "error" ? OovPolicy::error : OovPolicy::skip;
  const auto table = load_embedding_table(a.vectors);
  std::optional<fs::path> pairs;
  if (!a.pairs.empty()) pairs = a.pairs;
  const auto corpus = load_corpus(a.corpus, table, policy, pairs);

  std::vector<HkseMap> maps;
  if (!a.map_in.empty()) {
    const auto archive = load_archive(a.map_in);
    if (archive.get("model") != "hkse") throw FormatError("'" + a.map_in + "' is not an hkse map archive");
    const auto n = archive.get_int("maps");
    if (n < 1) throw FormatError("'" + a.map_in + "' holds no maps");
    for (long long i = 0; i < n; ++i)
      maps.push_back(HkseMap::from_archive(archive, "map" + std::to_string(i) + "."));
  } else {
    std::vector<std::pair<LayerKind, LayerKind>> variants{parse_variant(a.variant, "--variant")};
    if (!a.concat.empty()) variants.push_back(parse_variant(a.concat, "--concat"));
    const Eigen::Index m = a.m, m_prime = a.m_prime;
    std::optional<double> gamma;
    for (std::size_t i = 0; i < variants.size(); ++i) {
      const auto [word, sent] = variants[i];
      double g = 0.0;
      if (word == LayerKind::rbf) {
        if (!gamma) {
          if (a.gamma == "median") {
            gamma = bandwidth_heuristic(table, a.bandwidth_sample, common.seed);
          } else {
            double v = 0.0;
            const auto* b = a.gamma.data();
            const auto* e = b + a.gamma.size();
            if (std::from_chars(b, e, v).ptr != e || !(v > 0.0))
              throw CLI::ValidationError("--gamma", "expected a positive number or 'median', got '" + a.gamma + "'");
            gamma = v;
          }
        }
        g = *gamma;
      }
      // The second map of a concatenation draws from its own stream.
      const auto seed = i == 0 ? common.seed : derive_seed(common.seed, "hkse-concat-" + std::to_string(i));
      maps.push_back(HkseMap::build(word, sent, g, a.eta, m, m_prime, table.dim(), seed));
    }
  }

  const auto features = embed_corpus(maps, corpus, table, common.threads);
  save_matrix_auto(features, a.out);
  if (!a.map_out.empty()) {
    ModelArchive archive;
    archive.set("model", std::string("hkse"));
    archive.set("maps", static_cast<long long>(maps.size()));
    for (std::size_t i = 0; i < maps.size(); ++i) maps[i].append_to(archive, "map" + std::to_string(i) + ".");
    save_archive(archive, a.map_out);
  }
}

// ---- fit / path / timing

struct TrainArgs {
  std::string x, y;
  std::string val_x, val_y, val_pairs;
  std::string grid = "20x20";
  std::string metric = "r1";
  std::string similarity = "cosine";
};

struct FitArgs {
  TrainArgs train;
  std::string reg = "none";
  std::optional<double> gamma_x, gamma_y;
  std::optional<Eigen::Index> k_x, k_y;
  std::string out, out_annotation, path_out;
};

PathOptions path_options(const TrainArgs& t, const Common& common) {
  PathOptions o;
  o.metric = parse_choice<SelectionMetric>("--metric", t.metric, parse_selection_metric);
  o.similarity = parse_choice<Similarity>("--similarity", t.similarity, parse_similarity);
  o.threads = common.threads;
  return o;
}

void require_val(const TrainArgs& t, const std::string& why) {
  if (t.val_x.empty() || t.val_y.empty())
    throw CLI::ValidationError("--val-x/--val-y", "required for " + why);
}

ModelArchive selected_archive(const CcaModel& model, const std::string& task, const Selection& sel,
                              SelectionMetric metric) {
  auto archive = to_archive(model);
  archive.set("selection", std::string("guided-tsvd"));
  archive.set("task", task);
  archive.set("metric", to_string(metric));
  archive.set("k_star_x", static_cast<long long>(sel.spec.k_x));
  archive.set("k_star_y", static_cast<long long>(sel.spec.k_y));
  archive.set("val_r1", sel.score);
  return archive;
}

void cmd_fit(const FitArgs& a, const Common& common) {
  const auto x = load_values(a.train.x);
  const auto y = load_values(a.train.y);
  if (a.reg == "guided-tsvd") {
    require_val(a.train, "--reg guided-tsvd");
    const auto opts = path_options(a.train, common);
    const auto [gx, gy] = parse_grid(a.train.grid);
    const auto val = load_retrieval_set(a.train.val_x, a.train.val_y, a.train.val_pairs, "validation set");
    const CcaDecomposition dec(x, y);
    const auto result = guided_tikhonov(dec, val, default_rank_grid(dec.rank_x(), gx),
                                        default_rank_grid(dec.rank_y(), gy), opts);
    const auto& sel = result.tsvd.selection;
    save_archive(selected_archive(result.search_model, "search", sel.best_search, opts.metric), a.out);
    if (!a.out_annotation.empty())
      save_archive(selected_archive(result.annotation_model, "annotation", sel.best_annotation, opts.metric),
                   a.out_annotation);
    if (!a.path_out.empty()) write_text_file(a.path_out, [&](std::ostream& o) { write_path_tsv(o, result.tsvd.grid); });
    return;
  }
  if (!a.out_annotation.empty())
    throw CLI::ValidationError("--out-annotation", "only meaningful with --reg guided-tsvd");
  RegularizationSpec spec;
  if (a.reg == "tikhonov") {
    if (!a.gamma_x || !a.gamma_y) throw CLI::ValidationError("--gamma-x/--gamma-y", "required for --reg tikhonov");
    spec = RegularizationSpec::tikhonov(*a.gamma_x, *a.gamma_y);
  } else if (a.reg == "tsvd") {
    if (!a.k_x || !a.k_y) throw CLI::ValidationError("--kx/--ky", "required for --reg tsvd");
    spec = RegularizationSpec::tsvd(*a.k_x, *a.k_y);
  }
  save_archive(to_archive(cca_fit(x, y, spec)), a.out);
}

struct PathArgs {
  TrainArgs train;
  std::string reg = "tsvd";
  std::string out, selection_out;
};

void cmd_path(const PathArgs& a, const Common& common, std::ostream& out) {
  const auto opts = path_options(a.train, common);
  const auto [gx, gy] = parse_grid(a.train.grid);
  const auto x = load_values(a.train.x);
  const auto y = load_values(a.train.y);
  const auto val = load_retrieval_set(a.train.val_x, a.train.val_y, a.train.val_pairs, "validation set");
  const CcaDecomposition dec(x, y);
  PathRun run;
  if (a.reg == "tsvd") {
    run = tsvd_path(dec, val, default_rank_grid(dec.rank_x(), gx), default_rank_grid(dec.rank_y(), gy), opts);
  } else {
    run = tikhonov_path(dec, val, default_penalty_grid(dec.x_factors().s, gx),
                        default_penalty_grid(dec.y_factors().s, gy), opts);
  }
  Sink sink(a.out, out);
  write_path_tsv(*sink, run.grid);
  sink.close();
  // With the path going to stdout the selection needs its own file.
  if (a.out.empty() && a.selection_out.empty()) return;
  Sink sel(a.selection_out, out);
  write_selection(*sel, run.grid, run.selection);
  sel.close();
}

struct TimingArgs {
  TrainArgs train;
  std::size_t repeats = 3;
  std::string out;
};

void cmd_timing(const TimingArgs& a, std::ostream& out) {
  const auto [gx, gy] = parse_grid(a.train.grid);
  const auto sim = parse_choice<Similarity>("--similarity", a.train.similarity, parse_similarity);
  const auto x = load_values(a.train.x);
  const auto y = load_values(a.train.y);
  const auto val = load_retrieval_set(a.train.val_x, a.train.val_y, a.train.val_pairs, "validation set");
  const auto rx = default_rank_grid(thin_svd(center_columns(x).centered).rank(), gx);
  const auto ry = default_rank_grid(thin_svd(center_columns(y).centered).rank(), gy);
  const auto timing = measure_path_timing(x, y, val, rx, ry, a.repeats, sim);
  Sink sink(a.out, out);
  write_timing_tsv(*sink, timing);
  sink.close();
}

// ---- eval / sweep / inspect

struct EvalArgs {
  std::string model, model_annotation;
  std::string x, y, pairs;
  std::string weighting = "asymmetric";
  std::string similarity = "cosine";
  std::size_t blocks = 0;
  std::string out;
};

void cmd_eval(const EvalArgs& a, const Common& common, std::ostream& out) {
  const auto weighting = parse_choice<Weighting>("--weighting", a.weighting, parse_weighting);
  const auto sim = parse_choice<Similarity>("--similarity", a.similarity, parse_similarity);
  const auto search_model = load_model(a.model);
  const auto annotation_model = a.model_annotation.empty() ? search_model : load_model(a.model_annotation);
  const auto set = load_retrieval_set(a.x, a.y, a.pairs, "test set");
  std::vector<std::pair<std::string, EvalReport>> rows;
  if (a.blocks > 0) {
    const auto reports = evaluate_blocks(search_model, annotation_model, set, weighting, a.blocks, sim, common.threads);
    for (std::size_t b = 0; b + 1 < reports.size(); ++b) {
      rows.emplace_back("search/" + std::to_string(b + 1), reports[b].search);
      rows.emplace_back("annotation/" + std::to_string(b + 1), reports[b].annotation);
    }
    rows.emplace_back("search/mean", reports.back().search);
    rows.emplace_back("annotation/mean", reports.back().annotation);
  } else {
    const auto r = evaluate_bidirectional(search_model, annotation_model, set, weighting, sim, common.threads);
    rows.emplace_back("search", r.search);
    rows.emplace_back("annotation", r.annotation);
  }
  Sink sink(a.out, out);
  write_report_tsv(*sink, rows);
  sink.close();
}

struct SweepArgs {
  std::string model, x, y, pairs;
  std::string alphas = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1";
  std::string similarity = "cosine";
  std::string out;
};

void cmd_sweep(const SweepArgs& a, const Common& common, std::ostream& out) {
  const auto alphas = parse_alphas(a.alphas);
  const auto sim = parse_choice<Similarity>("--similarity", a.similarity, parse_similarity);
  const auto model = load_model(a.model);
  const auto set = load_retrieval_set(a.x, a.y, a.pairs, "evaluation set");
  const auto rows = alpha_sweep(model, set, alphas, sim, common.threads);
  Sink sink(a.out, out);
  write_sweep_tsv(*sink, rows);
  sink.close();
}

void cmd_inspect(const std::string& path, std::ostream& out) {
  const auto archive = load_archive(path);
  out << "key\tvalue\n";
  for (const auto& [k, v] : archive.manifest()) out << k << '\t' << v << '\n';
  for (const auto& [name, blob] : archive.blobs())
    out << "blob:" << name << '\t' << blob.rows() << 'x' << blob.cols() << '\n';
}

// Turns config-file entries into flags for every key not already given on
// the command line, so explicit flags always win.
std::vector<std::string> merge_config(const std::vector<std::string>& args) {
  std::string path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config needs a file path");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty()) return rest;
  if (!fs::exists(path)) throw IoError("config file '" + path + "' does not exist");
  const auto items = CLI::ConfigINI().from_file(path);
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty()) throw CLI::ConversionError("config file sections are not supported: " + item.fullname());
    const std::string flag = "--" + item.name;
    const bool given = std::any_of(rest.begin(), rest.end(), [&](const std::string& s) {
      return s == flag || s.rfind(flag + "=", 0) == 0;
    });
    if (given) continue;
    std::string value;
    for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
    rest.push_back(flag + "=" + value);
  }
  return rest;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app("Asymmetrically weighted and regularized CCA for cross-modal retrieval", "ccax");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  Common common;
  auto add_common = [&](CLI::App* sub, bool threads = true) {
    sub->add_option("--seed", common.seed, "Seed for every random stream")->capture_default_str();
    if (threads) sub->add_option("--threads", common.threads, "Worker cap (0 = all cores)")->capture_default_str();
    sub->add_option("--config", "key=value file; flags on the command line win");
  };
  auto add_train = [&](CLI::App* sub, TrainArgs& t, bool require_val) {
    sub->add_option("--x", t.x, "Training image features (FMAT1 or .csv)")->required()->check(CLI::ExistingFile);
    sub->add_option("--y", t.y, "Training text features, row-paired with --x")->required()->check(CLI::ExistingFile);
    auto* vx = sub->add_option("--val-x", t.val_x, "Validation images")->check(CLI::ExistingFile);
    auto* vy = sub->add_option("--val-y", t.val_y, "Validation captions")->check(CLI::ExistingFile);
    if (require_val) {
      vx->required();
      vy->required();
    }
    sub->add_option("--val-pairs", t.val_pairs, "Image row of each validation caption (default: positional)")
        ->check(CLI::ExistingFile);
    sub->add_option("--grid", t.grid, "Grid size <rows>x<cols>")->capture_default_str();
    sub->add_option("--metric", t.metric, "r1 (per task) or r1-combined")->capture_default_str();
    sub->add_option("--similarity", t.similarity, "cosine or l2")->capture_default_str();
  };

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "Generate latent-factor image/caption data");
  add_common(s_synth, false);
  s_synth->add_option("--out-dir", synth.out_dir, "Output directory")->required();
  s_synth->add_option("--n-train", synth.cfg.n_train)->capture_default_str();
  s_synth->add_option("--n-val", synth.cfg.n_val)->capture_default_str();
  s_synth->add_option("--n-test", synth.cfg.n_test)->capture_default_str();
  s_synth->add_option("--latent-dim", synth.cfg.latent_dim)->capture_default_str();
  s_synth->add_option("--mx", synth.cfg.m_x)->capture_default_str();
  s_synth->add_option("--my", synth.cfg.m_y)->capture_default_str();
  s_synth->add_option("--loading-scale", synth.cfg.loading_scale)->capture_default_str();
  s_synth->add_option("--noise-x", synth.cfg.noise_x)->capture_default_str();
  s_synth->add_option("--noise-y", synth.cfg.noise_y)->capture_default_str();
  s_synth->add_option("--captions", synth.captions, "Captions per image")->capture_default_str();

  EmbedArgs embed;
  auto* s_embed = app.add_subcommand("embed", "Embed a caption corpus with HKSE");
  add_common(s_embed);
  s_embed->add_option("--corpus", embed.corpus, "One sentence per line")->required()->check(CLI::ExistingFile);
  s_embed->add_option("--vectors", embed.vectors, "word2vec text table")->required()->check(CLI::ExistingFile);
  s_embed->add_option("--pairs", embed.pairs, "Image row of each sentence")->check(CLI::ExistingFile);
  s_embed->add_option("--out", embed.out, "Output feature matrix")->required();
  auto* o_variant = s_embed->add_option("--variant", embed.variant, "word,sentence layers")->capture_default_str();
  auto* o_concat = s_embed->add_option("--concat", embed.concat, "Second map concatenated to the right");
  s_embed->add_option("--preset", embed.preset, "mscoco (m=2000, m'=3000) or flickr (m=2000, m'=2000)")
      ->check(CLI::IsMember({"mscoco", "flickr"}));
  auto* o_m = s_embed->add_option("--m", embed.m, "Word-layer features")->capture_default_str();
  auto* o_mprime = s_embed->add_option("--mprime", embed.m_prime, "Sentence-layer features")->capture_default_str();
  s_embed->add_option("--gamma", embed.gamma, "Word bandwidth or 'median'")->capture_default_str();
  s_embed->add_option("--eta", embed.eta, "Sentence bandwidth")->capture_default_str();
  s_embed->add_option("--bandwidth-sample", embed.bandwidth_sample, "Words sampled for the median heuristic")
      ->capture_default_str();
  s_embed->add_option("--oov", embed.oov, "skip or error")->check(CLI::IsMember({"skip", "error"}))->capture_default_str();
  s_embed->add_option("--map-out", embed.map_out, "Save the maps for reuse");
  auto* o_map_in = s_embed->add_option("--map-in", embed.map_in, "Reuse saved maps")->check(CLI::ExistingFile);
  o_map_in->excludes(o_concat)->excludes(o_variant);

  FitArgs fit;
  auto* s_fit = app.add_subcommand("fit", "Fit a CCA model");
  add_common(s_fit);
  add_train(s_fit, fit.train, false);
  s_fit->add_option("--reg", fit.reg, "none, tikhonov, tsvd or guided-tsvd")
      ->check(CLI::IsMember({"none", "tikhonov", "tsvd", "guided-tsvd"}))
      ->multi_option_policy(CLI::MultiOptionPolicy::Throw)
      ->capture_default_str();
  s_fit->add_option("--gamma-x", fit.gamma_x);
  s_fit->add_option("--gamma-y", fit.gamma_y);
  s_fit->add_option("--kx", fit.k_x);
  s_fit->add_option("--ky", fit.k_y);
  s_fit->add_option("--out", fit.out, "Model archive (the search model for guided-tsvd)")->required();
  s_fit->add_option("--out-annotation", fit.out_annotation, "Annotation model archive (guided-tsvd)");
  s_fit->add_option("--path-out", fit.path_out, "T-SVD path TSV (guided-tsvd)");

  PathArgs path;
  auto* s_path = app.add_subcommand("path", "Score a regularization grid on validation data");
  add_common(s_path);
  add_train(s_path, path.train, true);
  s_path->add_option("--reg", path.reg, "tsvd or tikhonov")
      ->check(CLI::IsMember({"tsvd", "tikhonov"}))
      ->multi_option_policy(CLI::MultiOptionPolicy::Throw)
      ->capture_default_str();
  s_path->add_option("--out", path.out, "Path TSV (default stdout)");
  s_path->add_option("--selection-out", path.selection_out, "Selected cells TSV");

  TimingArgs timing;
  auto* s_timing = app.add_subcommand("timing", "Time the T-SVD path against the Tikhonov path (single thread)");
  add_common(s_timing, false);
  add_train(s_timing, timing.train, true);
  s_timing->add_option("--repeats", timing.repeats, "Timed runs per path (median reported)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_timing->add_option("--out", timing.out, "Timing TSV (default stdout)");

  EvalArgs eval;
  auto* s_eval = app.add_subcommand("eval", "Evaluate search and annotation");
  add_common(s_eval);
  s_eval->add_option("--model", eval.model, "Model archive (search model)")->required()->check(CLI::ExistingFile);
  s_eval->add_option("--model-annotation", eval.model_annotation, "Separate annotation model")
      ->check(CLI::ExistingFile);
  s_eval->add_option("--x", eval.x, "Test images")->required()->check(CLI::ExistingFile);
  s_eval->add_option("--y", eval.y, "Test captions")->required()->check(CLI::ExistingFile);
  s_eval->add_option("--pairs", eval.pairs, "Image row of each caption (default: positional)");
  s_eval->add_option("--weighting", eval.weighting, "asymmetric, symmetric:<a> or sweep:<a>")->capture_default_str();
  s_eval->add_option("--similarity", eval.similarity, "cosine or l2")->capture_default_str();
  s_eval->add_option("--blocks", eval.blocks, "Evaluate in this many image blocks and average");
  s_eval->add_option("--out", eval.out, "Report TSV (default stdout)");

  SweepArgs sweep;
  auto* s_sweep = app.add_subcommand("sweep", "r@10 of both tasks over the weighting exponent");
  add_common(s_sweep);
  s_sweep->add_option("--model", sweep.model)->required()->check(CLI::ExistingFile);
  s_sweep->add_option("--x", sweep.x)->required()->check(CLI::ExistingFile);
  s_sweep->add_option("--y", sweep.y)->required()->check(CLI::ExistingFile);
  s_sweep->add_option("--pairs", sweep.pairs);
  s_sweep->add_option("--alphas", sweep.alphas, "Comma separated values in [0, 1]")->capture_default_str();
  s_sweep->add_option("--similarity", sweep.similarity)->capture_default_str();
  s_sweep->add_option("--out", sweep.out, "Sweep TSV (default stdout)");

  std::string inspect_path;
  auto* s_inspect = app.add_subcommand("inspect", "Print an archive manifest");
  s_inspect->add_option("archive", inspect_path)->required()->check(CLI::ExistingFile);

  try {
    auto args = merge_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
    if (embed.preset == "flickr") {
      if (o_m->count() == 0) embed.m = 2000;
      if (o_mprime->count() == 0) embed.m_prime = 2000;
    }

    if (s_synth->parsed()) cmd_synth(synth, common);
    else if (s_embed->parsed()) cmd_embed(embed, common);
    else if (s_fit->parsed()) cmd_fit(fit, common);
    else if (s_path->parsed()) cmd_path(path, common, out);
    else if (s_timing->parsed()) cmd_timing(timing, out);
    else if (s_eval->parsed()) cmd_eval(eval, common, out);
    else if (s_sweep->parsed()) cmd_sweep(sweep, common, out);
    else if (s_inspect->parsed()) cmd_inspect(inspect_path, out);
    out.flush();
    return kExitOk;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "ccax: usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "ccax: " << e.kind() << " error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "ccax: error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace ccax::cli

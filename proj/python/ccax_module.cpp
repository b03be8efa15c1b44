#include "ccax/archive.hpp"
#include "ccax/cca.hpp"
#include "ccax/error.hpp"
#include "ccax/hkse.hpp"
#include "ccax/io.hpp"
#include "ccax/retrieval.hpp"
#include "ccax/selection.hpp"
#include "ccax/synthetic.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace ccax;

namespace {

RetrievalSet make_set(const Eigen::MatrixXd& images, const Eigen::MatrixXd& texts,
                      std::optional<std::vector<std::size_t>> pairs) {
  RetrievalSet s{images, texts, {}};
  if (pairs) {
    s.pair_index = std::move(*pairs);
  } else {
    if (images.rows() != texts.rows())
      throw DimensionError("pairs are required when image and text row counts differ");
    for (Eigen::Index i = 0; i < images.rows(); ++i) s.pair_index.push_back(static_cast<std::size_t>(i));
  }
  s.validate();
  return s;
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["r1"] = r.r1;
  d["r5"] = r.r5;
  d["r10"] = r.r10;
  d["medr"] = r.median_rank;
  d["n_queries"] = r.n_queries;
  d["n_items"] = r.n_items;
  return d;
}

py::dict grid_dict(const PathRun& run) {
  py::dict d;
  d["axis_x"] = run.grid.axis_x;
  d["axis_y"] = run.grid.axis_y;
  d["r1_search"] = run.grid.r1_search;
  d["r1_annotation"] = run.grid.r1_annotation;
  d["best_search"] = run.selection.best_search.spec;
  d["best_annotation"] = run.selection.best_annotation.spec;
  return d;
}

PathOptions path_options(const std::string& metric, const std::string& similarity, std::size_t threads) {
  PathOptions o;
  o.metric = parse_selection_metric(metric);
  o.similarity = parse_similarity(similarity);
  o.threads = threads;
  return o;
}

}  // namespace

PYBIND11_MODULE(ccax, m) {
  m.doc() = "Canonical correlation analysis for cross-modal retrieval";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<SingularInputError>(m, "SingularInputError", base.ptr());
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());

  m.def("load_matrix", [](const std::filesystem::path& p) { return load_matrix_auto(p).values(); }, py::arg("path"));
  m.def("save_matrix", [](const Eigen::MatrixXd& v, const std::filesystem::path& p) { save_matrix_auto(FeatureMatrix(v), p); },
        py::arg("values"), py::arg("path"));

  py::class_<RegularizationSpec>(m, "RegularizationSpec")
      .def_static("none", &RegularizationSpec::none)
      .def_static("tikhonov", &RegularizationSpec::tikhonov, py::arg("gamma_x"), py::arg("gamma_y"))
      .def_static("tsvd", &RegularizationSpec::tsvd, py::arg("k_x"), py::arg("k_y"))
      .def_property_readonly("kind", [](const RegularizationSpec& s) { return to_string(s.kind); })
      .def_readonly("gamma_x", &RegularizationSpec::gamma_x)
      .def_readonly("gamma_y", &RegularizationSpec::gamma_y)
      .def_readonly("k_x", &RegularizationSpec::k_x)
      .def_readonly("k_y", &RegularizationSpec::k_y)
      .def("__repr__", &RegularizationSpec::describe);

  py::class_<CcaModel>(m, "CcaModel")
      .def_readonly("u", &CcaModel::u)
      .def_readonly("v", &CcaModel::v)
      .def_readonly("sigma", &CcaModel::sigma)
      .def_readonly("mean_x", &CcaModel::mean_x)
      .def_readonly("mean_y", &CcaModel::mean_y)
      .def_readonly("reg", &CcaModel::reg)
      .def_readonly("n_train", &CcaModel::n_train)
      .def_readonly("rank_x", &CcaModel::rank_x)
      .def_readonly("rank_y", &CcaModel::rank_y)
      .def_property_readonly("k", &CcaModel::k)
      .def("save", [](const CcaModel& model, const std::filesystem::path& p) { save_archive(to_archive(model), p); },
           py::arg("path"))
      .def_static("load", [](const std::filesystem::path& p) { return cca_model_from_archive(load_archive(p)); },
                  py::arg("path"));

  m.def("cca_fit", py::overload_cast<const Eigen::MatrixXd&, const Eigen::MatrixXd&>(&cca_fit), py::arg("x"),
        py::arg("y"));
  m.def("cca_fit_tikhonov", &cca_fit_tikhonov, py::arg("x"), py::arg("y"), py::arg("gamma_x"), py::arg("gamma_y"));
  m.def("cca_fit_tsvd", &cca_fit_tsvd, py::arg("x"), py::arg("y"), py::arg("k_x"), py::arg("k_y"));
  m.def("verify_filter_forms", &verify_filter_forms, py::arg("x"), py::arg("y"), py::arg("spec"));

  m.def(
      "evaluate",
      [](const CcaModel& model, const Eigen::MatrixXd& images, const Eigen::MatrixXd& texts,
         std::optional<std::vector<std::size_t>> pairs, const std::string& weighting, const std::string& similarity,
         std::optional<CcaModel> annotation_model) {
        const auto set = make_set(images, texts, std::move(pairs));
        const auto r = evaluate_bidirectional(model, annotation_model ? *annotation_model : model, set,
                                              parse_weighting(weighting), parse_similarity(similarity));
        py::dict d;
        d["search"] = report_dict(r.search);
        d["annotation"] = report_dict(r.annotation);
        return d;
      },
      py::arg("model"), py::arg("images"), py::arg("texts"), py::arg("pairs") = py::none(),
      py::arg("weighting") = "asymmetric", py::arg("similarity") = "cosine", py::arg("annotation_model") = py::none());

  m.def(
      "alpha_sweep",
      [](const CcaModel& model, const Eigen::MatrixXd& images, const Eigen::MatrixXd& texts,
         std::optional<std::vector<std::size_t>> pairs, const std::vector<double>& alphas, const std::string& similarity) {
        std::vector<std::tuple<double, double, double>> rows;
        for (const auto& r : alpha_sweep(model, make_set(images, texts, std::move(pairs)), alphas,
                                         parse_similarity(similarity)))
          rows.emplace_back(r.alpha, r.r10_search, r.r10_annotation);
        return rows;
      },
      py::arg("model"), py::arg("images"), py::arg("texts"), py::arg("pairs") = py::none(), py::arg("alphas"),
      py::arg("similarity") = "cosine");

  m.def("default_rank_grid", &default_rank_grid, py::arg("rank"), py::arg("size") = 20);

  m.def(
      "tsvd_path",
      [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::MatrixXd& val_images,
         const Eigen::MatrixXd& val_texts, std::optional<std::vector<std::size_t>> val_pairs,
         const std::vector<Eigen::Index>& ranks_x, const std::vector<Eigen::Index>& ranks_y, const std::string& metric,
         const std::string& similarity, std::size_t threads) {
        return grid_dict(tsvd_path(x, y, make_set(val_images, val_texts, std::move(val_pairs)), ranks_x, ranks_y,
                                   path_options(metric, similarity, threads)));
      },
      py::arg("x"), py::arg("y"), py::arg("val_images"), py::arg("val_texts"), py::arg("val_pairs") = py::none(),
      py::arg("ranks_x"), py::arg("ranks_y"), py::arg("metric") = "r1", py::arg("similarity") = "cosine",
      py::arg("threads") = 0);

  m.def(
      "tikhonov_path",
      [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::MatrixXd& val_images,
         const Eigen::MatrixXd& val_texts, std::optional<std::vector<std::size_t>> val_pairs,
         const std::vector<double>& gammas_x, const std::vector<double>& gammas_y, const std::string& metric,
         const std::string& similarity, std::size_t threads) {
        return grid_dict(tikhonov_path(x, y, make_set(val_images, val_texts, std::move(val_pairs)), gammas_x, gammas_y,
                                       path_options(metric, similarity, threads)));
      },
      py::arg("x"), py::arg("y"), py::arg("val_images"), py::arg("val_texts"), py::arg("val_pairs") = py::none(),
      py::arg("gammas_x"), py::arg("gammas_y"), py::arg("metric") = "r1", py::arg("similarity") = "cosine",
      py::arg("threads") = 0);

  m.def(
      "guided_tikhonov",
      [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::MatrixXd& val_images,
         const Eigen::MatrixXd& val_texts, std::optional<std::vector<std::size_t>> val_pairs,
         const std::vector<Eigen::Index>& ranks_x, const std::vector<Eigen::Index>& ranks_y, const std::string& metric,
         const std::string& similarity, std::size_t threads) {
        const auto g = guided_tikhonov(x, y, make_set(val_images, val_texts, std::move(val_pairs)), ranks_x, ranks_y,
                                       path_options(metric, similarity, threads));
        return py::make_tuple(g.search_model, g.annotation_model, grid_dict(g.tsvd));
      },
      py::arg("x"), py::arg("y"), py::arg("val_images"), py::arg("val_texts"), py::arg("val_pairs") = py::none(),
      py::arg("ranks_x"), py::arg("ranks_y"), py::arg("metric") = "r1", py::arg("similarity") = "cosine",
      py::arg("threads") = 0);

  py::class_<HkseMap>(m, "HkseMap")
      .def_static(
          "build",
          [](const std::string& word, const std::string& sentence, double gamma, double eta, Eigen::Index m_word,
             Eigen::Index m_sent, Eigen::Index d, std::uint64_t seed) {
            return HkseMap::build(parse_layer_kind(word), parse_layer_kind(sentence), gamma, eta, m_word, m_sent, d,
                                  seed);
          },
          py::arg("word"), py::arg("sentence"), py::arg("gamma"), py::arg("eta"), py::arg("m"), py::arg("m_prime"),
          py::arg("d"), py::arg("seed"))
      .def_property_readonly("output_dim", &HkseMap::output_dim)
      .def_property_readonly("input_dim", &HkseMap::input_dim)
      .def("word_feature", &HkseMap::word_feature, py::arg("word"))
      .def("embed_sentence", &HkseMap::embed_sentence, py::arg("tokens"))
      .def("save", [](const HkseMap& map, const std::filesystem::path& p) { save_archive(map.to_archive(), p); },
           py::arg("path"))
      .def_static("load", [](const std::filesystem::path& p) { return HkseMap::from_archive(load_archive(p)); },
                  py::arg("path"));

  m.def(
      "exact_kernel",
      [](const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2, const std::string& word, const std::string& sentence,
         double gamma, double eta) {
        return exact_kernel(s1, s2, parse_layer_kind(word), parse_layer_kind(sentence), gamma, eta);
      },
      py::arg("s1"), py::arg("s2"), py::arg("word"), py::arg("sentence"), py::arg("gamma"), py::arg("eta"));

  m.def(
      "generate_caption_like",
      [](std::size_t n_train, std::size_t n_val, std::size_t n_test, Eigen::Index latent_dim, Eigen::Index m_x,
         Eigen::Index m_y, double loading_scale, double noise_x, double noise_y, std::size_t captions,
         std::uint64_t seed) {
        LatentModelConfig cfg{n_train, n_val, n_test, latent_dim, m_x, m_y, loading_scale, noise_x, noise_y, seed};
        const auto data = generate_caption_like(cfg, captions);
        py::dict d;
        const auto [x, y] = data.training_pairs(SplitRole::train);
        d["train_x"] = x;
        d["train_y"] = y;
        for (auto role : {SplitRole::val, SplitRole::test}) {
          const auto s = data.retrieval_set(role);
          const std::string name(to_string(role));
          d[(name + "_images").c_str()] = s.images;
          d[(name + "_texts").c_str()] = s.texts;
          d[(name + "_pairs").c_str()] = s.pair_index;
        }
        return d;
      },
      py::arg("n_train") = 2000, py::arg("n_val") = 500, py::arg("n_test") = 500, py::arg("latent_dim") = 20,
      py::arg("m_x") = 128, py::arg("m_y") = 64, py::arg("loading_scale") = 1.0, py::arg("noise_x") = 0.1,
      py::arg("noise_y") = 0.1, py::arg("captions") = 1, py::arg("seed") = 0);
}

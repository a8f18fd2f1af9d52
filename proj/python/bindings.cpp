#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <sstream>

#include "octseg/cli.hpp"
#include "octseg/dataio.hpp"
#include "octseg/metrics.hpp"
#include "octseg/preprocess.hpp"
#include "octseg/retinagraph.hpp"
#include "octseg/samplekit.hpp"
#include "octseg/trainer.hpp"

namespace py = pybind11;
using namespace octseg;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using BoolArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;

void require_2d(const py::array& a, const char* name) {
  if (a.ndim() != 2) throw py::value_error(std::string(name) + " must be a 2-D array");
}

GrayImage to_image(const U8Array& a) {
  require_2d(a, "image");
  const auto* p = a.data();
  return GrayImage(a.shape(0), a.shape(1), std::vector<std::uint8_t>(p, p + a.size()));
}

BinaryMask to_mask(const BoolArray& a) {
  require_2d(a, "mask");
  const auto* p = a.data();
  std::vector<std::uint8_t> bits(a.size());
  std::transform(p, p + a.size(), bits.begin(), [](bool b) { return std::uint8_t(b); });
  return BinaryMask(a.shape(0), a.shape(1), std::move(bits));
}

py::array_t<std::uint8_t> from_image(const GrayImage& img) {
  py::array_t<std::uint8_t> out({img.rows(), img.cols()});
  std::copy(img.pixels().begin(), img.pixels().end(), out.mutable_data());
  return out;
}

py::array_t<bool> from_mask(const BinaryMask& m) {
  py::array_t<bool> out({m.rows(), m.cols()});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) v(r, c) = m.at(r, c);
  return out;
}

py::array_t<float> from_raster(const FloatRaster& f) {
  py::array_t<float> out({f.channels(), f.rows(), f.cols()});
  std::copy(f.values().begin(), f.values().end(), out.mutable_data());
  return out;
}

py::array_t<std::int64_t> from_path(const LayerPath& p) {
  py::array_t<std::int64_t> out(p.row_at.size());
  std::copy(p.row_at.begin(), p.row_at.end(), out.mutable_data());
  return out;
}

LayerPath to_path(const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& a) {
  LayerPath p;
  for (py::ssize_t i = 0; i < a.size(); ++i) {
    if (a.data()[i] < 0) throw py::value_error("boundary rows must be non-negative");
    p.row_at.push_back(std::size_t(a.data()[i]));
  }
  return p;
}

py::dict phantom_dict(const Phantom& ph) {
  py::dict d;
  d["image"] = from_image(ph.image);
  d["mask"] = from_mask(ph.mask);
  d["ilm"] = from_path(ph.ilm);
  d["ism"] = from_path(ph.ism);
  return d;
}

py::dict score_dict(const PairScore& s) {
  py::dict d;
  d["tp"] = s.counts.tp;
  d["fp"] = s.counts.fp;
  d["fn"] = s.counts.fn;
  d["tn"] = s.counts.tn;
  d["recall"] = s.recall;
  d["precision"] = s.precision;
  d["dice"] = s.dice;
  return d;
}

}  // namespace

PYBIND11_MODULE(_octseg, m) {
  m.doc() = "Cyst segmentation for retinal OCT B-scans";

  static py::exception<Error> error_type(m, "OctsegError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = py::handle(error_type.ptr())(e.what());
      err.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(error_type.ptr(), err.ptr());
    }
  });

  m.def(
      "gen_phantom",
      [](std::size_t rows, std::size_t cols, std::size_t ilm_row, std::size_t ism_row, std::size_t n_cysts,
         std::uint64_t seed) {
        PhantomSpec spec;
        spec.rows = rows;
        spec.cols = cols;
        spec.ilm_row = ilm_row;
        spec.ism_row = ism_row;
        spec.n_cysts = n_cysts;
        spec.seed = seed;
        return phantom_dict(gen_phantom(spec));
      },
      py::arg("rows") = 64, py::arg("cols") = 96, py::arg("ilm_row") = 10, py::arg("ism_row") = 40,
      py::arg("n_cysts") = 3, py::arg("seed") = 0);
  m.def(
      "random_phantom",
      [](std::size_t rows, std::size_t cols, std::uint64_t seed) {
        return phantom_dict(gen_phantom(random_phantom_spec(rows, cols, seed)));
      },
      py::arg("rows"), py::arg("cols"), py::arg("seed"), "Phantom with boundary rows and cyst count drawn from seed.");

  m.def(
      "bilateral_filter",
      [](const U8Array& image, double sigma_d, double sigma_r, std::optional<int> radius) {
        const BilateralParams p{sigma_d, sigma_r, radius.value_or(BilateralParams::default_radius(sigma_d))};
        return from_image(bilateral_filter(to_image(image), p));
      },
      py::arg("image"), py::arg("sigma_d"), py::arg("sigma_r"), py::arg("radius") = py::none());
  m.def(
      "estimate_sigma_r",
      [](const U8Array& image, std::optional<std::size_t> top_rows) {
        const GrayImage img = to_image(image);
        return estimate_sigma_r(img, top_rows.value_or(default_background_rows(img.rows())));
      },
      py::arg("image"), py::arg("top_rows") = py::none());
  m.def(
      "denoise", [](const U8Array& image, double sigma_d) { return from_image(denoise(to_image(image), sigma_d)); },
      py::arg("image"), py::arg("sigma_d") = 2.0);

  m.def(
      "segment_layers",
      [](const U8Array& image, double w_min) {
        const LayerPair lp = segment_layers(to_image(image), w_min);
        return py::make_tuple(from_path(lp.ilm), from_path(lp.ism), lp.first_found == LayerKind::ILM ? "ILM" : "ISM");
      },
      py::arg("image"), py::arg("w_min") = kDefaultMinWeight,
      "Returns (ilm_rows, ism_rows, first_found) for an already denoised scan.");
  m.def(
      "roi_mask",
      [](const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& ilm,
         const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& ism, std::size_t rows,
         std::size_t cols) { return from_mask(roi_mask(to_path(ilm), to_path(ism), rows, cols).mask); },
      py::arg("ilm"), py::arg("ism"), py::arg("rows"), py::arg("cols"));

  m.def(
      "prepare_sample",
      [](const U8Array& image, std::size_t ref_rows, std::size_t ref_cols, double sigma_d) {
        PrepareParams params;
        params.sigma_d = sigma_d;
        const Sample s = prepare_sample(to_image(image), {ref_rows, ref_cols}, params);
        return py::make_tuple(from_raster(s.values), py::make_tuple(s.offset.row, s.offset.col),
                              py::make_tuple(s.orig_dims.rows, s.orig_dims.cols));
      },
      py::arg("image"), py::arg("ref_rows") = 640, py::arg("ref_cols") = 1024, py::arg("sigma_d") = 2.0,
      "Returns (values[2, R, C], (row_offset, col_offset), (orig_rows, orig_cols)).");

  m.def(
      "score_pair", [](const BoolArray& pred, const BoolArray& gt) { return score_dict(score_pair(to_mask(pred), to_mask(gt))); },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "aggregate_stats",
      [](const std::vector<double>& values) {
        const MeanStd s = aggregate_stats(values);
        return py::make_tuple(s.mean, s.std);
      },
      py::arg("values"));
  m.def(
      "grader_iov", [](const BoolArray& a, const BoolArray& b) { return grader_iov(to_mask(a), to_mask(b)); },
      py::arg("gt1"), py::arg("gt2"));

  py::class_<Checkpoint>(m, "Model")
      .def_property_readonly("ref_dims", [](const Checkpoint& cp) { return py::make_tuple(cp.ref.rows, cp.ref.cols); })
      .def_property_readonly("num_parameters", [](const Checkpoint& cp) { return cp.net.params().element_count(); })
      .def("save", [](const Checkpoint& cp, const std::string& path) { save_checkpoint(cp, path); }, py::arg("path"))
      .def("to_bytes", [](const Checkpoint& cp) { return py::bytes(encode_checkpoint(cp)); })
      .def(
          "predict",
          [](Checkpoint& cp, const U8Array& image, double threshold, bool roi_clamp, double sigma_d) {
            PrepareParams params;
            params.sigma_d = sigma_d;
            const Sample s = prepare_sample(to_image(image), cp.ref, params);
            const Prediction p = predict(cp, s, {threshold, roi_clamp});
            py::array_t<float> prob({p.probability.rows(), p.probability.cols()});
            std::copy(p.probability.values().begin(), p.probability.values().end(), prob.mutable_data());
            return py::make_tuple(prob, from_mask(p.mask));
          },
          py::arg("image"), py::arg("threshold") = 0.5, py::arg("roi_clamp") = true, py::arg("sigma_d") = 2.0,
          "Returns (probability, mask) in the scan's own frame.");

  m.def("load_model", [](const std::string& path) { return load_checkpoint(path); }, py::arg("path"));
  m.def(
      "model_from_bytes", [](const py::bytes& b) { return decode_checkpoint(std::string(b)); }, py::arg("data"));

  m.def(
      "train",
      [](const std::vector<U8Array>& images, const std::vector<BoolArray>& masks, std::size_t ref_rows,
         std::size_t ref_cols, std::size_t base_channels, std::size_t depth, std::vector<int> aspp_rates,
         std::optional<std::vector<double>> dropout, std::size_t epochs, std::size_t batch_size, double learning_rate,
         std::uint64_t seed, std::uint64_t init_seed, std::optional<std::function<void(std::size_t, double)>> on_epoch) {
        if (images.size() != masks.size()) throw py::value_error("images and masks differ in length");
        const ReferenceDims ref{ref_rows, ref_cols};
        std::vector<TrainingExample> examples;
        for (std::size_t i = 0; i < images.size(); ++i)
          examples.push_back(make_example(prepare_sample(to_image(images[i]), ref, {}), to_mask(masks[i])));
        UNetConfig ucfg;
        ucfg.base_channels = base_channels;
        ucfg.depth = depth;
        ucfg.aspp_rates = std::move(aspp_rates);
        if (dropout) {
          ucfg.dropout = *dropout;
        } else {
          ucfg.dropout.clear();
          for (std::size_t l = 0; l <= depth; ++l) ucfg.dropout.push_back(l < 2 ? 0.1 : 0.2);
        }
        ucfg.seed = init_seed;
        TrainConfig tcfg;
        tcfg.epochs = epochs;
        tcfg.batch_size = batch_size;
        tcfg.adam.learning_rate = learning_rate;
        tcfg.seed = seed;
        std::function<void(const EpochLoss&)> cb;
        if (on_epoch) cb = [f = *on_epoch](const EpochLoss& e) {
          py::gil_scoped_acquire gil;
          f(e.epoch, e.loss);
        };
        TrainResult result = [&] {
          py::gil_scoped_release release;
          return train(examples, ucfg, tcfg, ref, cb);
        }();
        std::vector<double> losses;
        for (const auto& e : result.history) losses.push_back(e.loss);
        return py::make_tuple(std::move(result.checkpoint), losses);
      },
      py::arg("images"), py::arg("masks"), py::arg("ref_rows") = 640, py::arg("ref_cols") = 1024,
      py::arg("base_channels") = 16, py::arg("depth") = 3, py::arg("aspp_rates") = std::vector<int>{1, 2, 4, 8, 16},
      py::arg("dropout") = py::none(), py::arg("epochs") = 100, py::arg("batch_size") = 10,
      py::arg("learning_rate") = 1e-3, py::arg("seed") = 0, py::arg("init_seed") = 0, py::arg("on_epoch") = py::none(),
      "Returns (model, per-epoch mean losses).");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).");
}

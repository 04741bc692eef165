// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <string>

#include "tsinpaint/data.hpp"
#include "tsinpaint/error.hpp"
#include "tsinpaint/metrics.hpp"
#include "tsinpaint/network.hpp"
#include "tsinpaint/rng.hpp"
#include "tsinpaint/training.hpp"

namespace py = pybind11;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Accepts (H, W), (C, H, W) or (N, C, H, W).
tsi::Tensor to_tensor(const Array& a) {
  int dims[4] = {1, 1, 1, 1};
  const auto nd = a.ndim();
  if (nd < 2 || nd > 4) throw tsi::InputError("expected a 2-, 3- or 4-dimensional array, got " + std::to_string(nd));
  for (py::ssize_t i = 0; i < nd; ++i) dims[4 - nd + i] = static_cast<int>(a.shape(i));
  tsi::Tensor t(tsi::Shape{dims[0], dims[1], dims[2], dims[3]});
  std::copy_n(a.data(), a.size(), t.data());
  return t;
}

Array to_array(const tsi::Tensor& t) {
  const tsi::Shape s = t.shape();
  Array a({s.n, s.c, s.h, s.w});
  std::copy_n(t.data(), t.size(), a.mutable_data());
  return a;
}

}  // namespace

PYBIND11_MODULE(_tsinpaint, m) {
  m.doc() = "Two-stream image inpainting with structure guidance";

  static py::exception<tsi::Error> error(m, "Error");
  static py::exception<tsi::ConfigError> config_error(m, "ConfigError", error.ptr());
  static py::exception<tsi::InputError> input_error(m, "InputError", error.ptr());
  static py::exception<tsi::IoError> io_error(m, "IoError", error.ptr());
  static py::exception<tsi::TrainingError> training_error(m, "TrainingError", error.ptr());
  static py::exception<tsi::GenerationError> generation_error(m, "GenerationError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const tsi::ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const tsi::InputError& e) {
      py::set_error(input_error, e.what());
    } catch (const tsi::IoError& e) {
      py::set_error(io_error, e.what());
    } catch (const tsi::TrainingError& e) {
      py::set_error(training_error, e.what());
    } catch (const tsi::GenerationError& e) {
      py::set_error(generation_error, e.what());
    } catch (const tsi::Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.attr("PSNR_CAP") = tsi::kPsnrCap;

  m.def("l1_percent", [](const Array& pred, const Array& gt) { return tsi::l1_percent(to_tensor(pred), to_tensor(gt)); },
        py::arg("pred"), py::arg("gt"), "100 * mean |pred - gt| for images in [0, 1].");
  m.def("psnr", [](const Array& pred, const Array& gt) { return tsi::psnr(to_tensor(pred), to_tensor(gt)); },
        py::arg("pred"), py::arg("gt"), "PSNR in dB for images in [0, 1], capped at PSNR_CAP.");
  m.def(
      "ssim",
      [](const Array& pred, const Array& gt, int window, double sigma) {
        tsi::SsimOptions o;
        o.window = window;
        o.sigma = sigma;
        return tsi::ssim(to_tensor(pred), to_tensor(gt), o);
      },
      py::arg("pred"), py::arg("gt"), py::arg("window") = 11, py::arg("sigma") = 1.5,
      "Gaussian-window mean SSIM for (N, C, H, W) images in [0, 1].");
  m.def("frechet_distance",
        py::overload_cast<const Eigen::MatrixXd&, const Eigen::MatrixXd&>(&tsi::frechet_distance),
        py::arg("features1"), py::arg("features2"), "Frechet distance between Gaussian fits; rows are samples.");

  m.def("hole_ratio", [](const Array& mask) { return tsi::hole_ratio(to_tensor(mask)); }, py::arg("mask"));
  m.def(
      "generate_mask",
      [](std::uint64_t seed, int height, int width, double lower, double upper) {
        tsi::Rng rng(seed);
        return to_array(tsi::generate_irregular_mask(rng, height, width, tsi::MaskBin{lower, upper}));
      },
      py::arg("seed"), py::arg("height"), py::arg("width"), py::arg("lower") = 0.1, py::arg("upper") = 0.5,
      "Irregular (1, 1, H, W) mask, 1 = hole, with a hole ratio in [lower, upper].");
  m.def(
      "structure_label",
      [](const Array& image, int iterations, double sigma_spatial, double sigma_range) {
        return to_array(tsi::structure_label(to_tensor(image), {iterations, sigma_spatial, sigma_range}));
      },
      py::arg("image"), py::arg("iterations") = 3, py::arg("sigma_spatial") = 3.0, py::arg("sigma_range") = 0.1,
      "Edge-preserving structure image of a (1, 3, H, W) image in [-1, 1].");
  m.def(
      "build_pyramid",
      [](const Array& image, int levels) {
        py::list out;
        for (const tsi::Tensor& t : tsi::build_pyramid(to_tensor(image), levels)) out.append(to_array(t));
        return out;
      },
      py::arg("image"), py::arg("levels"));
  m.def("load_image", [](const std::filesystem::path& p, int h, int w) { return to_array(tsi::load_image(p, h, w)); },
        py::arg("path"), py::arg("height"), py::arg("width"), "(1, 3, H, W) image in [-1, 1].");
  m.def("load_mask", [](const std::filesystem::path& p, int h, int w) { return to_array(tsi::load_mask(p, h, w)); },
        py::arg("path"), py::arg("height"), py::arg("width"));

  py::class_<tsi::TrainState>(m, "Model", "A trained generator loaded from a checkpoint.")
      .def_static("load", &tsi::load_checkpoint, py::arg("path"))
      .def_property_readonly("step", [](const tsi::TrainState& s) { return s.step; })
      .def_property_readonly("config",
                             [](const tsi::TrainState& s) {
                               py::dict d;
                               for (const auto& [k, v] : s.config.entries()) d[py::str(k)] = v;
                               return d;
                             })
      .def(
          "inpaint",
          [](const tsi::TrainState& s, const Array& image, const Array& mask) {
            return to_array(s.generator.inpaint(to_tensor(image), to_tensor(mask)));
          },
          py::arg("image"), py::arg("mask"), "Composited result for an image in [-1, 1] and a mask (1 = hole).");
}

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "fcenet/autograd.hpp"
#include "fcenet/checkpoint.hpp"
#include "fcenet/file_util.hpp"
#include "fcenet/freq_analysis.hpp"
#include "fcenet/gradcheck_suite.hpp"
#include "fcenet/metrics.hpp"
#include "fcenet/network.hpp"
#include "fcenet/noise.hpp"
#include "fcenet/spectral.hpp"

namespace py = pybind11;
using namespace fcenet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using CArray = py::array_t<Complex, py::array::c_style | py::array::forcecast>;

// (H, W) arrays are treated as one channel.
Tensor to_tensor(const Array& a) {
    Shape s;
    if (a.ndim() == 2) {
        s = {1, static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1))};
    } else if (a.ndim() == 3) {
        s = {static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2))};
    } else {
        throw ShapeError("expected a (C, H, W) or (H, W) array");
    }
    Tensor t(s);
    std::memcpy(t.data().data(), a.data(), t.size() * sizeof(double));
    return t;
}

Array to_array(const Tensor& t) {
    Array a({t.channels(), t.height(), t.width()});
    std::memcpy(a.mutable_data(), t.data().data(), t.size() * sizeof(double));
    return a;
}

CArray spectrum_to_array(const Spectrum& s) {
    CArray a({s.channels(), s.height(), s.width()});
    std::memcpy(a.mutable_data(), s.data().data(), s.size() * sizeof(Complex));
    return a;
}

Spectrum array_to_spectrum(const CArray& a) {
    if (a.ndim() != 3) throw ShapeError("expected a (C, H, W) complex array");
    Spectrum s(Shape{static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2))});
    std::memcpy(s.data().data(), a.data(), s.size() * sizeof(Complex));
    return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "NIR-guided low-light denoising core";

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    // Later registrations are tried first, so the derived type goes last.
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_ValueError);

    m.def("dft2d", [](const Array& x) { return spectrum_to_array(dft2d(to_tensor(x))); }, py::arg("x"),
          "Unnormalized per-channel 2D DFT.");
    m.def("idft2d", [](const CArray& s) { return to_array(idft2d(array_to_spectrum(s))); }, py::arg("spectrum"),
          "Inverse DFT with 1/(HW) scaling; returns the real part.");

    m.def("psnr", [](const Array& a, const Array& b, double peak) { return psnr(to_tensor(a), to_tensor(b), peak); },
          py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);
    m.def(
        "ssim",
        [](const Array& a, const Array& b, int window, double sigma, double peak) {
            SsimParams p;
            p.window = window;
            p.sigma = sigma;
            p.peak = peak;
            return ssim(to_tensor(a), to_tensor(b), p);
        },
        py::arg("a"), py::arg("b"), py::arg("window") = 11, py::arg("sigma") = 1.5, py::arg("peak") = 1.0);

    m.def("standard_cutoff_grid", &standard_cutoff_grid);
    m.def(
        "band_similarity",
        [](const Array& target, const Array& gt, double cutoff) {
            return band_similarity(to_tensor(target), to_tensor(gt), cutoff);
        },
        py::arg("target"), py::arg("gt"), py::arg("cutoff"));
    m.def(
        "correlation_curve",
        [](const Array& target, const Array& gt, std::vector<double> cutoffs) {
            if (cutoffs.empty()) cutoffs = standard_cutoff_grid();
            return correlation_curve(to_tensor(target), to_tensor(gt), cutoffs, "curve").similarities;
        },
        py::arg("target"), py::arg("gt"), py::arg("cutoffs") = std::vector<double>{});
    m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return spearman(x, y); });

    py::class_<NoiseSpec>(m, "NoiseSpec")
        .def(py::init<>())
        .def_property(
            "kind", [](const NoiseSpec& s) { return s.kind == NoiseKind::gaussian ? "gaussian" : "mixed-gp"; },
            [](NoiseSpec& s, const std::string& k) {
                if (k == "gaussian") s.kind = NoiseKind::gaussian;
                else if (k == "mixed-gp") s.kind = NoiseKind::mixed_gp;
                else throw py::value_error("kind must be 'gaussian' or 'mixed-gp'");
            })
        .def_readwrite("sigma", &NoiseSpec::sigma)
        .def_readwrite("level", &NoiseSpec::level)
        .def_readwrite("darken", &NoiseSpec::darken)
        .def_readwrite("darken_lo", &NoiseSpec::darken_lo)
        .def_readwrite("darken_hi", &NoiseSpec::darken_hi)
        .def_readwrite("seed", &NoiseSpec::seed);

    m.def(
        "synth_triple",
        [](std::uint64_t seed, int height, int width, const NoiseSpec& spec) {
            const SceneTriple t = synth_triple(seed, height, width, spec);
            py::dict d;
            d["clean"] = to_array(t.clean);
            d["nir"] = to_array(t.nir);
            d["noisy"] = to_array(t.noisy);
            return d;
        },
        py::arg("seed"), py::arg("height"), py::arg("width"), py::arg("spec") = NoiseSpec{},
        "Synthetic scene as a dict of clean (3,H,W), nir (1,H,W) and noisy (3,H,W).");

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("base_channels", &ModelConfig::base_channels)
        .def_readwrite("blocks_per_scale", &ModelConfig::blocks_per_scale)
        .def_readwrite("k_filters", &ModelConfig::k_filters)
        .def_readwrite("patch_height", &ModelConfig::patch_height)
        .def_readwrite("patch_width", &ModelConfig::patch_width);

    m.def("param_count", &param_count, py::arg("config"));

    py::class_<ModelWeights>(m, "ModelWeights")
        .def(py::init<const ModelConfig&>(), py::arg("config"))
        .def("init", &ModelWeights::init, py::arg("seed"))
        .def_property_readonly("config", &ModelWeights::config)
        .def("param_count", [](const ModelWeights& w) { return w.params().scalar_count(); });

    m.def("load_checkpoint", [](const std::string& path) { return std::move(read_checkpoint(path).weights); },
          py::arg("path"));
    m.def("save_checkpoint", [](const std::string& path, const ModelWeights& w) { write_checkpoint(path, w); },
          py::arg("path"), py::arg("weights"));

    m.def(
        "denoise",
        [](const Array& noisy, const Array& nir, const ModelWeights& w) {
            const Tensor n = to_tensor(noisy), r = to_tensor(nir);
            Tensor out;
            {
                py::gil_scoped_release release;
                out = denoise_image(n, r, w);
            }
            return to_array(out);
        },
        py::arg("noisy"), py::arg("nir"), py::arg("weights"),
        "Stage-2 output over a grid of whole patches, clamped to [0, 1].");

    m.def(
        "gradcheck",
        [](const std::string& module, std::uint64_t seed) {
            py::list out;
            for (const SuiteResult& r : run_gradcheck_suite(module, seed)) {
                py::dict d;
                d["module"] = r.module;
                d["max_rel_error"] = r.report.max_rel_error();
                d["passed"] = r.report.passed();
                d["tensors"] = r.report.entries.size();
                out.append(d);
            }
            return out;
        },
        py::arg("module") = "all", py::arg("seed") = 0);
}

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sparsect/baselines.hpp"
#include "sparsect/filter.hpp"
#include "sparsect/geometry.hpp"
#include "sparsect/metrics.hpp"
#include "sparsect/phantom.hpp"
#include "sparsect/projector.hpp"
#include "sparsect/upsample.hpp"

namespace py = pybind11;
using namespace sparsect;

namespace {

using Array2d = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image image_from(const Array2d& a, double pixel_spacing = 1.0) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2D array");
    Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), pixel_spacing);
    std::copy(a.data(), a.data() + img.size(), img.data.begin());
    return img;
}

Sinogram sinogram_from(const Array2d& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2D array");
    Sinogram y(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::copy(a.data(), a.data() + y.size(), y.data.begin());
    return y;
}

py::array_t<double> to_array(int rows, int cols, const std::vector<double>& data) {
    py::array_t<double> out({rows, cols});
    std::copy(data.begin(), data.end(), out.mutable_data());
    return out;
}

}  // namespace

PYBIND11_MODULE(_sparsect, m) {
    m.doc() = "parallel-beam projectors, FBP, sinogram upsampling, and quality metrics";

    py::class_<Geometry>(m, "Geometry")
        .def_readonly("n_angles", &Geometry::n_angles)
        .def_readonly("n_detectors", &Geometry::n_detectors)
        .def_readonly("rows", &Geometry::rows)
        .def_readonly("cols", &Geometry::cols)
        .def_readonly("angular_span", &Geometry::angular_span)
        .def_readonly("detector_spacing", &Geometry::detector_spacing)
        .def_readonly("pixel_spacing", &Geometry::pixel_spacing)
        .def("angle", &Geometry::angle)
        .def("__repr__", [](const Geometry& g) {
            return "Geometry(" + std::to_string(g.n_angles) + " angles, " +
                   std::to_string(g.n_detectors) + " detectors, " + std::to_string(g.rows) + "x" +
                   std::to_string(g.cols) + ")";
        });

    m.def("make_geometry", &make_geometry, py::arg("n_angles"), py::arg("n_detectors"),
          py::arg("rows"), py::arg("cols"), py::arg("pixel_spacing") = 1.0,
          py::arg("detector_spacing") = 1.0, py::arg("angular_span") = 0.0);

    m.def("forward_project", [](const Array2d& x, const Geometry& g) {
        Sinogram y = forward_project(image_from(x, g.pixel_spacing), g);
        return to_array(y.n_angles, y.n_detectors, y.data);
    });
    m.def("back_project", [](const Array2d& y, const Geometry& g) {
        Image x = back_project(sinogram_from(y), g);
        return to_array(x.rows, x.cols, x.data);
    });
    m.def("dense_system_matrix", [](const Geometry& g) {
        DenseSystemMatrix d = dense_system_matrix(g);
        return to_array(d.n_rays, d.n_pixels, d.entries);
    });

    m.def("filter_weights", [](const std::string& kind, int pad_len) {
        SpectralFilter w = make_filter(filter_kind_from_string(kind), pad_len);
        return py::array_t<double>(static_cast<py::ssize_t>(w.weights.size()), w.weights.data());
    }, py::arg("kind"), py::arg("pad_len"));

    m.def("fbp_reconstruct", [](const Array2d& y, const Geometry& g, const std::string& filter,
                                int pad_len) {
        if (pad_len == 0) pad_len = default_pad_len(g.n_detectors);
        SpectralFilter w = make_filter(filter_kind_from_string(filter), pad_len);
        Image x = fbp_reconstruct(sinogram_from(y), g, w);
        return to_array(x.rows, x.cols, x.data);
    }, py::arg("sinogram"), py::arg("geometry"), py::arg("filter") = "ramlak",
       py::arg("pad_len") = 0);

    m.def("enhance", [](const Array2d& y_k, const Geometry& g_k, const Geometry& g_K) {
        Sinogram out = enhance(sinogram_from(y_k), g_k, g_K);
        return to_array(out.n_angles, out.n_detectors, out.data);
    }, py::arg("y_k"), py::arg("g_k"), py::arg("g_K"));

    m.def("wls_tv_reconstruct", [](const Array2d& y, const Geometry& g, double lam, int iters,
                                   double step) {
        WlsTvOptions opt;
        opt.lambda = lam;
        opt.iters = iters;
        opt.step = step;
        Image x = wls_tv_reconstruct(sinogram_from(y), g, opt).x;
        return to_array(x.rows, x.cols, x.data);
    }, py::arg("sinogram"), py::arg("geometry"), py::arg("lam") = 0.0, py::arg("iters") = 250,
       py::arg("step") = 0.0);

    m.def("shepp_logan", [](int n) {
        Image x = shepp_logan(n);
        return to_array(x.rows, x.cols, x.data);
    });
    m.def("random_phantom", [](uint64_t seed, int n) {
        Image x = random_phantom(seed, n);
        return to_array(x.rows, x.cols, x.data);
    });

    m.def("psnr", [](const Array2d& x, const Array2d& ref, double data_range) {
        return psnr(image_from(x), image_from(ref), data_range);
    }, py::arg("x"), py::arg("ref"), py::arg("data_range") = 1.0);
    m.def("ssim", [](const Array2d& x, const Array2d& ref, double data_range) {
        return ssim(image_from(x), image_from(ref), data_range);
    }, py::arg("x"), py::arg("ref"), py::arg("data_range") = 1.0);
    m.def("hu_window", [](const Array2d& x, double lo, double hi) {
        Image out = hu_window(image_from(x), lo, hi);
        return to_array(out.rows, out.cols, out.data);
    });
}

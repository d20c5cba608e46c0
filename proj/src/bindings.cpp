#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "hncr/ball.hpp"
#include "hncr/cli.hpp"
#include "hncr/error.hpp"
#include "hncr/evaluate.hpp"
#include "hncr/model.hpp"
#include "hncr/synthetic.hpp"

namespace py = pybind11;
namespace raw = hncr::ball::raw;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::span<const double> view(const Array& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }

Array vec1(const Array& a, const char* name) {
  if (a.ndim() != 1) throw py::value_error(std::string(name) + " must be a 1-d array");
  return a;
}

void same_dim(const Array& a, const Array& b) {
  if (a.size() != b.size()) throw py::value_error("dimension mismatch");
}

void check_c(double c) {
  if (!(c >= 0.0)) throw py::value_error("curvature must be >= 0");
}

Array make(py::ssize_t n) { return Array(std::vector<py::ssize_t>{n}); }

Array empty_like(const Array& a) { return make(a.size()); }

std::span<double> out_span(Array& a) { return {a.mutable_data(), static_cast<std::size_t>(a.size())}; }

template <typename F>
Array binary(const Array& x, const Array& y, double c, F f) {
  vec1(x, "x");
  vec1(y, "y");
  same_dim(x, y);
  check_c(c);
  Array out = empty_like(x);
  f(view(x), view(y), c, out_span(out));
  return out;
}

std::vector<hncr::eval::ScoredPair> scored(const Array& scores, py::array_t<int, py::array::forcecast> labels) {
  if (scores.size() != labels.size()) throw py::value_error("scores and labels differ in length");
  std::vector<hncr::eval::ScoredPair> out(scores.size());
  for (py::ssize_t i = 0; i < scores.size(); ++i) {
    out[i].item = static_cast<std::uint32_t>(i);
    out[i].score = scores.data()[i];
    out[i].label = labels.data()[i] != 0;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_hncr, m) {
  m.doc() = "Poincare-ball kernels, metrics and the command-line driver.";
  m.attr("BALL_EPS") = hncr::ball::kBallEps;

  py::register_exception<hncr::InputError>(m, "InputError", PyExc_ValueError);

  m.def("mobius_add", [](const Array& x, const Array& y, double c) { return binary(x, y, c, raw::mobius_add); },
        py::arg("x"), py::arg("y"), py::arg("c") = 1.0);
  m.def(
      "mobius_scalar_mul",
      [](double r, const Array& x, double c) {
        vec1(x, "x");
        check_c(c);
        Array out = empty_like(x);
        raw::mobius_scalar_mul(r, view(x), c, out_span(out));
        return out;
      },
      py::arg("r"), py::arg("x"), py::arg("c") = 1.0);
  m.def(
      "mobius_matvec",
      [](const Array& mat, const Array& x, double c) {
        vec1(x, "x");
        check_c(c);
        if (mat.ndim() != 2 || mat.shape(1) != x.size()) throw py::value_error("matrix must be (rows, len(x))");
        Array out = make(mat.shape(0));
        raw::mobius_matvec(view(mat), mat.shape(0), view(x), c, out_span(out));
        return out;
      },
      py::arg("m"), py::arg("x"), py::arg("c") = 1.0);
  m.def("exp_map", [](const Array& x, const Array& v, double c) { return binary(x, v, c, raw::exp_map); },
        py::arg("x"), py::arg("v"), py::arg("c") = 1.0);
  m.def("log_map", [](const Array& x, const Array& y, double c) { return binary(x, y, c, raw::log_map); },
        py::arg("x"), py::arg("y"), py::arg("c") = 1.0);
  m.def(
      "distance",
      [](const Array& x, const Array& y, double c) {
        vec1(x, "x");
        vec1(y, "y");
        same_dim(x, y);
        check_c(c);
        return raw::distance(view(x), view(y), c);
      },
      py::arg("x"), py::arg("y"), py::arg("c") = 1.0);
  m.def(
      "project",
      [](const Array& x, double c) {
        vec1(x, "x");
        check_c(c);
        Array out = empty_like(x);
        std::copy(x.data(), x.data() + x.size(), out.mutable_data());
        raw::project(out_span(out), c);
        return out;
      },
      py::arg("x"), py::arg("c") = 1.0);
  m.def(
      "conformal_factor", [](const Array& x, double c) { return raw::conformal_factor(view(vec1(x, "x")), c); },
      py::arg("x"), py::arg("c") = 1.0);
  m.def(
      "riemannian_scale", [](const Array& x, double c) { return raw::riemannian_scale(view(vec1(x, "x")), c); },
      py::arg("theta"), py::arg("c") = 1.0);

  m.def(
      "fermi_dirac", [](double d, double r, double t) { return hncr::model::fermi_dirac(d, r, t); }, py::arg("d"),
      py::arg("r") = 2.0, py::arg("t") = 1.0);

  m.def(
      "auc",
      [](const Array& s, py::array_t<int, py::array::forcecast> l) -> std::optional<double> {
        return hncr::eval::auc(scored(s, l));
      },
      py::arg("scores"), py::arg("labels"), "Rank-sum AUC; None when a class is missing.");
  m.def(
      "accuracy",
      [](const Array& s, py::array_t<int, py::array::forcecast> l, double threshold) {
        return hncr::eval::accuracy(scored(s, l), threshold);
      },
      py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);

  m.def(
      "two_block",
      [](std::size_t users, std::size_t items, double in_block, std::uint64_t seed) {
        hncr::synthetic::TwoBlockConfig cfg;
        cfg.users = users;
        cfg.items = items;
        cfg.in_block = in_block;
        cfg.seed = seed;
        const auto d = hncr::synthetic::two_block(cfg);
        py::array_t<std::uint32_t> pairs({static_cast<py::ssize_t>(d.positives.size()), py::ssize_t{2}});
        auto p = pairs.mutable_unchecked<2>();
        for (std::size_t n = 0; n < d.positives.size(); ++n) {
          p(n, 0) = d.positives[n].user;
          p(n, 1) = d.positives[n].item;
        }
        return py::make_tuple(pairs, d.user_block, d.item_block);
      },
      py::arg("users") = 200, py::arg("items") = 300, py::arg("in_block") = 0.98, py::arg("seed") = 0,
      "Returns (pairs[n, 2], user_block, item_block).");
  m.def(
      "write_two_block",
      [](const std::string& path, std::size_t users, std::size_t items, std::uint64_t seed) {
        hncr::synthetic::TwoBlockConfig cfg;
        cfg.users = users;
        cfg.items = items;
        cfg.seed = seed;
        hncr::synthetic::write_ratings(path, hncr::synthetic::two_block(cfg));
      },
      py::arg("path"), py::arg("users") = 200, py::arg("items") = 300, py::arg("seed") = 0);

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "hncr");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        py::gil_scoped_release release;
        return hncr::cli::run(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs the command-line driver and returns its exit code.");
}

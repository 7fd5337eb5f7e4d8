#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <vector>

#include "planefilter/errors.hpp"
#include "planefilter/eval.hpp"
#include "planefilter/geometry.hpp"
#include "planefilter/image.hpp"
#include "planefilter/io.hpp"
#include "planefilter/miho.hpp"
#include "planefilter/mop.hpp"
#include "planefilter/ncc.hpp"
#include "planefilter/synth.hpp"

namespace py = pybind11;
namespace pf = planefilter;

namespace {

using MatchArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor>;

std::vector<pf::Match> to_matches(const MatchArray& a) {
  if (a.ndim() == 1 && a.shape(0) == 0) return {};
  if (a.ndim() != 2 || a.shape(1) != 4) {
    throw py::value_error("matches must be an (N, 4) array of x1, y1, x2, y2");
  }
  auto r = a.unchecked<2>();
  std::vector<pf::Match> out;
  out.reserve(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out.emplace_back(r(i, 0), r(i, 1), r(i, 2), r(i, 3));
  return out;
}

RowMatrix from_matches(const std::vector<pf::Match>& ms) {
  RowMatrix out(static_cast<Eigen::Index>(ms.size()), 4);
  for (std::size_t i = 0; i < ms.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) << ms[i].p1.x(), ms[i].p1.y(), ms[i].p2.x(), ms[i].p2.y();
  }
  return out;
}

pf::GrayImage to_image(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw py::value_error("image must be a 2-D array");
  const auto h = static_cast<int>(a.shape(0));
  const auto w = static_cast<int>(a.shape(1));
  std::vector<double> data(a.data(), a.data() + a.size());
  return pf::GrayImage(w, h, std::move(data));
}

py::array_t<double> from_image(const pf::GrayImage& img) {
  py::array_t<double> out({img.height(), img.width()});
  std::copy(img.data().begin(), img.data().end(), out.mutable_data());
  return out;
}

py::dict plane_dict(const pf::HomographyModel& p) {
  py::dict d;
  d["H"] = Eigen::Matrix3d(p.H.matrix());
  d["inliers_weak"] = p.inliers_weak;
  d["inliers_strong"] = p.inliers_strong;
  if (p.miho) {
    d["H1"] = Eigen::Matrix3d(p.miho->H1.matrix());
    d["H2"] = Eigen::Matrix3d(p.miho->H2.matrix());
  }
  return d;
}

pf::SceneSpec make_spec(const py::kwargs& kw) {
  pf::Json j = pf::Json::object();
  for (const auto& [k, v] : kw) {
    const auto key = py::cast<std::string>(k);
    if (py::isinstance<py::bool_>(v)) {
      throw py::type_error("unexpected boolean for " + key);
    } else if (py::isinstance<py::int_>(v)) {
      const auto n = py::cast<long long>(v);
      if (n >= 0) {
        j[key] = static_cast<unsigned long long>(n);
      } else {
        j[key] = n;
      }
    } else if (py::isinstance<py::float_>(v)) {
      j[key] = py::cast<double>(v);
    } else {
      j[key] = py::cast<std::string>(v);
    }
  }
  return pf::spec_from_json(j);
}

py::tuple scene_tuple(const pf::LabeledScene& s) {
  std::vector<Eigen::Matrix3d> planes;
  for (const auto& p : s.gt_planes) planes.push_back(p.matrix());
  py::object pose = py::none();
  if (s.gt_pose) {
    py::dict d;
    d["K1"] = s.gt_pose->K1;
    d["K2"] = s.gt_pose->K2;
    d["R"] = s.gt_pose->R;
    d["t"] = s.gt_pose->t;
    d["scale"] = s.gt_pose->scale.value_or(1.0);
    pose = d;
  }
  return py::make_tuple(from_matches(s.matches), s.labels, planes, pose);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Piecewise-planar match filtering, NCC keypoint refinement and evaluation";

  py::register_exception<pf::Error>(m, "Error", PyExc_RuntimeError);

  m.def("fit_homography",
        [](const MatchArray& matches) {
          return Eigen::Matrix3d(pf::fit_homography_dlt(to_matches(matches)).H.matrix());
        },
        py::arg("matches"), "Normalized DLT homography (unit Frobenius norm).");

  m.def("reprojection_error",
        [](const Eigen::Matrix3d& H, const MatchArray& matches) {
          const pf::Homography h(H);
          std::vector<double> out;
          for (const auto& mt : to_matches(matches)) out.push_back(pf::reprojection_error(h, mt));
          return out;
        },
        py::arg("H"), py::arg("matches"));

  m.def("filter_matches",
        [](const MatchArray& matches, bool miho, double t_l, std::size_t n_min, int c_max,
           std::uint64_t seed, bool fix_rotation, int threads) {
          const auto ms = to_matches(matches);
          pf::MopConfig cfg = miho ? pf::MopConfig::miho() : pf::MopConfig::plain();
          cfg.with_tl(t_l);
          if (n_min > 0) cfg.n_min = n_min;
          cfg.c_max = c_max;
          cfg.seed = seed;
          cfg.threads = threads;
          pf::FilterResult res;
          {
            py::gil_scoped_release release;
            if (miho) {
              pf::MihoOptions opts;
              opts.fix_rotation = fix_rotation;
              res = pf::mop_miho_filter(ms, cfg, opts);
            } else {
              res = pf::mop_filter(ms, cfg);
            }
          }
          py::dict d;
          d["kept"] = res.kept;
          d["discarded"] = res.discarded;
          d["assignment"] = res.assignment;
          py::list planes;
          for (const auto& p : res.planes) planes.append(plane_dict(p));
          d["planes"] = planes;
          d["alpha_star"] = res.alpha_star;
          d["passthrough"] = res.passthrough;
          return d;
        },
        py::arg("matches"), py::arg("miho") = false, py::arg("t_l") = 15.0,
        py::arg("n_min") = 0, py::arg("c_max") = 2000, py::arg("seed") = 0,
        py::arg("fix_rotation") = true, py::arg("threads") = -1,
        "MOP (or MOP+MiHo) filtering; n_min=0 keeps the mode default.");

  m.def("fix_rotation",
        [](const MatchArray& matches, std::uint64_t seed) {
          return pf::fix_rotation(to_matches(matches), seed);
        },
        py::arg("matches"), py::arg("seed") = 0);

  m.def("subpixel_peak", &pf::subpixel_peak, py::arg("response"));

  m.def("refine_matches",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& img1,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& img2,
           const MatchArray& matches, int radius, int threads) {
          const auto i1 = to_image(img1);
          const auto i2 = to_image(img2);
          const auto ms = to_matches(matches);
          pf::NccConfig cfg;
          cfg.radius = radius;
          cfg.threads = threads;
          std::vector<pf::RefinedMatch> res;
          {
            py::gil_scoped_release release;
            res = pf::refine_matches(i1, i2, ms, {}, cfg);
          }
          std::vector<pf::Match> refined;
          std::vector<double> scores;
          std::vector<bool> ok;
          for (const auto& r : res) {
            refined.push_back(r.refined);
            scores.push_back(r.score);
            ok.push_back(r.ok);
          }
          return py::make_tuple(from_matches(refined), scores, ok);
        },
        py::arg("img1"), py::arg("img2"), py::arg("matches"), py::arg("radius") = 10,
        py::arg("threads") = -1,
        "NCC refinement with identity base pairs; images are (H, W) arrays in [0, 1].");

  m.def("epipolar_error",
        [](const Eigen::Matrix3d& F, const MatchArray& matches, bool squared) {
          std::vector<double> out;
          for (const auto& mt : to_matches(matches)) {
            out.push_back(pf::epipolar_error(
                F, mt, squared ? pf::EpipolarNorm::Squared : pf::EpipolarNorm::Distance));
          }
          return out;
        },
        py::arg("F"), py::arg("matches"), py::arg("squared") = false);

  m.def("match_scores",
        [](const std::vector<double>& base_errors, const std::vector<double>& errors) {
          const auto s = pf::match_scores_from_errors(base_errors, errors);
          return py::make_tuple(s.recall, s.precision, s.filtered);
        },
        py::arg("base_errors"), py::arg("errors"),
        "(recall, precision, filtered) from per-match GT errors.");

  m.def("estimate_intrinsics", &pf::estimate_intrinsics, py::arg("width"), py::arg("height"));

  m.def("pose_from_fundamental",
        [](const MatchArray& matches, const Eigen::Matrix3d& K1, const Eigen::Matrix3d& K2) {
          std::vector<py::tuple> out;
          for (const auto& p : pf::pose_from_fundamental(to_matches(matches), K1, K2)) {
            out.push_back(py::make_tuple(p.R, p.t));
          }
          return out;
        },
        py::arg("matches"), py::arg("K1"), py::arg("K2"));

  m.def("pose_error",
        [](const std::vector<std::pair<Eigen::Matrix3d, Eigen::Vector3d>>& candidates,
           const Eigen::Matrix3d& R, const Eigen::Vector3d& t, std::optional<double> scale) {
          std::vector<pf::Pose> c;
          for (const auto& [Rc, tc] : candidates) c.push_back({Rc, tc});
          pf::PoseGroundTruth gt;
          gt.R = R;
          gt.t = t;
          gt.scale = scale;
          return pf::pose_error(c, gt, scale ? pf::PoseErrorMode::Metric : pf::PoseErrorMode::Angular);
        },
        py::arg("candidates"), py::arg("R"), py::arg("t"), py::arg("scale") = py::none(),
        "Degrees; metric translation error when a scale is given.");

  m.def("auc",
        [](const std::vector<double>& errors, const std::vector<double>& thresholds) {
          const auto a = pf::auc(errors, thresholds);
          return py::make_tuple(a.values, a.mean);
        },
        py::arg("errors"), py::arg("thresholds"));

  m.def("homography_common_area_error", &pf::homography_common_area_error, py::arg("H_est"),
        py::arg("H_gt"), py::arg("width"), py::arg("height"));

  m.def("gen_planar_scene",
        [](const py::kwargs& kw) { return scene_tuple(pf::gen_planar_scene(make_spec(kw))); },
        "(matches, labels, gt_planes, None) from scene-spec keyword arguments.");
  m.def("gen_pose_scene",
        [](const py::kwargs& kw) { return scene_tuple(pf::gen_pose_scene(make_spec(kw))); },
        "(matches, labels, [], pose dict) from scene-spec keyword arguments.");
  m.def("render_textured_pair",
        [](const Eigen::Matrix3d& H, std::size_t count, int radius, const py::kwargs& kw) {
          const auto pair = pf::render_textured_pair(H, make_spec(kw), count, radius);
          return py::make_tuple(from_image(pair.img1), from_image(pair.img2),
                                from_matches(pair.gt_matches));
        },
        py::arg("H"), py::arg("count") = 100, py::arg("radius") = 10);

  m.def("read_matches", [](const std::string& path) { return from_matches(pf::read_matches_csv(path)); },
        py::arg("path"));
  m.def("write_matches",
        [](const std::string& path, const MatchArray& matches) {
          pf::write_matches_csv(path, to_matches(matches));
        },
        py::arg("path"), py::arg("matches"));
}

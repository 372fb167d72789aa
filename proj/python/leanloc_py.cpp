#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <filesystem>
#include <optional>
#include <string>

#include "leanloc/dataset.hpp"
#include "leanloc/error.hpp"
#include "leanloc/eval.hpp"
#include "leanloc/pipeline.hpp"
#include "leanloc/pose.hpp"
#include "leanloc/raster.hpp"
#include "leanloc/sampler.hpp"
#include "leanloc/scene.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace leanloc;

namespace {

template <class T>
py::array_t<T> to_array(const Image<T>& img) {
  py::array_t<T> out({img.height, img.width});
  std::copy(img.data.begin(), img.data.end(), out.mutable_data());
  return out;
}

py::dict triplet_dict(const LeanTriplet& t) {
  py::dict d;
  d["edge"] = to_array(t.edge.mask);
  d["face"] = to_array(t.face);
  d["depth"] = to_array(t.depth);
  d["visible_edges"] = t.edge.visible_edge_count;
  return d;
}

py::tuple quat_tuple(const Quaternion& q) { return py::make_tuple(q.w, q.x, q.y, q.z); }

EvalTask task_from_string(const std::string& s) {
  if (s == "matching") return EvalTask::Matching;
  if (s == "interpolation") return EvalTask::Interpolation;
  fail(ErrorKind::Config, "unknown task '" + s + "' (matching or interpolation)");
}

py::object json_loads(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Lean-image rendering, dataset generation and evaluation";

  static py::exception<Error> base(m, "LeanlocError", PyExc_RuntimeError);
  static py::exception<Error> config_error(m, "ConfigError", base.ptr());
  static py::exception<Error> parse_error(m, "ParseError", base.ptr());
  static py::exception<Error> integrity_error(m, "IntegrityError", base.ptr());
  static py::exception<Error> io_error(m, "IoError", base.ptr());
  static py::exception<Error> domain_error(m, "DomainError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::Config: py::set_error(config_error, e.what()); return;
        case ErrorKind::Parse: py::set_error(parse_error, e.what()); return;
        case ErrorKind::Integrity: py::set_error(integrity_error, e.what()); return;
        case ErrorKind::Io: py::set_error(io_error, e.what()); return;
        case ErrorKind::Domain: py::set_error(domain_error, e.what()); return;
      }
      py::set_error(base, e.what());
    }
  });

  py::class_<Pose>(m, "Pose")
      .def(py::init([](double x, double y, double yaw, double pitch, double z) { return make_pose(x, y, yaw, pitch, z); }),
           py::arg("x"), py::arg("y"), py::arg("yaw"), py::arg("pitch") = 0.0, py::arg("z") = kDefaultCameraHeight)
      .def_readwrite("x", &Pose::x)
      .def_readwrite("y", &Pose::y)
      .def_readwrite("z", &Pose::z)
      .def_readwrite("yaw", &Pose::yaw)
      .def_readwrite("pitch", &Pose::pitch)
      .def(py::self == py::self)
      .def("__repr__", [](const Pose& p) {
        return "Pose(x=" + std::to_string(p.x) + ", y=" + std::to_string(p.y) + ", z=" + std::to_string(p.z) +
               ", yaw=" + std::to_string(p.yaw) + ", pitch=" + std::to_string(p.pitch) + ")";
      });

  py::class_<Aoi>(m, "Aoi")
      .def(py::init([](double x0, double y0, double w, double h) {
             Aoi a{x0, y0, w, h};
             a.validate();
             return a;
           }),
           py::arg("x0"), py::arg("y0"), py::arg("width"), py::arg("height"))
      .def_readonly("x0", &Aoi::x0)
      .def_readonly("y0", &Aoi::y0)
      .def_readonly("width", &Aoi::width)
      .def_readonly("height", &Aoi::height)
      .def("contains", &Aoi::contains, py::arg("x"), py::arg("y"));

  py::class_<GridSpec>(m, "GridSpec")
      .def(py::init([](const Aoi& aoi, double step, double yaw_step, double pitch_min, double pitch_max,
                       double pitch_step, double z) {
             GridSpec g;
             g.aoi = aoi;
             g.step = step;
             g.yaw_step = yaw_step;
             g.pitch_min = pitch_min;
             g.pitch_max = pitch_max;
             g.pitch_step = pitch_step;
             g.z = z;
             g.validate();
             return g;
           }),
           py::arg("aoi"), py::arg("step") = 20.0, py::arg("yaw_step") = 5.0, py::arg("pitch_min") = 0.0,
           py::arg("pitch_max") = 15.0, py::arg("pitch_step") = 3.0, py::arg("z") = kDefaultCameraHeight)
      .def_readonly("aoi", &GridSpec::aoi)
      .def_readonly("step", &GridSpec::step)
      .def_readonly("yaw_step", &GridSpec::yaw_step)
      .def_readonly("pitch_min", &GridSpec::pitch_min)
      .def_readonly("pitch_max", &GridSpec::pitch_max)
      .def_readonly("pitch_step", &GridSpec::pitch_step)
      .def_readonly("z", &GridSpec::z)
      .def_property_readonly("x_lines", &GridSpec::x_lines)
      .def_property_readonly("y_lines", &GridSpec::y_lines)
      .def_property_readonly("yaw_count", &GridSpec::yaw_count)
      .def_property_readonly("pitch_lines", &GridSpec::pitch_lines)
      .def_property_readonly("training_count", &GridSpec::training_count)
      .def_property_readonly("midpoint_count", &GridSpec::midpoint_count)
      .def("grid_distance", [](const GridSpec& g, const Pose& a, const Pose& b) { return grid_distance(a, b, g); },
           py::arg("a"), py::arg("b"));

  py::class_<CameraIntrinsics>(m, "Camera")
      .def(py::init([](int w, int h, double hfov, double near, double far) {
             CameraIntrinsics c{w, h, hfov, near, far};
             c.validate();
             return c;
           }),
           py::arg("width") = 160, py::arg("height") = 120, py::arg("hfov_deg") = 60.0, py::arg("near") = 0.1,
           py::arg("far") = 2000.0)
      .def_readonly("width", &CameraIntrinsics::width)
      .def_readonly("height", &CameraIntrinsics::height)
      .def_readonly("hfov_deg", &CameraIntrinsics::hfov_deg)
      .def_readonly("near", &CameraIntrinsics::near)
      .def_readonly("far", &CameraIntrinsics::far)
      .def_property_readonly("focal_px", &CameraIntrinsics::focal_px);

  py::class_<SceneModel>(m, "Scene")
      .def_property_readonly("vertex_count", [](const SceneModel& s) { return s.vertices().size(); })
      .def_property_readonly("triangle_count", [](const SceneModel& s) { return s.triangles().size(); })
      .def_property_readonly("building_count", [](const SceneModel& s) { return s.footprints().size(); })
      .def_property_readonly("bounds",
                             [](const SceneModel& s) {
                               const Bounds2& b = s.bounds();
                               return py::make_tuple(b.min_x, b.min_y, b.max_x, b.max_y);
                             })
      .def("is_inside_building", [](const SceneModel& s, double x, double y) { return is_inside_building(s, Vec2(x, y)); },
           py::arg("x"), py::arg("y"))
      .def("to_obj", &format_mesh)
      .def("save", [](const SceneModel& s, const fs::path& p) { write_mesh(s, p); }, py::arg("path"));

  m.def(
      "synth_city",
      [](double extent_x, double extent_y, double block_size, double street_width, double min_height,
         double max_height, double jitter, std::uint64_t seed) {
        SynthCityConfig c{extent_x, extent_y, block_size, street_width, min_height, max_height, jitter, seed};
        return synth_city(c);
      },
      py::arg("extent_x") = 200.0, py::arg("extent_y") = 200.0, py::arg("block_size") = 40.0,
      py::arg("street_width") = 10.0, py::arg("min_height") = 8.0, py::arg("max_height") = 30.0,
      py::arg("jitter") = 0.2, py::arg("seed") = 7);
  m.def("load_mesh", [](const fs::path& p) { return load_mesh(p); }, py::arg("path"));
  m.def("parse_mesh", [](const std::string& text) { return parse_mesh(text); }, py::arg("text"));

  m.def("yaw_pitch_to_quat", [](double yaw, double pitch) { return quat_tuple(yaw_pitch_to_quat(yaw, pitch)); },
        py::arg("yaw"), py::arg("pitch"));
  m.def(
      "quat_to_yaw_pitch",
      [](double w, double x, double y, double z) {
        const YawPitch yp = quat_to_yaw_pitch(Quaternion{w, x, y, z});
        return py::make_tuple(yp.yaw, yp.pitch);
      },
      py::arg("w"), py::arg("x"), py::arg("y"), py::arg("z"));
  m.def(
      "pose_to_label",
      [](const Pose& p, const Aoi& aoi) {
        const PoseLabel l = pose_to_label(p, aoi);
        return py::make_tuple(l.x, l.y, l.q1, l.q2, l.q3, l.q4);
      },
      py::arg("pose"), py::arg("aoi"));
  m.def(
      "label_to_pose",
      [](const std::array<double, 6>& l, const Aoi& aoi, double height) {
        return label_to_pose(PoseLabel{l[0], l[1], l[2], l[3], l[4], l[5]}, aoi, height);
      },
      py::arg("label"), py::arg("aoi"), py::arg("height") = kDefaultCameraHeight);

  m.def(
      "render",
      [](const SceneModel& scene, const Pose& pose, const CameraIntrinsics& cam) {
        LeanTriplet t;
        {
          py::gil_scoped_release release;
          t = render_triplet(scene, pose, cam);
        }
        return triplet_dict(t);
      },
      py::arg("scene"), py::arg("pose"), py::arg("camera") = CameraIntrinsics{},
      "Edge, face and depth images of one pose as numpy arrays of shape (height, width).");
  m.def(
      "validity",
      [](const SceneModel& scene, const Pose& pose, const CameraIntrinsics& cam) {
        py::gil_scoped_release release;
        return std::string(to_string(check_validity(scene, pose, render_triplet(scene, pose, cam))));
      },
      py::arg("scene"), py::arg("pose"), py::arg("camera") = CameraIntrinsics{});

  m.def(
      "load_sample",
      [](const fs::path& manifest_path, std::int64_t id) {
        const Manifest manifest = read_manifest(manifest_path);
        const ManifestRecord* rec = manifest.find(id);
        if (!rec) fail(ErrorKind::Domain, "no record with id " + std::to_string(id));
        if (!rec->files) fail(ErrorKind::Domain, "record " + std::to_string(id) + " is invalid and has no images");
        const ManifestHeader& h = manifest.header;
        const LeanTriplet t = read_triplet_images(manifest_path.parent_path(), *rec, h.camera);
        const ChannelStack s = stack_channels(t, h.combo, h.camera.near, h.camera.far);
        py::array_t<float> arr({s.channels, s.height, s.width});
        std::copy(s.data.begin(), s.data.end(), arr.mutable_data());
        const PoseLabel& l = rec->sample.label;
        return py::make_tuple(arr, py::make_tuple(l.x, l.y, l.q1, l.q2, l.q3, l.q4));
      },
      py::arg("manifest"), py::arg("id"),
      "Stacked (C, H, W) float32 input for one valid record and its label.");

  m.def(
      "generate",
      [](const fs::path& config_path, std::optional<fs::path> out, int jobs, bool overwrite) {
        ExperimentConfig config = load_config(config_path);
        if (out) config.out_dir = fs::absolute(*out).lexically_normal();
        GenerateOptions options;
        options.jobs = jobs;
        options.overwrite = overwrite;
        GenerateSummary s;
        {
          py::gil_scoped_release release;
          s = generate_dataset(config, options);
        }
        return json_loads(format_summary(s));
      },
      py::arg("config"), py::arg("out") = py::none(), py::arg("jobs") = 1, py::arg("overwrite") = false,
      "Renders and writes a dataset; returns the summary as a dict.");
  m.def(
      "shuffle",
      [](const fs::path& manifest, std::uint64_t seed) { return shuffle_manifest(manifest, seed); },
      py::arg("manifest"), py::arg("seed"));
  m.def(
      "evaluate",
      [](const fs::path& manifest, const fs::path& predictions, const std::string& task,
         std::optional<fs::path> report, std::optional<fs::path> heatmap, std::optional<std::string> rule) {
        EvaluateOptions options;
        options.task = task_from_string(task);
        if (report) options.report = *report;
        options.heatmap = heatmap;
        if (rule) options.heatmap_rule = success_rule_from_string(*rule);
        return json_loads(format_report(evaluate(manifest, predictions, options)));
      },
      py::arg("manifest"), py::arg("predictions"), py::arg("task") = "matching", py::arg("report") = py::none(),
      py::arg("heatmap") = py::none(), py::arg("rule") = py::none(),
      "Scores a prediction file against its manifest; returns the report as a dict.");
}

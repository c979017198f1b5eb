#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mcinet/data.hpp"
#include "mcinet/figure.hpp"
#include "mcinet/gradcheck.hpp"
#include "mcinet/graph.hpp"
#include "mcinet/train.hpp"
#include "mcinet/zoo.hpp"

namespace py = pybind11;
using namespace mcinet;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    std::vector<std::size_t> shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<std::size_t>(i)] =
        static_cast<std::size_t>(a.shape(i));
    std::vector<double> values(a.data(), a.data() + a.size());
    return Tensor(std::move(shape), std::move(values));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> a(shape);
    std::copy(t.data(), t.data() + t.numel(), a.mutable_data());
    return a;
}

nn::LayerParams make_params(const py::array_t<double>& w, const std::vector<double>& b) {
    nn::LayerParams p;
    p.weights = tensor_from_array(w);
    p.bias = b;
    return p;
}

py::dict eval_report_dict(const train::EvalReport& r) {
    py::dict d;
    d["slice_accuracy"] = r.slice_accuracy;
    d["subject_accuracy"] = r.subject_accuracy;
    d["confusion_matrix"] = py::make_tuple(py::make_tuple(r.confusion[0][0], r.confusion[0][1]),
                                           py::make_tuple(r.confusion[1][0], r.confusion[1][1]));
    py::list subs;
    for (const auto& s : r.subjects) {
        py::dict sd;
        sd["subject_id"] = s.subject_id;
        sd["truth"] = data::label_name(s.truth);
        sd["predicted"] = data::label_name(s.predicted);
        sd["probability"] = s.probability;
        subs.append(sd);
    }
    d["subjects"] = subs;
    return d;
}

train::TrainConfig config_from_kwargs(double lr, double momentum, double weight_decay,
                                      std::size_t epochs, std::size_t batch_size, double fraction,
                                      bool reduced, std::uint64_t seed) {
    train::TrainConfig cfg;
    cfg.learning_rate = lr;
    cfg.momentum = momentum;
    cfg.weight_decay = weight_decay;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.split_fraction = fraction;
    cfg.reduced = reduced;
    cfg.seeds = {seed, seed + 1, seed + 2, seed + 3};
    return cfg;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "from-scratch CNN engine: tensor kernels, model zoo, training pipeline";

    // tensor kernels
    m.def(
        "gemm",
        [](const py::array_t<double>& a, const py::array_t<double>& b) {
            return array_from_tensor(gemm(tensor_from_array(a), tensor_from_array(b)));
        },
        py::arg("a"), py::arg("b"));
    m.def("conv_out_extent", &conv_out_extent, py::arg("in_extent"), py::arg("kernel"),
          py::arg("stride"), py::arg("pad"));
    m.def(
        "im2col",
        [](const py::array_t<double>& x, std::size_t kh, std::size_t kw, std::size_t stride,
           std::size_t pad) {
            return array_from_tensor(im2col(tensor_from_array(x), kh, kw, stride, pad));
        },
        py::arg("x"), py::arg("kh"), py::arg("kw"), py::arg("stride"), py::arg("pad"));
    m.def(
        "argmax", [](const std::vector<double>& v) { return argmax(v); }, py::arg("values"));
    m.def(
        "conv2d",
        [](const py::array_t<double>& x, const py::array_t<double>& w, const std::vector<double>& b,
           std::size_t stride, std::size_t pad) {
            return array_from_tensor(
                nn::conv2d(tensor_from_array(x), make_params(w, b), stride, pad));
        },
        py::arg("x"), py::arg("weights"), py::arg("bias"), py::arg("stride") = 1, py::arg("pad") = 0);
    m.def(
        "relu",
        [](const py::array_t<double>& x) { return array_from_tensor(nn::relu(tensor_from_array(x))); },
        py::arg("x"));
    m.def(
        "softmax",
        [](const py::array_t<double>& x) {
            return array_from_tensor(nn::softmax(tensor_from_array(x)));
        },
        py::arg("logits"));

    // model graphs
    py::class_<graph::ModelGraph>(m, "ModelGraph")
        .def_property_readonly("input_shape",
                               [](const graph::ModelGraph& g) { return g.input_shape(); })
        .def_property_readonly("class_count",
                               [](const graph::ModelGraph& g) { return g.class_count(); })
        .def("summary_json", [](const graph::ModelGraph& g) { return graph::summary_json(g); });

    m.def(
        "build",
        [](const std::string& arch, std::size_t class_count, std::uint64_t seed, bool reduced) {
            const auto id = zoo::arch_from_name(arch);
            if (reduced && id == zoo::ArchitectureId::alexnet)
                return zoo::build_alexnet_small(class_count, seed);
            return zoo::build(id, class_count, seed);
        },
        py::arg("arch"), py::arg("class_count") = 1000, py::arg("seed") = 1,
        py::arg("reduced") = false);
    m.def(
        "census",
        [](const graph::ModelGraph& g) {
            const auto c = graph::census(g);
            py::dict d;
            d["kind_counts"] = c.kind_counts;
            d["total_params"] = c.total_params;
            return d;
        },
        py::arg("graph"));
    m.def(
        "infer_shapes", [](const graph::ModelGraph& g) { return graph::infer_shapes(g); },
        py::arg("graph"));
    m.def(
        "forward",
        [](graph::ModelGraph& g, const py::array_t<double>& batch) {
            return array_from_tensor(graph::forward(g, tensor_from_array(batch), nn::Mode::eval));
        },
        py::arg("graph"), py::arg("batch"));
    m.def(
        "replace_head",
        [](graph::ModelGraph& g, std::size_t classes, std::uint64_t seed) {
            graph::replace_head(g, classes, seed);
        },
        py::arg("graph"), py::arg("class_count"), py::arg("seed") = 1);
    m.def(
        "freeze_through",
        [](graph::ModelGraph& g, const std::string& node_id) { graph::freeze_through(g, node_id); },
        py::arg("graph"), py::arg("node_id"));
    m.def(
        "last_conv_id", [](const graph::ModelGraph& g) { return zoo::last_conv_id(g); },
        py::arg("graph"));
    m.def(
        "save_weights",
        [](const graph::ModelGraph& g, const std::string& path) { graph::save_weights(g, path); },
        py::arg("graph"), py::arg("path"));
    m.def(
        "load_weights",
        [](graph::ModelGraph& g, const std::string& path) { graph::load_weights(g, path); },
        py::arg("graph"), py::arg("path"));

    // data pipeline
    m.def("synth_dataset",
          [](std::size_t n_per_class, std::uint64_t seed, const std::string& out_dir,
             std::size_t image_size) {
              data::synth_dataset(n_per_class, seed, out_dir, image_size);
              return (out_dir + "/manifest.csv");
          },
          py::arg("n_per_class"), py::arg("seed"), py::arg("out_dir"), py::arg("image_size") = 64);
    m.def(
        "decode_image",
        [](const std::string& path) { return array_from_tensor(data::decode_image(path)); },
        py::arg("path"));
    m.def("run_gradient_suite",
          [](std::size_t instances, std::uint64_t seed) {
              py::dict d;
              for (const auto& e : nn::run_gradient_suite(instances, seed)) d[e.layer.c_str()] = e.max_rel_err;
              return d;
          },
          py::arg("instances") = 20, py::arg("seed") = 7);

    // training pipeline
    m.def(
        "train_and_evaluate",
        [](const std::string& arch, const std::string& manifest_path, double lr, double momentum,
           double weight_decay, std::size_t epochs, std::size_t batch_size, double fraction,
           bool reduced, std::uint64_t seed) {
            const auto cfg = config_from_kwargs(lr, momentum, weight_decay, epochs, batch_size,
                                                fraction, reduced, seed);
            const auto manifest = data::load_manifest(manifest_path);
            const auto split = data::subject_split(manifest, cfg.split_fraction, cfg.seeds.split);
            auto tr = train::run_transfer(zoo::arch_from_name(arch), split.train, cfg);
            const auto report = train::evaluate(tr.model, split.test, tr.stats, cfg.batch_size);
            py::dict d = eval_report_dict(report);
            py::list losses;
            for (const auto& e : tr.history.epochs) losses.append(e.mean_loss);
            d["epoch_losses"] = losses;
            return d;
        },
        py::arg("arch"), py::arg("manifest"), py::arg("lr") = 0.01, py::arg("momentum") = 0.9,
        py::arg("weight_decay") = 5e-4, py::arg("epochs") = 5, py::arg("batch_size") = 16,
        py::arg("fraction") = 0.7, py::arg("reduced") = false, py::arg("seed") = 1);
}

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "sagc/cli.hpp"
#include "sagc/error.hpp"
#include "sagc/evaluation.hpp"
#include "sagc/features.hpp"
#include "sagc/graph.hpp"
#include "sagc/taxonomy.hpp"
#include "sagc/training.hpp"

namespace py = pybind11;
using namespace sagc;

namespace {

py::array_t<double> to_array(const Matrix& m) {
    py::array_t<double> out({m.rows, m.cols});
    std::copy(m.data.begin(), m.data.end(), out.mutable_data());
    return out;
}

Topology topology(std::size_t n, const std::vector<std::pair<int, int>>& edges) { return Topology(n, edges); }

SpaceAccessGraph graph_from(const std::string& text, bool require_labels) {
    ParseOptions opts;
    opts.require_labels = require_labels;
    return parse_graph_text(text, opts);
}

py::dict featurized_dict(const FeaturizedGraph& f) {
    py::dict d;
    d["name"] = f.name;
    d["node_ids"] = f.node_ids;
    d["labels"] = f.labels;
    d["edge_index"] = f.edge_index;
    d["node_features"] = to_array(f.node_features);
    d["edge_features"] = to_array(f.edge_features);
    return d;
}

}  // namespace

PYBIND11_MODULE(_sagc, m) {
    m.doc() = "Space access graph featurization and node classification";

    py::object error_type = py::exception<Error>(m, "SagcError");
    static PyObject* error_ptr = error_type.inc_ref().ptr();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::reinterpret_borrow<py::object>(error_ptr)(e.what());
            exc.attr("kind") = std::string(to_string(e.kind()));
            PyErr_SetObject(error_ptr, exc.ptr());
        }
    });

    m.attr("NUM_CLASSES") = kNumClasses;
    m.attr("NODE_FEATURE_DIM") = kNodeFeatureDim;
    m.attr("EDGE_FEATURE_DIM") = kEdgeFeatureDim;

    m.def("class_names", [] {
        std::vector<std::string> out;
        for (const auto& l : all_labels()) out.emplace_back(l.name);
        return out;
    });

    m.def("node_degree", [](std::size_t n, const std::vector<std::pair<int, int>>& e) { return node_degree(topology(n, e)); },
          py::arg("n"), py::arg("edges"));
    m.def("degree_centrality",
          [](std::size_t n, const std::vector<std::pair<int, int>>& e) { return degree_centrality(topology(n, e)); },
          py::arg("n"), py::arg("edges"));
    m.def("betweenness_centrality",
          [](std::size_t n, const std::vector<std::pair<int, int>>& e) { return betweenness_centrality(topology(n, e)); },
          py::arg("n"), py::arg("edges"));
    m.def("closeness_centrality",
          [](std::size_t n, const std::vector<std::pair<int, int>>& e) { return closeness_centrality(topology(n, e)); },
          py::arg("n"), py::arg("edges"));
    m.def("clustering_coefficient",
          [](std::size_t n, const std::vector<std::pair<int, int>>& e) { return clustering_coefficient(topology(n, e)); },
          py::arg("n"), py::arg("edges"));
    m.def("edge_betweenness",
          [](std::size_t n, const std::vector<std::pair<int, int>>& e) { return edge_betweenness(topology(n, e)); },
          py::arg("n"), py::arg("edges"));
    m.def(
        "pagerank",
        [](std::size_t n, const std::vector<std::pair<int, int>>& e, double damping, double tol, int max_iter) {
            return pagerank(topology(n, e), PageRankOptions{damping, tol, max_iter});
        },
        py::arg("n"), py::arg("edges"), py::arg("damping") = 0.85, py::arg("tol") = 1e-9, py::arg("max_iter") = 200);

    m.def("synth_graph", [](std::uint64_t seed, int n_spaces) { return to_json(synth_fixture(seed, n_spaces)).dump(); },
          py::arg("seed"), py::arg("n_spaces"), "Synthetic labelled graph as a JSON document string.");

    m.def(
        "validate",
        [](const std::string& text) {
            const auto report = validate_graph(graph_from(text, false));
            std::vector<py::dict> out;
            for (const auto& f : report.findings) {
                py::dict d;
                d["kind"] = std::string(to_string(f.kind));
                d["subject"] = f.subject;
                d["message"] = f.message;
                out.push_back(d);
            }
            return out;
        },
        py::arg("graph_json"));

    m.def(
        "featurize", [](const std::string& text) { return featurized_dict(featurize(graph_from(text, false))); },
        py::arg("graph_json"));

    m.def(
        "run_cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "sagc");
            std::vector<const char*> argv;
            for (const auto& a : args) argv.push_back(a.c_str());
            std::ostringstream out, err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command line tool; returns (exit_code, stdout, stderr).");

    py::class_<Checkpoint>(m, "Checkpoint")
        .def_static("load", [](const std::string& path) { return load_checkpoint(path); }, py::arg("path"))
        .def_property_readonly("best_loss", [](const Checkpoint& c) { return c.best_loss; })
        .def_property_readonly("best_epoch", [](const Checkpoint& c) { return c.best_epoch; })
        .def_property_readonly("train_graphs", [](const Checkpoint& c) { return c.train_graphs; })
        .def_property_readonly("penultimate_width",
                               [](const Checkpoint& c) { return c.model_config.penultimate_width(); })
        .def(
            "predict",
            [](const Checkpoint& c, const std::string& text) {
                const auto f = featurize(graph_from(text, false));
                const auto p = predict(c, f);
                py::dict d;
                d["node_ids"] = f.node_ids;
                d["predicted"] = p.predicted;
                d["probabilities"] = to_array(p.probabilities);
                d["embeddings"] = to_array(p.penultimate);
                return d;
            },
            py::arg("graph_json"));
}

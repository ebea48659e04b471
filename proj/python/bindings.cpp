// JSON-valued results cross the boundary as strings; the Python side parses them.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "mobforge/error.hpp"
#include "mobforge/eval.hpp"
#include "mobforge/ingest.hpp"
#include "mobforge/jsd.hpp"
#include "mobforge/pipeline.hpp"
#include "mobforge/prompts.hpp"

namespace py = pybind11;
using namespace mobforge;

namespace {

TemplateId template_or_throw(const std::string& name) {
    if (auto id = parse_template_id(name)) return *id;
    throw py::value_error("unknown template " + name);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    // Never freed; the translator may run during interpreter teardown.
    static py::handle error_type = py::exception<Error>(m, "Error", PyExc_RuntimeError).release();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object ex = py::reinterpret_borrow<py::object>(error_type)(e.what());
            ex.attr("code") = std::string(error_code_name(e.code()));
            ex.attr("detail") = e.detail();
            PyErr_SetObject(error_type.ptr(), ex.ptr());
        }
    });

    m.def("jsd", [](const std::vector<double>& p, const std::vector<double>& q) { return jsd(p, q); },
          py::arg("p"), py::arg("q"));

    m.def("template_names", [] {
        std::vector<std::string> out;
        for (auto id : kAllTemplates) out.emplace_back(template_name(id));
        return out;
    });
    m.def("template_body", [](const std::string& name) { return std::string(prompt_template(template_or_throw(name)).body); });
    m.def("render_prompt", [](const std::string& name, const std::vector<std::string>& slots) {
        return render_prompt(template_or_throw(name), slots);
    });

    py::class_<RunConfig>(m, "RunConfig")
        .def_readonly("run_seed", &RunConfig::run_seed)
        .def_readonly("workers", &RunConfig::workers)
        .def_readonly("out_dir", &RunConfig::out_dir)
        .def("output", &RunConfig::output)
        .def("hash", [](const RunConfig& c) { return config_hash(c); })
        .def("effective_json", [](const RunConfig& c) { return effective_config(c).dump(); });

    m.def(
        "load_config",
        [](const std::string& path, std::optional<std::uint64_t> seed, std::optional<std::string> backend,
           std::optional<int> workers, std::optional<std::string> out_dir) {
            auto c = load_run_config(path);
            apply_overrides(c, Overrides{seed, backend, workers, out_dir});
            return c;
        },
        py::arg("path"), py::kw_only(), py::arg("seed") = py::none(), py::arg("backend") = py::none(),
        py::arg("workers") = py::none(), py::arg("out_dir") = py::none());

    m.def("subcommand_names", &subcommand_names);
    m.def(
        "run_json",
        [](const std::string& name, const RunConfig& c) {
            py::gil_scoped_release unlocked;
            return run_subcommand(name, c).dump();
        },
        py::arg("subcommand"), py::arg("config"));

    m.def(
        "evaluate_json",
        [](const std::string& real_dir, const std::string& generated_dir, const std::string& day_filter,
           int workers) {
            const auto filter = parse_day_filter(day_filter);
            if (!filter) throw py::value_error("unknown day filter " + day_filter);
            py::gil_scoped_release unlocked;
            const auto real = load_dataset(real_dir);
            const auto gen = load_dataset(generated_dir);
            return report_to_json(evaluate(real, gen, Binning{}, *filter, workers)).dump();
        },
        py::arg("real_dir"), py::arg("generated_dir"), py::arg("day_filter") = "all", py::arg("workers") = 1);

    m.def("dataset_summary_json", [](const std::string& dir) {
        const auto d = load_dataset(dir);
        std::size_t points = 0;
        for (const auto& diary : d.diaries) points += diary.points.size();
        return nlohmann::json{{"profiles", d.profiles.size()},
                              {"diaries", d.diaries.size()},
                              {"person_days", d.person_day_count()},
                              {"points", points}}
            .dump();
    });
}

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "capeval/digest.hpp"
#include "capeval/error.hpp"
#include "capeval/metrics.hpp"
#include "capeval/mock_backend.hpp"
#include "capeval/parsing.hpp"
#include "capeval/prompts.hpp"
#include "capeval/run.hpp"
#include "capeval/stats.hpp"

namespace py = pybind11;
using namespace capeval;

namespace {

// Structured results cross the boundary as plain dicts and lists.
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::object& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

std::vector<TokenizedCaption> tokenize_all(const std::vector<std::string>& texts) {
  std::vector<TokenizedCaption> out;
  for (const auto& t : texts) out.push_back(tokenize(t));
  return out;
}

py::object score_to_py(const ScoreParse& r) {
  if (const auto* s = std::get_if<EvalScore>(&r)) {
    json j = *s;
    j["ok"] = true;
    return to_py(j);
  }
  json j = std::get<ParseFailure>(r);
  j["ok"] = false;
  return to_py(j);
}

}  // namespace

PYBIND11_MODULE(_capeval, m) {
  m.doc() = "Core of the capeval caption evaluation toolkit";

  // Lives for the interpreter's lifetime, like the module itself.
  static PyObject* error_type = PyErr_NewException("capeval._capeval.CapevalError", PyExc_RuntimeError, nullptr);
  m.add_object("CapevalError", py::reinterpret_borrow<py::object>(error_type));
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(error_type, exc.ptr());
    }
  });

  const auto prompt = [](const RenderedPrompt& p) { return to_py(json(p)); };
  m.def("render_vanilla", [prompt](const std::string& caption) { return prompt(render_vanilla(caption)); },
        py::arg("caption"));
  m.def(
      "render_reference",
      [prompt](const std::string& caption, const std::vector<std::string>& references) {
        return prompt(render_reference(caption, ReferenceSet{"", references}));
      },
      py::arg("caption"), py::arg("references"));
  m.def("render_description_step1", [prompt] { return prompt(render_description_step1()); });
  m.def("render_visce_step1", [prompt] { return prompt(render_visce_step1()); });
  m.def(
      "render_step2",
      [prompt](const std::string& caption, const std::string& context) { return prompt(render_step2(caption, context)); },
      py::arg("caption"), py::arg("context"));

  m.def("parse_score", [](const std::string& raw) { return score_to_py(parse_score(raw)); }, py::arg("raw"));
  m.def("parse_visual_context", [](const std::string& raw) { return to_py(json(parse_visual_context(raw))); },
        py::arg("raw"));

  m.def("tokenize", [](const std::string& text) { return tokenize(text).tokens; }, py::arg("text"));
  m.def(
      "bleu4",
      [](const std::string& c, const std::vector<std::string>& refs) { return bleu4(tokenize(c), tokenize_all(refs)); },
      py::arg("candidate"), py::arg("references"));
  m.def(
      "rouge_l",
      [](const std::string& c, const std::vector<std::string>& refs) { return rouge_l(tokenize(c), tokenize_all(refs)); },
      py::arg("candidate"), py::arg("references"));
  m.def(
      "cider_d",
      [](const std::vector<std::string>& candidates, const std::vector<std::vector<std::string>>& refs_per_candidate,
         const std::optional<std::vector<std::vector<std::string>>>& corpus) {
        std::vector<std::vector<TokenizedCaption>> refs;
        for (const auto& r : refs_per_candidate) refs.push_back(tokenize_all(r));
        std::vector<std::vector<TokenizedCaption>> docs;
        if (corpus) {
          for (const auto& r : *corpus) docs.push_back(tokenize_all(r));
        } else {
          docs = refs;
        }
        return cider_d(tokenize_all(candidates), refs, CorpusIdf::build(docs));
      },
      py::arg("candidates"), py::arg("references"), py::arg("corpus") = py::none(),
      "Reference sets of the corpus images give the idf; defaults to the candidates' own sets.");

  m.def(
      "pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); }, py::arg("x"),
      py::arg("y"));
  m.def(
      "kendall_tau",
      [](const std::vector<double>& x, const std::vector<double>& y, const std::string& variant) {
        return kendall_tau(x, y, tau_variant_from_string(variant));
      },
      py::arg("x"), py::arg("y"), py::arg("variant") = "b");
  m.def(
      "pascal_accuracy",
      [](const std::vector<std::tuple<std::string, std::string, double, double>>& pairs, double tie_credit) {
        std::vector<ScoredPair> sp;
        for (const auto& [cat, pref, a, b] : pairs) {
          sp.push_back({pair_category_from_string(cat), side_from_string(pref), a, b});
        }
        return to_py(json(pascal_accuracy(sp, tie_credit)));
      },
      py::arg("pairs"), py::arg("tie_credit") = 0.0, "pairs: (category, preferred 'A'|'B', score_a, score_b)");
  m.def(
      "heatmap",
      [](const std::vector<double>& human, const std::vector<double>& automatic, int bins) {
        return to_py(json(heatmap(human, automatic, bins)));
      },
      py::arg("human"), py::arg("automatic"), py::arg("bins") = 10);

  m.def("digest_bytes", [](const py::bytes& b) { return digest_bytes(std::string_view(b)); }, py::arg("data"));

  m.def(
      "load_dataset",
      [](const std::string& kind, const std::string& path) {
        const auto ds = load(dataset_kind_from_string(kind), path);
        json items = json::array();
        for (const auto& it : ds.items) items.push_back(it);
        return to_py(json{{"manifest", ds.manifest}, {"items", items}});
      },
      py::arg("kind"), py::arg("path"));

  m.def(
      "run_pipeline",
      [](const py::dict& config, const std::string& mock_script) {
        RunConfig cfg = from_py(config).get<RunConfig>();
        std::shared_ptr<Backend> backend;
        if (mock_script.empty()) {
          backend = std::make_shared<HttpBackend>();
        } else {
          backend = mock_from_file(mock_script);
        }
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(cfg, backend);
        }
        json records = json::array(), reports = json::array();
        for (const auto& x : r.records) records.push_back(x);
        for (const auto& x : r.reports) reports.push_back(x);
        return to_py(json{{"manifest", r.manifest},
                          {"records", records},
                          {"reports", reports},
                          {"counters", r.counters},
                          {"warnings", r.warnings}});
      },
      py::arg("config"), py::arg("mock_script") = "",
      "Runs the full pipeline. config uses the run-config JSON fields; mock_script answers from a script file.");
}

#include "qfield/model_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace qfield {

namespace {

using nlohmann::json;

void expect_keys(const json& j, const std::vector<std::string>& allowed,
                 const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw std::invalid_argument(where + ": unknown key \"" + key + "\"");
  }
}

json innovation_to_json(const InnovationSpec& innov) {
  json j;
  switch (innov.kind) {
    case InnovationKind::kRademacher:
      j["kind"] = "rademacher";
      break;
    case InnovationKind::kFinitePmf:
      j["kind"] = "finite_pmf";
      j["values"] = innov.values;
      j["probs"] = innov.probs;
      break;
    case InnovationKind::kGaussian:
      j["kind"] = "gaussian";
      j["var"] = innov.var;
      break;
  }
  return j;
}

InnovationSpec innovation_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "rademacher") {
    expect_keys(j, {"kind"}, "innovation");
    return InnovationSpec::rademacher();
  }
  if (kind == "finite_pmf") {
    expect_keys(j, {"kind", "values", "probs"}, "innovation");
    return InnovationSpec::finite_pmf(j.at("values").get<std::vector<double>>(),
                                     j.at("probs").get<std::vector<double>>());
  }
  if (kind == "gaussian") {
    expect_keys(j, {"kind", "var"}, "innovation");
    return InnovationSpec::gaussian(j.at("var").get<double>());
  }
  throw std::invalid_argument("innovation: unknown kind \"" + kind + "\"");
}

json variant_to_json(const FieldModel& model);

json model_to_json_obj(const FieldModel& model) {
  json j;
  j["dim"] = model.dim;
  j["innovation"] = innovation_to_json(model.innovation);
  j["variant"] = variant_to_json(model);
  return j;
}

FieldModel model_from_json_obj(const json& j);

json variant_to_json(const FieldModel& model) {
  json j;
  if (std::holds_alternative<IidSpec>(model.variant)) {
    j["type"] = "iid";
  } else if (const auto* lin = std::get_if<LinearSpec>(&model.variant)) {
    j["type"] = "linear";
    json terms = json::array();
    for (const auto& [off, a] : lin->kernel.coeffs)
      terms.push_back({{"offset", off}, {"value", a}});
    j["kernel"] = terms;
  } else if (const auto* vol = std::get_if<VolterraSpec>(&model.variant)) {
    j["type"] = "volterra";
    json terms = json::array();
    for (const auto& [uv, a] : vol->coeffs.coeffs)
      terms.push_back({{"u", uv.first}, {"v", uv.second}, {"value", a}});
    j["coeffs"] = terms;
  } else if (const auto* po = std::get_if<ProductOmdSpec>(&model.variant)) {
    j["type"] = "product_omd";
    j["u_low"] = po->u_low;
    j["u_high"] = po->u_high;
  } else if (const auto* uf = std::get_if<UFieldSpec>(&model.variant)) {
    j["type"] = "u_field";
    j["n_max"] = uf->n_max;
  } else if (const auto* cb = std::get_if<CoboundarySpec>(&model.variant)) {
    j["type"] = "coboundary";
    j["m"] = cb->m ? model_to_json_obj(*cb->m) : json(nullptr);
    j["m_prime"] = cb->m_prime ? model_to_json_obj(*cb->m_prime) : json(nullptr);
    j["m_dprime"] = cb->m_dprime ? model_to_json_obj(*cb->m_dprime) : json(nullptr);
    j["y"] = cb->y ? model_to_json_obj(*cb->y) : json(nullptr);
  }
  return j;
}

ModelVariant variant_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "iid") {
    expect_keys(j, {"type"}, "variant");
    return IidSpec{};
  }
  if (type == "linear") {
    expect_keys(j, {"type", "kernel"}, "variant");
    LinearSpec lin;
    for (const auto& term : j.at("kernel")) {
      expect_keys(term, {"offset", "value"}, "kernel term");
      lin.kernel.coeffs[term.at("offset").get<IndexVec>()] += term.at("value").get<double>();
    }
    return lin;
  }
  if (type == "volterra") {
    expect_keys(j, {"type", "coeffs"}, "variant");
    VolterraSpec vol;
    for (const auto& term : j.at("coeffs")) {
      expect_keys(term, {"u", "v", "value"}, "volterra term");
      vol.coeffs.coeffs[{term.at("u").get<IndexVec>(), term.at("v").get<IndexVec>()}] +=
          term.at("value").get<double>();
    }
    return vol;
  }
  if (type == "product_omd") {
    expect_keys(j, {"type", "u_low", "u_high"}, "variant");
    ProductOmdSpec po;
    if (j.contains("u_low")) po.u_low = j.at("u_low").get<double>();
    if (j.contains("u_high")) po.u_high = j.at("u_high").get<double>();
    return po;
  }
  if (type == "u_field") {
    expect_keys(j, {"type", "n_max"}, "variant");
    UFieldSpec uf;
    if (j.contains("n_max")) uf.n_max = j.at("n_max").get<long long>();
    return uf;
  }
  if (type == "coboundary") {
    expect_keys(j, {"type", "m", "m_prime", "m_dprime", "y"}, "variant");
    CoboundarySpec cb;
    auto part = [&](const char* key) -> std::shared_ptr<const FieldModel> {
      if (!j.contains(key) || j.at(key).is_null()) return nullptr;
      return std::make_shared<const FieldModel>(model_from_json_obj(j.at(key)));
    };
    cb.m = part("m");
    cb.m_prime = part("m_prime");
    cb.m_dprime = part("m_dprime");
    cb.y = part("y");
    return cb;
  }
  throw std::invalid_argument("variant: unknown type \"" + type + "\"");
}

FieldModel model_from_json_obj(const json& j) {
  expect_keys(j, {"dim", "innovation", "variant"}, "model");
  FieldModel model;
  model.dim = j.at("dim").get<std::size_t>();
  model.innovation = innovation_from_json(j.at("innovation"));
  model.variant = variant_from_json(j.at("variant"));
  model.validate();
  return model;
}

}  // namespace

std::string model_to_json(const FieldModel& model) { return model_to_json_obj(model).dump(2); }

FieldModel model_from_json(const std::string& text) {
  return model_from_json_obj(json::parse(text));
}

FieldModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("model file not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

void save_model(const FieldModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << model_to_json(model) << '\n';
}

}  // namespace qfield

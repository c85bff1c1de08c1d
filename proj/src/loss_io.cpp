#include "ibsrisk/loss_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "ibsrisk/error.hpp"

namespace ibsrisk {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

json bound_to_json(double v) { return std::isinf(v) ? json("inf") : json(v); }

double bound_from_json(const json& j, const char* what) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return kInf;
    throw DomainError(std::string("loss file: ") + what + " must be a number or \"inf\"");
  }
  if (!j.is_number()) throw DomainError(std::string("loss file: ") + what + " must be a number");
  return j.get<double>();
}

double number(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) throw DomainError(std::string("loss: parameter ") + key + " must be a number");
  return v.get<double>();
}

std::optional<double> opt_number(const json& obj, const char* key) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  if (!obj.at(key).is_number()) throw DomainError(std::string("loss file: ") + key + " must be a number");
  return obj.at(key).get<double>();
}

LossSpec builtin(const std::string& kind, const json& params) {
  if (kind == "mse") return LossSpec::mse();
  if (kind == "mae") return LossSpec::mae();
  if (kind == "constant-one") return LossSpec::constant(1.0);
  if (kind == "constant") return LossSpec::constant(number(params, "c", 1.0));
  if (kind == "interval") {
    return LossSpec::interval_confidence(number(params, "mu1", 2.0), number(params, "mu2", 2.0));
  }
  if (kind == "generalized_interval") {
    return LossSpec::generalized_interval(number(params, "A1", 1.0), number(params, "A2", 1.0),
                                          number(params, "mu1", 2.0), number(params, "mu2", 2.0));
  }
  throw DomainError("unknown loss kind '" + kind + "'");
}

}  // namespace

json loss_to_json(const LossSpec& loss) {
  if (!loss.is_piecewise_power()) throw DomainError("callback losses have no file representation");
  json j;
  j["kind"] = loss.kind();
  json params = json::object();
  for (const auto& [k, v] : loss.params()) params[k] = v;
  j["params"] = params;
  json segs = json::array();
  for (const auto& s : loss.segments()) {
    json terms = json::array();
    for (const auto& t : s.terms) terms.push_back({{"coef", t.coef}, {"power", t.power}});
    segs.push_back({{"lo", bound_to_json(s.lo)}, {"hi", bound_to_json(s.hi)}, {"terms", terms}});
  }
  j["segments"] = segs;
  j["K"] = loss.K();
  j["K_prime"] = loss.K_prime();
  if (loss.xi()) j["xi"] = *loss.xi();
  if (loss.xi_prime()) j["xi_prime"] = *loss.xi_prime();
  return j;
}

LossSpec loss_from_json(const json& j) {
  if (!j.is_object()) throw DomainError("loss file: top level must be an object");
  const std::string kind = j.value("kind", std::string("piecewise_power"));
  const json params = j.contains("params") ? j.at("params") : json::object();
  if (!params.is_object()) throw DomainError("loss file: params must be an object");
  if (kind != "piecewise_power") return builtin(kind, params);

  if (!j.contains("segments") || !j.at("segments").is_array()) {
    throw DomainError("loss file: piecewise_power needs a segments array");
  }
  std::vector<Segment> segs;
  for (const auto& js : j.at("segments")) {
    if (!js.is_object() || !js.contains("lo") || !js.contains("hi")) {
      throw DomainError("loss file: each segment needs lo and hi");
    }
    Segment s;
    s.lo = bound_from_json(js.at("lo"), "lo");
    s.hi = bound_from_json(js.at("hi"), "hi");
    if (js.contains("terms")) {
      if (!js.at("terms").is_array()) throw DomainError("loss file: terms must be an array");
      for (const auto& jt : js.at("terms")) {
        if (!jt.is_object() || !jt.contains("coef") || !jt.contains("power") ||
            !jt.at("coef").is_number() || !jt.at("power").is_number()) {
          throw DomainError("loss file: each term needs numeric coef and power");
        }
        s.terms.push_back({jt.at("coef").get<double>(), jt.at("power").get<double>()});
      }
    }
    segs.push_back(std::move(s));
  }
  LossSpec::Metadata meta;
  meta.K = opt_number(j, "K");
  meta.K_prime = opt_number(j, "K_prime");
  meta.xi = opt_number(j, "xi");
  meta.xi_prime = opt_number(j, "xi_prime");
  return LossSpec::piecewise_power(std::move(segs), meta);
}

LossSpec resolve_loss(const std::string& arg, const json& params) {
  const auto first = arg.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && arg[first] == '{') {
    json j;
    try {
      j = json::parse(arg);
    } catch (const json::parse_error& e) {
      throw DomainError(std::string("inline loss JSON: ") + e.what());
    }
    return loss_from_json(j);
  }
  for (const char* name : {"mse", "mae", "constant-one", "constant", "interval", "generalized_interval"}) {
    if (arg == name) return builtin(arg, params);
  }
  std::ifstream in(arg);
  if (!in) throw DomainError("loss '" + arg + "' is neither a built-in name nor a readable file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DomainError("loss file " + arg + ": " + e.what());
  }
  return loss_from_json(j);
}

}  // namespace ibsrisk

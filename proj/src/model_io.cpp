#include "lyapds/model_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "lyapds/errors.hpp"
#include "lyapds/random.hpp"

namespace lyapds {

namespace {

using Json = nlohmann::ordered_json;

Json vector_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from(const Json& j, const char* what) {
  if (!j.is_array()) throw DataError(std::string("model file: '") + what + "' must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Json mlp_json(const Mlp& net) {
  Json j;
  j["input_dim"] = net.spec.input_dim;
  j["hidden"] = net.spec.hidden;
  j["output_dim"] = net.spec.output_dim;
  j["head"] = to_string(net.spec.head);
  Json segments = Json::array();
  const auto& values = net.params.values();
  for (const auto& seg : net.params.layout()) {
    Json s;
    s["name"] = seg.name;
    s["rows"] = seg.rows;
    s["cols"] = seg.cols;
    s["values"] = std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(seg.offset),
                                      values.begin() + static_cast<std::ptrdiff_t>(seg.offset + seg.size()));
    segments.push_back(s);
  }
  j["segments"] = segments;
  return j;
}

Mlp mlp_from(const Json& j, const std::string& name) {
  Mlp net;
  net.spec.input_dim = j.at("input_dim").get<int>();
  net.spec.hidden = j.at("hidden").get<std::vector<int>>();
  net.spec.output_dim = j.at("output_dim").get<int>();
  net.spec.head = parse_output_head(j.at("head").get<std::string>());
  net.spec.validate();
  net.params = net.spec.make_layout();

  const Json& segments = j.at("segments");
  const auto& layout = net.params.layout();
  if (!segments.is_array() || segments.size() != layout.size()) {
    throw DataError("model file: network '" + name + "' has the wrong number of parameter segments");
  }
  auto& values = net.params.values();
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const Json& s = segments[i];
    const auto& seg = layout[i];
    if (s.at("name").get<std::string>() != seg.name || s.at("rows").get<Eigen::Index>() != seg.rows ||
        s.at("cols").get<Eigen::Index>() != seg.cols) {
      throw DataError("model file: segment " + std::to_string(i) + " of '" + name +
                      "' does not match the declared architecture");
    }
    const auto v = s.at("values").get<std::vector<double>>();
    if (v.size() != seg.size()) {
      throw DataError("model file: segment '" + seg.name + "' of '" + name + "' has " + std::to_string(v.size()) +
                      " values, expected " + std::to_string(seg.size()));
    }
    std::copy(v.begin(), v.end(), values.begin() + static_cast<std::ptrdiff_t>(seg.offset));
  }
  return net;
}

}  // namespace

std::string model_to_json(const StableDsModel& model) {
  Json j;
  j["format_version"] = kModelFormatVersion;
  j["kind"] = to_string(model.kind);
  j["dim"] = model.dim;

  Json nets;
  nets["g"] = mlp_json(model.nets.g);
  nets["f"] = mlp_json(model.nets.f);
  nets["alpha"] = mlp_json(model.nets.alpha);
  nets["beta"] = mlp_json(model.nets.beta);
  j["networks"] = nets;

  const ModelConstants& c = model.constants;
  j["constants"] = {{"delta", c.delta},   {"sigma_contraction", c.sigma_contraction},
                    {"xi", c.xi},         {"eps_grad", c.eps_grad},
                    {"eps_s", c.eps_s},   {"fd_step", c.fd_step}};
  j["normalization"] = {{"scale", vector_json(model.normalization.scale)},
                        {"offset", vector_json(model.normalization.offset)}};

  Json cfg;
  for (const auto& [k, v] : model.config.entries()) cfg[k] = v;
  j["train_config"] = cfg;
  j["rng"] = {{"algorithm", Rng::kAlgorithm}, {"seed", model.config.seed}};
  return j.dump(1) + "\n";
}

StableDsModel model_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (!j.contains("format_version") || !j["format_version"].is_number_integer()) {
      throw DataError("model file has no integer format_version");
    }
    const int version = j["format_version"].get<int>();
    if (version != kModelFormatVersion) {
      throw DataError("unsupported model format_version " + std::to_string(version) + " (this build reads " +
                      std::to_string(kModelFormatVersion) + ")");
    }
    const std::string algorithm = j.at("rng").at("algorithm").get<std::string>();
    if (algorithm != Rng::kAlgorithm) throw DataError("model file names unknown RNG '" + algorithm + "'");

    StableDsModel m;
    m.kind = parse_model_kind(j.at("kind").get<std::string>());
    m.dim = j.at("dim").get<int>();

    const Json& nets = j.at("networks");
    m.nets.g = mlp_from(nets.at("g"), "g");
    m.nets.f = mlp_from(nets.at("f"), "f");
    m.nets.alpha = mlp_from(nets.at("alpha"), "alpha");
    m.nets.beta = mlp_from(nets.at("beta"), "beta");

    const Json& c = j.at("constants");
    m.constants.delta = c.at("delta").get<double>();
    m.constants.sigma_contraction = c.at("sigma_contraction").get<double>();
    m.constants.xi = c.at("xi").get<double>();
    m.constants.eps_grad = c.at("eps_grad").get<double>();
    m.constants.eps_s = c.at("eps_s").get<double>();
    m.constants.fd_step = c.at("fd_step").get<double>();

    m.normalization.scale = vector_from(j.at("normalization").at("scale"), "scale");
    m.normalization.offset = vector_from(j.at("normalization").at("offset"), "offset");

    TrainConfig cfg;
    for (const auto& [k, v] : j.at("train_config").items()) cfg.set(k, v.get<std::string>());
    m.config = cfg;
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("invalid model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const StableDsModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file " + path.string());
  out << model_to_json(model);
  if (!out) throw DataError("failed writing model file " + path.string());
}

StableDsModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace lyapds

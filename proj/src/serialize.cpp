#include "circe/serialize.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace circe {

namespace {

using Json = nlohmann::json;

constexpr int kCmeVersion = 1;
constexpr int kMlpVersion = 1;

Json matrix_json(const Matrix& m) {
  Json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data(m.data(), m.data() + m.size());
  j["data"] = std::move(data);  // column-major
  return j;
}

Matrix json_matrix(const Json& j) {
  const auto rows = j.at("rows").get<Index>();
  const auto cols = j.at("cols").get<Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols) {
    throw ConfigError("matrix blob has inconsistent shape");
  }
  return Eigen::Map<const Matrix>(data.data(), rows, cols);
}

Json params_json(const KernelParams& p) { return {{"family", "gaussian"}, {"sigma2", p.sigma2}}; }

KernelParams json_params(const Json& j) {
  if (j.at("family").get<std::string>() != "gaussian") throw ConfigError("unsupported kernel family");
  KernelParams p = KernelParams::gaussian(j.at("sigma2").get<double>());
  if (!(p.sigma2 > 0.0)) throw ConfigError("kernel bandwidth must be positive");
  return p;
}

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed model blob: ") + e.what());
  }
}

void check_header(const Json& j, const char* format, int version) {
  if (j.at("format").get<std::string>() != format) throw ConfigError(std::string("expected a ") + format + " blob");
  if (j.at("version").get<int>() != version) throw ConfigError(std::string("unsupported ") + format + " version");
}

}  // namespace

std::string save_cme(const CmeModel& model) {
  Json j;
  j["format"] = "circe.cme";
  j["version"] = kCmeVersion;
  j["lambda"] = model.lambda;
  j["y_params"] = params_json(model.y_params);
  j["z_params"] = params_json(model.z_params);
  j["holdout_y"] = matrix_json(model.holdout_y);
  j["holdout_z"] = matrix_json(model.holdout_z);
  j["w1"] = matrix_json(model.w1);
  j["w2"] = matrix_json(model.w2);
  return j.dump();
}

CmeModel load_cme(const std::string& text) {
  return guarded([&] {
    const Json j = Json::parse(text);
    check_header(j, "circe.cme", kCmeVersion);
    CmeModel m;
    m.lambda = j.at("lambda").get<double>();
    m.y_params = json_params(j.at("y_params"));
    m.z_params = json_params(j.at("z_params"));
    m.holdout_y = json_matrix(j.at("holdout_y"));
    m.holdout_z = json_matrix(j.at("holdout_z"));
    m.w1 = json_matrix(j.at("w1"));
    m.w2 = json_matrix(j.at("w2"));
    const Index n = m.holdout_y.rows();
    if (m.holdout_z.rows() != n || m.w1.rows() != n || m.w1.cols() != n || m.w2.rows() != n || m.w2.cols() != n) {
      throw ConfigError("cme blob: inconsistent holdout size");
    }
    return m;
  });
}

std::string save_mlp(const MlpModel& model) {
  Json j;
  j["format"] = "circe.mlp";
  j["version"] = kMlpVersion;
  j["widths"] = model.widths;
  j["slope"] = model.slope;
  j["seed"] = model.seed;
  Json layers = Json::array();
  for (std::size_t l = 0; l < model.n_layers(); ++l) {
    layers.push_back({{"weight", matrix_json(model.weights[l])}, {"bias", matrix_json(model.biases[l])}});
  }
  j["layers"] = std::move(layers);
  return j.dump();
}

MlpModel load_mlp(const std::string& text) {
  return guarded([&] {
    const Json j = Json::parse(text);
    check_header(j, "circe.mlp", kMlpVersion);
    MlpModel m;
    m.widths = j.at("widths").get<std::vector<Index>>();
    m.slope = j.at("slope").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    const Json& layers = j.at("layers");
    if (m.widths.size() < 2 || layers.size() + 1 != m.widths.size()) throw ConfigError("mlp blob: layer count");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      Matrix w = json_matrix(layers[l].at("weight"));
      Matrix b = json_matrix(layers[l].at("bias"));
      if (w.rows() != m.widths[l + 1] || w.cols() != m.widths[l] || b.rows() != w.rows() || b.cols() != 1) {
        throw ConfigError("mlp blob: layer shape does not match widths");
      }
      m.weights.push_back(std::move(w));
      m.biases.push_back(b.col(0));
    }
    return m;
  });
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
  if (!out) throw ConfigError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace circe

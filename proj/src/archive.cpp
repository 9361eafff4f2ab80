#include "mtot/archive.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "json.hpp"

#include "mtot/tensor_io.hpp"

namespace mtot {

namespace {

using nlohmann::json;

void block(std::ostream& os, const std::string& name, const Tensord& t) {
  os << "@block " << name << '\n';
  write_tensor(os, t);
}

Tensord vector_tensor(const Vectord& v) { return Tensord({v.size()}, v); }

struct Archive {
  json manifest;
  std::map<std::string, Tensord> blocks;

  const Tensord& get(const std::string& name) const {
    const auto it = blocks.find(name);
    if (it == blocks.end()) throw ShapeError("model archive: missing block " + name);
    return it->second;
  }
};

Archive read_archive(std::istream& is) {
  Archive a;
  std::string line;
  if (!std::getline(is, line) || line != "MTAR1") throw ShapeError("model archive: missing MTAR1 header");
  if (!std::getline(is, line)) throw ShapeError("model archive: missing manifest");
  try {
    a.manifest = json::parse(line);
  } catch (const json::exception& e) {
    throw ShapeError(std::string("model archive: bad manifest: ") + e.what());
  }
  std::string tag, name;
  while (is >> tag) {
    if (tag != "@block" || !(is >> name)) throw ShapeError("model archive: expected @block");
    a.blocks[name] = read_tensor(is);
  }
  return a;
}

MtotModel<double> mtot_from(const Archive& a) {
  const auto& m = a.manifest;
  MtotModel<double> model;
  const auto p = m.at("p").get<std::size_t>();
  const auto d = m.at("d").get<std::size_t>();
  model.input_shapes = m.at("input_shapes").get<std::vector<Shape>>();
  model.output_shape = m.at("output_shape").get<Shape>();
  model.loss_trace = m.at("loss_trace").get<std::vector<double>>();
  model.iterations = m.at("iterations").get<int>();
  model.converged = m.at("converged").get<bool>();
  model.stagnated = m.at("stagnated").get<bool>();
  if (model.input_shapes.size() != p || model.output_shape.size() != d) throw ShapeError("model archive: inconsistent manifest");
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<Matrixd> u;
    for (std::size_t i = 0; i < model.input_shapes[j].size(); ++i)
      u.push_back(tensor_to_matrix(a.get("u." + std::to_string(j) + "." + std::to_string(i))));
    model.u.push_back(std::move(u));
    model.cores.push_back(a.get("core." + std::to_string(j)));
  }
  for (std::size_t i = 0; i < d; ++i) model.v.push_back(tensor_to_matrix(a.get("v." + std::to_string(i))));
  return model;
}

PcrModel<double> pcr_from(const Archive& a) {
  const auto& m = a.manifest;
  PcrModel<double> model;
  model.v = m.at("v").get<double>();
  model.input_shapes = m.at("input_shapes").get<std::vector<Shape>>();
  model.output_shape = m.at("output_shape").get<Shape>();
  model.x_mean = a.get("x_mean").values();
  model.y_mean = a.get("y_mean").values();
  model.x_loadings = tensor_to_matrix(a.get("x_loadings"));
  model.y_loadings = tensor_to_matrix(a.get("y_loadings"));
  model.coef = tensor_to_matrix(a.get("coef"));
  return model;
}

}  // namespace

void write_model(std::ostream& os, const MtotModel<double>& model) {
  json m;
  m["kind"] = "mtot";
  m["p"] = model.u.size();
  m["d"] = model.v.size();
  m["input_shapes"] = model.input_shapes;
  m["output_shape"] = model.output_shape;
  std::vector<std::vector<Index>> ranks;
  for (const auto& u : model.u) {
    std::vector<Index> r;
    for (const auto& f : u) r.push_back(f.cols());
    ranks.push_back(r);
  }
  m["input_ranks"] = ranks;
  m["output_rank"] = model.v.empty() ? 0 : model.v.front().cols();
  m["loss_trace"] = model.loss_trace;
  m["iterations"] = model.iterations;
  m["converged"] = model.converged;
  m["stagnated"] = model.stagnated;
  os << "MTAR1\n" << m.dump() << '\n';
  for (std::size_t j = 0; j < model.u.size(); ++j) {
    for (std::size_t i = 0; i < model.u[j].size(); ++i)
      block(os, "u." + std::to_string(j) + "." + std::to_string(i), matrix_to_tensor(model.u[j][i]));
    block(os, "core." + std::to_string(j), model.cores[j]);
  }
  for (std::size_t i = 0; i < model.v.size(); ++i) block(os, "v." + std::to_string(i), matrix_to_tensor(model.v[i]));
}

void write_model(std::ostream& os, const PcrModel<double>& model) {
  json m;
  m["kind"] = "pcr";
  m["p"] = model.input_shapes.size();
  m["d"] = model.output_shape.size();
  m["input_shapes"] = model.input_shapes;
  m["output_shape"] = model.output_shape;
  m["v"] = model.v;
  m["gx"] = model.gx();
  m["gy"] = model.gy();
  os << "MTAR1\n" << m.dump() << '\n';
  block(os, "x_mean", vector_tensor(model.x_mean));
  block(os, "x_loadings", matrix_to_tensor(model.x_loadings));
  block(os, "y_mean", vector_tensor(model.y_mean));
  block(os, "y_loadings", matrix_to_tensor(model.y_loadings));
  block(os, "coef", matrix_to_tensor(model.coef));
}

AnyModel read_model(std::istream& is) {
  const Archive a = read_archive(is);
  try {
    const auto kind = a.manifest.at("kind").get<std::string>();
    if (kind == "mtot") return mtot_from(a);
    if (kind == "pcr") return pcr_from(a);
    throw ShapeError("model archive: unknown kind " + kind);
  } catch (const json::exception& e) {
    throw ShapeError(std::string("model archive: bad manifest: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const AnyModel& model) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  std::visit([&](const auto& m) { write_model(os, m); }, model);
  if (!os) throw ConfigError("write failed: " + path.string());
}

AnyModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path.string());
  return read_model(is);
}

std::string model_kind(const AnyModel& model) { return std::holds_alternative<MtotModel<double>>(model) ? "mtot" : "pcr"; }

Tensord predict_any(const AnyModel& model, std::span<const Tensord> xs) {
  if (const auto* m = std::get_if<MtotModel<double>>(&model)) return predict<double>(*m, xs);
  return pcr_predict<double>(std::get<PcrModel<double>>(model), xs);
}

}  // namespace mtot

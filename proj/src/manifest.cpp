#include "mtot/manifest.hpp"

#include <fstream>

#include "json.hpp"
#include "mtot/tensor_io.hpp"

namespace mtot {

using nlohmann::json;

Dataset<double> LoadedDataset::dataset() const {
  if (!output) throw ConfigError("dataset manifest has no output role");
  Dataset<double> d;
  d.y = *output;
  d.xs = inputs;
  d.validate();
  return d;
}

std::filesystem::path write_dataset(const std::filesystem::path& dir, const std::string& stem, const std::string& kind,
                                    std::uint64_t seed, double sigma, const Dataset<double>& data,
                                    const std::vector<std::string>& input_names, const std::optional<Tensord>& truth) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create " + dir.string() + ": " + ec.message());
  json roles = json::array();
  auto emit = [&](const std::string& name, const std::string& role, const Tensord& t) {
    const std::string file = stem + "_" + name + ".ten";
    save_tensor(dir / file, t);
    roles.push_back({{"name", name}, {"path", file}, {"kind", role}});
  };
  for (std::size_t j = 0; j < data.xs.size(); ++j)
    emit(j < input_names.size() ? input_names[j] : "x" + std::to_string(j + 1), "input", data.xs[j]);
  emit("y", "output", data.y);
  if (truth) emit("truth", "truth", *truth);

  const json m = {{"kind", kind}, {"seed", seed}, {"sigma", sigma}, {"roles", roles}};
  const auto path = dir / (stem + ".json");
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << m.dump(2) << '\n';
  return path;
}

LoadedDataset load_dataset(const std::filesystem::path& manifest) {
  std::ifstream is(manifest);
  if (!is) throw ConfigError("cannot read " + manifest.string());
  LoadedDataset out;
  try {
    const json m = json::parse(is);
    out.manifest.kind = m.at("kind").get<std::string>();
    out.manifest.seed = m.value("seed", std::uint64_t{0});
    out.manifest.sigma = m.value("sigma", 0.0);
    for (const auto& r : m.at("roles"))
      out.manifest.roles.push_back({r.at("name").get<std::string>(), r.at("path").get<std::string>(),
                                    r.at("kind").get<std::string>()});
  } catch (const json::exception& e) {
    throw ConfigError("malformed manifest " + manifest.string() + ": " + e.what());
  }
  const auto base = manifest.parent_path();
  for (const auto& r : out.manifest.roles) {
    Tensord t = load_tensor(base / r.path);
    if (r.kind == "input")
      out.inputs.push_back(std::move(t));
    else if (r.kind == "output")
      out.output = std::move(t);
    else if (r.kind == "truth")
      out.truth = std::move(t);
    else
      throw ConfigError("manifest role '" + r.name + "' has unknown kind '" + r.kind + "'");
  }
  if (out.inputs.empty()) throw ConfigError("manifest has no input roles");
  return out;
}

}  // namespace mtot

#include <json.hpp>

#include "halo/io.hpp"
#include "halo/network.hpp"

namespace halo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "halo-checkpoint";
constexpr int kVersion = 1;

struct BufferView {
  std::string name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;
};

std::vector<BufferView> all_tensors(Model& model) {
  std::vector<BufferView> out;
  for (auto& v : parameter_views(model.params)) out.push_back({v.name, v.data, v.rows, v.cols});
  if (model.config.use_hfr || model.bn_stats.mean.size() > 0) {
    out.push_back({"hfr.bn.running_mean", model.bn_stats.mean.data(), model.bn_stats.mean.size(), 1});
    out.push_back({"hfr.bn.running_var", model.bn_stats.var.data(), model.bn_stats.var.size(), 1});
  }
  return out;
}

}  // namespace

void save_checkpoint(const Model& model, const fs::path& dir) {
  Model copy = model;  // views need mutable storage
  const auto tensors = all_tensors(copy);
  const auto& cfg = model.config;

  json manifest;
  manifest["format"] = kFormat;
  manifest["version"] = kVersion;
  manifest["curvature"] = cfg.manifold.c;
  manifest["eps"] = cfg.manifold.eps;
  manifest["dims"] = {{"input_dim", cfg.dims.input_dim},
                      {"hidden_dim", cfg.dims.hidden_dim},
                      {"embed_dim", cfg.dims.embed_dim},
                      {"num_classes", cfg.dims.num_classes},
                      {"hfr_hidden", cfg.dims.hfr_hidden}};
  manifest["encoder_layers"] = copy.params.encoder.layers.size();
  manifest["use_hfr"] = cfg.use_hfr;
  manifest["hfr_normalization"] = std::string(to_string(cfg.hfr_norm));
  manifest["bn_momentum"] = cfg.bn_momentum;
  manifest["bn_eps"] = cfg.bn_eps;
  manifest["dtype"] = "float64-le";
  manifest["layout"] = "row-major";
  json entries = json::array();
  for (const auto& t : tensors) {
    entries.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}, {"file", t.name + ".bin"}});
  }
  manifest["tensors"] = entries;

  io::write_directory_atomically(dir, [&](const fs::path& tmp) {
    io::write_text(tmp / "manifest.json", manifest.dump(2) + "\n");
    for (const auto& t : tensors) {
      io::write_f64_le(tmp / (t.name + ".bin"),
                       std::span<const double>(t.data, static_cast<std::size_t>(t.rows * t.cols)));
    }
  });
}

Model load_checkpoint(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  json manifest;
  try {
    manifest = json::parse(io::read_text(manifest_path));
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  try {
    if (manifest.at("format").get<std::string>() != kFormat) {
      throw DataError("not a checkpoint manifest: " + manifest_path.string());
    }
    ModelConfig cfg;
    cfg.manifold.c = manifest.at("curvature").get<double>();
    cfg.manifold.eps = manifest.at("eps").get<double>();
    const auto& d = manifest.at("dims");
    cfg.dims.input_dim = d.at("input_dim").get<int>();
    cfg.dims.hidden_dim = d.at("hidden_dim").get<int>();
    cfg.dims.embed_dim = d.at("embed_dim").get<int>();
    cfg.dims.num_classes = d.at("num_classes").get<int>();
    cfg.dims.hfr_hidden = d.at("hfr_hidden").get<int>();
    cfg.use_hfr = manifest.at("use_hfr").get<bool>();
    cfg.hfr_norm = hfr_normalization_from_string(manifest.at("hfr_normalization").get<std::string>());
    cfg.bn_momentum = manifest.at("bn_momentum").get<double>();
    cfg.bn_eps = manifest.at("bn_eps").get<double>();

    Model model = init_model(cfg, 0);
    const auto layers = manifest.at("encoder_layers").get<std::size_t>();
    if (layers != model.params.encoder.layers.size()) {
      // Rebuild a single affine layer encoder when the checkpoint has one.
      if (layers == 1) {
        model.params.encoder.layers.resize(1);
        model.params.encoder.layers[0] = {RowMatrix(cfg.dims.embed_dim, cfg.dims.input_dim),
                                          Eigen::VectorXd(cfg.dims.embed_dim)};
      } else {
        throw DataError("unsupported encoder depth in " + manifest_path.string());
      }
    }

    auto tensors = all_tensors(model);
    const auto& entries = manifest.at("tensors");
    if (entries.size() != tensors.size()) {
      throw DataError("tensor count mismatch in " + manifest_path.string() + ": expected " +
                      std::to_string(tensors.size()) + ", found " +
                      std::to_string(entries.size()));
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const auto& e = entries[i];
      auto& t = tensors[i];
      if (e.at("name").get<std::string>() != t.name) {
        throw DataError("unexpected tensor '" + e.at("name").get<std::string>() + "' in " +
                        manifest_path.string() + " (expected '" + t.name + "')");
      }
      const auto shape = e.at("shape").get<std::vector<Eigen::Index>>();
      if (shape.size() != 2 || shape[0] != t.rows || shape[1] != t.cols) {
        throw DataError("shape mismatch for " + t.name + " in " + manifest_path.string());
      }
      const auto values = io::read_f64_le(dir / e.at("file").get<std::string>(),
                                          static_cast<std::size_t>(t.rows * t.cols));
      std::copy(values.begin(), values.end(), t.data);
    }
    return model;
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
}

}  // namespace halo

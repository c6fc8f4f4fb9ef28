#include "stylebridge/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "raw tensor container assumes a little-endian host");

namespace stylebridge {

namespace {

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  return j;
}

}  // namespace

void save_raw_tensor(const std::filesystem::path& base, const std::string& dtype,
                     const Shape& shape, const std::vector<double>& values) {
  if (values.size() != shape_numel(shape))
    throw std::invalid_argument("save_raw_tensor: value count does not match shape");
  const std::filesystem::path bin = base.string() + ".bin";
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + bin.string() + " for writing");
  if (dtype == "float64") {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else if (dtype == "float32") {
    std::vector<float> narrow(values.begin(), values.end());
    out.write(reinterpret_cast<const char*>(narrow.data()),
              static_cast<std::streamsize>(narrow.size() * sizeof(float)));
  } else {
    throw std::invalid_argument("save_raw_tensor: unknown dtype " + dtype);
  }
  if (!out) throw std::runtime_error("short write to " + bin.string());

  nlohmann::json manifest;
  manifest["dtype"] = dtype;
  manifest["shape"] = shape;
  manifest["order"] = "row-major";
  std::ofstream mf(base.string() + ".json");
  mf << manifest.dump(2) << "\n";
}

RawTensor load_raw_tensor(const std::filesystem::path& base) {
  const nlohmann::json manifest = read_json_file(base.string() + ".json");
  RawTensor out;
  out.dtype = manifest.at("dtype").get<std::string>();
  out.shape = manifest.at("shape").get<Shape>();
  if (manifest.at("order").get<std::string>() != "row-major")
    throw std::runtime_error("load_raw_tensor: unsupported element order");

  const std::filesystem::path bin = base.string() + ".bin";
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + bin.string());
  const std::size_t count = shape_numel(out.shape);
  out.values.resize(count);
  if (out.dtype == "float64") {
    in.read(reinterpret_cast<char*>(out.values.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
  } else if (out.dtype == "float32") {
    std::vector<float> narrow(count);
    in.read(reinterpret_cast<char*>(narrow.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    for (std::size_t i = 0; i < count; ++i) out.values[i] = static_cast<double>(narrow[i]);
  } else {
    throw std::runtime_error("load_raw_tensor: unknown dtype " + out.dtype);
  }
  if (!in) throw std::runtime_error("truncated tensor blob " + bin.string());
  return out;
}

void save_checkpoint_manifest(const std::filesystem::path& dir, const std::string& dtype,
                              const ModelHyper& hyper,
                              const std::vector<std::pair<std::string, Shape>>& params) {
  nlohmann::json j;
  j["format_version"] = kCheckpointVersion;
  j["dtype"] = dtype;
  j["hyper"] = {{"image_width", hyper.image_width},
                {"image_height", hyper.image_height},
                {"channels", hyper.channels},
                {"patch", hyper.patch},
                {"embed_dim", hyper.embed_dim},
                {"num_blocks", hyper.num_blocks},
                {"proj_dim", hyper.proj_dim},
                {"num_classes", hyper.num_classes}};
  j["params"] = nlohmann::json::array();
  for (const auto& [name, shape] : params) j["params"].push_back({{"name", name}, {"shape", shape}});
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write checkpoint manifest in " + dir.string());
  out << j.dump(2) << "\n";
}

CheckpointManifest load_checkpoint_manifest(const std::filesystem::path& dir) {
  const nlohmann::json j = read_json_file(dir / "manifest.json");
  const int version = j.at("format_version").get<int>();
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint format version " + std::to_string(version));
  CheckpointManifest out;
  out.dtype = j.at("dtype").get<std::string>();
  const auto& h = j.at("hyper");
  out.hyper.image_width = h.at("image_width").get<std::size_t>();
  out.hyper.image_height = h.at("image_height").get<std::size_t>();
  out.hyper.channels = h.at("channels").get<std::size_t>();
  out.hyper.patch = h.at("patch").get<std::size_t>();
  out.hyper.embed_dim = h.at("embed_dim").get<std::size_t>();
  out.hyper.num_blocks = h.at("num_blocks").get<std::size_t>();
  out.hyper.proj_dim = h.at("proj_dim").get<std::size_t>();
  out.hyper.num_classes = h.at("num_classes").get<std::size_t>();
  for (const auto& p : j.at("params"))
    out.params.emplace_back(p.at("name").get<std::string>(), p.at("shape").get<Shape>());
  return out;
}

}  // namespace stylebridge

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stylebridge/model.hpp"
#include "stylebridge/tensor.hpp"

namespace stylebridge {

/// Raw tensor container: `<base>.bin` holds little-endian IEEE-754 scalars in
/// row-major order, `<base>.json` is the manifest {dtype, shape, order}.
struct RawTensor {
  std::string dtype;  // "float32" | "float64"
  Shape shape;
  std::vector<double> values;  // widened on load
};

void save_raw_tensor(const std::filesystem::path& base, const std::string& dtype,
                     const Shape& shape, const std::vector<double>& values);
RawTensor load_raw_tensor(const std::filesystem::path& base);

template <typename T>
void save_tensor(const std::filesystem::path& base, const Tensor<T>& t) {
  std::vector<double> widened(t.data().begin(), t.data().end());
  save_raw_tensor(base, dtype_name<T>(), t.shape(), widened);
}

template <typename T>
Tensor<T> load_tensor(const std::filesystem::path& base) {
  RawTensor raw = load_raw_tensor(base);
  std::vector<T> narrowed(raw.values.begin(), raw.values.end());
  return Tensor<T>::from_data(raw.shape, std::move(narrowed));
}

/// Checkpoint directory: one raw tensor container per parameter plus
/// manifest.json carrying names, shapes, hyperparameters and format version.
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint_manifest(const std::filesystem::path& dir, const std::string& dtype,
                              const ModelHyper& hyper,
                              const std::vector<std::pair<std::string, Shape>>& params);

struct CheckpointManifest {
  std::string dtype;
  ModelHyper hyper;
  std::vector<std::pair<std::string, Shape>> params;
};
CheckpointManifest load_checkpoint_manifest(const std::filesystem::path& dir);

template <typename T>
void save_checkpoint(const std::filesystem::path& dir, const ModelParams<T>& params) {
  std::filesystem::create_directories(dir);
  std::vector<std::pair<std::string, Shape>> listed;
  for (const auto& np : params.named_params()) {
    save_tensor(dir / np.name, *np.tensor);
    listed.emplace_back(np.name, np.tensor->shape());
  }
  save_checkpoint_manifest(dir, dtype_name<T>(), params.hyper, listed);
}

template <typename T>
ModelParams<T> load_checkpoint(const std::filesystem::path& dir) {
  const CheckpointManifest manifest = load_checkpoint_manifest(dir);
  ModelParams<T> out;
  out.hyper = manifest.hyper;
  out.hyper.validate();
  out.blocks.resize(manifest.hyper.num_blocks);
  for (auto& np : out.named_params()) {
    RawTensor raw = load_raw_tensor(dir / np.name);
    std::vector<T> narrowed(raw.values.begin(), raw.values.end());
    *np.tensor = Tensor<T>::from_data(raw.shape, std::move(narrowed), np.trainable);
  }
  return out;
}

}  // namespace stylebridge

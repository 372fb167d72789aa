#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leanloc/raster.hpp"
#include "leanloc/sampler.hpp"
#include "leanloc/scene.hpp"

namespace leanloc {

inline constexpr int kSchemaVersion = 1;

/// Channel subsets fed to the network. Channels are always ordered edge, face, depth.
enum class Combo : std::uint8_t { E, F, D, EF, EFD };

std::string_view to_string(Combo c);
Combo combo_from_string(std::string_view s);
int channel_count(Combo c);

/// Where the scene geometry comes from; enough to rebuild it exactly.
struct SceneSource {
  enum class Kind : std::uint8_t { Synth, Mesh } kind = Kind::Synth;
  SynthCityConfig synth;
  std::string mesh_path;  // absolute, or relative to the config file that named it

  bool operator==(const SceneSource&) const = default;
};

SceneModel load_scene(const SceneSource& source);

struct ManifestHeader {
  int schema_version = kSchemaVersion;
  SceneSource scene;
  GridSpec grid;
  CameraIntrinsics camera;
  Combo combo = Combo::EFD;
  double validation_fraction = 0.1;
  std::uint64_t split_seed = 0;
  std::optional<std::uint64_t> shuffle_seed;  // set once labels were shuffled
  int jobs_hint = 0;                          // informational; output never depends on it

  bool shuffled() const { return shuffle_seed.has_value(); }
};

struct ImageFiles {
  std::string edge, face, depth;  // relative to the dataset root
  bool operator==(const ImageFiles&) const = default;
};

struct ManifestRecord {
  SampleRecord sample;
  std::optional<ImageFiles> files;  // present for valid samples only
  bool operator==(const ManifestRecord&) const = default;
};

struct Manifest {
  ManifestHeader header;
  std::vector<ManifestRecord> records;

  const ManifestRecord* find(std::int64_t id) const;
};

inline constexpr const char* kManifestFileName = "manifest.jsonl";

ImageFiles image_files_for(std::int64_t id);

/// 16-bit linear depth code: near -> 0, far -> 65535.
std::uint16_t quantize_depth(float depth, double near, double far);
float dequantize_depth(std::uint16_t code, double near, double far);

/// Writes the three PNGs for one sample under `root`; safe to call concurrently
/// for distinct ids once the subdirectories exist.
ImageFiles write_triplet_images(const std::filesystem::path& root, std::int64_t id,
                                const LeanTriplet& triplet, const CameraIntrinsics& camera);
void create_image_dirs(const std::filesystem::path& root);

LeanTriplet read_triplet_images(const std::filesystem::path& root, const ManifestRecord& record,
                                const CameraIntrinsics& camera);

std::string format_manifest(const Manifest& manifest);
Manifest parse_manifest(std::string_view text);

void write_manifest(const std::filesystem::path& file, const Manifest& manifest);
/// Parses and structurally validates: header first, unique ids, known reasons.
Manifest read_manifest(const std::filesystem::path& file);

/// Every referenced image exists under `root`.
void check_integrity(const Manifest& manifest, const std::filesystem::path& root);

/// Writes images for valid records (triplets aligned with records by index)
/// and the manifest. Returns the manifest written.
Manifest write_dataset(const ManifestHeader& header, std::span<const SampleRecord> records,
                       std::span<const LeanTriplet> triplets, const std::filesystem::path& out_dir);

/// Channel-major (C, H, W) float image.
struct ChannelStack {
  int channels = 0, width = 0, height = 0;
  std::vector<float> data;

  float at(int c, int col, int row) const {
    return data[(static_cast<std::size_t>(c) * height + row) * width + col];
  }
};

/// Edge and face as 0/1; depth scaled to [0, 1] by (d - near) / (far - near).
ChannelStack stack_channels(const LeanTriplet& triplet, Combo combo, double near, double far);

struct Prediction {
  std::int64_t id = 0;
  PoseLabel label;
  bool operator==(const Prediction&) const = default;
};

struct PredictionSet {
  int schema_version = kSchemaVersion;
  std::string manifest;  // manifest file the predictions answer
  std::vector<Prediction> predictions;
};

std::string format_predictions(const PredictionSet& preds);
PredictionSet parse_predictions(std::string_view text);
void write_predictions(const std::filesystem::path& file, const PredictionSet& preds);
PredictionSet read_predictions(const std::filesystem::path& file);

/// Every predicted id exists in the manifest and no id repeats.
void check_predictions(const PredictionSet& preds, const Manifest& manifest);

}  // namespace leanloc

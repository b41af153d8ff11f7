#pragma once

#include <filesystem>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "gendd/types.hpp"

namespace gendd {

inline constexpr int kManifestVersion = 1;
inline constexpr const char* kManifestFilename = "manifest.json";

/// Writes one lossless 16-bit PNG per sample under <root>/<class_name>/<k>.png
/// plus a JSON manifest at the root. `extra` is merged into the manifest
/// under "extra" (augmentation parameters, timing, config echo).
/// Returns the manifest path. Refuses to write if the dataset is unbalanced.
std::filesystem::path save_distilled(const DistilledDataset& ds, const std::filesystem::path& root,
                                     const nlohmann::json& extra = nlohmann::json::object());

DistilledDataset load_distilled(const std::filesystem::path& root);

/// Reads the manifest only (for tooling that needs metadata without pixels).
nlohmann::json read_manifest(const std::filesystem::path& root);

/// Standard CIFAR-100 binary layout: records of 3074 bytes
/// (coarse label, fine label, 3x1024 channel planes at 32x32).
/// Fine labels are used; images land in unit range.
LabeledStore import_cifar100_file(const std::filesystem::path& file);

/// Convenience over a directory holding train.bin and test.bin.
std::pair<LabeledStore, LabeledStore> import_cifar100(const std::filesystem::path& dir);

const LabelRegistry& cifar100_registry();

/// Directory-of-images ingestion: per-class subdirectories named by class
/// label, PNG files inside. Images are resampled to spec.resolution.
LabeledStore import_image_directory(const std::filesystem::path& root, const DatasetSpec& spec);

} // namespace gendd

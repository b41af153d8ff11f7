#pragma once

#include <cstdint>
#include <string>

#include "gendd/rng.hpp"
#include "gendd/types.hpp"

namespace gendd {

std::uint64_t string_hash(const std::string& s);

/// Deterministic sinusoidal texture keyed by `key`, with per-image jitter
/// drawn from the rng stream. Unit range, [C, res, res].
Tensor procedural_texture(std::uint64_t key, std::size_t channels, std::size_t res, Rng& rng,
                          double jitter = 0.08);

LabelRegistry numbered_registry(std::size_t n, const std::string& prefix = "class_");

/// One distinct constant color per class: linearly separable by construction.
DistilledDataset solid_color_dataset(std::size_t num_classes, std::size_t ipc,
                                     std::size_t channels, std::size_t res);

/// Solid class colors plus small uniform noise; used as matching test splits.
LabeledStore solid_color_store(std::size_t num_classes, std::size_t per_class,
                               std::size_t channels, std::size_t res, double noise,
                               std::uint64_t seed);

/// Two visually distinct classes at a small resolution, for sampler training.
LabeledStore two_class_toy(std::size_t res, std::size_t per_class, std::uint64_t seed);

/// Jittered per-class textures with labels.
LabeledStore textured_store(std::size_t num_classes, std::size_t per_class, std::size_t channels,
                            std::size_t res, double jitter, std::uint64_t seed);

} // namespace gendd

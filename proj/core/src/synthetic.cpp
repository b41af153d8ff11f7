#include "gendd/synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace gendd {

std::uint64_t string_hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

Tensor procedural_texture(std::uint64_t key, std::size_t channels, std::size_t res, Rng& rng,
                          double jitter) {
    Tensor img({channels, res, res});
    std::uint64_t s = key;
    for (std::size_t c = 0; c < channels; ++c) {
        double fy = 1.0 + static_cast<double>(splitmix64(s) % 5);
        double fx = 1.0 + static_cast<double>(splitmix64(s) % 5);
        double py = static_cast<double>(splitmix64(s) % 628) / 100.0;
        double px = static_cast<double>(splitmix64(s) % 628) / 100.0;
        for (std::size_t y = 0; y < res; ++y) {
            for (std::size_t x = 0; x < res; ++x) {
                double u = static_cast<double>(y) / res, v = static_cast<double>(x) / res;
                double base = 0.5 + 0.35 * std::sin(6.28318 * fy * u + py) *
                                         std::sin(6.28318 * fx * v + px);
                double w = base + jitter * (rng.uniform() - 0.5);
                img.data[(c * res + y) * res + x] = std::clamp(w, 0.0, 1.0);
            }
        }
    }
    return img;
}

LabelRegistry numbered_registry(std::size_t n, const std::string& prefix) {
    std::vector<std::string> names;
    names.reserve(n);
    for (std::size_t i = 0; i < n; ++i) names.push_back(prefix + std::to_string(i));
    return LabelRegistry(std::move(names));
}

namespace {
double class_color(std::size_t cls, std::size_t channel) {
    std::uint64_t s = derive_seed(0xc01045ULL, {cls, channel});
    return 0.1 + 0.8 * (static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53);
}
} // namespace

DistilledDataset solid_color_dataset(std::size_t num_classes, std::size_t ipc,
                                     std::size_t channels, std::size_t res) {
    DistilledDataset ds;
    ds.registry = numbered_registry(num_classes);
    ds.ipc = ipc;
    ds.images.data = Tensor({num_classes * ipc, channels, res, res});
    for (std::size_t cls = 0; cls < num_classes; ++cls) {
        for (std::size_t k = 0; k < ipc; ++k) {
            std::size_t i = cls * ipc + k;
            for (std::size_t c = 0; c < channels; ++c) {
                double v = class_color(cls, c);
                for (std::size_t p = 0; p < res * res; ++p)
                    ds.images.data.data[(i * channels + c) * res * res + p] = v;
            }
            ds.labels.push_back(cls);
            ds.provenance.push_back(Provenance::Generated);
        }
    }
    quantize_unit16(ds.images);
    ds.validate();
    return ds;
}

LabeledStore solid_color_store(std::size_t num_classes, std::size_t per_class,
                               std::size_t channels, std::size_t res, double noise,
                               std::uint64_t seed) {
    LabeledStore store;
    store.registry = numbered_registry(num_classes);
    store.images.data = Tensor({num_classes * per_class, channels, res, res});
    for (std::size_t cls = 0; cls < num_classes; ++cls) {
        for (std::size_t k = 0; k < per_class; ++k) {
            Rng rng = Rng::derive(seed, {cls, k});
            std::size_t i = cls * per_class + k;
            for (std::size_t c = 0; c < channels; ++c) {
                double v = class_color(cls, c);
                for (std::size_t p = 0; p < res * res; ++p) {
                    double w = v + noise * (rng.uniform() - 0.5);
                    store.images.data.data[(i * channels + c) * res * res + p] =
                        std::clamp(w, 0.0, 1.0);
                }
            }
            store.labels.push_back(cls);
        }
    }
    return store;
}

LabeledStore two_class_toy(std::size_t res, std::size_t per_class, std::uint64_t seed) {
    LabeledStore store;
    store.registry = numbered_registry(2);
    store.images.data = Tensor({2 * per_class, 1, res, res});
    for (std::size_t cls = 0; cls < 2; ++cls) {
        for (std::size_t k = 0; k < per_class; ++k) {
            Rng rng = Rng::derive(seed, {cls, k});
            std::size_t i = cls * per_class + k;
            for (std::size_t y = 0; y < res; ++y) {
                for (std::size_t x = 0; x < res; ++x) {
                    double ramp = cls == 0 ? static_cast<double>(x) / (res - 1)
                                           : static_cast<double>(y) / (res - 1);
                    double v = 0.15 + 0.7 * ramp + 0.05 * (rng.uniform() - 0.5);
                    store.images.data.data[(i * res + y) * res + x] = std::clamp(v, 0.0, 1.0);
                }
            }
            store.labels.push_back(cls);
        }
    }
    return store;
}

LabeledStore textured_store(std::size_t num_classes, std::size_t per_class, std::size_t channels,
                            std::size_t res, double jitter, std::uint64_t seed) {
    LabeledStore store;
    store.registry = numbered_registry(num_classes);
    store.images.data = Tensor({num_classes * per_class, channels, res, res});
    std::size_t per = channels * res * res;
    for (std::size_t cls = 0; cls < num_classes; ++cls) {
        std::uint64_t key = string_hash(store.registry.name(cls));
        for (std::size_t k = 0; k < per_class; ++k) {
            Rng rng = Rng::derive(seed, {cls, k});
            Tensor img = procedural_texture(key, channels, res, rng, jitter);
            std::copy(img.data.begin(), img.data.end(),
                      &store.images.data.data[(cls * per_class + k) * per]);
            store.labels.push_back(cls);
        }
    }
    return store;
}

} // namespace gendd

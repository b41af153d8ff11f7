#pragma once

#include <filesystem>

#include "gendd/rng.hpp"
#include "gendd/synthetic.hpp"
#include "gendd/types.hpp"

namespace gendd::test {

/// Random balanced dataset on the 16-bit storage grid.
inline DistilledDataset random_dataset(std::size_t classes, std::size_t ipc, std::size_t channels,
                                       std::size_t res, std::uint64_t seed) {
    DistilledDataset ds;
    ds.registry = numbered_registry(classes);
    ds.ipc = ipc;
    ds.images.data = Tensor({classes * ipc, channels, res, res});
    Rng rng(seed);
    for (double& v : ds.images.data.data) v = rng.uniform();
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t k = 0; k < ipc; ++k) {
            ds.labels.push_back(c);
            ds.provenance.push_back(k % 2 == 0 ? Provenance::Generated : Provenance::Augmented);
        }
    quantize_unit16(ds.images);
    ds.validate();
    return ds;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("gendd_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace gendd::test

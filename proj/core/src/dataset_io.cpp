#include "gendd/dataset_io.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "gendd/png_io.hpp"
#include "gendd/resample.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gendd {

namespace {

PngImage image_from_batch(const ImageBatch& b, std::size_t idx) {
    PngImage img;
    img.width = b.width();
    img.height = b.height();
    img.channels = b.channels();
    img.pixels.resize(img.width * img.height * img.channels);
    for (std::size_t c = 0; c < img.channels; ++c)
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x)
                img.pixels[(y * img.width + x) * img.channels + c] = b.data.at4(idx, c, y, x);
    return img;
}

void image_into_batch(const PngImage& img, ImageBatch& b, std::size_t idx) {
    for (std::size_t c = 0; c < img.channels; ++c)
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x)
                b.data.at4(idx, c, y, x) = img.pixels[(y * img.width + x) * img.channels + c];
}

} // namespace

fs::path save_distilled(const DistilledDataset& ds, const fs::path& root, const json& extra) {
    ds.validate(); // refuse to write unbalanced or otherwise invalid datasets
    if (ds.images.range != ValueRange::Unit)
        throw std::invalid_argument("save_distilled: datasets are stored in unit range");

    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec || !fs::is_directory(root))
        throw std::runtime_error("save_distilled: cannot create directory '" + root.string() + "'");

    json images = json::array();
    std::vector<std::size_t> per_class_counter(ds.registry.count(), 0);
    for (std::size_t i = 0; i < ds.count(); ++i) {
        std::size_t cls = ds.labels[i];
        const std::string& cname = ds.registry.name(cls);
        std::size_t k = per_class_counter[cls]++;
        fs::path dir = root / cname;
        fs::create_directories(dir);
        std::string rel = cname + "/" + std::to_string(k) + ".png";
        write_png16((root / rel).string(), image_from_batch(ds.images, i));
        images.push_back({{"class", cls}, {"file", rel}, {"provenance", to_string(ds.provenance[i])}});
    }

    json manifest = {
        {"version", kManifestVersion},
        {"class_names", ds.registry.names()},
        {"ipc", ds.ipc},
        {"count", ds.count()},
        {"channels", ds.count() ? ds.images.channels() : 3},
        {"resolution", ds.count() ? ds.images.height() : 0},
        {"value_range", to_string(ds.images.range)},
        {"images", images},
    };
    if (!extra.empty()) manifest["extra"] = extra;

    fs::path mpath = root / kManifestFilename;
    std::ofstream out(mpath);
    if (!out) throw std::runtime_error("save_distilled: cannot write manifest at '" + mpath.string() + "'");
    out << manifest.dump(2) << "\n";
    return mpath;
}

json read_manifest(const fs::path& root) {
    fs::path mpath = root / kManifestFilename;
    if (!fs::exists(mpath)) mpath = root / "manifest"; // accept the bare name too
    std::ifstream in(mpath);
    if (!in) throw std::runtime_error("load_distilled: missing manifest in '" + root.string() + "'");
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw std::runtime_error("load_distilled: corrupt manifest: " + std::string(e.what()));
    }
    if (!manifest.contains("version") || manifest["version"].get<int>() != kManifestVersion)
        throw std::runtime_error("load_distilled: unsupported manifest version");
    return manifest;
}

DistilledDataset load_distilled(const fs::path& root) {
    json manifest = read_manifest(root);

    DistilledDataset ds;
    ds.registry = LabelRegistry(manifest.at("class_names").get<std::vector<std::string>>());
    ds.ipc = manifest.at("ipc").get<std::size_t>();
    auto count = manifest.at("count").get<std::size_t>();
    auto channels = manifest.at("channels").get<std::size_t>();
    auto resolution = manifest.at("resolution").get<std::size_t>();

    const json& images = manifest.at("images");
    if (images.size() != count)
        throw std::runtime_error("load_distilled: manifest count " + std::to_string(count) +
                                 " disagrees with image list length " + std::to_string(images.size()));

    // per-class accounting against the declared ipc, before touching pixels
    std::vector<std::size_t> hist(ds.registry.count(), 0);
    for (const auto& e : images) hist[e.at("class").get<std::size_t>()]++;
    for (std::size_t c = 0; c < hist.size(); ++c) {
        if (hist[c] != ds.ipc)
            throw std::runtime_error("load_distilled: class '" + ds.registry.name(c) + "' has " +
                                     std::to_string(hist[c]) + " files, manifest claims ipc=" +
                                     std::to_string(ds.ipc));
    }

    ds.images.range = ValueRange::Unit;
    ds.images.data = Tensor({count, channels, resolution, resolution});
    ds.labels.reserve(count);
    ds.provenance.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto& e = images[i];
        ds.labels.push_back(e.at("class").get<std::size_t>());
        ds.provenance.push_back(provenance_from_string(e.at("provenance").get<std::string>()));
        fs::path file = root / e.at("file").get<std::string>();
        if (!fs::exists(file))
            throw std::runtime_error("load_distilled: manifest lists missing file '" + file.string() + "'");
        PngImage img = read_png(file.string());
        if (img.width != resolution || img.height != resolution || img.channels != channels)
            throw std::runtime_error("load_distilled: '" + file.string() + "' disagrees with manifest shape");
        image_into_batch(img, ds.images, i);
    }
    ds.validate();
    return ds;
}

namespace {

const char* kCifar100FineNames[100] = {
    "apple", "aquarium_fish", "baby", "bear", "beaver", "bed", "bee", "beetle", "bicycle",
    "bottle", "bowl", "boy", "bridge", "bus", "butterfly", "camel", "can", "castle",
    "caterpillar", "cattle", "chair", "chimpanzee", "clock", "cloud", "cockroach", "couch",
    "crab", "crocodile", "cup", "dinosaur", "dolphin", "elephant", "flatfish", "forest",
    "fox", "girl", "hamster", "house", "kangaroo", "keyboard", "lamp", "lawn_mower",
    "leopard", "lion", "lizard", "lobster", "man", "maple_tree", "motorcycle", "mountain",
    "mouse", "mushroom", "oak_tree", "orange", "orchid", "otter", "palm_tree", "pear",
    "pickup_truck", "pine_tree", "plain", "plate", "poppy", "porcupine", "possum", "rabbit",
    "raccoon", "ray", "road", "rocket", "rose", "sea", "seal", "shark", "shrew", "skunk",
    "skyscraper", "snail", "snake", "spider", "squirrel", "streetcar", "sunflower",
    "sweet_pepper", "table", "tank", "telephone", "television", "tiger", "tractor", "train",
    "trout", "tulip", "turtle", "wardrobe", "whale", "willow_tree", "wolf", "woman", "worm"};

constexpr std::size_t kCifarRecordBytes = 3074; // 1 coarse + 1 fine + 3 * 1024

} // namespace

const LabelRegistry& cifar100_registry() {
    static const LabelRegistry reg(
        std::vector<std::string>(std::begin(kCifar100FineNames), std::end(kCifar100FineNames)));
    return reg;
}

LabeledStore import_cifar100_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("import_cifar100: cannot open '" + file.string() + "'");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % kCifarRecordBytes != 0)
        throw std::runtime_error("import_cifar100: '" + file.string() + "' length " +
                                 std::to_string(bytes.size()) + " is not a multiple of 3074; trailing " +
                                 std::to_string(bytes.size() % kCifarRecordBytes) +
                                 " bytes start at offset " +
                                 std::to_string(bytes.size() - bytes.size() % kCifarRecordBytes));
    std::size_t n = bytes.size() / kCifarRecordBytes;

    LabeledStore store;
    store.registry = cifar100_registry();
    store.images.range = ValueRange::Unit;
    store.images.data = Tensor({n, 3, 32, 32});
    store.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto* rec = reinterpret_cast<const unsigned char*>(bytes.data()) + i * kCifarRecordBytes;
        unsigned fine = rec[1]; // rec[0] is the coarse label, unused
        if (fine >= 100)
            throw std::runtime_error("import_cifar100: fine label " + std::to_string(fine) +
                                     " out of range in record " + std::to_string(i));
        store.labels[i] = fine;
        // three 1024-byte channel planes, row-major
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t p = 0; p < 1024; ++p)
                store.images.data.at4(i, c, p / 32, p % 32) = rec[2 + c * 1024 + p] / 255.0;
    }
    return store;
}

std::pair<LabeledStore, LabeledStore> import_cifar100(const fs::path& dir) {
    return {import_cifar100_file(dir / "train.bin"), import_cifar100_file(dir / "test.bin")};
}

LabeledStore import_image_directory(const fs::path& root, const DatasetSpec& spec) {
    spec.validate();
    if (!fs::is_directory(root))
        throw std::runtime_error("import_image_directory: '" + root.string() + "' is not a directory");

    std::vector<std::string> unknown;
    std::vector<std::pair<std::size_t, fs::path>> entries; // (class, file)
    std::set<fs::path> dirs;
    for (const auto& d : fs::directory_iterator(root)) {
        if (d.is_directory()) dirs.insert(d.path()); // sorted for determinism
    }
    for (const auto& dir : dirs) {
        std::string cname = dir.filename().string();
        auto idx = spec.registry.find(cname);
        if (!idx) {
            unknown.push_back(cname);
            continue;
        }
        std::set<fs::path> files;
        for (const auto& f : fs::directory_iterator(dir))
            if (f.is_regular_file()) files.insert(f.path());
        for (const auto& f : files) entries.emplace_back(*idx, f);
    }
    if (!unknown.empty()) {
        std::string msg = "import_image_directory: unknown class directories:";
        for (const auto& u : unknown) msg += " '" + u + "'";
        throw std::runtime_error(msg);
    }

    LabeledStore store;
    store.registry = spec.registry;
    if (entries.empty()) {
        store.images = ImageBatch::empty(3, spec.resolution, spec.resolution);
        return store;
    }

    std::size_t n = entries.size();
    PngImage first = read_png(entries[0].second.string());
    std::size_t channels = first.channels;

    store.images.range = ValueRange::Unit;
    store.images.data = Tensor({n, channels, spec.resolution, spec.resolution});
    store.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        store.labels[i] = entries[i].first;
        PngImage img = i == 0 ? first : read_png(entries[i].second.string());
        if (img.channels != channels)
            throw std::runtime_error("import_image_directory: mixed channel counts under '" +
                                     root.string() + "'");
        // per-plane resample straight into the store
        std::vector<double> plane(img.height * img.width);
        for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t y = 0; y < img.height; ++y)
                for (std::size_t x = 0; x < img.width; ++x)
                    plane[y * img.width + x] = img.pixels[(y * img.width + x) * channels + c];
            resample_plane(plane.data(), img.height, img.width,
                           &store.images.data.at4(i, c, 0, 0), spec.resolution, spec.resolution);
        }
    }
    return store;
}

} // namespace gendd

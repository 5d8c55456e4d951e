#pragma once

// Persistence: 8-bit PNG images with sidecar metadata, Market1501-style
// dataset directories, anchor-quad annotation files, model checkpoints,
// optimization traces, and content-hash manifests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/core.hpp>

#include <nlohmann/json.hpp>

#include "advpat/attack.hpp"
#include "advpat/errors.hpp"
#include "advpat/geometry.hpp"
#include "advpat/image.hpp"
#include "advpat/physicsim.hpp"
#include "advpat/reid.hpp"

namespace advpat::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ----- raster I/O -----------------------------------------------------------

inline void write_image_png(const Image& img, const fs::path& path) {
    cv::Mat m(img.height(), img.width(), CV_8UC3);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            auto& px = m.at<cv::Vec3b>(y, x);  // BGR on disk
            for (int c = 0; c < kChannels; ++c)
                px[2 - c] = static_cast<unsigned char>(std::lround(img.at(y, x, c) * 255.0));
        }
    if (!cv::imwrite(path.string(), m)) throw IoError("failed to write " + path.string());
}

inline Image read_image(const fs::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (m.empty()) throw IoError("failed to read " + path.string());
    Image img(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x) {
            const auto& px = m.at<cv::Vec3b>(y, x);
            for (int c = 0; c < kChannels; ++c) img.at(y, x, c) = px[2 - c] / 255.0;
        }
    return img;
}

// Pattern: PNG plus a sidecar recording the interval bounds and size.
inline void write_pattern(const Pattern& p, const fs::path& png_path) {
    cv::Mat m(p.height(), p.width(), CV_8UC3);
    for (int y = 0; y < p.height(); ++y)
        for (int x = 0; x < p.width(); ++x) {
            auto& px = m.at<cv::Vec3b>(y, x);
            for (int c = 0; c < kChannels; ++c)
                px[2 - c] = static_cast<unsigned char>(std::lround(p.at(y, x, c) * 255.0));
        }
    if (!cv::imwrite(png_path.string(), m)) throw IoError("failed to write " + png_path.string());
    json meta;
    meta["height"] = p.height();
    meta["width"] = p.width();
    meta["lower"] = p.interval().lower;
    meta["upper"] = p.interval().upper;
    std::ofstream out(png_path.string() + ".json");
    out << meta.dump(2) << "\n";
}

inline Pattern read_pattern(const fs::path& png_path) {
    std::ifstream in(png_path.string() + ".json");
    if (!in) throw IoError("missing pattern metadata for " + png_path.string());
    json meta = json::parse(in);
    ColorInterval iv;
    iv.lower = meta.at("lower").get<std::array<double, kChannels>>();
    iv.upper = meta.at("upper").get<std::array<double, kChannels>>();
    Pattern p(meta.at("height").get<int>(), meta.at("width").get<int>(), iv);
    cv::Mat m = cv::imread(png_path.string(), cv::IMREAD_COLOR);
    if (m.empty() || m.rows != p.height() || m.cols != p.width())
        throw IoError("pattern PNG mismatch for " + png_path.string());
    for (int y = 0; y < p.height(); ++y)
        for (int x = 0; x < p.width(); ++x) {
            const auto& px = m.at<cv::Vec3b>(y, x);
            for (int c = 0; c < kChannels; ++c) p.at(y, x, c) = px[2 - c] / 255.0;
        }
    return p;
}

inline void write_mask(const Mask& m, const fs::path& path) {
    cv::Mat img(m.height(), m.width(), CV_8UC1);
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) img.at<unsigned char>(y, x) = m.at(y, x) ? 255 : 0;
    if (!cv::imwrite(path.string(), img)) throw IoError("failed to write " + path.string());
}

inline Mask read_mask(const fs::path& path) {
    cv::Mat img = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
    if (img.empty()) throw IoError("failed to read " + path.string());
    Mask m(img.rows, img.cols);
    for (int y = 0; y < img.rows; ++y)
        for (int x = 0; x < img.cols; ++x) m.at(y, x) = img.at<unsigned char>(y, x) >= 128 ? 1 : 0;
    return m;
}

// ----- anchor-quad sidecars --------------------------------------------------

// One line, eight comma-separated pixel coordinates, TL,TR,BR,BL order.
inline void write_quad(const AnchorQuad& q, const fs::path& path) {
    std::ofstream out(path);
    for (int i = 0; i < 4; ++i)
        out << q.pts[i].x << ',' << q.pts[i].y << (i < 3 ? "," : "\n");
}

inline AnchorQuad read_quad(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("failed to read quad file " + path.string());
    std::string line;
    std::getline(in, line);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    AnchorQuad q;
    for (int i = 0; i < 4; ++i)
        if (!(is >> q.pts[i].x >> q.pts[i].y))
            throw IoError("malformed quad file " + path.string());
    return q;
}

inline fs::path quad_sidecar_path(const fs::path& image_path) {
    fs::path p = image_path;
    p += ".quad.txt";
    return p;
}

// ----- dataset directory layout ----------------------------------------------

// Market1501 naming: PPPP_cC_NNNN.png, zero-padded identity, camera, sequence.
inline std::string market_filename(int identity, int camera, int sequence) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d_c%d_%04d.png", identity, camera, sequence);
    return buf;
}

inline void write_dataset(const Dataset& ds, const fs::path& root, const std::string& split) {
    const fs::path dir = root / split;
    fs::create_directories(dir);
    for (const auto& e : ds.entries) {
        const fs::path img_path = dir / market_filename(e.identity, e.camera, e.sequence);
        write_image_png(e.image, img_path);
        write_quad(e.quad, quad_sidecar_path(img_path));
    }
}

// Default torso placement for images without a sidecar: a centered quad
// covering the middle of the crop.
inline AnchorQuad default_torso_quad(int h, int w) {
    return AnchorQuad::rect(0.30 * (w - 1), 0.30 * (h - 1), 0.70 * (w - 1), 0.62 * (h - 1));
}

// Parses PPPP_cC_*.png / .jpg filenames into labels; unparseable files are
// skipped with a warning on stderr.
inline Dataset ingest_dataset(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("ingest_dataset: not a directory: " + dir.string());
    static const std::regex name_re(R"((\d+)_c(\d+)(?:s\d+)?_?(\d*)[^.]*\.(png|jpg|jpeg))",
                                    std::regex::icase);
    Dataset ds;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        const std::string name = path.filename().string();
        if (name.size() > 9 && name.substr(name.size() - 9) == ".quad.txt") continue;
        std::smatch m;
        if (!std::regex_match(name, m, name_re)) {
            std::cerr << "ingest_dataset: skipping unparseable file " << name << "\n";
            continue;
        }
        DatasetEntry e;
        e.identity = std::stoi(m[1]);
        e.camera = std::stoi(m[2]);
        e.sequence = m[3].length() ? std::stoi(m[3]) : static_cast<int>(ds.entries.size()) + 1;
        e.image = read_image(path);
        const fs::path quad_path = quad_sidecar_path(path);
        e.quad = fs::exists(quad_path) ? read_quad(quad_path)
                                       : default_torso_quad(e.image.height(), e.image.width());
        ds.entries.push_back(std::move(e));
    }
    if (ds.entries.empty()) throw IoError("ingest_dataset: no parseable image files in " + dir.string());
    return ds;
}

// ----- model checkpoints -----------------------------------------------------

namespace detail_io {

constexpr char kMagic[8] = {'A', 'D', 'V', 'P', 'A', 'T', 'M', '1'};

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
void get(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof v);
}
inline void put_vec(std::ostream& os, const std::vector<double>& v) {
    put(os, static_cast<std::uint64_t>(v.size()));
    os.write(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}
inline void get_vec(std::istream& is, std::vector<double>& v) {
    std::uint64_t n = 0;
    get(is, n);
    v.resize(n);
    is.read(reinterpret_cast<char*>(v.data()), n * sizeof(double));
}

}  // namespace detail_io

inline void save_model(const ReIDModel& m, const fs::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("failed to open checkpoint for writing: " + path.string());
    os.write(detail_io::kMagic, 8);
    detail_io::put(os, static_cast<std::uint32_t>(1));  // version
    detail_io::put(os, static_cast<std::uint32_t>(m.variant));
    detail_io::put(os, static_cast<std::int32_t>(m.input_height()));
    detail_io::put(os, static_cast<std::int32_t>(m.input_width()));
    detail_io::put(os, static_cast<std::int32_t>(m.embedding_dim()));
    detail_io::put(os, static_cast<std::int32_t>(m.num_classes));
    detail_io::put(os, m.train_seed);
    detail_io::put(os, m.holdout_rank1);
    for (int i = 0; i < EmbeddingNet::kBlocks; ++i) {
        detail_io::put_vec(os, m.net.convs_[i].w);
        detail_io::put_vec(os, m.net.convs_[i].b);
    }
    detail_io::put_vec(os, m.net.fc_.w);
    detail_io::put_vec(os, m.net.fc_.b);
    detail_io::put_vec(os, m.classifier.w);
    detail_io::put_vec(os, m.classifier.b);
    detail_io::put_vec(os, m.verifier_w);
    detail_io::put(os, m.verifier_b);
    if (!os) throw IoError("failed while writing checkpoint: " + path.string());
}

inline ReIDModel load_model(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("failed to open checkpoint: " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (std::memcmp(magic, detail_io::kMagic, 8) != 0)
        throw IoError("bad checkpoint magic in " + path.string());
    std::uint32_t version = 0, variant = 0;
    detail_io::get(is, version);
    if (version != 1) throw IoError("unsupported checkpoint version");
    detail_io::get(is, variant);
    std::int32_t in_h, in_w, dim, num_classes;
    detail_io::get(is, in_h);
    detail_io::get(is, in_w);
    detail_io::get(is, dim);
    detail_io::get(is, num_classes);
    ReIDModel m;
    m.variant = static_cast<ModelVariant>(variant);
    m.num_classes = num_classes;
    detail_io::get(is, m.train_seed);
    detail_io::get(is, m.holdout_rank1);
    Rng dummy(0);
    m.net = EmbeddingNet(in_h, in_w, dim, dummy);
    for (int i = 0; i < EmbeddingNet::kBlocks; ++i) {
        detail_io::get_vec(is, m.net.convs_[i].w);
        detail_io::get_vec(is, m.net.convs_[i].b);
    }
    detail_io::get_vec(is, m.net.fc_.w);
    detail_io::get_vec(is, m.net.fc_.b);
    m.classifier.in_d = dim;
    m.classifier.out_d = num_classes;
    detail_io::get_vec(is, m.classifier.w);
    detail_io::get_vec(is, m.classifier.b);
    detail_io::get_vec(is, m.verifier_w);
    detail_io::get(is, m.verifier_b);
    if (!is) throw IoError("truncated checkpoint: " + path.string());
    return m;
}

// ----- traces and manifests ---------------------------------------------------

inline void write_trace_csv(const std::vector<TracePoint>& trace, const fs::path& path) {
    std::ofstream os(path);
    os << "iteration,loss,gradient_norm\n";
    for (const auto& t : trace)
        os << t.iteration << ',' << t.loss << ',' << t.grad_norm << "\n";
}

// FNV-1a 64 over raw bytes; used for manifest content hashes.
inline std::uint64_t hash_bytes(const void* data, size_t n, std::uint64_t h = 14695981039346656037ull) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t hash_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("hash_file: cannot open " + path.string());
    std::uint64_t h = 14695981039346656037ull;
    char buf[1 << 16];
    while (is.read(buf, sizeof buf) || is.gcount() > 0)
        h = hash_bytes(buf, static_cast<size_t>(is.gcount()), h);
    return h;
}

inline std::uint64_t hash_string(const std::string& s) { return hash_bytes(s.data(), s.size()); }

inline void write_json(const json& j, const fs::path& path) {
    std::ofstream os(path);
    os << j.dump(2) << "\n";
}

inline std::optional<json> read_json(const fs::path& path) {
    std::ifstream is(path);
    if (!is) return std::nullopt;
    try {
        return json::parse(is);
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

}  // namespace advpat::io

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include "deephoyer/errors.hpp"
#include "deephoyer/rng.hpp"
#include "deephoyer/tensor.hpp"

// MNIST IDX ingestion and synthetic fixtures. Pixels are scaled to [0,1] on
// load; normalization to zero mean / unit variance is a separate step so the
// test split can reuse the training split's statistics.

namespace deephoyer {

struct Dataset {
    Tensor images;            // [N x 1 x 28 x 28]
    std::vector<int> labels;  // in [0, 9]
    double norm_mean = 0.0;
    double norm_std = 1.0;
    bool normalized = false;

    size_t size() const { return labels.size(); }
};

struct NormStats {
    double mean = 0.0;
    double std = 1.0;
};

namespace detail {

inline std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return bytes;
}

inline uint32_t read_be32(const std::vector<uint8_t>& b, size_t offset, const std::string& path) {
    if (offset + 4 > b.size()) {
        throw FormatError(path + ": truncated at offset " + std::to_string(offset) +
                          " (wanted 4 header bytes)");
    }
    return (uint32_t(b[offset]) << 24) | (uint32_t(b[offset + 1]) << 16) |
           (uint32_t(b[offset + 2]) << 8) | uint32_t(b[offset + 3]);
}

}  // namespace detail

// Reads an IDX image/label file pair (big-endian magic 0x00000803 /
// 0x00000801). Pixel bytes are scaled to [0,1]; call normalize() afterwards.
inline Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    const auto ib = detail::read_file_bytes(images_path);
    const auto lb = detail::read_file_bytes(labels_path);

    const uint32_t imagic = detail::read_be32(ib, 0, images_path);
    if (imagic != 0x00000803u) {
        throw FormatError(images_path + ": bad magic 0x" + [&] {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%08x", imagic);
            return std::string(buf);
        }() + " at offset 0 (expected 00000803)");
    }
    const uint32_t n = detail::read_be32(ib, 4, images_path);
    const uint32_t rows = detail::read_be32(ib, 8, images_path);
    const uint32_t cols = detail::read_be32(ib, 12, images_path);
    const size_t expected = 16 + size_t(n) * rows * cols;
    if (ib.size() < expected) {
        throw FormatError(images_path + ": truncated at offset " + std::to_string(ib.size()) +
                          " (expected " + std::to_string(expected) + " bytes)");
    }

    const uint32_t lmagic = detail::read_be32(lb, 0, labels_path);
    if (lmagic != 0x00000801u) {
        throw FormatError(labels_path + ": bad magic at offset 0 (expected 00000801)");
    }
    const uint32_t ln = detail::read_be32(lb, 4, labels_path);
    if (lb.size() < 8 + size_t(ln)) {
        throw FormatError(labels_path + ": truncated at offset " + std::to_string(lb.size()) +
                          " (expected " + std::to_string(8 + size_t(ln)) + " bytes)");
    }
    if (ln != n) {
        throw FormatError(images_path + " holds " + std::to_string(n) + " images but " +
                          labels_path + " holds " + std::to_string(ln) + " labels");
    }

    Dataset ds;
    ds.images = Tensor({n, 1, rows, cols});
    ds.labels.resize(n);
    for (size_t i = 0; i < size_t(n) * rows * cols; ++i) {
        ds.images[i] = static_cast<double>(ib[16 + i]) / 255.0;
    }
    for (size_t i = 0; i < n; ++i) {
        const int label = lb[8 + i];
        if (label < 0 || label > 9) {
            throw FormatError(labels_path + ": label " + std::to_string(label) +
                              " outside [0,9] at offset " + std::to_string(8 + i));
        }
        ds.labels[i] = label;
    }
    return ds;
}

// Global (single mean/std over all pixels) population statistics.
inline NormStats compute_norm_stats(const Dataset& ds) {
    const size_t n = ds.images.numel();
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) sum += ds.images[i];
    const double mean = sum / static_cast<double>(n);
    double var = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = ds.images[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(n);
    return {mean, std::sqrt(var)};
}

inline void normalize(Dataset& ds, const NormStats& stats) {
    for (size_t i = 0; i < ds.images.numel(); ++i) {
        ds.images[i] = (ds.images[i] - stats.mean) / stats.std;
    }
    ds.norm_mean = stats.mean;
    ds.norm_std = stats.std;
    ds.normalized = true;
}

// Loads the four standard MNIST files from a directory and normalizes both
// splits with the training split's statistics.
inline std::pair<Dataset, Dataset> load_mnist(const std::string& dir) {
    Dataset train = load_mnist_idx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
    Dataset test = load_mnist_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
    const NormStats stats = compute_norm_stats(train);
    normalize(train, stats);
    normalize(test, stats);
    return {std::move(train), std::move(test)};
}

// Well-separated Gaussian blobs shaped like MNIST, for fast pipeline tests.
// Already normalized to zero mean / unit variance globally.
inline Dataset synthetic_blobs(size_t n, int classes, uint64_t seed) {
    if (n == 0) throw ArgumentError("synthetic_blobs needs n > 0");
    if (classes < 2 || classes > 10) throw ArgumentError("synthetic_blobs needs 2..10 classes");
    Rng rng(seed);
    const size_t pixels = 28 * 28;
    std::vector<std::vector<double>> centers(classes, std::vector<double>(pixels));
    for (auto& c : centers) {
        for (double& v : c) v = rng.normal();
    }
    Dataset ds;
    ds.images = Tensor({n, 1, 28, 28});
    ds.labels.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % classes);
        ds.labels[i] = label;
        double* img = ds.images.data() + i * pixels;
        for (size_t p = 0; p < pixels; ++p) img[p] = centers[label][p] + 0.3 * rng.normal();
    }
    normalize(ds, compute_norm_stats(ds));
    return ds;
}

// Copies selected samples into a batch tensor [B x 1 x 28 x 28].
inline std::pair<Tensor, std::vector<int>> gather_batch(const Dataset& ds,
                                                        const std::vector<size_t>& indices) {
    const size_t sample = ds.images.numel() / ds.size();
    std::vector<size_t> shape = ds.images.shape();
    shape[0] = indices.size();
    Tensor x(shape);
    std::vector<int> y(indices.size());
    for (size_t i = 0; i < indices.size(); ++i) {
        const double* src = ds.images.data() + indices[i] * sample;
        std::copy(src, src + sample, x.data() + i * sample);
        y[i] = ds.labels[indices[i]];
    }
    return {std::move(x), std::move(y)};
}

}  // namespace deephoyer

#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

// Locates the MNIST IDX directory: $MNIST_DIR, then ./data/mnist, then
// <source>/data/mnist, then /root/data/mnist. Empty string when not found.
inline std::string find_mnist_dir() {
    std::vector<std::string> candidates;
    if (const char* env = std::getenv("MNIST_DIR")) candidates.push_back(env);
    candidates.push_back("data/mnist");
#ifdef DEEPHOYER_SOURCE_DIR
    candidates.push_back(std::string(DEEPHOYER_SOURCE_DIR) + "/data/mnist");
#endif
    candidates.push_back("/root/data/mnist");
    for (const auto& dir : candidates) {
        if (std::filesystem::exists(dir + "/train-images-idx3-ubyte")) return dir;
    }
    return {};
}

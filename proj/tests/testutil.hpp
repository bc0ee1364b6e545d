#pragma once

#include <filesystem>
#include <string>

#include "nowcast/gridio.hpp"
#include "nowcast/rng.hpp"

namespace nowcast::testutil {

// Unique scratch directory under the build tree, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = (std::filesystem::temp_directory_path() /
                 ("nowcast_" + tag + "_" + std::to_string(counter_++)))
                    .string();
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    const std::string& path() const { return path_; }
    std::string file(const std::string& name) const {
        return (std::filesystem::path(path_) / name).string();
    }

private:
    std::string path_;
    static inline int counter_ = 0;
};

inline GridFrame random_rain_frame(uint32_t rows, uint32_t cols, Rng& rng,
                                   double max_value = 10.0, int64_t timestamp = 0) {
    GridFrame f = make_frame(Variable::RainMmh, timestamp, rows, cols);
    for (float& v : f.values) v = float(rng.uniform(0.0, max_value));
    return f;
}

}  // namespace nowcast::testutil

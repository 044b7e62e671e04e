#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "semfew/feature_store.hpp"

namespace semfew::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter{0};
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() /
                ("semfew_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

/// Gaussian records: `per_class` per class, classes split into base/novel.
inline FeatureCache random_cache(std::size_t base, std::size_t novel, std::size_t per_class, std::size_t dim,
                                 unsigned seed, double spread = 1.0) {
    std::mt19937 rng(seed);
    std::normal_distribution<float> g(0.0F, 1.0F);
    FeatureCacheHeader h;
    h.visual_dim = static_cast<std::uint32_t>(dim);
    h.dataset_name = "random";
    std::vector<FeatureRecord> recs;
    for (std::size_t c = 0; c < base + novel; ++c) {
        std::vector<float> center(dim);
        for (auto& v : center) {
            v = static_cast<float>(spread) * g(rng);
        }
        (c < base ? h.split_table[split::base] : h.split_table[split::novel]).push_back(static_cast<ClassId>(c));
        for (std::size_t i = 0; i < per_class; ++i) {
            FeatureRecord r{static_cast<ClassId>(c), center};
            for (auto& v : r.vector) {
                v += g(rng);
            }
            recs.push_back(std::move(r));
        }
    }
    h.record_count = recs.size();
    return FeatureCache::from_records(h, recs);
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = g(rng);
    }
    return m;
}

} // namespace semfew::testing

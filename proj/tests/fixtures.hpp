#pragma once

// Shared helpers for the unit tests. Random fixtures here deliberately use
// std::mt19937_64 rather than the library's Rng so they stay independent of it.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "dualprobe/core.hpp"

namespace fixtures {

using dualprobe::HiddenVector;
using dualprobe::Label;
using dualprobe::LogitTriple;
using dualprobe::Sample;
using dualprobe::SteeringParams;

inline std::vector<double> gaussian_vec(std::mt19937_64& gen, std::size_t d, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    std::vector<double> v(d);
    for (double& x : v) x = n(gen);
    return v;
}

inline std::vector<Sample> random_samples(std::mt19937_64& gen, std::size_t n, std::size_t d) {
    std::normal_distribution<double> nz(0.0, 1.5);
    std::uniform_int_distribution<int> lab(0, 2);
    std::vector<Sample> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(Sample{"r" + std::to_string(i), "F", HiddenVector(gaussian_vec(gen, d)),
                             LogitTriple(nz(gen), nz(gen), nz(gen)), dualprobe::decode(lab(gen))});
    }
    return out;
}

inline SteeringParams random_params(std::mt19937_64& gen, std::size_t d, double scale = 0.5) {
    SteeringParams p;
    p.v_s = gaussian_vec(gen, d, scale);
    p.v_g = gaussian_vec(gen, d, scale);
    std::normal_distribution<double> n(0.0, scale);
    p.b_s = n(gen);
    p.b_g = n(gen);
    p.mu_raw = n(gen);
    return p;
}

inline LogitTriple random_triple(std::mt19937_64& gen, double scale = 5.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    return LogitTriple(u(gen), u(gen), u(gen));
}

/// Fresh empty directory under the system temp dir; removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("dualprobe_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace fixtures

#pragma once

#include "kge/kg_store.hpp"
#include "kge/rng.hpp"
#include "kge/tensor.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace kge::test {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, float lo = -2.0f, float hi = 2.0f,
                            bool requires_grad = true) {
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    std::uniform_real_distribution<float> u(lo, hi);
    for (float& v : t.data()) v = u(rng);
    return t;
}

inline std::vector<float> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("kge_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Small connected graph: 8 entities, 3 relations, 20 train triplets.
inline TripletStore toy_store() {
    std::vector<TripletStore::NamedTriplet> train = {
        {"e0", "r0", "e1"}, {"e1", "r0", "e2"}, {"e2", "r0", "e3"}, {"e3", "r0", "e4"}, {"e4", "r0", "e5"},
        {"e5", "r1", "e6"}, {"e6", "r1", "e7"}, {"e7", "r1", "e0"}, {"e0", "r1", "e2"}, {"e1", "r1", "e3"},
        {"e2", "r2", "e4"}, {"e3", "r2", "e5"}, {"e4", "r2", "e6"}, {"e5", "r2", "e7"}, {"e6", "r2", "e0"},
        {"e7", "r0", "e1"}, {"e0", "r2", "e3"}, {"e1", "r2", "e5"}, {"e2", "r1", "e6"}, {"e3", "r1", "e7"},
    };
    std::vector<TripletStore::NamedTriplet> valid = {{"e0", "r0", "e2"}, {"e4", "r1", "e5"}};
    std::vector<TripletStore::NamedTriplet> test = {{"e1", "r0", "e4"}, {"e6", "r2", "e2"}, {"e7", "r2", "e3"}};
    return TripletStore::from_named(train, valid, test);
}

inline std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    return out + "'";
}

struct CommandResult {
    int exit_code = -1;
    std::string output; // stdout
    std::string error;  // stderr
};

/// Runs a shell command, capturing stdout and stderr through temp files.
inline CommandResult run_command(const std::string& command) {
    TempDir dir;
    const auto out = dir.path() / "stdout", err = dir.path() / "stderr";
    const std::string full = command + " > " + shell_quote(out.string()) + " 2> " + shell_quote(err.string());
    const int status = std::system(full.c_str());
    CommandResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.output = read_file(out);
    r.error = read_file(err);
    return r;
}

} // namespace kge::test

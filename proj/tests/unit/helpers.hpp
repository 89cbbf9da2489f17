#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "debias/eval.hpp"

namespace testutil {

// Small but learnable task; a few hundred milliseconds per training run.
inline debias::SynthConfig small_data(std::uint64_t seed = 7) {
    debias::SynthConfig c;
    c.train_size = 4000;
    c.test_size = 600;
    c.seed = seed;
    return c;
}

inline debias::ExperimentConfig small_experiment(std::uint64_t seed = 7) {
    debias::ExperimentConfig e;
    e.data = small_data(seed);
    e.train.epochs = 2;
    e.train.teacher_epochs = 2;
    e.train.eval_every = 50;
    e.shallow.sample_size = 300;
    e.shallow.epochs = 3;
    return debias::with_run_seed(e, seed);
}

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("debias-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testutil

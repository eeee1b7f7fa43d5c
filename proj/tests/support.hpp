#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "selpred/records.hpp"

namespace selpred::testing {

// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("selpred-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
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
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

// All regular files below root, keyed by relative path.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
        if (entry.is_regular_file()) {
            files[std::filesystem::relative(entry.path(), root).generic_string()] = read_file(entry.path());
        }
    }
    return files;
}

struct Instance {
    std::vector<double> confidences;
    std::vector<int> labels;
};

// Random labelled confidences drawn from a small value pool so ties are common.
// Both classes are present when n >= 2.
inline Instance random_instance(std::mt19937_64& rng, std::size_t n) {
    std::uniform_int_distribution<int> pool_size(1, static_cast<int>(std::max<std::size_t>(1, n / 2)));
    const int levels = pool_size(rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> pool;
    for (int i = 0; i < levels; ++i) {
        pool.push_back(unit(rng));
    }
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    Instance inst;
    for (std::size_t i = 0; i < n; ++i) {
        inst.confidences.push_back(pool[pick(rng)]);
        inst.labels.push_back(unit(rng) < 0.5 ? 1 : 0);
    }
    if (n >= 2) {
        inst.labels[0] = 1;
        inst.labels[1] = 0;
        std::shuffle(inst.labels.begin(), inst.labels.end(), rng);
    }
    return inst;
}

inline ExampleRecord make_record(std::uint64_t order, std::int64_t gold, std::vector<OptionScore> options,
                                 std::map<std::string, VerifyLogits> verify = {}) {
    ExampleRecord r;
    r.example_id = "ex-" + std::to_string(order);
    r.order_index = order;
    r.gold_index = gold;
    r.options = std::move(options);
    if (verify.empty()) {
        verify["default"] = VerifyLogits{{0.0}, {0.0}, false, std::nullopt};
    }
    r.verify = std::move(verify);
    return r;
}

inline RunManifest make_manifest(std::size_t count, std::vector<std::string> variants = {"default"}) {
    RunManifest m;
    m.dataset_name = "fixture";
    m.dataset_config = "main";
    m.dataset_split = "test";
    m.dataset_revision = "r1";
    m.model_id = "org/model";
    m.seed = 42;
    m.prompt_variants = std::move(variants);
    m.true_token_ids = {10};
    m.false_token_ids = {20};
    m.example_count = count;
    return m;
}

}  // namespace selpred::testing

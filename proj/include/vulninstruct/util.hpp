#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace vulninstruct {

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

// First 16 hex characters (64 bits) of the SHA-256 digest.
std::string hash64_hex(std::string_view data);

std::string trim(std::string_view s);
std::vector<std::string> split_lines(std::string_view text);
std::string to_lower(std::string_view s);

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Seeded generator with portable bounded draws. std::mt19937_64 output is
// fully specified by the standard, the distributions are not, so the helpers
// below avoid <random> distributions to keep artifacts identical across
// standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound);

    // Uniform double in [0, 1).
    double uniform();

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// Derives an independent stream seed from a base seed and a string key.
std::uint64_t derive_seed(std::uint64_t base, std::string_view key);

} // namespace vulninstruct

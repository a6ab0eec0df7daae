#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace mspipe {

/// Writes via a sibling temp file and renames into place, so readers
/// never observe a half-written artifact.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);

std::string read_file(const std::filesystem::path& path);

std::uint64_t fnv1a(const void* data, std::size_t n,
                    std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(const std::string& s);
std::uint64_t hash_file(const std::filesystem::path& path);

/// Runs fn(i) for i in [0, n). With jobs > 1 the work is divided over
/// worker threads; each index is visited exactly once, so the call is
/// deterministic as long as fn writes only to the slot for its index.
void parallel_for(std::size_t n, int jobs,
                  const std::function<void(std::size_t)>& fn);

}  // namespace mspipe

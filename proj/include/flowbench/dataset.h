#ifndef FLOWBENCH_DATASET_H_
#define FLOWBENCH_DATASET_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "flowbench/datamodel.h"

namespace flowbench {

inline constexpr std::string_view kEpisodeExtension = ".ep";
inline constexpr std::string_view kScenarioExtension = ".scn";
inline constexpr std::string_view kManifestName = "manifest.tsv";

std::string ReadFile(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path, std::string_view bytes);

std::string Sha256Hex(std::string_view bytes);

// Episode files (*.ep) in `dir`, sorted by file name.
std::vector<std::filesystem::path> ListEpisodeFiles(const std::filesystem::path& dir);
std::vector<Episode> LoadEpisodes(const std::filesystem::path& dir);
std::filesystem::path WriteEpisode(const std::filesystem::path& dir, const Episode& e);

// Writes "<sha256>\t<file name>" for every episode and scenario file in `dir`.
void WriteManifest(const std::filesystem::path& dir);
// Returns the names of files whose hash does not match (empty when intact).
std::vector<std::string> VerifyManifest(const std::filesystem::path& dir);

}  // namespace flowbench

#endif  // FLOWBENCH_DATASET_H_

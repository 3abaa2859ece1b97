#include "flowbench/dataset.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "flowbench/error.h"

namespace flowbench {

namespace fs = std::filesystem;

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, fmt::format("cannot write '{}'", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, fmt::format("write to '{}' failed", path.string()));
}

std::string Sha256Hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIoError, "sha256 digest failed");
  }
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::vector<fs::path> ListEpisodeFiles(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kIoError, fmt::format("'{}' is not a directory", dir.string()));
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == kEpisodeExtension) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  return files;
}

std::vector<Episode> LoadEpisodes(const fs::path& dir) {
  std::vector<Episode> out;
  for (const auto& file : ListEpisodeFiles(dir)) {
    try {
      out.push_back(DeserializeEpisode(ReadFile(file)));
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("{}: {}", file.filename().string(), e.detail()), e.line());
    }
  }
  return out;
}

fs::path WriteEpisode(const fs::path& dir, const Episode& e) {
  const fs::path path = dir / (e.id + std::string(kEpisodeExtension));
  WriteFile(path, SerializeEpisode(e));
  return path;
}

void WriteManifest(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension().string();
    if (entry.is_regular_file() && (ext == kEpisodeExtension || ext == kScenarioExtension)) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& file : files) {
    out += fmt::format("{}\t{}\n", Sha256Hex(ReadFile(file)), file.filename().string());
  }
  WriteFile(dir / kManifestName, out);
}

std::vector<std::string> VerifyManifest(const fs::path& dir) {
  std::vector<std::string> bad;
  std::istringstream in(ReadFile(dir / kManifestName));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      bad.push_back(line);
      continue;
    }
    const std::string name = line.substr(tab + 1);
    const fs::path file = dir / name;
    if (!fs::exists(file) || Sha256Hex(ReadFile(file)) != line.substr(0, tab)) bad.push_back(name);
  }
  return bad;
}

}  // namespace flowbench

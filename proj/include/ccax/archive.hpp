#pragma once

#include "ccax/feature_matrix.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ccax {

inline constexpr std::string_view kArchiveMagic = "CCAXARC1";

/// Key=value manifest plus named FMAT1 blobs, stored in one file.
///
/// Entries keep insertion order so that saving the same archive twice gives
/// identical bytes.
class ModelArchive {
 public:
  void set(std::string key, std::string value);
  void set(std::string key, double value);
  void set(std::string key, long long value);
  bool has(std::string_view key) const;
  const std::string& get(std::string_view key) const;
  double get_double(std::string_view key) const;
  long long get_int(std::string_view key) const;

  void add_blob(std::string name, FeatureMatrix blob);
  bool has_blob(std::string_view name) const;
  const FeatureMatrix& blob(std::string_view name) const;

  const std::vector<std::pair<std::string, std::string>>& manifest() const { return manifest_; }
  const std::vector<std::pair<std::string, FeatureMatrix>>& blobs() const { return blobs_; }

  std::string manifest_text() const;

 private:
  std::vector<std::pair<std::string, std::string>> manifest_;
  std::vector<std::pair<std::string, FeatureMatrix>> blobs_;
};

/// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

void save_archive(const ModelArchive& archive, const std::filesystem::path& path);
ModelArchive load_archive(const std::filesystem::path& path);

}  // namespace ccax

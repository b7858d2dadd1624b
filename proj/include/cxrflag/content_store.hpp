#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace cxrflag {

std::string sha256_hex(std::string_view data);

// Directory of JSON documents addressed by a hex digest:
// <root>/<first two hex chars>/<digest>.json. Writes go to a unique temporary
// file that is renamed into place, so concurrent writers of one key never
// expose a partial document.
class ContentStore {
 public:
  explicit ContentStore(std::filesystem::path root);

  std::optional<nlohmann::json> get(const std::string& digest) const;
  void put(const std::string& digest, const nlohmann::json& document) const;
  bool contains(const std::string& digest) const;
  std::filesystem::path path_for(const std::string& digest) const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

}  // namespace cxrflag

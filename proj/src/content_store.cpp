#include "cxrflag/content_store.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "cxrflag/errors.hpp"

namespace cxrflag {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

ContentStore::ContentStore(fs::path root) : root_(std::move(root)) {}

fs::path ContentStore::path_for(const std::string& digest) const {
  if (digest.size() < 3) throw Error("digest too short: " + digest);
  return root_ / digest.substr(0, 2) / (digest + ".json");
}

bool ContentStore::contains(const std::string& digest) const {
  return fs::exists(path_for(digest));
}

std::optional<nlohmann::json> ContentStore::get(const std::string& digest) const {
  const auto path = path_for(digest);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt cache entry " + path.string() + ": " + e.what());
  }
}

void ContentStore::put(const std::string& digest, const nlohmann::json& document) const {
  static std::atomic<unsigned long> counter{0};
  const auto path = path_for(digest);
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error("cannot create cache directory " + path.parent_path().string());
  std::ostringstream tmp_name;
  tmp_name << path.filename().string() << ".tmp." << std::this_thread::get_id() << '.'
           << counter.fetch_add(1);
  const auto tmp = path.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cache entry " + tmp.string());
    out << document.dump(2) << '\n';
    if (!out) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot publish cache entry " + path.string() + ": " + ec.message());
  }
}

}  // namespace cxrflag

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

namespace gps {

// Incremental SHA-256; digest is lowercase hex.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view bytes);
  // Length-prefixed update, so ["ab","c"] and ["a","bc"] hash differently.
  Sha256& update_field(std::string_view bytes);
  std::string hex_digest();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace gps

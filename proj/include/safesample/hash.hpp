#pragma once

#include <string>
#include <string_view>

namespace safesample {

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Incremental SHA-256. Fields fed through `field()` are length-prefixed so
/// that ("ab","c") and ("a","bc") hash differently.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view data);
  Sha256& field(std::string_view data);
  std::string hex_digest();

 private:
  void* ctx_;
};

}  // namespace safesample

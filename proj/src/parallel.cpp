#include "permucate/parallel.hpp"

#include "permucate/errors.hpp"

#include <charconv>
#include <cstdlib>
#include <string>
#include <string_view>

namespace permucate {

int workers_from_env() {
  const char* raw = std::getenv("PERMUCATE_WORKERS");
  if (raw == nullptr || *raw == '\0') {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }
  const std::string_view text(raw);
  int value = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() || value < 1)
    throw ConfigError("PERMUCATE_WORKERS must be a positive integer, got '" + std::string(text) + "'");
  return value;
}

}  // namespace permucate

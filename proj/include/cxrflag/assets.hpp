#pragma once

#include <optional>
#include <string_view>

// Text assets compiled into the library from data/.
namespace cxrflag::assets {

std::optional<std::string_view> find(std::string_view name);

}  // namespace cxrflag::assets

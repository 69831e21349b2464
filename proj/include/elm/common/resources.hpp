#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace elm::resources {

// Text of a file under resources/, by relative path (e.g. "judge/discriminator.txt").
std::string_view get(std::string_view name);
std::vector<std::string_view> names();

}  // namespace elm::resources

#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

namespace clpoison {

/// Writes via a temp file in the target directory and renames into place, so
/// readers never observe a partially written artifact.
void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer);

std::ifstream open_input(const std::filesystem::path& path);

}  // namespace clpoison

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "clpoison/corpus.hpp"

namespace clpoison::testing {

inline Example make_example(const std::string& text, int label = 0) {
  Example e;
  e.label = label;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) e.tokens.push_back(tok);
  return e;
}

inline Dataset make_dataset(const std::vector<std::pair<std::string, int>>& rows,
                            std::vector<std::string> class_names = {"0", "1"}) {
  Dataset d;
  d.class_names = std::move(class_names);
  d.class_count = static_cast<int>(d.class_names.size());
  for (const auto& [text, label] : rows) d.examples.push_back(make_example(text, label));
  return d;
}

/// Unique scratch directory under the build tree.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("clpoison_test_" + name);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

}  // namespace clpoison::testing

#include "clpoison/io.hpp"

#include <unistd.h>

#include <cstdio>
#include <system_error>

#include "clpoison/error.hpp"

namespace clpoison {

void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer) {
  namespace fs = std::filesystem;
  fs::path dir = path.parent_path();
  if (dir.empty()) dir = ".";
  fs::path tmp = dir / (path.filename().string() + ".tmp." +
                        std::to_string(static_cast<unsigned long>(::getpid())));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + tmp.string());
    writer(out);
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error("write failed: " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("rename failed for: " + path.string());
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open: " + path.string());
  return in;
}

}  // namespace clpoison

#include "leanloc/fileio.hpp"

#include <fstream>
#include <sstream>

#include "leanloc/error.hpp"

namespace leanloc {

namespace fs = std::filesystem;

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_atomic(const fs::path& file, const std::string& text) {
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
    out << text;
    if (!out) fail(ErrorKind::Io, "failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, file, ec);
  if (ec) fail(ErrorKind::Io, "cannot move " + tmp.string() + " to " + file.string() + ": " + ec.message());
}

}  // namespace leanloc

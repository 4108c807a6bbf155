#include <set>
#include <sstream>

#include "mript/dataio.hpp"
#include "mript/fileutil.hpp"

namespace mript::dataio {
namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line, std::size_t lineno) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) {
    fail(ErrorCode::kInvalidArgument,
         "manifest line " + std::to_string(lineno) + ": unterminated quote");
  }
  return fields;
}

}  // namespace

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  fail(ErrorCode::kInvalidArgument, "unknown split '" + std::string(name) + "'");
}

Manifest::Manifest(std::vector<ManifestRecord> records) : records_(std::move(records)) {
  std::set<std::string> seen;
  for (const auto& r : records_) {
    if (r.path.empty()) fail(ErrorCode::kInvalidArgument, "manifest path is empty");
    if (!seen.insert(r.path).second) {
      fail(ErrorCode::kInvalidArgument, "duplicate manifest path '" + r.path + "'");
    }
  }
}

Manifest Manifest::load(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t lineno = 0;
  std::vector<ManifestRecord> records;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') {
      fail(ErrorCode::kInvalidArgument, path.string() + ": manifest must use LF line endings");
    }
    if (lineno == 1) {
      if (line != "path,split") {
        fail(ErrorCode::kInvalidArgument, path.string() + ": manifest header must be 'path,split'");
      }
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split_csv_line(line, lineno);
    if (fields.size() != 2) {
      fail(ErrorCode::kInvalidArgument,
           path.string() + ": line " + std::to_string(lineno) + " must have 2 fields");
    }
    records.push_back({fields[0], parse_split(fields[1])});
  }
  if (lineno == 0) fail(ErrorCode::kInvalidArgument, path.string() + ": empty manifest");
  Manifest m(std::move(records));
  m.base_dir_ = path.parent_path();
  for (const auto& r : m.records_) {
    const std::filesystem::path p = std::filesystem::path(r.path).is_absolute()
                                        ? std::filesystem::path(r.path)
                                        : m.base_dir_ / r.path;
    if (!std::filesystem::exists(p)) {
      fail(ErrorCode::kIo, path.string() + ": referenced file does not exist: " + p.string());
    }
  }
  return m;
}

std::string Manifest::to_csv() const {
  std::string out = "path,split\n";
  for (const auto& r : records_) {
    out += csv_field(r.path);
    out += ',';
    out += split_name(r.split);
    out += '\n';
  }
  return out;
}

void Manifest::save(const std::filesystem::path& path) const { write_text_atomic(path, to_csv()); }

std::vector<std::filesystem::path> Manifest::paths(Split split) const {
  std::vector<std::filesystem::path> out;
  for (const auto& r : records_) {
    if (r.split != split) continue;
    const std::filesystem::path p(r.path);
    out.push_back(p.is_absolute() ? p : base_dir_ / p);
  }
  return out;
}

std::vector<ImageTensor> load_split(const Manifest& manifest, Split split, std::size_t size) {
  std::vector<ImageTensor> out;
  for (const auto& p : manifest.paths(split)) {
    try {
      out.push_back(preprocess(load_image(p), size));
    } catch (const Error& e) {
      const std::string msg = e.what();
      throw Error(e.code(), msg.rfind(p.string(), 0) == 0 ? msg : p.string() + ": " + msg);
    }
  }
  return out;
}

}  // namespace mript::dataio

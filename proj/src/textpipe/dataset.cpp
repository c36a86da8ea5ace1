#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "xdd/error.hpp"
#include "xdd/textpipe.hpp"

namespace xdd::text {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

[[noreturn]] void row_error(std::string_view source, std::size_t row, const std::string& what) {
  throw ParseError(std::string(source) + ": row " + std::to_string(row) + ": " + what);
}

void add_row(Dataset& ds, RawPost post) {
  if (post.label) {
    ++ds.class_counts[index_of(*post.label)];
  } else {
    ++ds.unlabeled;
  }
  ds.rows.push_back(std::move(post));
}

std::optional<ClassLabel> resolve_label(const LabelAliases& aliases, std::string_view token,
                                        std::string_view source, std::size_t row) {
  if (token.find_first_not_of(" \t\r") == std::string_view::npos) return std::nullopt;
  auto label = aliases.resolve(token);
  if (!label) row_error(source, row, "unknown label '" + std::string(token) + "'");
  return label;
}

bool header_matches(std::string_view field, std::initializer_list<std::string_view> names) {
  const auto f = lower(field);
  return std::any_of(names.begin(), names.end(), [&](std::string_view n) { return f == n; });
}

}  // namespace

DatasetFormat parse_dataset_format(std::string_view name) {
  const auto n = lower(name);
  if (n == "tsv") return DatasetFormat::tsv;
  if (n == "jsonl") return DatasetFormat::jsonl;
  throw ConfigError("unknown dataset format '" + std::string(name) + "' (expected tsv or jsonl)");
}

DatasetFormat format_from_extension(const std::filesystem::path& path) {
  const auto ext = lower(path.extension().string());
  return (ext == ".jsonl" || ext == ".json") ? DatasetFormat::jsonl : DatasetFormat::tsv;
}

std::string escape_tsv_field(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\\': out += "\\\\"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_tsv_field(std::string_view escaped) {
  std::string out;
  out.reserve(escaped.size());
  for (std::size_t i = 0; i < escaped.size(); ++i) {
    char c = escaped[i];
    if (c == '\\' && i + 1 < escaped.size()) {
      const char n = escaped[i + 1];
      if (n == 't' || n == 'n' || n == 'r' || n == '\\') {
        out += n == 't' ? '\t' : n == 'n' ? '\n' : n == 'r' ? '\r' : '\\';
        ++i;
        continue;
      }
    }
    out += c;
  }
  return out;
}

Dataset parse_tsv(std::istream& in, const LabelAliases& aliases, std::string_view source) {
  Dataset ds;
  std::string line;
  std::size_t row = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!saw_header) {
      const auto fields = split_tabs(line);
      if (fields.size() != 3 || !header_matches(fields[0], {"pid", "id", "post_id"}) ||
          !header_matches(fields[1], {"text", "text_data"}) ||
          !header_matches(fields[2], {"label", "class"})) {
        row_error(source, row, "expected header 'pid<TAB>text<TAB>label'");
      }
      saw_header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3) {
      row_error(source, row,
                "expected 3 columns, found " + std::to_string(fields.size()) +
                    (fields.size() > 3 ? " (unexpected column 4)"
                                       : " (missing column " + std::to_string(fields.size() + 1) +
                                             ")"));
    }
    if (fields[0].empty()) row_error(source, row, "column 1 (pid) is empty");
    RawPost post;
    post.post_id = std::string(fields[0]);
    post.text = unescape_tsv_field(fields[1]);
    post.label = resolve_label(aliases, fields[2], source, row);
    add_row(ds, std::move(post));
  }
  if (!saw_header) row_error(source, 1, "missing header");
  return ds;
}

Dataset parse_jsonl(std::istream& in, const LabelAliases& aliases, std::string_view source) {
  Dataset ds;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      row_error(source, row, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) row_error(source, row, "expected a JSON object");
    auto field = [&](const char* name, bool required) -> std::optional<std::string> {
      auto it = obj.find(name);
      if (it == obj.end() || it->is_null()) {
        if (required) row_error(source, row, std::string("missing field '") + name + "'");
        return std::nullopt;
      }
      if (!it->is_string()) row_error(source, row, std::string("field '") + name + "' must be a string");
      return it->get<std::string>();
    };
    RawPost post;
    post.post_id = *field("pid", true);
    post.text = *field("text", true);
    if (auto label = field("label", false)) {
      post.label = resolve_label(aliases, *label, source, row);
    }
    add_row(ds, std::move(post));
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                     const LabelAliases& aliases) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open dataset " + path.string());
  const auto source = path.string();
  return format == DatasetFormat::tsv ? parse_tsv(in, aliases, source)
                                      : parse_jsonl(in, aliases, source);
}

void write_tsv(std::ostream& out, std::span<const RawPost> rows) {
  out << "pid\ttext\tlabel\n";
  for (const auto& r : rows) {
    out << r.post_id << '\t' << escape_tsv_field(r.text) << '\t'
        << (r.label ? canonical_name(*r.label) : std::string_view{}) << '\n';
  }
}

}  // namespace xdd::text

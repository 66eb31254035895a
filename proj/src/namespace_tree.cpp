#include "fedgate/namespace_tree.hpp"

namespace fedgate {

Mode Mode::parse(std::string_view text) {
  if (text.size() == 9) {
    static constexpr std::string_view kLetters = "rwxrwxrwx";
    std::uint16_t bits = 0;
    for (std::size_t i = 0; i < 9; ++i) {
      if (text[i] == kLetters[i]) {
        bits |= static_cast<std::uint16_t>(1u << (8 - i));
      } else if (text[i] != '-') {
        throw Error(ErrorCode::ParseError, "bad symbolic mode '" + std::string(text) + "'");
      }
    }
    return Mode(bits);
  }
  if (text.empty() || text.size() > 4) {
    throw Error(ErrorCode::ParseError, "bad mode '" + std::string(text) + "'");
  }
  std::uint16_t bits = 0;
  for (char c : text) {
    if (c < '0' || c > '7') throw Error(ErrorCode::ParseError, "bad octal mode '" + std::string(text) + "'");
    bits = static_cast<std::uint16_t>(bits * 8 + (c - '0'));
  }
  if (bits > 0777) throw Error(ErrorCode::ParseError, "mode out of range '" + std::string(text) + "'");
  return Mode(bits);
}

bool Mode::grants(Class cls, OpKind op) const {
  int bit = 0;
  switch (op) {
    case OpKind::Read: bit = 2; break;
    case OpKind::Write: bit = 1; break;
    case OpKind::Execute: bit = 0; break;
    case OpKind::Admin: return false;
  }
  return (bits_ >> (static_cast<int>(cls) + bit)) & 1u;
}

std::string Mode::symbolic() const {
  std::string out = "rwxrwxrwx";
  for (int i = 0; i < 9; ++i) {
    if (!((bits_ >> (8 - i)) & 1u)) out[static_cast<std::size_t>(i)] = '-';
  }
  return out;
}

void require_normalized(std::string_view path) {
  if (path.empty() || path.front() != '/') {
    throw Error(ErrorCode::InvalidArgument, "path must be absolute: '" + std::string(path) + "'");
  }
  if (path == "/") return;
  if (path.back() == '/') {
    throw Error(ErrorCode::InvalidArgument, "trailing slash in '" + std::string(path) + "'");
  }
  std::size_t start = 1;
  while (start <= path.size()) {
    auto end = path.find('/', start);
    if (end == std::string_view::npos) end = path.size();
    auto part = path.substr(start, end - start);
    if (part.empty() || part == "." || part == "..") {
      throw Error(ErrorCode::InvalidArgument, "path not normalized: '" + std::string(path) + "'");
    }
    start = end + 1;
  }
}

std::optional<std::string> parent_path(std::string_view path) {
  if (path == "/") return std::nullopt;
  auto slash = path.rfind('/');
  if (slash == 0) return std::string("/");
  return std::string(path.substr(0, slash));
}

std::vector<std::string> path_chain(std::string_view path) {
  std::vector<std::string> chain{"/"};
  if (path == "/") return chain;
  for (std::size_t pos = path.find('/', 1); pos != std::string_view::npos;
       pos = path.find('/', pos + 1)) {
    chain.emplace_back(path.substr(0, pos));
  }
  chain.emplace_back(path);
  return chain;
}

NamespaceTree::NamespaceTree(FileAttrs rootAttrs) {
  Inode root;
  root.isDirectory = true;
  root.attrs = std::move(rootAttrs);
  entries_.emplace("/", std::move(root));
}

bool NamespaceTree::exists(std::string_view path) const { return entries_.find(path) != entries_.end(); }

const Inode& NamespaceTree::at(std::string_view path) const {
  auto it = entries_.find(path);
  if (it == entries_.end()) throw Error(ErrorCode::NoSuchPath, std::string(path));
  return it->second;
}

Inode& NamespaceTree::at(std::string_view path) {
  auto it = entries_.find(path);
  if (it == entries_.end()) throw Error(ErrorCode::NoSuchPath, std::string(path));
  return it->second;
}

Inode& NamespaceTree::insert(const std::string& path, Inode inode) {
  require_normalized(path);
  if (exists(path)) throw Error(ErrorCode::FileExists, path);
  auto parent = parent_path(path);
  const auto& dir = at(*parent);
  if (!dir.isDirectory) throw Error(ErrorCode::ParentNotDirectory, *parent);
  return entries_.emplace(path, std::move(inode)).first->second;
}

}  // namespace fedgate

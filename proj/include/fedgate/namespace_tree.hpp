#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fedgate/policy_model.hpp"

namespace fedgate {

/// POSIX-style permission bits: owner, group and other rwx triples.
class Mode {
 public:
  enum class Class : std::uint8_t { Owner = 6, Group = 3, Other = 0 };

  constexpr Mode() = default;
  constexpr explicit Mode(std::uint16_t bits) : bits_(bits & 0777) {}

  /// Accepts octal ("750") or symbolic ("rwxr-x---") notation.
  static Mode parse(std::string_view text);

  [[nodiscard]] constexpr std::uint16_t bits() const { return bits_; }
  /// Read/Write/Execute map to r/w/x; Admin is never granted by mode bits.
  [[nodiscard]] bool grants(Class cls, OpKind op) const;
  [[nodiscard]] std::string symbolic() const;

  bool operator==(const Mode&) const = default;

 private:
  std::uint16_t bits_ = 0755;
};

struct AclEntry {
  PrincipalId principal;
  std::set<OpKind> ops;
  Effect effect = Effect::Allow;

  bool operator==(const AclEntry&) const = default;
};

struct FileAttrs {
  std::string owner;
  std::string group;
  Mode mode;
  std::vector<AclEntry> extraAcl;

  bool operator==(const FileAttrs&) const = default;
};

struct Inode {
  bool isDirectory = false;
  FileAttrs attrs;
  /// Classification labels matched by tag-based central policies.
  std::set<std::string> tags;
  double sizeMB = 0.0;
  std::vector<std::string> blocks;
};

/// Throws InvalidArgument unless the path is absolute and has no empty,
/// "." or ".." components and no trailing slash.
void require_normalized(std::string_view path);

/// "/" for "/a", "/a" for "/a/b". Root has no parent.
std::optional<std::string> parent_path(std::string_view path);

/// Every proper ancestor from "/" downwards, then the path itself.
std::vector<std::string> path_chain(std::string_view path);

/// Directory and file hierarchy of one namespace, keyed by absolute path.
class NamespaceTree {
 public:
  explicit NamespaceTree(FileAttrs rootAttrs = {"hdfs", "supergroup", Mode(0755), {}});

  [[nodiscard]] bool exists(std::string_view path) const;
  [[nodiscard]] const Inode& at(std::string_view path) const;
  Inode& at(std::string_view path);

  /// Inserts an entry under an existing directory. Throws FileExists,
  /// NoSuchPath or ParentNotDirectory.
  Inode& insert(const std::string& path, Inode inode);

  [[nodiscard]] const std::map<std::string, Inode, std::less<>>& entries() const {
    return entries_;
  }

 private:
  std::map<std::string, Inode, std::less<>> entries_;
};

}  // namespace fedgate

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace splitgan::split {

/// Lineage of classes created by splits. Ids are never reused; the sorted
/// leaf set is the label alphabet currently in use.
class ClassTree {
 public:
  struct Node {
    std::int32_t id;
    std::int32_t parent;  // -1 for an initial class
    std::int64_t created_iteration;
  };

  ClassTree() = default;
  explicit ClassTree(std::size_t n_initial_classes);

  std::array<std::int32_t, 2> split(std::int32_t parent, std::int64_t iteration);

  bool is_leaf(std::int32_t id) const;
  const std::vector<std::int32_t>& leaves() const { return leaves_; }
  std::int32_t parent_of(std::int32_t id) const;  // -1 for roots
  /// True when `id` equals `ancestor` or sits below it.
  bool descends_from(std::int32_t id, std::int32_t ancestor) const;

  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::int32_t next_id() const { return next_id_; }

  std::string serialize() const;
  static ClassTree deserialize(const std::string& text);

 private:
  std::vector<Node> nodes_;       // indexed by id
  std::vector<std::int32_t> leaves_;  // sorted
  std::int32_t next_id_ = 0;
};

}  // namespace splitgan::split

#include "splitgan/class_tree.hpp"

#include <algorithm>
#include <sstream>

#include "splitgan/errors.hpp"

namespace splitgan::split {

ClassTree::ClassTree(std::size_t n_initial_classes) {
  if (n_initial_classes == 0) throw ContractError("class tree: need at least one class");
  for (std::size_t i = 0; i < n_initial_classes; ++i) {
    nodes_.push_back(Node{static_cast<std::int32_t>(i), -1, 0});
    leaves_.push_back(static_cast<std::int32_t>(i));
  }
  next_id_ = static_cast<std::int32_t>(n_initial_classes);
}

std::array<std::int32_t, 2> ClassTree::split(std::int32_t parent, std::int64_t iteration) {
  if (!is_leaf(parent))
    throw ContractError("class tree: class " + std::to_string(parent) +
                        " is not an active leaf");
  const std::array<std::int32_t, 2> children{next_id_, next_id_ + 1};
  next_id_ += 2;
  nodes_.push_back(Node{children[0], parent, iteration});
  nodes_.push_back(Node{children[1], parent, iteration});
  leaves_.erase(std::lower_bound(leaves_.begin(), leaves_.end(), parent));
  leaves_.push_back(children[0]);  // fresh ids exceed everything present
  leaves_.push_back(children[1]);
  return children;
}

bool ClassTree::is_leaf(std::int32_t id) const {
  return std::binary_search(leaves_.begin(), leaves_.end(), id);
}

std::int32_t ClassTree::parent_of(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw ContractError("class tree: unknown class " + std::to_string(id));
  return nodes_[id].parent;
}

bool ClassTree::descends_from(std::int32_t id, std::int32_t ancestor) const {
  while (id >= 0) {
    if (id == ancestor) return true;
    id = parent_of(id);
  }
  return false;
}

std::string ClassTree::serialize() const {
  std::ostringstream os;
  os << "nodes=" << nodes_.size() << " next=" << next_id_ << "\n";
  for (const Node& n : nodes_)
    os << n.id << ' ' << n.parent << ' ' << n.created_iteration << "\n";
  return os.str();
}

ClassTree ClassTree::deserialize(const std::string& text) {
  std::istringstream is(text);
  std::string nodes_kv, next_kv;
  is >> nodes_kv >> next_kv;
  if (nodes_kv.rfind("nodes=", 0) != 0 || next_kv.rfind("next=", 0) != 0)
    throw ParseError("class tree: bad header");
  const std::size_t count = std::stoul(nodes_kv.substr(6));
  ClassTree t;
  t.next_id_ = static_cast<std::int32_t>(std::stol(next_kv.substr(5)));
  std::vector<bool> has_child;
  for (std::size_t i = 0; i < count; ++i) {
    Node n{};
    is >> n.id >> n.parent >> n.created_iteration;
    if (!is) throw ParseError("class tree: truncated node list");
    if (n.id != static_cast<std::int32_t>(i))
      throw ParseError("class tree: ids must be dense and ordered");
    t.nodes_.push_back(n);
    has_child.push_back(false);
    if (n.parent >= 0) has_child[n.parent] = true;
  }
  for (std::size_t i = 0; i < count; ++i)
    if (!has_child[i]) t.leaves_.push_back(static_cast<std::int32_t>(i));
  return t;
}

}  // namespace splitgan::split

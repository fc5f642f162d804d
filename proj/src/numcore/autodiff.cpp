#include "gefm/numcore/autodiff.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

namespace gefm::num {

using detail::Node;

Tensor Gradients::of(const Tensor& leaf) const {
  if (const auto* g = find(leaf)) return Tensor::from(leaf.shape(), *g);
  return Tensor::zeros(leaf.shape());
}

const std::vector<double>* Gradients::find(const Tensor& leaf) const {
  auto it = grads_.find(leaf.id());
  return it == grads_.end() ? nullptr : &it->second;
}

Gradients backward(const Tensor& root) {
  if (!root.defined() || root.numel() != 1) {
    throw ShapeError("backward: root must be a scalar, got " +
                     (root.defined() ? shape_str(root.shape()) : std::string("undefined")));
  }
  Gradients result;
  if (!root.requires_grad()) return result;

  // Iterative post-order DFS yields a topological order (parents first).
  std::vector<const Node*> order;
  std::unordered_set<const Node*> visited;
  std::vector<std::pair<const Node*, std::size_t>> stack{{root.id(), 0}};
  visited.insert(root.id());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      const Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  std::unordered_map<const Node*, std::vector<double>> grads;
  grads[root.id()] = {1.0};
  std::vector<std::vector<double>*> parent_bufs;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Node* node = *it;
    auto found = grads.find(node);
    if (found == grads.end()) continue;
    if (node->parents.empty()) continue;  // leaf
    if (!node->recorded || !node->backward) {
      throw std::logic_error(std::string("backward: unrecorded op '") + node->op + "' in graph");
    }
    const auto& g = found->second;  // element references survive rehashing
    parent_bufs.assign(node->parents.size(), nullptr);
    for (std::size_t i = 0; i < node->parents.size(); ++i) {
      const Node* p = node->parents[i].get();
      if (!p->requires_grad) continue;
      auto& buf = grads[p];
      if (buf.empty()) buf.assign(p->data.size(), 0.0);
      parent_bufs[i] = &buf;
    }
    node->backward(*node, g, parent_bufs);
  }

  for (auto& [node, g] : grads) {
    if (!node->parents.empty() || node->recorded) continue;
    for (double v : g) {
      if (!std::isfinite(v)) throw NumericalError("non-finite gradient");
    }
    result.grads_.emplace(node, std::move(g));
  }
  return result;
}

}  // namespace gefm::num

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "plan.hpp"

namespace jicplan {

/// Contingent plan compiled into an index-addressed node array with every
/// action reference resolved. Children always have larger indices than
/// their parent, so a reverse sweep visits successors before predecessors.
class PlanTree {
public:
    struct Node {
        Action action;
        std::vector<std::size_t> children;
        std::vector<std::size_t> path;  // alternative indices from the root, inclusive
        std::string branch_id;          // id of the branch point formed after this node
    };

    explicit PlanTree(const ContingentPlan& plan) {
        for (std::size_t k = 0; k < plan.start_alternatives.size(); ++k) {
            std::vector<std::size_t> path{k};
            roots_.push_back(add(plan, plan.start_alternatives[k], path));
        }
    }

    std::span<const std::size_t> roots() const { return roots_; }
    const Node& node(std::size_t i) const { return nodes_[i]; }
    std::size_t size() const { return nodes_.size(); }

private:
    std::size_t add(const ContingentPlan& plan, const PlanNode& src, std::vector<std::size_t>& path) {
        const std::size_t idx = nodes_.size();
        nodes_.push_back(Node{plan.resolve(src.step), {}, path, branch_point_id(path)});
        for (std::size_t k = 0; k < src.alternatives.size(); ++k) {
            path.push_back(k);
            const std::size_t child = add(plan, src.alternatives[k], path);
            path.pop_back();
            nodes_[idx].children.push_back(child);
        }
        return idx;
    }

    std::vector<Node> nodes_;
    std::vector<std::size_t> roots_;
};

/// A decision point handed to an execution policy.
struct BranchPoint {
    std::string_view id;
    std::span<const std::size_t> path;  // empty for the start choice
    std::size_t arity;
};

}  // namespace jicplan

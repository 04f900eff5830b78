// SPDX-License-Identifier: Apache-2.0
#include "eics/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "eics/errors.hpp"

namespace eics {

namespace {

std::unordered_map<std::string, int> node_index_map(const Circuit& c) {
    std::unordered_map<std::string, int> idx;
    idx.reserve(c.nodes.size());
    for (int i = 0; i < static_cast<int>(c.nodes.size()); ++i) {
        idx.emplace(c.nodes[i].id, i);
    }
    return idx;
}

// Nodes reachable from `roots` along directed edges.
std::unordered_set<std::string> reachable_from(
    const Circuit& c, const std::vector<std::string>& roots) {
    std::unordered_map<std::string, std::vector<std::string>> succ;
    for (const auto& e : c.edges) succ[e.src].push_back(e.dst);
    std::unordered_set<std::string> seen;
    std::vector<std::string> stack(roots.begin(), roots.end());
    while (!stack.empty()) {
        std::string u = stack.back();
        stack.pop_back();
        if (!seen.insert(u).second) continue;
        for (const auto& v : succ[u]) stack.push_back(v);
    }
    return seen;
}

} // namespace

ValidationReport validate_circuit(const Circuit& c) {
    ValidationReport report;
    auto add = [&](Violation::Code code, std::string msg) {
        report.violations.push_back({code, std::move(msg)});
    };

    std::unordered_set<std::string> ids;
    for (const auto& n : c.nodes) {
        if (!ids.insert(n.id).second) {
            add(Violation::Code::kDuplicateNode, "duplicate node id '" + n.id + "'");
        }
        if (n.dim < 1) {
            add(Violation::Code::kBadDim,
                "node '" + n.id + "' has dim " + std::to_string(n.dim) + " (must be >= 1)");
        }
    }

    auto idx = node_index_map(c);
    bool endpoints_ok = true;
    for (const auto& e : c.edges) {
        for (const auto* end : {&e.src, &e.dst}) {
            if (!idx.count(*end)) {
                add(Violation::Code::kDanglingEdge,
                    "edge " + e.src + "->" + e.dst + " references unknown node '" + *end + "'");
                endpoints_ok = false;
            }
        }
        if (!e.map.valid()) {
            add(Violation::Code::kShapeMismatch,
                "edge " + e.src + "->" + e.dst + " has no map");
            continue;
        }
        if (idx.count(e.src) && idx.count(e.dst)) {
            const int ds = c.nodes[idx.at(e.src)].dim;
            const int dd = c.nodes[idx.at(e.dst)].dim;
            if (e.map.cols() != ds || e.map.rows() != dd) {
                add(Violation::Code::kShapeMismatch,
                    "edge " + e.src + "->" + e.dst + " map is " +
                        std::to_string(e.map.rows()) + "x" + std::to_string(e.map.cols()) +
                        ", expected " + std::to_string(dd) + "x" + std::to_string(ds));
            }
        }
    }

    if (endpoints_ok) {
        try {
            topological_order(c);
        } catch (const InputError& err) {
            add(Violation::Code::kCycle, err.what());
        }
    }

    if (c.inputs.empty()) add(Violation::Code::kEmptyInputs, "inputs list is empty");
    if (c.outputs.empty()) add(Violation::Code::kEmptyOutputs, "outputs list is empty");
    for (const auto& t : c.inputs) {
        if (!idx.count(t)) {
            add(Violation::Code::kUnknownTerminal, "input '" + t + "' is not a node");
        }
    }
    for (const auto& t : c.outputs) {
        if (!idx.count(t)) {
            add(Violation::Code::kUnknownTerminal, "output '" + t + "' is not a node");
        }
    }

    if (endpoints_ok && !c.inputs.empty()) {
        auto seen = reachable_from(c, c.inputs);
        for (const auto& t : c.outputs) {
            if (idx.count(t) && !seen.count(t)) {
                add(Violation::Code::kUnreachableOutput,
                    "output '" + t + "' is unreachable from the inputs");
            }
        }
    }
    return report;
}

std::vector<std::string> topological_order(const Circuit& c) {
    auto idx = node_index_map(c);
    std::unordered_map<std::string, int> indeg;
    std::unordered_map<std::string, std::vector<std::string>> succ;
    for (const auto& n : c.nodes) indeg[n.id] = 0;
    for (const auto& e : c.edges) {
        if (!idx.count(e.src) || !idx.count(e.dst)) {
            throw InputError("topological_order: edge " + e.src + "->" + e.dst +
                             " references an unknown node");
        }
        ++indeg[e.dst];
        succ[e.src].push_back(e.dst);
    }

    std::set<std::string> ready; // ordered: lexicographic tie-break
    for (const auto& [id, d] : indeg) {
        if (d == 0) ready.insert(id);
    }
    std::vector<std::string> order;
    order.reserve(c.nodes.size());
    while (!ready.empty()) {
        std::string u = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(u);
        for (const auto& v : succ[u]) {
            if (--indeg[v] == 0) ready.insert(v);
        }
    }
    if (order.size() != c.nodes.size()) {
        // Walk the residual graph to name one edge on a cycle.
        std::unordered_set<std::string> remaining;
        for (const auto& [id, d] : indeg) {
            if (d > 0) remaining.insert(id);
        }
        std::string u = *remaining.begin();
        std::unordered_set<std::string> visited;
        std::string cycle_edge = "?";
        while (visited.insert(u).second) {
            for (const auto& v : succ[u]) {
                if (remaining.count(v)) {
                    cycle_edge = u + "->" + v;
                    u = v;
                    break;
                }
            }
        }
        throw InputError("circuit has a cycle through edge " + cycle_edge);
    }
    return order;
}

namespace {

// Forward accumulation shared by macro_jacobian and multi-node parts.
// Seeds each `from` node with an identity block; `from` in-edges are cut.
struct Accumulator {
    const Circuit& c;
    std::vector<std::string> from, to;
    std::unordered_map<std::string, Eigen::Index> from_offset, to_offset;
    Eigen::Index from_dim = 0, to_dim = 0;
    std::vector<std::string> order;
    bool all_dense = true;
    bool path_found = false;

    Accumulator(const Circuit& circuit, std::vector<std::string> f,
                std::vector<std::string> t)
        : c(circuit), from(std::move(f)), to(std::move(t)) {
        auto idx = node_index_map(c);
        for (const auto& id : from) {
            if (!idx.count(id)) throw InputError("macro_jacobian: unknown from-node '" + id + "'");
            if (from_offset.count(id)) throw InputError("macro_jacobian: duplicate from-node '" + id + "'");
            from_offset[id] = from_dim;
            from_dim += c.nodes[idx.at(id)].dim;
        }
        for (const auto& id : to) {
            if (!idx.count(id)) throw InputError("macro_jacobian: unknown to-node '" + id + "'");
            to_offset[id] = to_dim; // duplicates allowed: later offset wins, blocks equal
            to_dim += c.nodes[idx.at(id)].dim;
        }
        if (from.empty() || to.empty()) {
            throw InputError("macro_jacobian: from/to must be nonempty");
        }
        order = topological_order(c);
        for (const auto& e : c.edges) all_dense = all_dense && e.map.is_dense();

        // Path existence (with cut semantics: paths may not pass through
        // another from-node; the trivial path from==to counts).
        std::unordered_map<std::string, std::vector<std::string>> succ;
        for (const auto& e : c.edges) succ[e.src].push_back(e.dst);
        std::unordered_set<std::string> from_set(from.begin(), from.end());
        std::unordered_set<std::string> seen;
        std::vector<std::string> stack(from.begin(), from.end());
        while (!stack.empty()) {
            std::string u = stack.back();
            stack.pop_back();
            if (!seen.insert(u).second) continue;
            for (const auto& v : succ[u]) {
                if (!from_set.count(v)) stack.push_back(v);
            }
        }
        for (const auto& t : to) {
            if (seen.count(t)) path_found = true;
        }
    }

    // Dense blocks T_v = d(a_v)/d(stacked from).
    Eigen::MatrixXd dense() const {
        std::unordered_map<std::string, Eigen::MatrixXd> acc;
        auto idx = node_index_map(c);
        std::unordered_map<std::string, std::vector<const EdgeSpec*>> in_edges;
        for (const auto& e : c.edges) in_edges[e.dst].push_back(&e);

        for (const auto& v : order) {
            const int dv = c.nodes[idx.at(v)].dim;
            auto fo = from_offset.find(v);
            if (fo != from_offset.end()) {
                Eigen::MatrixXd t = Eigen::MatrixXd::Zero(dv, from_dim);
                t.middleCols(fo->second, dv).setIdentity();
                acc[v] = std::move(t);
                continue;
            }
            Eigen::MatrixXd t = Eigen::MatrixXd::Zero(dv, from_dim);
            bool any = false;
            for (const EdgeSpec* e : in_edges[v]) {
                auto it = acc.find(e->src);
                if (it == acc.end()) continue;
                t.noalias() += e->map.matrix() * it->second;
                any = true;
            }
            if (any) acc[v] = std::move(t);
        }

        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(to_dim, from_dim);
        for (const auto& t : to) {
            auto it = acc.find(t);
            if (it != acc.end()) {
                out.middleRows(to_offset.at(t), it->second.rows()) = it->second;
            }
        }
        return out;
    }

    // Matrix-free forward pass: x split over from-blocks, values propagated
    // node by node, outputs stacked.
    Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
        auto idx = node_index_map(c);
        std::unordered_map<std::string, std::vector<const EdgeSpec*>> in_edges;
        for (const auto& e : c.edges) in_edges[e.dst].push_back(&e);
        std::unordered_map<std::string, Eigen::VectorXd> val;
        for (const auto& v : order) {
            const int dv = c.nodes[idx.at(v)].dim;
            auto fo = from_offset.find(v);
            if (fo != from_offset.end()) {
                val[v] = x.segment(fo->second, dv);
                continue;
            }
            Eigen::VectorXd acc;
            for (const EdgeSpec* e : in_edges[v]) {
                auto it = val.find(e->src);
                if (it == val.end()) continue;
                Eigen::VectorXd contrib = e->map.apply(it->second);
                if (acc.size() == 0) {
                    acc = std::move(contrib);
                } else {
                    acc += contrib;
                }
            }
            if (acc.size() != 0) val[v] = std::move(acc);
        }
        Eigen::VectorXd y = Eigen::VectorXd::Zero(to_dim);
        for (const auto& t : to) {
            auto it = val.find(t);
            if (it != val.end()) y.segment(to_offset.at(t), it->second.size()) = it->second;
        }
        return y;
    }

    // Reverse pass with matching cut semantics: cotangents do not propagate
    // past a from-node.
    Eigen::VectorXd reverse(const Eigen::VectorXd& y) const {
        auto idx = node_index_map(c);
        std::unordered_map<std::string, std::vector<const EdgeSpec*>> in_edges;
        for (const auto& e : c.edges) in_edges[e.dst].push_back(&e);
        std::unordered_map<std::string, Eigen::VectorXd> cot;
        for (const auto& t : to) {
            const int dt = c.nodes[idx.at(t)].dim;
            Eigen::VectorXd seed = y.segment(to_offset.at(t), dt);
            auto it = cot.find(t);
            if (it == cot.end()) {
                cot[t] = std::move(seed);
            } else {
                it->second += seed;
            }
        }
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(from_dim);
        for (auto v = order.rbegin(); v != order.rend(); ++v) {
            auto it = cot.find(*v);
            if (it == cot.end()) continue;
            auto fo = from_offset.find(*v);
            if (fo != from_offset.end()) {
                grad.segment(fo->second, it->second.size()) += it->second;
                continue; // in-edges of a seed are cut
            }
            for (const EdgeSpec* e : in_edges[*v]) {
                Eigen::VectorXd up = e->map.apply_adjoint(it->second);
                auto cit = cot.find(e->src);
                if (cit == cot.end()) {
                    cot[e->src] = std::move(up);
                } else {
                    cit->second += up;
                }
            }
        }
        return grad;
    }
};

} // namespace

MacroResult macro_jacobian(const Circuit& circuit,
                           const std::vector<std::string>& from,
                           const std::vector<std::string>& to) {
    auto acc = std::make_shared<Accumulator>(circuit, from, to);
    MacroResult result;
    result.path_found = acc->path_found;
    if (acc->all_dense) {
        result.map = LinearMap::Dense(acc->dense());
    } else {
        result.map = LinearMap::Operator(
            acc->to_dim, acc->from_dim,
            [acc](const Eigen::VectorXd& x) { return acc->forward(x); },
            [acc](const Eigen::VectorXd& y) { return acc->reverse(y); });
    }
    return result;
}

LinearMap part_jacobian(const Circuit& circuit, const Part& part) {
    if (part.nodes.empty()) throw InputError("part_jacobian: empty part");
    auto idx = node_index_map(circuit);
    for (const auto& id : part.nodes) {
        if (!idx.count(id)) throw InputError("part_jacobian: unknown node '" + id + "'");
    }

    if (part.nodes.size() == 1) {
        const auto& v = part.nodes.front();
        std::vector<LinearMap> in_maps;
        for (const auto& e : circuit.edges) {
            if (e.dst == v) in_maps.push_back(e.map);
        }
        if (in_maps.empty()) {
            return LinearMap::Identity(circuit.nodes[idx.at(v)].dim);
        }
        return LinearMap::HConcat(in_maps);
    }

    // Induced subcircuit; weak connectivity required.
    std::unordered_set<std::string> members(part.nodes.begin(), part.nodes.end());
    Circuit sub;
    for (const auto& id : part.nodes) {
        sub.nodes.push_back(circuit.nodes[idx.at(id)]);
    }
    for (const auto& e : circuit.edges) {
        if (members.count(e.src) && members.count(e.dst)) sub.edges.push_back(e);
    }

    std::map<std::string, std::string> parent;
    auto find = [&](std::string x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& id : part.nodes) parent[id] = id;
    for (const auto& e : sub.edges) parent[find(e.src)] = find(e.dst);
    const std::string root = find(part.nodes.front());
    for (const auto& id : part.nodes) {
        if (find(id) != root) {
            throw InputError("part_jacobian: part containing '" + part.nodes.front() +
                             "' is not connected ('" + id + "' is separate)");
        }
    }

    std::vector<std::string> from = part.inputs, to = part.outputs;
    if (from.empty() || to.empty()) {
        throw InputError("part_jacobian: multi-node part needs declared inputs and outputs");
    }
    return macro_jacobian(sub, from, to).map;
}

Partition per_node_partition(const Circuit& circuit) {
    Partition p;
    p.macro_mode = MacroMode::kCircuitIo;
    for (const auto& n : circuit.nodes) {
        p.parts.push_back({{n.id}, {n.id}, {n.id}});
    }
    return p;
}

void validate_partition(const Circuit& circuit, const Partition& partition) {
    if (partition.parts.empty()) throw InputError("partition has no parts");
    auto idx = node_index_map(circuit);
    std::unordered_set<std::string> covered;
    for (const auto& part : partition.parts) {
        if (part.nodes.empty()) throw InputError("partition contains an empty part");
        std::unordered_set<std::string> members(part.nodes.begin(), part.nodes.end());
        for (const auto& id : part.nodes) {
            if (!idx.count(id)) throw InputError("partition references unknown node '" + id + "'");
            covered.insert(id);
        }
        for (const auto& id : part.inputs) {
            if (!members.count(id)) {
                throw InputError("part input '" + id + "' is not a member of the part");
            }
        }
        for (const auto& id : part.outputs) {
            if (!members.count(id)) {
                throw InputError("part output '" + id + "' is not a member of the part");
            }
        }
    }
    for (const auto& n : circuit.nodes) {
        if (!covered.count(n.id)) {
            throw InputError("partition does not cover node '" + n.id + "'");
        }
    }
}

int node_dim(const Circuit& circuit, const std::string& id) {
    for (const auto& n : circuit.nodes) {
        if (n.id == id) return n.dim;
    }
    throw InputError("unknown node '" + id + "'");
}

Eigen::Index total_dim(const Circuit& circuit) {
    Eigen::Index d = 0;
    for (const auto& n : circuit.nodes) d += n.dim;
    return d;
}

std::map<std::string, Eigen::Index> state_offsets(const Circuit& circuit) {
    std::map<std::string, Eigen::Index> off;
    Eigen::Index at = 0;
    for (const auto& n : circuit.nodes) {
        off[n.id] = at;
        at += n.dim;
    }
    return off;
}

Eigen::VectorXd stack_state(const Circuit& circuit, const ActivationState& a) {
    if (a.size() != circuit.nodes.size()) {
        throw InputError("activation state covers " + std::to_string(a.size()) +
                         " nodes, circuit has " + std::to_string(circuit.nodes.size()));
    }
    Eigen::VectorXd x(total_dim(circuit));
    Eigen::Index at = 0;
    for (const auto& n : circuit.nodes) {
        auto it = a.find(n.id);
        if (it == a.end()) throw InputError("activation state is missing node '" + n.id + "'");
        if (it->second.size() != n.dim) {
            throw InputError("activation for '" + n.id + "' has length " +
                             std::to_string(it->second.size()) + ", node dim is " +
                             std::to_string(n.dim));
        }
        if (!it->second.allFinite()) {
            throw InputError("activation for '" + n.id + "' has non-finite entries");
        }
        x.segment(at, n.dim) = it->second;
        at += n.dim;
    }
    return x;
}

ActivationState unstack_state(const Circuit& circuit, const Eigen::VectorXd& x) {
    if (x.size() != total_dim(circuit)) {
        throw InputError("stacked state has wrong length");
    }
    ActivationState a;
    Eigen::Index at = 0;
    for (const auto& n : circuit.nodes) {
        a[n.id] = x.segment(at, n.dim);
        at += n.dim;
    }
    return a;
}

} // namespace eics

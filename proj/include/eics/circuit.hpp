// SPDX-License-Identifier: Apache-2.0
//
// Circuits as DAGs: typed nodes carry activation dimensions, oriented edges
// carry linear maps (local Jacobians). Macro- and part-Jacobians are composed
// by forward accumulation in topological order.
#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eics/linear_map.hpp"

namespace eics {

struct NodeSpec {
    std::string id;
    int dim = 0;
};

struct EdgeSpec {
    std::string src;
    std::string dst;
    LinearMap map;
};

struct Circuit {
    std::vector<NodeSpec> nodes;
    std::vector<EdgeSpec> edges;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
};

/// One vector per node, keyed by node id.
using ActivationState = std::map<std::string, Eigen::VectorXd>;

struct Violation {
    enum class Code {
        kDuplicateNode,
        kBadDim,
        kDanglingEdge,
        kShapeMismatch,
        kCycle,
        kEmptyInputs,
        kEmptyOutputs,
        kUnknownTerminal,
        kUnreachableOutput,
    };
    Code code;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool valid() const { return violations.empty(); }
};

/// Part of a node partition. `nodes` spans a weakly connected sub-DAG;
/// `inputs`/`outputs` select where its Jacobian starts and ends.
struct Part {
    std::vector<std::string> nodes;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
};

/// How the macro map for an emergence comparison is formed: composed from the
/// circuit's inputs to its outputs, or the sum of the parts' Jacobians
/// (parallel-branch decompositions where all parts share input/output shape).
enum class MacroMode { kCircuitIo, kPartSum };

struct Partition {
    std::vector<Part> parts;
    MacroMode macro_mode = MacroMode::kCircuitIo;
};

/// Report-style validation: collects every violation instead of throwing.
ValidationReport validate_circuit(const Circuit& circuit);

/// Deterministic topological order (Kahn, lexicographic tie-break).
/// Throws InputError naming a cycle edge if the graph is not acyclic.
std::vector<std::string> topological_order(const Circuit& circuit);

struct MacroResult {
    LinearMap map;
    bool path_found = true; // false: no from->to path, map is all-zero
};

/// Total derivative of the stacked `to` activations w.r.t. the stacked
/// `from` activations, by forward accumulation. `from` nodes act as
/// independent seeds: their in-edges are cut, so paths running through
/// another `from` node do not contribute.
MacroResult macro_jacobian(const Circuit& circuit,
                           const std::vector<std::string>& from,
                           const std::vector<std::string>& to);

/// Jacobian of one part. Single-node parts give the node's Jacobian w.r.t.
/// its stacked in-edge sources ([A | B | ...]), identity for source nodes;
/// multi-node parts accumulate over the induced subgraph from the part's
/// inputs to its outputs.
LinearMap part_jacobian(const Circuit& circuit, const Part& part);

/// One part per node (macro mode: circuit inputs -> outputs).
Partition per_node_partition(const Circuit& circuit);

/// Checks coverage, membership, and per-part connectivity. Parts may overlap
/// (parallel branches share fan-in/fan-out nodes). Throws InputError.
void validate_partition(const Circuit& circuit, const Partition& partition);

// -- small helpers shared across modules --

int node_dim(const Circuit& circuit, const std::string& id);
Eigen::Index total_dim(const Circuit& circuit);

/// Offset of each node's block in the stacked state vector (declaration order).
std::map<std::string, Eigen::Index> state_offsets(const Circuit& circuit);

/// Stacks per-node vectors into one state vector in node declaration order.
/// Throws InputError if the state does not cover the node set exactly or has
/// non-finite entries.
Eigen::VectorXd stack_state(const Circuit& circuit, const ActivationState& a);
ActivationState unstack_state(const Circuit& circuit, const Eigen::VectorXd& x);

} // namespace eics

#pragma once

// Internal bridge between the graph evaluator and the node implementations.

#include <cstdint>
#include <vector>

#include "texpro/graph/material_graph.hpp"

namespace texpro::mg::detail {

struct NodeEvalCtx {
    const NodeSpec* spec = nullptr;
    int res = 0;
    uint64_t noise_seed = 0;
    std::vector<tc::Tensor> params;  // scalar tensors, already squashed into range
    const std::vector<int>* settings = nullptr;
    std::vector<tc::Tensor> inputs;
};

tc::Tensor eval_node(const NodeEvalCtx& ctx);

}  // namespace texpro::mg::detail
